//! Brute-force fermionic Fock space (Jordan–Wigner) for up to 8 modes.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMat, C64};

use super::OperatorString;

pub const MAX_MODES: usize = 8;

/// Fock space of `modes` fermionic modes; basis state b has mode i
/// occupied iff bit i of b is set.
#[derive(Debug, Clone, Copy)]
pub struct FockSpace {
    modes: usize,
}

impl FockSpace {
    pub fn new(modes: usize) -> Result<Self> {
        if modes > MAX_MODES {
            return Err(Error::TooManyModes { modes });
        }
        Ok(Self { modes })
    }

    pub fn dim(&self) -> usize {
        1 << self.modes
    }

    fn sign(b: usize, i: usize) -> f64 {
        if (b & ((1 << i) - 1)).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// a(g)·Y with a(g) = Σ conj(g_i) c_i.
    pub fn annihilate(&self, g: &[C64], y: &CMat) -> CMat {
        let mut out = CMat::zeros(y.nrows(), y.ncols());
        for (i, gi) in g.iter().enumerate() {
            if *gi == C64::new(0.0, 0.0) {
                continue;
            }
            let coeff = gi.conj();
            for r in 0..self.dim() {
                if r & (1 << i) == 0 {
                    let src = r | (1 << i);
                    let s = coeff * Self::sign(src, i);
                    for c in 0..y.ncols() {
                        out[(r, c)] += s * y[(src, c)];
                    }
                }
            }
        }
        out
    }

    /// a†(f)·Y with a†(f) = Σ f_i c_i†.
    pub fn create(&self, f: &[C64], y: &CMat) -> CMat {
        let mut out = CMat::zeros(y.nrows(), y.ncols());
        for (i, fi) in f.iter().enumerate() {
            if *fi == C64::new(0.0, 0.0) {
                continue;
            }
            for r in 0..self.dim() {
                if r & (1 << i) != 0 {
                    let src = r & !(1 << i);
                    let s = *fi * Self::sign(src, i);
                    for c in 0..y.ncols() {
                        out[(r, c)] += s * y[(src, c)];
                    }
                }
            }
        }
        out
    }

    /// Second quantization Σ h_ij c_i† c_j.
    pub fn quadratic(&self, h: &CMat) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for i in 0..self.modes {
            for j in 0..self.modes {
                let hij = h[(i, j)];
                if hij == C64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..d {
                    if b & (1 << j) == 0 {
                        continue;
                    }
                    let mid = b & !(1 << j);
                    if mid & (1 << i) != 0 {
                        continue;
                    }
                    let r = mid | (1 << i);
                    out[(r, b)] += hij * Self::sign(b, j) * Self::sign(mid, i);
                }
            }
        }
        out
    }

    /// Grand-canonical density matrix e^{−β(Ĥ − μN̂)}/Z; β = ∞ gives the
    /// normalized projector onto the ground space.
    pub fn gibbs(&self, h: &CMat, beta: f64, mu: f64) -> CMat {
        let shifted = h - CMat::identity(self.modes, self.modes) * C64::from(mu);
        let k = self.quadratic(&shifted);
        let (vals, vecs) = hermitian_eigen(&k);
        let e0 = vals[0];
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let weights: Vec<f64> = vals
            .iter()
            .map(|&e| {
                if beta.is_infinite() {
                    if e - e0 <= 1e-10 * scale {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-beta * (e - e0)).exp()
                }
            })
            .collect();
        let z: f64 = weights.iter().sum();
        let mut scaled = vecs.clone();
        for (c, w) in weights.iter().enumerate() {
            for x in scaled.column_mut(c).iter_mut() {
                *x *= *w / z;
            }
        }
        scaled * vecs.adjoint()
    }

    /// Tr(ρ · a†(f_1)…a†(f_n) a(g_m)…a(g_1)).
    pub fn expectation(&self, rho: &CMat, s: &OperatorString) -> C64 {
        let mut y = rho.clone();
        for g in s.annihilations.iter() {
            y = self.annihilate(g, &y);
        }
        for f in s.creations.iter().rev() {
            y = self.create(f, &y);
        }
        y.trace()
    }
}

/// Grand-canonical expectation of the string for Ĥ = Σ h_ij c_i† c_j.
pub fn fock_oracle_expectation(h: &CMat, beta: f64, mu: f64, s: &OperatorString) -> Result<C64> {
    let modes = h.nrows();
    let space = FockSpace::new(modes)?;
    s.check_modes(modes)?;
    let rho = space.gibbs(h, beta, mu);
    Ok(space.expectation(&rho, s))
}
