//! System propagator functions S_{νν'}(z) and the resummed couplings
//! obtained from the rank-2 updated resolvent.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SMatrix {
    pub ll: C64,
    pub lr: C64,
    pub rl: C64,
    pub rr: C64,
}

/// S_{νν'}(z) = Σ_λ w^ν_λ conj(w^{ν'}_λ)/(z − ε_λ).
pub fn s_matrix(sys: &SystemSpec, z: C64) -> Result<SMatrix> {
    let tol = 1e-12 * sys.spread();
    let mut s = SMatrix { ll: C64::new(0.0, 0.0), lr: C64::new(0.0, 0.0), rl: C64::new(0.0, 0.0), rr: C64::new(0.0, 0.0) };
    for ((&e, &wl), &wr) in sys.levels().iter().zip(sys.coupling_l()).zip(sys.coupling_r()) {
        let d = z - e;
        if d.norm() < tol {
            return Err(Error::PoleHit { z, level: e });
        }
        let inv = d.inv();
        s.ll += wl * wl.conj() * inv;
        s.lr += wl * wr.conj() * inv;
        s.rl += wr * wl.conj() * inv;
        s.rr += wr * wr.conj() * inv;
    }
    Ok(s)
}

/// G_{νν'} = (w^{ν'})† M(z)^{-1} w^ν with
/// M(z) = diag(z − ε) − ξ w^L (w^L)† − η w^R (w^R)†.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoupling {
    pub ll: C64,
    pub lr: C64,
    pub rl: C64,
    pub rr: C64,
}

/// The two solves behind `EffectiveCoupling`: x = M⁻¹ w^L, y = M⁻¹ w^R.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSolve {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub g: EffectiveCoupling,
}

pub fn resolvent_matrix(sys: &SystemSpec, xi: C64, eta: C64, z: C64) -> DMatrix<C64> {
    let n = sys.len();
    let wl = sys.coupling_l();
    let wr = sys.coupling_r();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { z - sys.levels()[i] } else { C64::new(0.0, 0.0) };
        diag - xi * wl[i] * wl[j].conj() - eta * wr[i] * wr[j].conj()
    })
}

pub fn solve_effective(sys: &SystemSpec, xi: C64, eta: C64, z: C64) -> Result<EffectiveSolve> {
    let m = resolvent_matrix(sys, xi, eta, z);
    let n = sys.len();
    let mut rhs = DMatrix::<C64>::zeros(n, 2);
    for i in 0..n {
        rhs[(i, 0)] = sys.coupling_l()[i];
        rhs[(i, 1)] = sys.coupling_r()[i];
    }
    let sol = m.clone().lu().solve(&rhs).ok_or(Error::SingularMatrix { residual: f64::INFINITY })?;
    let residual = (&m * &sol - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(residual <= 1e-8 * scale) && scale > 0.0 || sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularMatrix { residual });
    }
    let x: Vec<C64> = sol.column(0).iter().copied().collect();
    let y: Vec<C64> = sol.column(1).iter().copied().collect();
    let dot = |w: &[C64], v: &[C64]| -> C64 { w.iter().zip(v).map(|(a, b)| a.conj() * b).sum() };
    let g = EffectiveCoupling {
        ll: dot(sys.coupling_l(), &x),
        lr: dot(sys.coupling_r(), &x),
        rl: dot(sys.coupling_l(), &y),
        rr: dot(sys.coupling_r(), &y),
    };
    Ok(EffectiveSolve { x, y, g })
}

pub fn effective_inverse(sys: &SystemSpec, xi: C64, eta: C64, z: C64) -> Result<EffectiveCoupling> {
    solve_effective(sys, xi, eta, z).map(|s| s.g)
}

/// det M(z) by LU; used by bound-state scans.
pub fn resolvent_determinant(sys: &SystemSpec, xi: C64, eta: C64, z: C64) -> C64 {
    resolvent_matrix(sys, xi, eta, z).determinant()
}
