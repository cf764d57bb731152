//! Quasi-free (Wick) states: two-point kernels, determinants, KMS checks
//! and the commutator-decay diagnostic.

pub mod fock;

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_function, hermiticity_defect, op_norm, CMat, C64};
use crate::model::{fermi_dirac, ReservoirChannel};
use crate::quad::{legendre_table, spherical_bessel, GaussLegendre, Neumaier};

pub use fock::{fock_oracle_expectation, FockSpace};

/// ⟨a†(f) a(g)⟩ = Σ_ij f_i conj(g_j) C_ij with C_ij = ⟨c_i† c_j⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointKernel {
    corr: CMat,
}

impl TwoPointKernel {
    pub fn from_correlation(corr: CMat) -> Result<Self> {
        if !corr.is_square() || hermiticity_defect(&corr) > 1e-12 {
            return Err(Error::InvalidInput("correlation matrix must be square and Hermitian".into()));
        }
        let (vals, _) = hermitian_eigen(&corr);
        if vals.iter().any(|&v| !(-1e-10..=1.0 + 1e-10).contains(&v)) {
            return Err(Error::InvalidInput("correlation eigenvalues must lie in [0, 1]".into()));
        }
        Ok(Self { corr })
    }

    pub fn from_occupations(occ: &[f64]) -> Result<Self> {
        if occ.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(Error::InvalidInput("occupations must lie in [0, 1]".into()));
        }
        let corr = CMat::from_diagonal(&nalgebra::DVector::from_iterator(occ.len(), occ.iter().map(|&o| C64::from(o))));
        Ok(Self { corr })
    }

    /// Gibbs state of Σ h_ij c_i† c_j: C = n(h)ᵀ with n the Fermi function.
    pub fn gibbs(h: &CMat, beta: f64, mu: f64) -> Result<Self> {
        if hermiticity_defect(h) > 1e-12 * op_norm(h).max(1.0) {
            return Err(Error::InvalidInput("h must be Hermitian".into()));
        }
        let n = hermitian_function(h, |e| C64::from(fermi_dirac(beta, mu, e)));
        Ok(Self { corr: n.transpose() })
    }

    pub fn modes(&self) -> usize {
        self.corr.nrows()
    }

    pub fn correlation(&self) -> &CMat {
        &self.corr
    }

    pub fn evaluate(&self, f: &[C64], g: &[C64]) -> Result<C64> {
        let d = self.modes();
        if f.len() != d || g.len() != d {
            return Err(Error::GridMismatch(format!("vectors of length {}/{} on {d} modes", f.len(), g.len())));
        }
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            if f[i] == C64::new(0.0, 0.0) {
                continue;
            }
            let row: C64 = (0..d).map(|j| g[j].conj() * self.corr[(i, j)]).sum();
            acc += f[i] * row;
        }
        Ok(acc)
    }
}

/// a†(f_1)…a†(f_n) a(g_m)…a(g_1); `annihilations[j]` is g_{j+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorString {
    pub creations: Vec<Vec<C64>>,
    pub annihilations: Vec<Vec<C64>>,
}

impl OperatorString {
    pub fn new(creations: Vec<Vec<C64>>, annihilations: Vec<Vec<C64>>) -> Self {
        Self { creations, annihilations }
    }

    pub fn check_modes(&self, modes: usize) -> Result<()> {
        if self.creations.iter().chain(&self.annihilations).any(|v| v.len() != modes) {
            return Err(Error::GridMismatch(format!("string vectors must have {modes} entries")));
        }
        Ok(())
    }

    /// Adjoint string a†(g_1)…a†(g_m) a(f_n)…a(f_1).
    pub fn adjoint(&self) -> Self {
        Self { creations: self.annihilations.clone(), annihilations: self.creations.clone() }
    }

    /// Keeps only the listed modes.
    pub fn restrict(&self, modes: &[usize]) -> Self {
        let pick = |v: &Vec<C64>| modes.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            creations: self.creations.iter().map(pick).collect(),
            annihilations: self.annihilations.iter().map(pick).collect(),
        }
    }

    /// Modes where some vector exceeds `threshold` times the largest entry.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        let all: Vec<&Vec<C64>> = self.creations.iter().chain(&self.annihilations).collect();
        let Some(first) = all.first() else { return Vec::new() };
        let peak = all.iter().flat_map(|v| v.iter()).map(|z| z.norm()).fold(0.0, f64::max);
        (0..first.len()).filter(|&i| all.iter().any(|v| v[i].norm() > threshold * peak)).collect()
    }
}

/// det K(f_i, g_j) for n = m, 0 otherwise.
pub fn wick_expectation(k: &TwoPointKernel, s: &OperatorString) -> Result<C64> {
    let n = s.creations.len();
    if n != s.annihilations.len() {
        return Ok(C64::new(0.0, 0.0));
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = k.evaluate(&s.creations[i], &s.annihilations[j])?;
        }
    }
    Ok(m.lu().determinant())
}

/// Thermodynamics and mode grid of one channel, in the energy variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModes {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
    pub beta: f64,
    pub mu: f64,
}

/// Σ_k w_k f(k) conj(g(k)) / (e^{β(ω_k − μ)} + 1).
pub fn kms_two_point(f: &[C64], g: &[C64], ch: &ChannelModes) -> Result<C64> {
    let m = ch.energies.len();
    if f.len() != m || g.len() != m || ch.weights.len() != m {
        return Err(Error::GridMismatch(format!("f/g have {}/{} entries on a {m}-mode grid", f.len(), g.len())));
    }
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for i in 0..m {
        let v = f[i] * g[i].conj() * ch.weights[i] * fermi_dirac(ch.beta, ch.mu, ch.energies[i]);
        re.add(v.re);
        im.add(v.im);
    }
    Ok(C64::new(re.value(), im.value()))
}

/// Sum of channel contributions for several reservoirs.
pub fn kms_two_point_multi(parts: &[(&[C64], &[C64], &ChannelModes)]) -> Result<C64> {
    parts.iter().map(|(f, g, ch)| kms_two_point(f, g, ch)).sum()
}

/// |Tr(ρ A σ(B)) − Tr(ρ B A)| / (‖A‖‖B‖) with ρ the Gibbs state of H at
/// `beta_state` and σ(B) = e^{−βH} B e^{βH} at `beta_flow`.
pub fn kms_residual(h: &CMat, beta_state: f64, beta_flow: f64, a: &CMat, b: &CMat) -> Result<f64> {
    let d = h.nrows();
    if d > 64 || !h.is_square() || a.shape() != h.shape() || b.shape() != h.shape() {
        return Err(Error::InvalidInput("need square matrices of equal size, d <= 64".into()));
    }
    let (e, v) = hermitian_eigen(h);
    let e0 = e[0];
    let at = v.adjoint() * a * &v;
    let bt = v.adjoint() * b * &v;
    let p: Vec<f64> = e.iter().map(|x| (-beta_state * (x - e0)).exp()).collect();
    let z: f64 = p.iter().sum();
    // In the eigenbasis σ(B)_{mn} = e^{−β(E_m − E_n)} B_{mn}.
    let sigma = CMat::from_fn(d, d, |m, n| bt[(m, n)] * (-beta_flow * (e[m] - e[n])).exp());
    let lhs_m = &at * &sigma;
    let rhs_m = &bt * &at;
    let mut lhs = C64::new(0.0, 0.0);
    let mut rhs = C64::new(0.0, 0.0);
    for m in 0..d {
        lhs += lhs_m[(m, m)] * p[m] / z;
        rhs += rhs_m[(m, m)] * p[m] / z;
    }
    let scale = op_norm(a) * op_norm(b);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).norm() / scale)
}

pub fn kms_check_matrix(h: &CMat, beta: f64, a: &CMat, b: &CMat) -> Result<f64> {
    kms_residual(h, beta, beta, a, b)
}

/// Panelization of the oscillatory overlap integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOptions {
    pub panels: usize,
    pub order: usize,
    /// |t|·(band width) above which Filon panels replace Gauss panels.
    pub filon_threshold: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { panels: 64, order: 20, filon_threshold: 50.0 }
    }
}

/// 2|∫ f(k) conj(g(k)) e^{i(ω_k − μ)t} dk|·‖f‖·‖g‖.
pub fn commutator_decay(
    f: &dyn Fn(f64) -> C64,
    g: &dyn Fn(f64) -> C64,
    res: &dyn ReservoirChannel,
    mu: f64,
    t: f64,
) -> Result<f64> {
    commutator_decay_with(f, g, res, mu, t, DecayOptions::default())
}

pub fn commutator_decay_with(
    f: &dyn Fn(f64) -> C64,
    g: &dyn Fn(f64) -> C64,
    res: &dyn ReservoirChannel,
    mu: f64,
    t: f64,
    opts: DecayOptions,
) -> Result<f64> {
    if opts.panels == 0 || opts.order == 0 || opts.order > 64 {
        return Err(Error::InvalidInput("decay options need panels >= 1 and 1 <= order <= 64".into()));
    }
    let band = res.band();
    let rule = GaussLegendre::cached(opts.order);
    let h = band.width() / opts.panels as f64;
    let filon = t.abs() * band.width() > opts.filon_threshold;
    let mut nf = Neumaier::default();
    let mut ng = Neumaier::default();
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    let tables: Vec<Vec<f64>> = if filon { rule.nodes.iter().map(|&x| legendre_table(opts.order, x)).collect() } else { Vec::new() };
    for p in 0..opts.panels {
        let a = band.lo + p as f64 * h;
        let (c, hw) = (a + 0.5 * h, 0.5 * h);
        let mut amp = Vec::with_capacity(opts.order);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let om = c + hw * x;
            let k = res.k_of_energy(om).ok_or(Error::OutOfBand { omega: om, lo: band.lo, hi: band.hi })?;
            let jac = res.energy_jacobian(om);
            let (fv, gv) = (f(k), g(k));
            nf.add(w * hw * jac * fv.norm_sqr());
            ng.add(w * hw * jac * gv.norm_sqr());
            amp.push(fv * gv.conj() * jac);
        }
        let contrib = if filon {
            // Legendre expansion of the amplitude, integrated exactly against e^{iθs}.
            let theta = hw * t;
            let jn = spherical_bessel(opts.order, theta);
            let mut acc = C64::new(0.0, 0.0);
            let mut ipow = C64::new(1.0, 0.0);
            for n in 0..opts.order {
                let coeff: C64 = (0..opts.order).map(|i| amp[i] * rule.weights[i] * tables[i][n]).sum::<C64>() * (n as f64 + 0.5);
                acc += coeff * ipow * (2.0 * jn[n]);
                ipow *= C64::new(0.0, 1.0);
            }
            acc * hw * C64::from_polar(1.0, (c - mu) * t)
        } else {
            let mut acc = C64::new(0.0, 0.0);
            for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                acc += amp[i] * w * hw * C64::from_polar(1.0, (c + hw * x - mu) * t);
            }
            acc
        };
        re.add(contrib.re);
        im.add(contrib.im);
    }
    let overlap = C64::new(re.value(), im.value());
    Ok(2.0 * overlap.norm() * nf.value().max(0.0).sqrt() * ng.value().max(0.0).sqrt())
}

/// Analytic value for f conj(g) = A·exp(−(k − c)²/(2s²)) on the whole line
/// with ω_k = k: 2|A| s√(2π) e^{−s²t²/2}·‖f‖‖g‖.
pub fn gaussian_decay_reference(amplitude: f64, s: f64, t: f64, norm_f: f64, norm_g: f64) -> f64 {
    2.0 * amplitude.abs() * s * (2.0 * PI).sqrt() * (-0.5 * s * s * t * t).exp() * norm_f * norm_g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FlatChannel;

    fn cv(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::from(x)).collect()
    }

    #[test]
    fn wick_basic_cases() {
        let k = TwoPointKernel::from_occupations(&[0.3, 0.8]).unwrap();
        let e1 = cv(&[1.0, 0.0]);
        let e2 = cv(&[0.0, 1.0]);
        let s = OperatorString::new(vec![e1.clone(), e2.clone()], vec![e1.clone()]);
        assert_eq!(wick_expectation(&k, &s).unwrap(), C64::new(0.0, 0.0));
        let s = OperatorString::new(vec![e1.clone()], vec![e1.clone()]);
        assert!((wick_expectation(&k, &s).unwrap() - 0.3).norm() < 1e-15);
        let s = OperatorString::new(vec![e1.clone(), e2.clone()], vec![e1.clone(), e2.clone()]);
        assert!((wick_expectation(&k, &s).unwrap() - 0.24).norm() < 1e-15);
        // a†(e1)a†(e2)a(e1)a(e2) = −n1 n2
        let s = OperatorString::new(vec![e1.clone(), e2.clone()], vec![e2.clone(), e1.clone()]);
        assert!((wick_expectation(&k, &s).unwrap() + 0.24).norm() < 1e-15);
        let h = CMat::from_diagonal(&nalgebra::DVector::from_vec(cv(&[0.2, -0.4])));
        let kg = TwoPointKernel::gibbs(&h, 1.5, 0.0).unwrap();
        let fock = fock_oracle_expectation(&h, 1.5, 0.0, &s).unwrap();
        assert!((wick_expectation(&kg, &s).unwrap() - fock).norm() < 1e-14);
    }

    #[test]
    fn fock_single_mode() {
        let h = CMat::from_element(1, 1, C64::from(0.4));
        let e = cv(&[1.0]);
        let s = OperatorString::new(vec![e.clone()], vec![e.clone()]);
        let v = fock_oracle_expectation(&h, 2.0, 0.1, &s).unwrap();
        assert!((v.re - 1.0 / ((2.0f64 * 0.3).exp() + 1.0)).abs() < 1e-14);
        let s2 = OperatorString::new(vec![e.clone(), e.clone()], vec![e.clone()]);
        assert_eq!(fock_oracle_expectation(&h, 2.0, 0.1, &s2).unwrap().norm(), 0.0);
        // a†a a†a = a†a on one mode.
        let space = FockSpace::new(1).unwrap();
        let rho = space.gibbs(&h, 2.0, 0.1);
        let n = space.create(&e, &space.annihilate(&e, &CMat::identity(2, 2)));
        let nn = &n * &n;
        assert!(((&nn * &rho).trace() - (&n * &rho).trace()).norm() < 1e-15);
        assert!(matches!(FockSpace::new(9), Err(Error::TooManyModes { modes: 9 })));
    }

    #[test]
    fn kms_two_point_examples() {
        let ch = ChannelModes { energies: vec![-1.0, 0.0, 1.0], weights: vec![0.5, 0.5, 0.5], beta: f64::INFINITY, mu: 5.0 };
        let f = cv(&[1.0, 1.0, 1.0]).iter().map(|z| z / 1.5f64.sqrt()).collect::<Vec<_>>();
        assert!((kms_two_point(&f, &f, &ch).unwrap() - 1.0).norm() < 1e-15);
        let a = cv(&[1.0, 0.0, 0.0]);
        let b = cv(&[0.0, 0.0, 1.0]);
        assert_eq!(kms_two_point(&a, &b, &ch).unwrap(), C64::new(0.0, 0.0));
        assert!(matches!(kms_two_point(&a[..2], &b, &ch), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn kms_identity_trivial() {
        let h = CMat::from_fn(3, 3, |i, j| C64::from((i + j) as f64));
        let id = CMat::identity(3, 3);
        assert!(kms_check_matrix(&h, 1.3, &id, &id).unwrap() < 1e-15);
    }

    #[test]
    fn decay_at_zero_time() {
        let ch = FlatChannel::new(-3.0, 3.0, 1.0).unwrap();
        let f = |k: f64| C64::from((-k * k).exp());
        let g = |k: f64| C64::new(0.0, (-(k - 0.5).powi(2)).exp());
        let v = commutator_decay(&f, &g, &ch, 0.0, 0.0).unwrap();
        let rule = GaussLegendre::new(60);
        let ip = rule.integrate_complex(-3.0, 3.0, |k| f(k) * g(k).conj());
        let nf = rule.integrate(-3.0, 3.0, |k| f(k).norm_sqr()).sqrt();
        let ng = rule.integrate(-3.0, 3.0, |k| g(k).norm_sqr()).sqrt();
        assert!((v - 2.0 * ip.norm() * nf * ng).abs() < 1e-12);
    }
}
