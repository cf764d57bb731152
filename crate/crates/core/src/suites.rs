//! Randomized verification suites behind `ness verify`.
//!
//! Every suite is a pure function of its seed; the report is serialized
//! with sorted metric names so equal seeds give byte-identical output.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{
    cayley_transform, eigen_spectral_radius, inverse_cayley, orthogonal_decomposition, positive_sqrt_series, spectral_radius_gelfand, MatElement,
};
use crate::dyson::{cocycle_defect, dyson_gamma, nonautonomous_gamma, unitarity_defect, FreeEvolution};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_function, max_abs, op_norm, unitary_exp, CMat, C64, I};
use crate::model::{FlatChannel, PowerLawChannel, ReservoirChannel};
use crate::quasifree::{commutator_decay, fock_oracle_expectation, gaussian_decay_reference, kms_check_matrix, kms_residual, wick_expectation, OperatorString, TwoPointKernel};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUITES: &[&str] = &["wick", "kms", "decay", "spectral", "dyson"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, String>,
    pub pass: bool,
}

struct Builder {
    report: SuiteReport,
}

impl Builder {
    fn new(suite: &str, seed: u64, cases: usize) -> Self {
        Self {
            report: SuiteReport {
                schema_version: SCHEMA_VERSION,
                suite: suite.into(),
                seed,
                cases,
                metrics: BTreeMap::new(),
                thresholds: BTreeMap::new(),
                pass: true,
            },
        }
    }

    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.report.metrics.insert(name.into(), value);
        self.report.thresholds.insert(name.into(), format!("<= {limit:e}"));
        self.report.pass &= value <= limit;
    }

    fn at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.report.metrics.insert(name.into(), value);
        self.report.thresholds.insert(name.into(), format!(">= {limit}"));
        self.report.pass &= value >= limit;
    }

    fn info(&mut self, name: &str, value: f64) {
        self.report.metrics.insert(name.into(), value);
    }

    fn done(self) -> SuiteReport {
        self.report
    }
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    match name {
        "wick" => wick_suite(seed),
        "kms" => kms_suite(seed),
        "decay" => decay_suite(),
        "spectral" => spectral_suite(seed),
        "dyson" => dyson_suite(seed),
        other => Err(Error::InvalidInput(format!("unknown suite `{other}` (expected one of {})", SUITES.join(", ")))),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| random_complex(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let a = random_matrix(rng, d);
    (&a + a.adjoint()) * C64::from(0.5)
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
    (0..d).map(|_| random_complex(rng)).collect()
}

/// Wick determinant against the Fock-space trace.
pub fn wick_suite(seed: u64) -> Result<SuiteReport> {
    const CASES: usize = 240;
    let mut rng = rng(seed);
    let mut b = Builder::new("wick", seed, CASES);
    let (mut worst, mut worst_zero, mut worst_swap) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..CASES {
        let d = rng.random_range(1..=6usize);
        let h = random_hermitian(&mut rng, d);
        let beta = if case % 10 == 9 { f64::INFINITY } else { rng.random_range(0.3..3.0) };
        let mu = rng.random_range(-1.0..1.0);
        let k = TwoPointKernel::gibbs(&h, beta, mu)?;
        let n = rng.random_range(1..=3usize.min(d));
        let s = OperatorString::new((0..n).map(|_| random_vector(&mut rng, d)).collect(), (0..n).map(|_| random_vector(&mut rng, d)).collect());
        let w = wick_expectation(&k, &s)?;
        let f = fock_oracle_expectation(&h, beta, mu, &s)?;
        worst = worst.max((w - f).norm());
        // n ≠ m must vanish on both sides.
        let mut odd = s.clone();
        odd.creations.push(random_vector(&mut rng, d));
        worst_zero = worst_zero.max(fock_oracle_expectation(&h, beta, mu, &odd)?.norm()).max(wick_expectation(&k, &odd)?.norm());
        if n >= 2 {
            let mut sw = s.clone();
            sw.creations.swap(0, 1);
            worst_swap = worst_swap.max((wick_expectation(&k, &sw)? + w).norm());
        }
    }
    b.at_most("max_abs_diff", worst, 1e-9);
    b.at_most("unbalanced_max_abs", worst_zero, 1e-12);
    b.at_most("row_swap_defect", worst_swap, 1e-12);
    Ok(b.done())
}

/// KMS identity for Gibbs states and its failure at the wrong temperature.
pub fn kms_suite(seed: u64) -> Result<SuiteReport> {
    const CASES: usize = 120;
    let mut rng = rng(seed);
    let mut b = Builder::new("kms", seed, CASES);
    let (mut worst, mut weakest) = (0.0f64, f64::INFINITY);
    let mut detected = 0usize;
    for _ in 0..CASES {
        let h = random_hermitian(&mut rng, 8);
        let beta = rng.random_range(0.2..1.5);
        let a = random_matrix(&mut rng, 8);
        let bm = random_matrix(&mut rng, 8);
        worst = worst.max(kms_check_matrix(&h, beta, &a, &bm)?);
        let off = kms_residual(&h, 2.0 * beta, beta, &a, &bm)?;
        weakest = weakest.min(off);
        if off > 1e-3 {
            detected += 1;
        }
    }
    b.at_most("gibbs_max_residual", worst, 1e-10);
    b.at_least("wrong_beta_detected_fraction", detected as f64 / CASES as f64, 0.95);
    b.info("wrong_beta_min_residual", weakest);
    Ok(b.done())
}

/// Gaussian overlap against its Fourier transform; decay of a smooth overlap.
pub fn decay_suite() -> Result<SuiteReport> {
    let mut b = Builder::new("decay", 0, 0);
    let (s, c, mu) = (0.5, 0.3, 0.1);
    let ch = FlatChannel::new(-12.0, 12.0, 1.0)?;
    let f = move |k: f64| C64::from((-(k - c).powi(2) / (4.0 * s * s)).exp());
    let g = move |k: f64| C64::from_polar((-(k - c).powi(2) / (4.0 * s * s)).exp(), 0.7);
    let norm = (s * (2.0 * std::f64::consts::PI).sqrt()).sqrt();
    let times = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0];
    let v0 = gaussian_decay_reference(1.0, s, 0.0, norm, norm);
    let (mut rel, mut abs) = (0.0f64, 0.0f64);
    for &t in &times {
        let got = commutator_decay(&f, &g, &ch, mu, t)?;
        let want = gaussian_decay_reference(1.0, s, t, norm, norm);
        abs = abs.max((got - want).abs() / v0);
        if want > 1e-3 * v0 {
            rel = rel.max((got - want).abs() / want);
        }
    }
    b.at_most("gaussian_max_rel_err", rel, 1e-6);
    b.at_most("gaussian_max_err_over_t0", abs, 1e-6);

    // Smooth, non-Gaussian overlap on the benchmark reservoir.
    let pl = PowerLawChannel::new(1.0, -0.5, 1.0, 1.0, 6.0)?;
    let f2 = |k: f64| C64::from((-(k - 3.0).powi(2)).exp());
    let g2 = |k: f64| C64::new(1.0 + 0.2 * k, 0.1) * (-(k - 3.5).powi(2)).exp();
    let width = pl.band().width();
    let d0 = commutator_decay(&f2, &g2, &pl, 0.0, 0.0)?;
    let dt = commutator_decay(&f2, &g2, &pl, 0.0, 1e3 / width)?;
    b.at_most("smooth_decay_ratio", dt / d0, 1e-3);
    b.report.cases = times.len() + 2;
    Ok(b.done())
}

/// Spectral calculus against eigendecompositions.
pub fn spectral_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = rng(seed);
    let dims = [2usize, 4, 8, 16, 32, 64];
    let mut b = Builder::new("spectral", seed, dims.len() * 3);
    let (mut gel, mut sq, mut dec, mut cay, mut cay_inv, mut cstar, mut herm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &d in &dims {
        for _ in 0..3 {
            let a = random_matrix(&mut rng, d);
            let el = MatElement::new(a.clone())?;
            let radius = eigen_spectral_radius(&a);
            gel = gel.max((spectral_radius_gelfand(&el, 1 << 40)? - radius).abs() / radius);
            cstar = cstar.max((op_norm(&(a.adjoint() * &a)) - el.norm().powi(2)).abs() / el.norm().powi(2));

            let hm = random_hermitian(&mut rng, d);
            let he = MatElement::new(hm.clone())?;
            herm = herm.max((spectral_radius_gelfand(&he, 1 << 20)? - he.norm()).abs() / he.norm());

            // Positive matrix with spectrum in [0.5, 1.5]·scale.
            let (vals, _) = crate::linalg::hermitian_eigen(&hm);
            let spread = vals.last().unwrap() - vals.first().unwrap();
            let pos = hermitian_function(&hm, |x| C64::from(0.5 + (x - vals[0]) / spread.max(1e-300)));
            let root = positive_sqrt_series(&MatElement::new(pos.clone())?)?;
            let eig_root = hermitian_function(&pos, |x| C64::from(x.max(0.0).sqrt()));
            sq = sq.max(max_abs(&(root.matrix() - eig_root)));

            // The series for |A| = sqrt(A²) needs on the order of ‖A‖²/λ²_min terms,
            // so the decomposition is exercised on matrices with a gap at zero.
            let gap = 0.3 * he.norm();
            let gapped = MatElement::new(hermitian_function(&hm, |x| C64::from(x.signum() * (gap + x.abs()))))?;
            let (p, m) = orthogonal_decomposition(&gapped)?;
            dec = dec.max(op_norm(&(p.matrix() * m.matrix())) / gapped.norm().powi(2));

            let c = cayley_transform(&he)?;
            cay = cay.max(op_norm(&(c.k.matrix().adjoint() * c.k.matrix() - CMat::identity(d, d))));
            cay_inv = cay_inv.max(op_norm(&(inverse_cayley(&c)? - &hm)) / he.norm());
        }
    }
    b.at_most("gelfand_max_rel_err", gel, 1e-6);
    b.at_most("hermitian_radius_rel_err", herm, 1e-8);
    b.at_most("cstar_identity_rel_err", cstar, 1e-12);
    b.at_most("sqrt_series_vs_eigen", sq, 1e-8);
    b.at_most("decomposition_product", dec, 1e-8);
    b.at_most("cayley_unitarity", cay, 1e-10);
    b.at_most("cayley_inverse_rel_err", cay_inv, 1e-8);
    Ok(b.done())
}

/// Classical RK4 on dΓ/dt = iΓ τ_{t−s}(V(t)), Γ(s) = 1.
pub fn rk4_gamma(h0: &CMat, v_of_t: &dyn Fn(f64) -> CMat, t: f64, s: f64, steps: usize) -> CMat {
    let free = FreeEvolution::new(h0);
    let d = h0.nrows();
    let rhs = |tau: f64, g: &CMat| -> CMat { g * free.apply(&v_of_t(tau), tau - s) * I };
    let h = (t - s) / steps as f64;
    let mut g = CMat::identity(d, d);
    let mut tau = s;
    for _ in 0..steps {
        let k1 = rhs(tau, &g);
        let k2 = rhs(tau + 0.5 * h, &(&g + &k1 * C64::from(0.5 * h)));
        let k3 = rhs(tau + 0.5 * h, &(&g + &k2 * C64::from(0.5 * h)));
        let k4 = rhs(tau + h, &(&g + &k3 * C64::from(h)));
        g += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        tau += h;
    }
    g
}

/// Dyson cocycle against e^{iHt}e^{−iH₀t}, its unitarity and composition law,
/// and the time-dependent series against RK4.
pub fn dyson_suite(seed: u64) -> Result<SuiteReport> {
    const CASES: usize = 20;
    let mut rng = rng(seed);
    let mut b = Builder::new("dyson", seed, CASES);
    let tol = 1e-12;
    let (mut oracle, mut unit, mut coc, mut na) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for case in 0..CASES {
        let h0 = random_hermitian(&mut rng, 6);
        let v = random_hermitian(&mut rng, 6);
        let v = &v * C64::from(1.0 / op_norm(&v));
        let t = rng.random_range(0.2..2.0);
        let g = dyson_gamma(&h0, &v, t, tol)?;
        let want = unitary_exp(&(&h0 + &v), t) * unitary_exp(&h0, -t);
        oracle = oracle.max(max_abs(&(&g.value - want)));
        unit = unit.max(unitarity_defect(&g.value));
        coc = coc.max(cocycle_defect(&h0, &v, 0.4 * t, 0.6 * t, tol)?);
        if case < 5 {
            let omega = 0.3 + 0.1 * case as f64;
            let vt = |x: f64| &v * C64::from((omega * x).cos());
            let s0 = rng.random_range(-0.5..0.5);
            let ga = nonautonomous_gamma(&h0, &vt, s0 + t, s0, tol)?;
            let rk = rk4_gamma(&h0, &vt, s0 + t, s0, 2000);
            na = na.max(max_abs(&(ga.value - rk)));
        }
    }
    b.at_most("max_oracle_diff", oracle, 1e-8);
    b.at_most("max_unitarity_defect", unit, 1e-9);
    b.at_most("max_cocycle_defect", coc, 1e-8);
    b.at_most("nonautonomous_vs_rk4", na, 1e-6);
    Ok(b.done())
}
