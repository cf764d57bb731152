//! Λ_−(ω), the transmission function and the Landauer current.

use std::f64::consts::PI;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{fermi_dirac, Band, FrequencyGrid, ReservoirChannel, Side, SystemSpec, ThermoState};
use crate::quad::{adaptive_gk, neumaier_sum};
use crate::selfenergy::{exterior_value, xi_minus, PvMethod};
use crate::sfunc::{s_matrix, solve_effective, SMatrix};

/// Relative change tolerated when the grid is doubled.
pub const GRID_TOLERANCE: f64 = 1e-4;
/// Panel budget of the adaptive current.
pub const PANEL_BUDGET: usize = 2000;

/// Λ_− = 1 − (η S_RR + ξ S_LL) + ξη(S_LL S_RR − S_LR S_RL).
pub fn lambda_minus(s: &SMatrix, xi: C64, eta: C64) -> C64 {
    C64::new(1.0, 0.0) - (eta * s.rr + xi * s.ll) + xi * eta * (s.ll * s.rr - s.lr * s.rl)
}

pub fn fermi(th: &ThermoState, side: Side, omega: f64) -> f64 {
    fermi_dirac(th.beta(side), th.mu(side), omega)
}

/// Prefactor and measure of the current integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentConvention {
    pub prefactor: f64,
    pub measure_2pi: bool,
}

impl Default for CurrentConvention {
    fn default() -> Self {
        Self { prefactor: 2.0, measure_2pi: false }
    }
}

impl CurrentConvention {
    pub fn measure_factor(&self) -> f64 {
        if self.measure_2pi {
            1.0 / (2.0 * PI)
        } else {
            1.0
        }
    }
}

/// Self-energy of a channel at a real frequency: the retarded boundary
/// value inside the band, the real Cauchy transform outside.
pub fn self_energy(res: &dyn ReservoirChannel, omega: f64) -> Result<C64> {
    if res.band().contains(omega) {
        xi_minus(res, omega, PvMethod::PvQuadrature)
    } else {
        exterior_value(res, omega).map(C64::from)
    }
}

/// prefactor·|g_LR|²·Im ξ·Im η given the self-energies.
pub fn transmission_from(sys: &SystemSpec, xi: C64, eta: C64, omega: f64, prefactor: f64) -> Result<f64> {
    if xi.im <= 0.0 || eta.im <= 0.0 {
        return Ok(0.0);
    }
    let sol = solve_effective(sys, xi, eta, C64::from(omega))?;
    Ok(prefactor * sol.g.lr.norm_sqr() * xi.im * eta.im)
}

pub fn transmission(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    omega: f64,
    prefactor: f64,
) -> Result<f64> {
    if !res_l.band().contains(omega) || !res_r.band().contains(omega) {
        return Ok(0.0);
    }
    let xi = xi_minus(res_l, omega, PvMethod::PvQuadrature)?;
    let eta = xi_minus(res_r, omega, PvMethod::PvQuadrature)?;
    transmission_from(sys, xi, eta, omega, prefactor)
}

/// Ratio form prefactor·|S_LR/Λ_−|²·Im ξ·Im η, kept for cross-checks.
pub fn transmission_ratio_form(sys: &SystemSpec, xi: C64, eta: C64, omega: f64, prefactor: f64) -> Result<f64> {
    let s = s_matrix(sys, C64::from(omega))?;
    let lam = lambda_minus(&s, xi, eta);
    Ok(prefactor * (s.lr * s.rl).norm() / lam.norm_sqr() * xi.im.max(0.0) * eta.im.max(0.0))
}

/// One row of a transmission dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionSample {
    pub omega: f64,
    pub t: f64,
    pub xi: C64,
    pub eta: C64,
    pub abs_lambda: f64,
}

pub fn transmission_sample(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    omega: f64,
    prefactor: f64,
) -> Result<TransmissionSample> {
    let xi = self_energy(res_l, omega)?;
    let eta = self_energy(res_r, omega)?;
    let t = transmission_from(sys, xi, eta, omega, prefactor)?;
    let abs_lambda = match s_matrix(sys, C64::from(omega)) {
        Ok(s) => lambda_minus(&s, xi, eta).norm(),
        Err(Error::PoleHit { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(TransmissionSample { omega, t, xi, eta, abs_lambda })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionCurve {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub samples: Vec<TransmissionSample>,
    pub prefactor: f64,
}

pub fn transmission_curve(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    grid: &FrequencyGrid,
    prefactor: f64,
) -> Result<TransmissionCurve> {
    let samples: Vec<TransmissionSample> = grid
        .nodes()
        .par_iter()
        .map(|&w| transmission_sample(sys, res_l, res_r, w, prefactor))
        .collect::<Result<_>>()?;
    let values = samples.iter().map(|s| s.t).collect();
    Ok(TransmissionCurve { grid: grid.clone(), values, samples, prefactor })
}

/// Default composite grid over the band intersection, split at the
/// levels and chemical potentials.
pub fn current_grid(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    th: &ThermoState,
    points: usize,
) -> Result<FrequencyGrid> {
    let band = window(res_l, res_r)?;
    let mut interior: Vec<f64> = sys.levels().to_vec();
    interior.extend([th.mu_l, th.mu_r]);
    FrequencyGrid::for_band(band, points, &interior)
}

fn window(res_l: &dyn ReservoirChannel, res_r: &dyn ReservoirChannel) -> Result<Band> {
    res_l
        .band()
        .intersect(&res_r.band())
        .ok_or_else(|| Error::InvalidInput("reservoir bands do not overlap".into()))
}

/// ∫ T(ω)(f_R − f_L) dω on the grid, without the refinement check.
pub fn current_on_grid(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    th: &ThermoState,
    grid: &FrequencyGrid,
    conv: CurrentConvention,
) -> Result<(f64, f64)> {
    let terms: Vec<(f64, f64)> = grid
        .nodes()
        .par_iter()
        .zip(grid.weights())
        .map(|(&w, &q)| {
            let df = fermi(th, Side::Right, w) - fermi(th, Side::Left, w);
            if df == 0.0 {
                return Ok((0.0, 0.0));
            }
            let t = transmission(sys, res_l, res_r, w, conv.prefactor)?;
            Ok((q * t * df, (q * t * df).abs()))
        })
        .collect::<Result<_>>()?;
    let f = conv.measure_factor();
    Ok((f * neumaier_sum(terms.iter().map(|t| t.0)), f * neumaier_sum(terms.iter().map(|t| t.1))))
}

/// Landauer current; J is the growth rate of the left reservoir's particle
/// number. The grid is doubled once and the finer value returned.
pub fn steady_current(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    th: &ThermoState,
    grid: &FrequencyGrid,
    conv: CurrentConvention,
) -> Result<f64> {
    let (coarse, _) = current_on_grid(sys, res_l, res_r, th, grid, conv)?;
    let Some(fine_grid) = grid.refined() else { return Ok(coarse) };
    let (fine, l1) = current_on_grid(sys, res_l, res_r, th, &fine_grid, conv)?;
    let scale = fine.abs().max(1e-12 * l1);
    if (fine - coarse).abs() > GRID_TOLERANCE * scale {
        return Err(Error::GridTooCoarse { coarse, fine });
    }
    Ok(fine)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveCurrent {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Adaptive Gauss–Kronrod current with breakpoints at band edges, levels
/// and chemical potentials.
pub fn adaptive_current(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    th: &ThermoState,
    conv: CurrentConvention,
    rel_tol: f64,
) -> Result<AdaptiveCurrent> {
    let band = window(res_l, res_r)?;
    let mut bp = vec![band.lo, band.hi];
    bp.extend(sys.levels().iter().chain([th.mu_l, th.mu_r].iter()).copied().filter(|x| *x > band.lo && *x < band.hi));
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let integrand = |w: f64| {
        let df = fermi(th, Side::Right, w) - fermi(th, Side::Left, w);
        if df == 0.0 {
            return 0.0;
        }
        match transmission(sys, res_l, res_r, w, conv.prefactor) {
            Ok(t) => t * df,
            Err(e) => {
                failure.lock().expect("poisoned").get_or_insert(e);
                0.0
            }
        }
    };
    let r = adaptive_gk(&bp, integrand, 1e-300, rel_tol, PANEL_BUDGET);
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let f = conv.measure_factor();
    Ok(AdaptiveCurrent { value: f * r.value, error: f * r.error, panels: r.panels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_chain_system, ChainSpec, FlatChannel, PowerLawChannel};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lambda_trivial_cases() {
        let sys = make_chain_system(&ChainSpec::new(3, 1.0, 0.0).unwrap(), 0.3, 0.5).unwrap();
        let s = s_matrix(&sys, c(0.4, 0.1)).unwrap();
        assert_eq!(lambda_minus(&s, c(0.0, 0.0), c(0.0, 0.0)), c(1.0, 0.0));
        let xi = c(0.2, 0.7);
        assert!((lambda_minus(&s, xi, c(0.0, 0.0)) - (c(1.0, 0.0) - xi * s.ll)).norm() < 1e-15);
    }

    #[test]
    fn lambda_single_level_wideband() {
        let (e, wl, wr, gl, gr) = (0.1, 0.3, 0.4, 0.8, 1.3);
        let sys = SystemSpec::real(vec![e], vec![wl], vec![wr]).unwrap();
        let w = 0.55;
        let s = s_matrix(&sys, c(w, 0.0)).unwrap();
        let lam = lambda_minus(&s, c(0.0, gl), c(0.0, gr));
        let exact = c(1.0, 0.0) - c(0.0, 1.0) * (gl * wl * wl + gr * wr * wr) / (w - e);
        assert!((lam - exact).norm() < 1e-15);
    }

    #[test]
    fn resonant_level_transmission() {
        // Flat densities c_L, c_R give ξ = iπc at the band centre.
        let (cl, cr) = (0.3, 0.3);
        let res_l = FlatChannel::new(-5.0, 5.0, cl).unwrap();
        let res_r = FlatChannel::new(-5.0, 5.0, cr).unwrap();
        let sys = SystemSpec::real(vec![0.0], vec![0.2], vec![0.2]).unwrap();
        assert_relative_eq!(transmission(&sys, &res_l, &res_r, 0.0, 2.0).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(transmission(&sys, &res_l, &res_r, 0.0, 4.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(transmission(&sys, &res_l, &res_r, 6.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn fermi_examples() {
        let th = ThermoState::new(1.0, f64::INFINITY, 0.0, 0.3).unwrap();
        assert_eq!(fermi(&th, Side::Left, 0.0), 0.5);
        assert_relative_eq!(fermi(&th, Side::Left, 3f64.ln()), 0.25, epsilon = 1e-15);
        assert_eq!(fermi(&th, Side::Right, 0.29), 1.0);
    }

    #[test]
    fn equilibrium_current_vanishes() {
        let sys = make_chain_system(&ChainSpec::new(3, 1.0, 0.0).unwrap(), 1.0, 1.0).unwrap();
        let ch = PowerLawChannel::new(0.2, -0.5, 1.0, 1.0, 6.0).unwrap();
        let th = ThermoState::new(5.0, 5.0, 0.1, 0.1).unwrap();
        let grid = current_grid(&sys, &ch, &ch, &th, 400).unwrap();
        assert_eq!(steady_current(&sys, &ch, &ch, &th, &grid, CurrentConvention::default()).unwrap(), 0.0);
    }

    #[test]
    fn ratio_and_solve_routes_agree() {
        let sys = make_chain_system(&ChainSpec::new(3, 1.0, 0.0).unwrap(), 0.2, 0.2).unwrap();
        let ch = PowerLawChannel::new(1.0, -0.5, 1.0, 1.0, 6.0).unwrap();
        for i in 0..200 {
            let w = -0.99 + 5.98 * i as f64 / 199.0;
            if sys.levels().iter().any(|e| (w - e).abs() < 1e-3 * sys.spread()) {
                continue;
            }
            let xi = xi_minus(&ch, w, PvMethod::PvQuadrature).unwrap();
            let t = transmission_from(&sys, xi, xi, w, 2.0).unwrap();
            let r = transmission_ratio_form(&sys, xi, xi, w, 2.0).unwrap();
            assert!((t - r).abs() <= 1e-8 * t.max(1.0));
            assert!(t >= 0.0);
        }
    }
}
