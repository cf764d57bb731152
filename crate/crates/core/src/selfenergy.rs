//! Reservoir self-energies ξ_∓(ω): boundary values of the Cauchy
//! transform of the spectral density J.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{Band, ReservoirChannel};
use crate::quad::{GaussLegendre, Neumaier};

const EDGE_LEVELS: usize = 12;
const RULE_ORDER: usize = 20;
/// Relative agreement required between the two principal-value routes.
pub const ROUTE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PvMethod {
    /// Pole subtraction with edge-graded Gauss–Legendre panels.
    PvQuadrature,
    /// Evaluate at ω − iδ and 2δ, Richardson-extrapolate δ → 0.
    ComplexOffset { delta: f64 },
}

impl PvMethod {
    /// Complex offset with δ = 1e−4 × band width.
    pub fn default_offset(res: &dyn ReservoirChannel) -> Self {
        PvMethod::ComplexOffset { delta: 1e-4 * res.band().width() }
    }
}

/// J(ω); zero outside the band.
pub fn spectral_density(res: &dyn ReservoirChannel, omega: f64) -> f64 {
    res.spectral_density(omega)
}

pub fn provenance(res: &dyn ReservoirChannel) -> Provenance {
    if res.closed_form() {
        Provenance::ClosedForm
    } else {
        Provenance::Quadrature
    }
}

/// ξ_−(ω) = ∫ J(ω')/(ω − ω' − i0) dω' for ω in the band.
pub fn xi_minus(res: &dyn ReservoirChannel, omega: f64, method: PvMethod) -> Result<C64> {
    let band = res.band();
    if !band.contains(omega) || !omega.is_finite() {
        return Err(Error::OutOfBand { omega, lo: band.lo, hi: band.hi });
    }
    let im = PI * res.spectral_density(omega);
    let re = match method {
        PvMethod::PvQuadrature => pv_subtracted(res, band, omega),
        PvMethod::ComplexOffset { delta } => {
            if !(delta > 0.0) {
                return Err(Error::InvalidInput(format!("offset must be positive, got {delta}")));
            }
            2.0 * offset_real_part(res, band, omega, delta) - offset_real_part(res, band, omega, 2.0 * delta)
        }
    };
    Ok(C64::new(re, im))
}

/// ξ_+(ω) = conj ξ_−(ω).
pub fn xi_plus(res: &dyn ReservoirChannel, omega: f64, method: PvMethod) -> Result<C64> {
    xi_minus(res, omega, method).map(|z| z.conj())
}

/// Both routes; NonConvergence if their real parts differ by more than
/// `ROUTE_TOLERANCE` relative to |ξ|.
pub fn xi_minus_checked(res: &dyn ReservoirChannel, omega: f64) -> Result<C64> {
    let a = xi_minus(res, omega, PvMethod::PvQuadrature)?;
    let b = xi_minus(res, omega, PvMethod::default_offset(res))?;
    if (a.re - b.re).abs() > ROUTE_TOLERANCE * a.norm().max(b.norm()) {
        return Err(Error::NonConvergence { omega, a: a.re, b: b.re });
    }
    Ok(a)
}

/// Real Cauchy transform ∫ J(ω')/(ω − ω') dω' at a point outside the band.
pub fn exterior_value(res: &dyn ReservoirChannel, omega: f64) -> Result<f64> {
    let band = res.band();
    let dist = band.distance(omega);
    if dist <= 0.0 {
        return Err(Error::InvalidInput(format!("{omega} is inside the band")));
    }
    let near_lo = omega < band.lo;
    let extra = ((band.width() / dist).log2().ceil().max(0.0) as usize) + 4;
    let (la, lb) = if near_lo { (EDGE_LEVELS.max(extra), EDGE_LEVELS) } else { (EDGE_LEVELS, EDGE_LEVELS.max(extra)) };
    let pts = graded_segment(band.lo, band.hi, la, lb);
    Ok(integrate_panels(&pts, true, true, |x| res.spectral_density(x) / (omega - x)))
}

/// Self-energy evaluator that tolerates points just outside the band
/// (within `edge_tolerance`, typically one grid spacing).
#[derive(Debug, Clone, Copy)]
pub struct SelfEnergy<'a> {
    pub channel: &'a dyn ReservoirChannel,
    pub method: PvMethod,
    pub edge_tolerance: f64,
}

impl<'a> SelfEnergy<'a> {
    pub fn new(channel: &'a dyn ReservoirChannel) -> Self {
        Self { channel, method: PvMethod::PvQuadrature, edge_tolerance: 0.0 }
    }

    pub fn with_edge_tolerance(mut self, tol: f64) -> Self {
        self.edge_tolerance = tol;
        self
    }

    pub fn evaluate(&self, omega: f64) -> Result<C64> {
        let band = self.channel.band();
        let dist = band.distance(omega);
        if dist == 0.0 {
            xi_minus(self.channel, omega, self.method)
        } else if dist <= self.edge_tolerance {
            exterior_value(self.channel, omega).map(C64::from)
        } else {
            Err(Error::OutOfBand { omega, lo: band.lo, hi: band.hi })
        }
    }

    pub fn evaluate_plus(&self, omega: f64) -> Result<C64> {
        self.evaluate(omega).map(|z| z.conj())
    }
}

fn pv_subtracted(res: &dyn ReservoirChannel, band: Band, omega: f64) -> f64 {
    let j0 = res.spectral_density(omega);
    let g = |x: f64| (res.spectral_density(x) - j0) / (omega - x);
    let mut acc = Neumaier::default();
    if omega > band.lo {
        let pts = graded_segment(band.lo, omega, EDGE_LEVELS, EDGE_LEVELS);
        acc.add(integrate_panels(&pts, true, false, g));
    }
    if omega < band.hi {
        let pts = graded_segment(omega, band.hi, EDGE_LEVELS, EDGE_LEVELS);
        acc.add(integrate_panels(&pts, false, true, g));
    }
    if j0 != 0.0 && omega > band.lo && omega < band.hi {
        acc.add(j0 * ((omega - band.lo) / (band.hi - omega)).ln());
    }
    acc.value()
}

fn offset_real_part(res: &dyn ReservoirChannel, band: Band, omega: f64, delta: f64) -> f64 {
    let f = |x: f64| {
        let d = omega - x;
        res.spectral_density(x) * d / (d * d + delta * delta)
    };
    let levels_for = |len: f64| EDGE_LEVELS.max((len / (delta / 8.0)).log2().ceil().max(0.0) as usize);
    let mut acc = Neumaier::default();
    if omega > band.lo {
        let pts = graded_segment(band.lo, omega, EDGE_LEVELS, levels_for(omega - band.lo));
        acc.add(integrate_panels(&pts, true, false, f));
    }
    if omega < band.hi {
        let pts = graded_segment(omega, band.hi, levels_for(band.hi - omega), EDGE_LEVELS);
        acc.add(integrate_panels(&pts, false, true, f));
    }
    acc.value()
}

/// Breakpoints on [a, b] halving toward each end `la` / `lb` times.
pub(crate) fn graded_segment(a: f64, b: f64, la: usize, lb: usize) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut pts = vec![a, mid, b];
    for l in 1..=la {
        pts.push(a + half * 0.5f64.powi(l as i32));
    }
    for l in 1..=lb {
        pts.push(b - half * 0.5f64.powi(l as i32));
    }
    pts.retain(|x| *x >= a && *x <= b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Sum over panels; the outermost panel on a flagged side uses the
/// substitution x = a + h s², which tames integrable endpoint singularities.
pub(crate) fn integrate_panels<F: Fn(f64) -> f64>(pts: &[f64], soft_start: bool, soft_end: bool, f: F) -> f64 {
    let rule = GaussLegendre::cached(RULE_ORDER);
    let last = pts.len().saturating_sub(2);
    let mut acc = Neumaier::default();
    for (i, w) in pts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        if i == 0 && soft_start {
            for (s, ws) in rule.mapped(0.0, 1.0) {
                acc.add(ws * 2.0 * s * h * f(a + h * s * s));
            }
        } else if i == last && soft_end {
            for (s, ws) in rule.mapped(0.0, 1.0) {
                acc.add(ws * 2.0 * s * h * f(b - h * s * s));
            }
        } else {
            for (x, wx) in rule.mapped(a, b) {
                acc.add(wx * f(x));
            }
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FlatChannel, PowerLawChannel};
    use approx::assert_relative_eq;

    #[test]
    fn flat_density_log_form() {
        let c = 0.7;
        let w = 2.0;
        let ch = FlatChannel::new(-w, w, c).unwrap();
        for &om in &[-1.9, -1.0, -0.1, 0.3, 1.5, 1.99] {
            let xi = xi_minus(&ch, om, PvMethod::PvQuadrature).unwrap();
            let exact = c * ((om + w) / (om - w)).abs().ln();
            assert_relative_eq!(xi.re, exact, epsilon = 1e-12);
            assert_relative_eq!(xi.im, PI * c, epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetric_density_has_zero_real_part_at_center() {
        #[derive(Debug)]
        struct Semicircle;
        impl ReservoirChannel for Semicircle {
            fn dispersion(&self, k: f64) -> f64 {
                k
            }
            fn coupling(&self, k: f64) -> C64 {
                C64::from((1.0 - k * k).max(0.0).sqrt().sqrt())
            }
            fn k_domain(&self) -> (f64, f64) {
                (-1.0, 1.0)
            }
        }
        let xi = xi_minus(&Semicircle, 0.0, PvMethod::PvQuadrature).unwrap();
        assert!(xi.re.abs() < 1e-12, "{}", xi.re);
        let xi2 = xi_minus(&Semicircle, 0.0, PvMethod::default_offset(&Semicircle)).unwrap();
        assert!(xi2.re.abs() < 1e-12, "{}", xi2.re);
        // Semicircle: Re ∫ sqrt(1-x²)/(ω-x) = π ω on the band.
        let xi = xi_minus(&Semicircle, 0.4, PvMethod::PvQuadrature).unwrap();
        assert_relative_eq!(xi.re, PI * 0.4, max_relative = 1e-8);
    }

    #[test]
    fn alpha_minus_half_is_flat() {
        let p = PowerLawChannel::new(0.2, -0.5, 1.0, 1.0, 6.0).unwrap();
        let jc = 2.0 * PI * 0.04;
        for &om in &[-0.9, 0.0, 2.0, 4.9] {
            assert_relative_eq!(spectral_density(&p, om), jc, epsilon = 1e-15);
            let xi = xi_minus(&p, om, PvMethod::PvQuadrature).unwrap();
            assert_relative_eq!(xi.im, 2.0 * PI * PI * 0.04, epsilon = 1e-14);
            let exact = jc * ((om + 1.0) / (om - 5.0)).abs().ln();
            assert!((xi.re - exact).abs() <= 1e-10 * exact.abs().max(1.0));
        }
        assert_eq!(provenance(&p), Provenance::ClosedForm);
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let p = PowerLawChannel::new(0.0, 0.3, 1.0, 1.0, 6.0).unwrap();
        assert_eq!(spectral_density(&p, 1.0), 0.0);
        assert_eq!(xi_minus(&p, 1.0, PvMethod::PvQuadrature).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn out_of_band_is_rejected() {
        let p = PowerLawChannel::new(1.0, 0.3, 1.0, 1.0, 6.0).unwrap();
        assert!(matches!(xi_minus(&p, 6.5, PvMethod::PvQuadrature), Err(Error::OutOfBand { .. })));
        assert_eq!(spectral_density(&p, 6.5), 0.0);
        let se = SelfEnergy::new(&p).with_edge_tolerance(0.1);
        assert!(se.evaluate(5.05).unwrap().im == 0.0);
        assert!(se.evaluate(5.5).is_err());
    }

    #[test]
    fn routes_agree_for_singular_edge_density() {
        let p = PowerLawChannel::new(0.5, -0.8, 1.0, 1.0, 6.0).unwrap();
        for &om in &[-0.7, 0.0, 1.3, 3.3, 4.6] {
            let v = xi_minus_checked(&p, om).unwrap();
            let b = xi_minus(&p, om, PvMethod::default_offset(&p)).unwrap();
            assert!((v.re - b.re).abs() < 1e-5 * v.norm(), "{om}: {} vs {}", v.re, b.re);
        }
    }

    #[test]
    fn far_field_bound() {
        let p = PowerLawChannel::new(0.5, 0.2, 1.0, 1.0, 6.0).unwrap();
        let total = p.total_weight();
        for &om in &[-30.0, -5.0, -1.5, -1.01, 5.001, 5.1, 6.0, 9.0, 40.0, 1e3] {
            let v = exterior_value(&p, om).unwrap();
            assert!(v.abs() <= total / p.band().distance(om) * (1.0 + 1e-12), "{om}");
        }
    }
}
