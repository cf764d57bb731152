//! Physical model records: the finite system, reservoir channels,
//! thermodynamic data and frequency grids.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quad::{graded_breakpoints, GaussLegendre, Neumaier};

/// Levels ε_λ and the left/right coupling vectors of the finite system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    levels: Vec<f64>,
    coupling_l: Vec<C64>,
    coupling_r: Vec<C64>,
}

impl SystemSpec {
    pub fn new(levels: Vec<f64>, coupling_l: Vec<C64>, coupling_r: Vec<C64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("system needs at least one level".into()));
        }
        if coupling_l.len() != levels.len() || coupling_r.len() != levels.len() {
            return Err(Error::InvalidInput(format!(
                "coupling lengths {}/{} do not match {} levels",
                coupling_l.len(),
                coupling_r.len(),
                levels.len()
            )));
        }
        let finite = levels.iter().all(|e| e.is_finite())
            && coupling_l.iter().chain(&coupling_r).all(|w| w.re.is_finite() && w.im.is_finite());
        if !finite {
            return Err(Error::InvalidInput("levels and couplings must be finite".into()));
        }
        Ok(Self { levels, coupling_l, coupling_r })
    }

    /// Convenience constructor for real couplings.
    pub fn real(levels: Vec<f64>, coupling_l: Vec<f64>, coupling_r: Vec<f64>) -> Result<Self> {
        Self::new(
            levels,
            coupling_l.into_iter().map(C64::from).collect(),
            coupling_r.into_iter().map(C64::from).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn coupling(&self, side: Side) -> &[C64] {
        match side {
            Side::Left => &self.coupling_l,
            Side::Right => &self.coupling_r,
        }
    }

    pub fn coupling_l(&self) -> &[C64] {
        &self.coupling_l
    }

    pub fn coupling_r(&self) -> &[C64] {
        &self.coupling_r
    }

    /// max ε − min ε, or 1 for a single level (a scale for pole tolerances).
    pub fn spread(&self) -> f64 {
        let lo = self.levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s = hi - lo;
        if s > 0.0 {
            s
        } else {
            1.0f64.max(lo.abs())
        }
    }

    /// Same levels with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        Self { levels: self.levels.clone(), coupling_l: self.coupling_r.clone(), coupling_r: self.coupling_l.clone() }
    }

    pub fn is_decoupled(&self) -> bool {
        self.coupling_l.iter().chain(&self.coupling_r).all(|w| w.norm() == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

/// Closed real interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("band [{lo}, {hi}] must be finite and nonempty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn hull(&self, other: &Band) -> Band {
        Band { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(&self, other: &Band) -> Option<Band> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some(Band { lo, hi })
    }

    /// Distance from x to the interval (0 inside).
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// Measure on the reservoir momentum domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// dk on an interval.
    Line,
    /// 2π x dx on [0, k_max], x = |k|.
    Radial2d,
}

impl Measure {
    pub fn density(&self, k: f64) -> f64 {
        match self {
            Measure::Line => 1.0,
            Measure::Radial2d => 2.0 * PI * k,
        }
    }
}

/// One reservoir: dispersion and coupling profile over a momentum domain.
///
/// Dispersions must be strictly monotone on the domain; the default
/// methods invert them numerically.
pub trait ReservoirChannel: Send + Sync + fmt::Debug {
    fn dispersion(&self, k: f64) -> f64;
    fn coupling(&self, k: f64) -> C64;
    fn k_domain(&self) -> (f64, f64);

    fn measure(&self) -> Measure {
        Measure::Line
    }

    fn band(&self) -> Band {
        let (k0, k1) = self.k_domain();
        let (a, b) = (self.dispersion(k0), self.dispersion(k1));
        Band { lo: a.min(b), hi: a.max(b) }
    }

    /// k with dispersion(k) = ω, if ω is in the band.
    fn k_of_energy(&self, omega: f64) -> Option<f64> {
        let band = self.band();
        if !band.contains(omega) {
            return None;
        }
        let (mut lo, mut hi) = self.k_domain();
        let rising = self.dispersion(hi) > self.dispersion(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.dispersion(mid) < omega) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// J(ω) = ∫ dk |u(k)|² δ(ω − ω_k); zero outside the band.
    fn spectral_density(&self, omega: f64) -> f64 {
        density_by_inversion(self, omega)
    }

    /// dk-measure per unit energy at ω, i.e. measure(k)/|ω'(k)|.
    fn energy_jacobian(&self, omega: f64) -> f64 {
        jacobian_by_inversion(self, omega)
    }

    /// Whether `spectral_density` is a closed form rather than a numerical inversion.
    fn closed_form(&self) -> bool {
        false
    }

    /// ∫ J(ω) dω = ∫ |u(k)|² dk over the domain.
    fn total_weight(&self) -> f64 {
        let (k0, k1) = self.k_domain();
        let rule = GaussLegendre::cached(20);
        let mut acc = Neumaier::default();
        let pts = graded_breakpoints(k0, k1, 12, true, true);
        for w in pts.windows(2) {
            acc.add(rule.integrate(w[0], w[1], |k| self.coupling(k).norm_sqr() * self.measure().density(k)));
        }
        acc.value()
    }
}

/// Change of variables through the inverse dispersion.
pub fn density_by_inversion<R: ReservoirChannel + ?Sized>(res: &R, omega: f64) -> f64 {
    let band = res.band();
    if !(omega > band.lo && omega < band.hi) {
        return 0.0;
    }
    let Some(k) = res.k_of_energy(omega) else { return 0.0 };
    jacobian_by_inversion(res, omega) * res.coupling(k).norm_sqr()
}

pub fn jacobian_by_inversion<R: ReservoirChannel + ?Sized>(res: &R, omega: f64) -> f64 {
    let Some(k) = res.k_of_energy(omega) else { return 0.0 };
    let (k0, k1) = res.k_domain();
    let h = 1e-6 * (k1 - k0);
    let (a, b) = ((k - h).max(k0), (k + h).min(k1));
    let slope = (res.dispersion(b) - res.dispersion(a)) / (b - a);
    if slope == 0.0 {
        return f64::INFINITY;
    }
    res.measure().density(k) / slope.abs()
}

/// Checks band finiteness, monotone dispersion and square integrability.
pub fn validate_channel(res: &dyn ReservoirChannel) -> Result<()> {
    let (k0, k1) = res.k_domain();
    if !(k0.is_finite() && k1.is_finite() && k1 > k0) {
        return Err(Error::InvalidInput(format!("momentum domain [{k0}, {k1}] must be finite")));
    }
    let band = res.band();
    Band::new(band.lo, band.hi)?;
    let samples = 512;
    let e: Vec<f64> = (0..=samples).map(|i| res.dispersion(k0 + (k1 - k0) * i as f64 / samples as f64)).collect();
    let rising = e.windows(2).all(|w| w[1] > w[0]);
    let falling = e.windows(2).all(|w| w[1] < w[0]);
    if !(rising || falling) {
        return Err(Error::InvalidInput("dispersion must be strictly monotone".into()));
    }
    let weight = res.total_weight();
    if !weight.is_finite() {
        return Err(Error::InvalidInput("coupling is not square integrable".into()));
    }
    Ok(())
}

/// u(k) = v|k|^α, ω_k = θ_f(|k| − k_0) on a 2-D disk of radius k_max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawChannel {
    pub v: f64,
    pub alpha: f64,
    pub theta_f: f64,
    pub k0: f64,
    pub k_max: f64,
}

impl PowerLawChannel {
    pub fn new(v: f64, alpha: f64, theta_f: f64, k0: f64, k_max: f64) -> Result<Self> {
        if !(theta_f > 0.0) {
            return Err(Error::InvalidInput(format!("thetaF must be positive, got {theta_f}")));
        }
        if !(k0 >= 0.0) || !(k_max > k0) || !k_max.is_finite() {
            return Err(Error::InvalidInput(format!("need 0 <= k0 < kmax, got k0={k0}, kmax={k_max}")));
        }
        if !(alpha > -1.0) {
            return Err(Error::InvalidInput(format!("alpha must exceed -1 for a square-integrable coupling, got {alpha}")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidInput("v must be finite".into()));
        }
        Ok(Self { v, alpha, theta_f, k0, k_max })
    }

    /// Default cutoff 10·(k0 + 1).
    pub fn default_k_max(k0: f64) -> f64 {
        10.0 * (k0 + 1.0)
    }
}

impl ReservoirChannel for PowerLawChannel {
    fn dispersion(&self, k: f64) -> f64 {
        self.theta_f * (k.abs() - self.k0)
    }

    fn coupling(&self, k: f64) -> C64 {
        C64::from(self.v * k.abs().powf(self.alpha))
    }

    fn k_domain(&self) -> (f64, f64) {
        (0.0, self.k_max)
    }

    fn measure(&self) -> Measure {
        Measure::Radial2d
    }

    fn band(&self) -> Band {
        Band { lo: -self.theta_f * self.k0, hi: self.theta_f * (self.k_max - self.k0) }
    }

    fn k_of_energy(&self, omega: f64) -> Option<f64> {
        self.band().contains(omega).then(|| omega / self.theta_f + self.k0)
    }

    fn spectral_density(&self, omega: f64) -> f64 {
        let band = self.band();
        if !band.contains(omega) || self.v == 0.0 {
            return 0.0;
        }
        let x = omega / self.theta_f + self.k0;
        2.0 * PI * self.v * self.v / self.theta_f * x.powf(2.0 * self.alpha + 1.0)
    }

    fn energy_jacobian(&self, omega: f64) -> f64 {
        match self.k_of_energy(omega) {
            Some(x) => 2.0 * PI * x / self.theta_f,
            None => 0.0,
        }
    }

    fn closed_form(&self) -> bool {
        true
    }

    fn total_weight(&self) -> f64 {
        let p = 2.0 * self.alpha + 2.0;
        2.0 * PI * self.v * self.v * self.k_max.powf(p) / p
    }
}

/// Constant spectral density on [lo, hi] (linear dispersion ω_k = k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatChannel {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

impl FlatChannel {
    pub fn new(lo: f64, hi: f64, density: f64) -> Result<Self> {
        Band::new(lo, hi)?;
        if !(density >= 0.0 && density.is_finite()) {
            return Err(Error::InvalidInput(format!("density must be nonnegative, got {density}")));
        }
        Ok(Self { lo, hi, density })
    }
}

impl ReservoirChannel for FlatChannel {
    fn dispersion(&self, k: f64) -> f64 {
        k
    }

    fn coupling(&self, _k: f64) -> C64 {
        C64::from(self.density.sqrt())
    }

    fn k_domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn k_of_energy(&self, omega: f64) -> Option<f64> {
        self.band().contains(omega).then_some(omega)
    }

    fn spectral_density(&self, omega: f64) -> f64 {
        if self.band().contains(omega) {
            self.density
        } else {
            0.0
        }
    }

    fn energy_jacobian(&self, omega: f64) -> f64 {
        if self.band().contains(omega) {
            1.0
        } else {
            0.0
        }
    }

    fn closed_form(&self) -> bool {
        true
    }

    fn total_weight(&self) -> f64 {
        self.density * (self.hi - self.lo)
    }
}

/// Smallest interval containing both reservoir bands.
pub fn band_union(res_l: &dyn ReservoirChannel, res_r: &dyn ReservoirChannel) -> Band {
    res_l.band().hull(&res_r.band())
}

/// Tight-binding chain: N sites, hopping t, on-site energy U.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub n: usize,
    pub t_hop: f64,
    pub u: f64,
}

impl ChainSpec {
    pub fn new(n: usize, t_hop: f64, u: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one site".into()));
        }
        Ok(Self { n, t_hop, u })
    }

    /// Site-basis hopping matrix.
    pub fn site_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.u
            } else if i.abs_diff(j) == 1 {
                self.t_hop
            } else {
                0.0
            }
        })
    }
}

/// W_{λn} = sqrt(2/(N+1)) sin(πλn/(N+1)), λ, n = 1..N.
pub fn sine_transform(n: usize) -> DMatrix<f64> {
    let norm = (2.0 / (n as f64 + 1.0)).sqrt();
    DMatrix::from_fn(n, n, |l, s| norm * (PI * ((l + 1) * (s + 1)) as f64 / (n as f64 + 1.0)).sin())
}

/// Chain diagonalized by the sine transform; the left reservoir couples
/// to site 1 and the right one to site N.
pub fn make_chain_system(chain: &ChainSpec, v_l: f64, v_r: f64) -> Result<SystemSpec> {
    let n = chain.n;
    if n == 0 {
        return Err(Error::InvalidInput("chain needs at least one site".into()));
    }
    let np1 = n as f64 + 1.0;
    let norm = (2.0 / np1).sqrt();
    let mut levels = Vec::with_capacity(n);
    let mut wl = Vec::with_capacity(n);
    let mut wr = Vec::with_capacity(n);
    for l in 1..=n {
        let lf = l as f64;
        levels.push(2.0 * chain.t_hop * (PI * lf / np1).cos() + chain.u);
        wl.push(v_l * norm * (PI * lf / np1).sin());
        wr.push(v_r * norm * (PI * (n * l) as f64 / np1).sin());
    }
    SystemSpec::real(levels, wl, wr)
}

/// Inverse temperatures and chemical potentials; `f64::INFINITY` is the
/// zero-temperature sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermoState {
    pub beta_l: f64,
    pub beta_r: f64,
    pub mu_l: f64,
    pub mu_r: f64,
}

impl ThermoState {
    pub fn new(beta_l: f64, beta_r: f64, mu_l: f64, mu_r: f64) -> Result<Self> {
        for (name, b) in [("betaL", beta_l), ("betaR", beta_r)] {
            if !(b > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive or inf, got {b}")));
            }
        }
        for (name, m) in [("muL", mu_l), ("muR", mu_r)] {
            if !m.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite")));
            }
        }
        Ok(Self { beta_l, beta_r, mu_l, mu_r })
    }

    pub fn beta(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.beta_l,
            Side::Right => self.beta_r,
        }
    }

    pub fn mu(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.mu_l,
            Side::Right => self.mu_r,
        }
    }

    pub fn swapped(&self) -> Self {
        Self { beta_l: self.beta_r, beta_r: self.beta_l, mu_l: self.mu_r, mu_r: self.mu_l }
    }
}

/// 1/(e^{β(ω−μ)} + 1); a step with value 1/2 at ω = μ when β is infinite.
pub fn fermi_dirac(beta: f64, mu: f64, omega: f64) -> f64 {
    if beta.is_infinite() {
        return if omega < mu {
            1.0
        } else if omega > mu {
            0.0
        } else {
            0.5
        };
    }
    let x = beta * (omega - mu);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GridRecipe {
    Midpoint { lo: f64, hi: f64, points: usize },
    GaussPanels { breakpoints: Vec<f64>, per_segment: usize, order: usize },
}

/// Quadrature nodes and weights on the frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    recipe: Option<GridRecipe>,
}

impl FrequencyGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidInput("grid nodes and weights must be nonempty and of equal length".into()));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("grid nodes must be strictly increasing".into()));
        }
        if !weights.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInput("grid weights must be positive".into()));
        }
        Ok(Self { nodes, weights, recipe: None })
    }

    /// `points` equal cells on [lo, hi], one node at each cell centre.
    pub fn midpoint(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Band::new(lo, hi)?;
        if points == 0 {
            return Err(Error::InvalidInput("grid needs at least one point".into()));
        }
        let d = (hi - lo) / points as f64;
        let nodes = (0..points).map(|i| lo + (i as f64 + 0.5) * d).collect();
        let mut g = Self::new(nodes, vec![d; points])?;
        g.recipe = Some(GridRecipe::Midpoint { lo, hi, points });
        Ok(g)
    }

    /// Composite Gauss–Legendre: each segment between consecutive
    /// breakpoints is cut into `per_segment` equal panels of `order` nodes.
    pub fn gauss_panels(breakpoints: &[f64], per_segment: usize, order: usize) -> Result<Self> {
        let mut bp = breakpoints.to_vec();
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        if bp.len() < 2 || per_segment == 0 || order == 0 || order > 64 {
            return Err(Error::InvalidInput("need two breakpoints, panels >= 1 and 1 <= order <= 64".into()));
        }
        let rule = GaussLegendre::cached(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in bp.windows(2) {
            let h = (seg[1] - seg[0]) / per_segment as f64;
            for p in 0..per_segment {
                let a = seg[0] + p as f64 * h;
                for (x, w) in rule.mapped(a, a + h) {
                    nodes.push(x);
                    weights.push(w);
                }
            }
        }
        let mut g = Self::new(nodes, weights)?;
        g.recipe = Some(GridRecipe::GaussPanels { breakpoints: bp, per_segment, order });
        Ok(g)
    }

    /// Composite rule on a band with roughly `points` nodes, split at the
    /// given interior breakpoints (order-8 panels).
    pub fn for_band(band: Band, points: usize, interior: &[f64]) -> Result<Self> {
        let mut bp = vec![band.lo, band.hi];
        bp.extend(interior.iter().copied().filter(|x| *x > band.lo && *x < band.hi));
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let segments = bp.len() - 1;
        let order = 8;
        let per = (points / (order * segments)).max(1);
        Self::gauss_panels(&bp, per, order)
    }

    /// Same recipe with twice the points, if the grid has a recipe.
    pub fn refined(&self) -> Option<Self> {
        match self.recipe.as_ref()? {
            GridRecipe::Midpoint { lo, hi, points } => Self::midpoint(*lo, *hi, 2 * points).ok(),
            GridRecipe::GaussPanels { breakpoints, per_segment, order } => {
                Self::gauss_panels(breakpoints, 2 * per_segment, *order).ok()
            }
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        let mut acc = Neumaier::default();
        for (w, v) in self.weights.iter().zip(values) {
            acc.add(w * v);
        }
        acc.value()
    }
}

/// Reservoir modes in the energy variable: nodes uniform in energy, one per
/// cell of width Δω, with effective coupling sqrt(J(ω)) so that a mode
/// weight Δω reproduces ∫ dk |u|² δ(ω − ω_k).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeGrid {
    pub energies: Vec<f64>,
    pub momenta: Vec<f64>,
    pub weights: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl ModeGrid {
    pub fn uniform_energy(res: &dyn ReservoirChannel, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 modes, got {m}")));
        }
        let band = res.band();
        let d = band.width() / m as f64;
        let energies: Vec<f64> = (0..m).map(|j| band.lo + (j as f64 + 0.5) * d).collect();
        let momenta = energies.iter().map(|&e| res.k_of_energy(e).unwrap_or(f64::NAN)).collect();
        let couplings = energies.iter().map(|&e| res.spectral_density(e).sqrt()).collect();
        Ok(Self { energies, momenta, weights: vec![d; m], couplings })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Largest cell width.
    pub fn spacing(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }
}
