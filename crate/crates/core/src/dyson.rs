//! Interaction-picture cocycle Γ_t = 1 + i∫_0^t Γ_s τ_s(V) ds by Dyson
//! series, autonomous and time-dependent.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermiticity_defect, max_abs, op_norm, CMat, C64, I};
use crate::quad::{integration_matrix, GaussLegendre};

pub const NODES: usize = 32;
pub const MAX_ORDER: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct DysonPropagator {
    pub h0: CMat,
    pub v: CMat,
    pub t: f64,
    pub s: f64,
    pub value: CMat,
    /// Highest series order used on a panel.
    pub series_terms: usize,
    pub panels: usize,
    /// Largest integral-equation residual over the panels.
    pub residual: f64,
}

/// Free evolution τ_s(X) = e^{iH0 s} X e^{−iH0 s}.
#[derive(Debug, Clone)]
pub struct FreeEvolution {
    energies: Vec<f64>,
    vectors: CMat,
}

impl FreeEvolution {
    pub fn new(h0: &CMat) -> Self {
        let (energies, vectors) = hermitian_eigen(h0);
        Self { energies, vectors }
    }

    pub fn propagator(&self, s: f64) -> CMat {
        let mut scaled = self.vectors.clone();
        for (c, &e) in self.energies.iter().enumerate() {
            let ph = C64::from_polar(1.0, e * s);
            for x in scaled.column_mut(c).iter_mut() {
                *x *= ph;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn apply(&self, x: &CMat, s: f64) -> CMat {
        let u = self.propagator(s);
        &u * x * u.adjoint()
    }

    pub fn spread(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

fn validate(h0: &CMat, v: &CMat) -> Result<()> {
    if !h0.is_square() || h0.shape() != v.shape() {
        return Err(Error::InvalidInput("H0 and V must be square of equal size".into()));
    }
    for (name, m) in [("H0", h0), ("V", v)] {
        if hermiticity_defect(m) > 1e-12 * op_norm(m).max(1.0) {
            return Err(Error::InvalidInput(format!("{name} is not Hermitian")));
        }
    }
    Ok(())
}

/// Smallest n with (k h)^n / n! < tol.
pub fn truncation_order(k: f64, h: f64, tol: f64) -> usize {
    let x = (k * h).abs();
    if x == 0.0 {
        return 0;
    }
    let mut term = 1.0;
    let mut n = 0usize;
    while term >= tol {
        n += 1;
        term *= x / n as f64;
        if n > 10 * MAX_ORDER {
            break;
        }
    }
    n
}

struct PanelResult {
    value: CMat,
    order: usize,
    residual: f64,
}

/// Γ on [a, a + h] from the integrand samples τ(V) at the mapped nodes.
fn panel(generators: &[CMat], h: f64, order: usize) -> PanelResult {
    let rule = GaussLegendre::cached(NODES);
    let q = integration_matrix(rule);
    let d = generators[0].nrows();
    let id = CMat::identity(d, d);
    let half = 0.5 * h;
    let mut level: Vec<CMat> = vec![id.clone(); NODES];
    let mut end = id.clone();
    let mut residual = 0.0;
    for n in 1..=order + 1 {
        let products: Vec<CMat> = level.iter().zip(generators).map(|(g, x)| g * x).collect();
        let mut end_term = CMat::zeros(d, d);
        for (j, p) in products.iter().enumerate() {
            end_term += p * C64::from(rule.weights[j] * half);
        }
        end_term *= I;
        if n == order + 1 {
            // The next term is exactly Γ(h) − 1 − i∫Γτ(V) for the truncated series.
            residual = op_norm(&end_term);
            break;
        }
        let next: Vec<CMat> = (0..NODES)
            .map(|i| {
                let mut acc = CMat::zeros(d, d);
                for (j, p) in products.iter().enumerate() {
                    acc += p * C64::from(q[i][j] * half);
                }
                acc * I
            })
            .collect();
        end += &end_term;
        level = next;
    }
    PanelResult { value: end, order, residual }
}

fn panel_count(t: f64, k: f64, spread: f64) -> usize {
    let rate = k.max((spread + 2.0 * k) / 4.0);
    ((t.abs() * rate).ceil() as usize).max(1)
}

/// Γ_t with an automatic panel split.
pub fn dyson_gamma(h0: &CMat, v: &CMat, t: f64, tol: f64) -> Result<DysonPropagator> {
    validate(h0, v)?;
    let free = FreeEvolution::new(h0);
    let panels = panel_count(t, op_norm(v), free.spread());
    dyson_gamma_with(h0, v, t, tol, panels, &free)
}

/// Γ_t on `panels` equal panels, glued by Γ_{t+s} = Γ_t τ_t(Γ_s).
pub fn dyson_gamma_panels(h0: &CMat, v: &CMat, t: f64, tol: f64, panels: usize) -> Result<DysonPropagator> {
    validate(h0, v)?;
    let free = FreeEvolution::new(h0);
    dyson_gamma_with(h0, v, t, tol, panels.max(1), &free)
}

fn dyson_gamma_with(h0: &CMat, v: &CMat, t: f64, tol: f64, panels: usize, free: &FreeEvolution) -> Result<DysonPropagator> {
    let d = h0.nrows();
    let nv = op_norm(v);
    let h = t / panels as f64;
    let order = truncation_order(nv, h, tol);
    if order > MAX_ORDER {
        return Err(Error::TruncationBudget { order });
    }
    if order == 0 {
        return Ok(DysonPropagator {
            h0: h0.clone(),
            v: v.clone(),
            t,
            s: 0.0,
            value: CMat::identity(d, d),
            series_terms: 0,
            panels,
            residual: 0.0,
        });
    }
    let rule = GaussLegendre::cached(NODES);
    let generators: Vec<CMat> = rule.mapped(0.0, h).map(|(s, _)| free.apply(v, s)).collect();
    let base = panel(&generators, h, order);
    check_residual(base.residual, tol)?;
    let mut value = base.value.clone();
    for k in 1..panels {
        value = &value * free.apply(&base.value, k as f64 * h);
    }
    Ok(DysonPropagator { h0: h0.clone(), v: v.clone(), t, s: 0.0, value, series_terms: base.order, panels, residual: base.residual })
}

fn check_residual(residual: f64, tol: f64) -> Result<()> {
    let limit = 10.0 * tol.max(1e-14);
    if residual > limit {
        return Err(Error::Residual { residual, tol: limit });
    }
    Ok(())
}

/// τ_t^V(A) = Γ_t τ_t(A) Γ_t†.
pub fn perturbed_step(h0: &CMat, v: &CMat, a: &CMat, t: f64, tol: f64) -> Result<CMat> {
    let g = dyson_gamma(h0, v, t, tol)?;
    let free = FreeEvolution::new(h0);
    Ok(&g.value * free.apply(a, t) * g.value.adjoint())
}

/// Γ_{t,s} = 1 + i∫_s^t Γ_{t1,s} τ_{t1−s}(V(t1)) dt1.
pub fn nonautonomous_gamma(h0: &CMat, v_of_t: &dyn Fn(f64) -> CMat, t: f64, s: f64, tol: f64) -> Result<DysonPropagator> {
    let v_s = v_of_t(s);
    validate(h0, &v_s)?;
    let free = FreeEvolution::new(h0);
    let rule = GaussLegendre::cached(NODES);
    // Coarse sup estimate of ‖V(τ)‖ on [s, t].
    let k = rule
        .mapped(s, t)
        .map(|(x, _)| op_norm(&v_of_t(x)))
        .chain([op_norm(&v_s), op_norm(&v_of_t(t))])
        .fold(0.0, f64::max);
    let panels = panel_count(t - s, k, free.spread());
    nonautonomous_with(h0, v_of_t, t, s, tol, panels, k, &free)
}

#[allow(clippy::too_many_arguments)]
fn nonautonomous_with(
    h0: &CMat,
    v_of_t: &dyn Fn(f64) -> CMat,
    t: f64,
    s: f64,
    tol: f64,
    panels: usize,
    k: f64,
    free: &FreeEvolution,
) -> Result<DysonPropagator> {
    let d = h0.nrows();
    let h = (t - s) / panels as f64;
    let order = truncation_order(k, h, tol);
    if order > MAX_ORDER {
        return Err(Error::TruncationBudget { order });
    }
    let rule = GaussLegendre::cached(NODES);
    let mut value = CMat::identity(d, d);
    let mut worst = 0.0f64;
    let mut used = 0;
    for p in 0..panels {
        let a = s + p as f64 * h;
        if order == 0 {
            break;
        }
        // Local Γ_{·,a} integrates τ_{τ−a}(V(τ)); glued by Γ_{b,s} = Γ_{a,s} τ_{a−s}(Γ_{b,a}).
        let generators: Vec<CMat> = rule.mapped(a, a + h).map(|(x, _)| {
            let vx = v_of_t(x);
            free.apply(&vx, x - a)
        }).collect();
        let local = panel(&generators, h, order);
        worst = worst.max(local.residual);
        used = local.order;
        value = &value * free.apply(&local.value, a - s);
    }
    check_residual(worst, tol)?;
    Ok(DysonPropagator {
        h0: h0.clone(),
        v: v_of_t(s),
        t,
        s,
        value,
        series_terms: used,
        panels,
        residual: worst,
    })
}

/// ‖Γ†Γ − I‖.
pub fn unitarity_defect(g: &CMat) -> f64 {
    let d = g.nrows();
    op_norm(&(g.adjoint() * g - CMat::identity(d, d)))
}

/// Γ_{t+s} against Γ_t τ_t(Γ_s).
pub fn cocycle_defect(h0: &CMat, v: &CMat, t: f64, s: f64, tol: f64) -> Result<f64> {
    let free = FreeEvolution::new(h0);
    let gt = dyson_gamma(h0, v, t, tol)?;
    let gs = dyson_gamma(h0, v, s, tol)?;
    let gts = dyson_gamma(h0, v, t + s, tol)?;
    Ok(max_abs(&(gts.value - &gt.value * free.apply(&gs.value, t))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitary_exp;

    fn sample(d: usize, seed: u64) -> (CMat, CMat) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut herm = || {
            let a = CMat::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            (&a + a.adjoint()) * C64::from(0.5)
        };
        (herm(), herm())
    }

    #[test]
    fn trivial_cases_are_identity() {
        let (h0, v) = sample(4, 1);
        let zero = CMat::zeros(4, 4);
        assert_eq!(dyson_gamma(&h0, &zero, 3.0, 1e-12).unwrap().value, CMat::identity(4, 4));
        assert_eq!(dyson_gamma(&h0, &v, 0.0, 1e-12).unwrap().value, CMat::identity(4, 4));
        let vt = |_: f64| v.clone();
        assert_eq!(nonautonomous_gamma(&h0, &vt, 1.0, 1.0, 1e-12).unwrap().value, CMat::identity(4, 4));
    }

    #[test]
    fn matches_exponential_oracle() {
        let (h0, v) = sample(6, 2);
        let t = 2.0 / op_norm(&v);
        let g = dyson_gamma(&h0, &v, t, 1e-13).unwrap();
        let oracle = unitary_exp(&(&h0 + &v), t) * unitary_exp(&h0, -t);
        assert!(max_abs(&(g.value.clone() - oracle)) < 1e-10);
        assert!(unitarity_defect(&g.value) < 1e-10);
        let neg = dyson_gamma(&h0, &v, -t, 1e-13).unwrap();
        let oracle = unitary_exp(&(&h0 + &v), -t) * unitary_exp(&h0, t);
        assert!(max_abs(&(neg.value - oracle)) < 1e-10);
    }

    #[test]
    fn single_panel_budget() {
        let (h0, v) = sample(3, 3);
        let big = v * C64::from(100.0 / op_norm(&h0).max(1.0));
        assert!(matches!(dyson_gamma_panels(&h0, &big, 1.0, 1e-12, 1), Err(Error::TruncationBudget { .. })));
    }

    #[test]
    fn constant_nonautonomous_reduces() {
        let (h0, v) = sample(5, 4);
        let vt = |_: f64| v.clone();
        let a = nonautonomous_gamma(&h0, &vt, 1.7, 0.4, 1e-13).unwrap();
        let b = dyson_gamma(&h0, &v, 1.3, 1e-13).unwrap();
        assert!(max_abs(&(a.value - b.value)) < 1e-10);
    }

    #[test]
    fn commuting_observable_is_invariant() {
        let h0 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::from(1.0), C64::from(2.0), C64::from(-1.0)]));
        let v = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::from(0.3), C64::from(-0.1), C64::from(0.2)]));
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::from(5.0), C64::from(0.0), C64::from(1.0)]));
        let out = perturbed_step(&h0, &v, &a, 2.3, 1e-13).unwrap();
        assert!(max_abs(&(out - a)) < 1e-12);
    }
}
