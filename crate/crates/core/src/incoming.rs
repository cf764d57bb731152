//! Incoming fields α_k, β_k on energy grids, their eigenoperator relations
//! and the nine completeness conditions.
//!
//! Modes live in the energy variable (see `ModeGrid`): left modes ω_k with
//! real couplings u_k = sqrt(J_L(ω_k)), right modes μ_k with u^R_k. With
//! x = M(ω)⁻¹ w^L and y = M(ω)⁻¹ w^R the coefficient functions are
//!
//!   h^k = u_k x,  A^L_k = u_k (w^L)†x,  A^R_k = u_k (w^R)†x
//!   h̄^k = u^R_k y, Ā^L_k = u^R_k (w^L)†y, Ā^R_k = u^R_k (w^R)†y
//!
//! and the kernels m^k_{k'} = u_{k'} A^L_k / (ω_k − ω_{k'} − iδ), etc.
//!
//! Residuals are measured in weak form: every kernel identity is paired
//! with a fixed family of normalized Gaussian packets. Pointwise values of
//! a −i0 kernel sampled at finite δ do not converge, their pairings with
//! smooth test functions do.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, I};
use crate::model::{Band, ModeGrid, ReservoirChannel, SystemSpec};
use crate::selfenergy::exterior_value;
use crate::sfunc::{resolvent_determinant, s_matrix, solve_effective};
use crate::transport::{lambda_minus, self_energy};

/// |Λ_−| below which a grid energy is treated as a bound state.
pub const BOUND_STATE_THRESHOLD: f64 = 1e-10;
/// δ = DELTA_FACTOR · Δω.
pub const DELTA_FACTOR: f64 = 4.0;
/// Pass threshold of the completeness certificate.
pub const PASS_THRESHOLD: f64 = 1e-2;
pub const PACKETS: usize = 9;
const SCAN_PANELS: usize = 64;

/// Sign of the regularized kernel denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// ω_k − ω_{k'} − iδ
    Minus,
    /// ω_k − ω_{k'} + iδ
    Plus,
}

impl Branch {
    fn offset(self, delta: f64) -> C64 {
        match self {
            Branch::Minus => -I * delta,
            Branch::Plus => I * delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncomingField {
    pub left: ModeGrid,
    pub right: ModeGrid,
    pub delta: f64,
    pub branch: Branch,
    pub levels: Vec<f64>,
    pub w_l: Vec<C64>,
    pub w_r: Vec<C64>,
    pub a_l: Vec<C64>,
    pub a_r: Vec<C64>,
    pub abar_l: Vec<C64>,
    pub abar_r: Vec<C64>,
    /// h[k][λ] on the left grid.
    pub h: CMat,
    /// h̄[k][λ] on the right grid.
    pub hbar: CMat,
}

/// Which of the four kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    M,
    N,
    MBar,
    NBar,
}

impl IncomingField {
    pub fn modes(&self) -> (usize, usize) {
        (self.left.len(), self.right.len())
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    pub fn with_branch(&self, branch: Branch) -> Self {
        Self { branch, ..self.clone() }
    }

    /// Kernel sampled on the grid product at offset `delta`.
    pub fn kernel_at(&self, which: Kernel, delta: f64) -> CMat {
        let (rows, amp, cols, u) = match which {
            Kernel::M => (&self.left.energies, &self.a_l, &self.left.energies, &self.left.couplings),
            Kernel::N => (&self.left.energies, &self.a_r, &self.right.energies, &self.right.couplings),
            Kernel::MBar => (&self.right.energies, &self.abar_l, &self.left.energies, &self.left.couplings),
            Kernel::NBar => (&self.right.energies, &self.abar_r, &self.right.energies, &self.right.couplings),
        };
        let off = self.branch.offset(delta);
        CMat::from_fn(rows.len(), cols.len(), |k, kp| amp[k] * u[kp] / (C64::from(rows[k] - cols[kp]) + off))
    }

    pub fn kernel(&self, which: Kernel) -> CMat {
        self.kernel_at(which, self.delta)
    }
}

fn abs_lambda(sys: &SystemSpec, xi: C64, eta: C64, omega: f64) -> f64 {
    match s_matrix(sys, C64::from(omega)) {
        Ok(s) => lambda_minus(&s, xi, eta).norm(),
        // On a level Λ_− has a pole, not a zero.
        Err(_) => f64::INFINITY,
    }
}

struct NodeFields {
    h: Vec<C64>,
    al: C64,
    ar: C64,
}

fn node_fields(sys: &SystemSpec, xi: C64, eta: C64, omega: f64, u: f64, use_y: bool) -> Result<NodeFields> {
    let lam = abs_lambda(sys, xi, eta, omega);
    if lam < BOUND_STATE_THRESHOLD {
        return Err(Error::BoundState { omega, abs_lambda: lam });
    }
    let sol = solve_effective(sys, xi, eta, C64::from(omega))?;
    let (v, al, ar) = if use_y { (sol.y, sol.g.rl, sol.g.rr) } else { (sol.x, sol.g.ll, sol.g.lr) };
    Ok(NodeFields { h: v.iter().map(|z| z * u).collect(), al: al * u, ar: ar * u })
}

/// Uniform energy grids of `m` modes per side and δ = 4Δω.
pub fn incoming_on_uniform(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    m: usize,
    branch: Branch,
) -> Result<IncomingField> {
    let left = ModeGrid::uniform_energy(res_l, m)?;
    let right = ModeGrid::uniform_energy(res_r, m)?;
    let delta = DELTA_FACTOR * left.spacing().max(right.spacing());
    incoming_coefficients(sys, res_l, res_r, left, right, delta, branch)
}

pub fn incoming_coefficients(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    left: ModeGrid,
    right: ModeGrid,
    delta: f64,
    branch: Branch,
) -> Result<IncomingField> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let n = sys.len();
    let fill = |grid: &ModeGrid, use_y: bool| -> Result<(CMat, Vec<C64>, Vec<C64>)> {
        let nodes: Vec<NodeFields> = grid
            .energies
            .par_iter()
            .zip(grid.couplings.par_iter())
            .map(|(&om, &u)| {
                if u == 0.0 || sys.is_decoupled() {
                    return Ok(NodeFields { h: vec![C64::new(0.0, 0.0); n], al: C64::new(0.0, 0.0), ar: C64::new(0.0, 0.0) });
                }
                let xi = self_energy(res_l, om)?;
                let eta = self_energy(res_r, om)?;
                node_fields(sys, xi, eta, om, u, use_y)
            })
            .collect::<Result<_>>()?;
        let h = CMat::from_fn(grid.len(), n, |k, l| nodes[k].h[l]);
        Ok((h, nodes.iter().map(|f| f.al).collect(), nodes.iter().map(|f| f.ar).collect()))
    };
    let (h, a_l, a_r) = fill(&left, false)?;
    let (hbar, abar_l, abar_r) = fill(&right, true)?;
    Ok(IncomingField {
        left,
        right,
        delta,
        branch,
        levels: sys.levels().to_vec(),
        w_l: sys.coupling_l().to_vec(),
        w_r: sys.coupling_r().to_vec(),
        a_l,
        a_r,
        abar_l,
        abar_r,
        h,
        hbar,
    })
}

/// Weighted Gaussian test functions p = w·φ with Σ w φ² = 1, as columns.
pub fn packets(grid: &ModeGrid, band: Band, count: usize) -> CMat {
    let sigma = band.width() / 8.0;
    let (a, b) = (band.lo + 1.5 * sigma, band.hi - 1.5 * sigma);
    let mut out = CMat::zeros(grid.len(), count);
    for c in 0..count {
        let centre = if count == 1 { 0.5 * (a + b) } else { a + (b - a) * c as f64 / (count - 1) as f64 };
        let phi: Vec<f64> = grid.energies.iter().map(|&e| (-(e - centre).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        let norm = phi.iter().zip(&grid.weights).map(|(p, w)| w * p * p).sum::<f64>().sqrt();
        for k in 0..grid.len() {
            out[(k, c)] = C64::from(grid.weights[k] * phi[k] / norm.max(f64::MIN_POSITIVE));
        }
    }
    out
}

fn grid_band(grid: &ModeGrid) -> Band {
    let n = grid.len();
    let lo = grid.energies[0] - 0.5 * grid.weights[0];
    let hi = grid.energies[n - 1] + 0.5 * grid.weights[n - 1];
    Band { lo, hi }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub anti1: f64,
    pub anti2: f64,
    pub anti3: f64,
}

impl ResidualReport {
    pub fn conditions(&self) -> [f64; 9] {
        [self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7, self.c8, self.c9]
    }

    pub fn max(&self) -> f64 {
        self.conditions().iter().chain([self.anti1, self.anti2, self.anti3].iter()).fold(0.0, |m, &x| m.max(x))
    }

    pub fn passes(&self) -> bool {
        self.max() < PASS_THRESHOLD
    }
}

/// The weak-form condition matrices at one δ; entries [packet, packet]
/// (c7, c8: [packet, level]; c9: [level, level]).
#[derive(Debug, Clone)]
pub struct WeakConditions {
    pub c: [CMat; 9],
    pub anti: [CMat; 3],
}

fn diag_mul(w: &[f64], x: &CMat) -> CMat {
    let mut out = x.clone();
    for (i, wi) in w.iter().enumerate() {
        out.row_mut(i).scale_mut(*wi);
    }
    out
}

fn conj(x: &CMat) -> CMat {
    x.map(|z| z.conj())
}

/// Σ_j conj(X_ja) w_j Y_jb.
fn gram(x: &CMat, w: &[f64], y: &CMat) -> CMat {
    x.adjoint() * diag_mul(w, y)
}

/// Σ_j X_ja w_j conj(Y_jb).
fn gram_t(x: &CMat, w: &[f64], y: &CMat) -> CMat {
    x.transpose() * diag_mul(w, &conj(y))
}

/// Stack [a; b; c] row-wise.
fn stack(parts: &[&CMat]) -> CMat {
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let cols = parts[0].ncols();
    let mut out = CMat::zeros(rows, cols);
    let mut r0 = 0;
    for p in parts {
        out.view_mut((r0, 0), (p.nrows(), cols)).copy_from(p);
        r0 += p.nrows();
    }
    out
}

pub fn weak_conditions(field: &IncomingField, delta: f64) -> WeakConditions {
    let (wl, wr) = (&field.left.weights, &field.right.weights);
    let pl = packets(&field.left, grid_band(&field.left), PACKETS);
    let pr = packets(&field.right, grid_band(&field.right), PACKETS);
    let m = field.kernel_at(Kernel::M, delta);
    let n = field.kernel_at(Kernel::N, delta);
    let mb = field.kernel_at(Kernel::MBar, delta);
    let nb = field.kernel_at(Kernel::NBar, delta);
    let (h, hb) = (&field.h, &field.hbar);

    let m_p = &m * &pl;
    let mt_p = m.transpose() * &pl;
    let n_p = &n * &pr;
    let nt_p = n.transpose() * &pl;
    let mb_p = &mb * &pl;
    let mbt_p = mb.transpose() * &pr;
    let nb_p = &nb * &pr;
    let nbt_p = nb.transpose() * &pr;
    let h_p = h.transpose() * &pl;
    let hb_p = hb.transpose() * &pr;

    let s_m = pl.transpose() * &m_p;
    let s_n = pl.transpose() * &n_p;
    let s_mb = pr.transpose() * &mb_p;
    let s_nb = pr.transpose() * &nb_p;

    let c1 = &s_m + s_m.adjoint() + gram(&m_p, wl, &m_p) + gram(&mb_p, wr, &mb_p);
    let c2 = &s_m + s_m.adjoint() + h_p.transpose() * conj(&h_p) + gram_t(&mt_p, wl, &mt_p) + gram_t(&nt_p, wr, &nt_p);
    let c3 = s_mb.adjoint() + &s_n + gram(&m_p, wl, &n_p) + gram(&mb_p, wr, &nb_p);
    let c4 = s_mb.adjoint() + &s_n + h_p.transpose() * conj(&hb_p) + gram_t(&mt_p, wl, &mbt_p) + gram_t(&nt_p, wr, &nbt_p);
    let c5 = &s_nb + s_nb.adjoint() + gram(&n_p, wl, &n_p) + gram(&nb_p, wr, &nb_p);
    let c6 = s_nb.adjoint() + &s_nb + hb_p.transpose() * conj(&hb_p) + gram_t(&mbt_p, wl, &mbt_p) + gram_t(&nbt_p, wr, &nbt_p);
    let c7 = h_p.transpose() + gram(&m_p, wl, h) + gram(&mb_p, wr, hb);
    let c8 = hb_p.transpose() + gram(&n_p, wl, h) + gram(&nb_p, wr, hb);
    let c9 = gram(h, wl, h) + gram(hb, wr, hb) - CMat::identity(h.ncols(), h.ncols());

    // Anticommutators from the one-particle vectors of α(φ), β(ψ) in the
    // orthonormal lattice basis (system, √w a_k, √w b_k).
    let sq = |w: &[f64], x: &CMat| diag_mul(&w.iter().map(|v| v.sqrt()).collect::<Vec<_>>(), x);
    let phi_l = diag_mul(&wl.iter().map(|v| 1.0 / v).collect::<Vec<_>>(), &pl);
    let phi_r = diag_mul(&wr.iter().map(|v| 1.0 / v).collect::<Vec<_>>(), &pr);
    let va = stack(&[&h_p, &sq(wl, &(&phi_l + &mt_p)), &sq(wr, &nt_p)]);
    let vb = stack(&[&hb_p, &sq(wl, &mbt_p), &sq(wr, &(&phi_r + &nbt_p))]);
    let ov_l = gram_t(&phi_l, wl, &phi_l);
    let ov_r = gram_t(&phi_r, wr, &phi_r);
    let anti1 = va.transpose() * conj(&vb);
    let anti2 = va.transpose() * conj(&va) - ov_l;
    let anti3 = vb.transpose() * conj(&vb) - ov_r;

    WeakConditions { c: [c1, c2, c3, c4, c5, c6, c7, c8, c9], anti: [anti1, anti2, anti3] }
}

fn max_entry(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Weak-form residuals, Richardson-extrapolated in δ: 2R(δ) − R(2δ).
pub fn completeness_residuals(field: &IncomingField) -> ResidualReport {
    let a = weak_conditions(field, field.delta);
    let b = weak_conditions(field, 2.0 * field.delta);
    let ex = |x: &CMat, y: &CMat| max_entry(&(x * C64::from(2.0) - y));
    let c: Vec<f64> = a.c.iter().zip(&b.c).map(|(x, y)| ex(x, y)).collect();
    let t: Vec<f64> = a.anti.iter().zip(&b.anti).map(|(x, y)| ex(x, y)).collect();
    ResidualReport {
        c1: c[0],
        c2: c[1],
        c3: c[2],
        c4: c[3],
        c5: c[4],
        c6: c[5],
        c7: c[6],
        c8: c[7],
        c9: c[8],
        anti1: t[0],
        anti2: t[1],
        anti3: t[2],
    }
}

/// Residuals without extrapolation, at the field's own δ.
pub fn completeness_residuals_raw(field: &IncomingField) -> ResidualReport {
    let a = weak_conditions(field, field.delta);
    let c: Vec<f64> = a.c.iter().map(max_entry).collect();
    let t: Vec<f64> = a.anti.iter().map(max_entry).collect();
    ResidualReport {
        c1: c[0],
        c2: c[1],
        c3: c[2],
        c4: c[3],
        c5: c[4],
        c6: c[5],
        c7: c[6],
        c8: c[7],
        c9: c[8],
        anti1: t[0],
        anti2: t[1],
        anti3: t[2],
    }
}

/// Residuals of the three defining relations (system, left, right component).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenTriple {
    pub f: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenResidual {
    pub alpha: EigenTriple,
    pub beta: EigenTriple,
}

impl EigenResidual {
    pub fn max(&self) -> f64 {
        [self.alpha.f, self.alpha.a, self.alpha.b, self.beta.f, self.beta.a, self.beta.b].iter().fold(0.0, |m, &x| m.max(x))
    }
}

/// The coefficients of α_k (β_k) must reproduce ω_k (μ_k) times themselves
/// after one commutator with the Hamiltonian. Weak form, Richardson
/// extrapolated in δ like the completeness residuals.
pub fn eigenoperator_residual(field: &IncomingField) -> EigenResidual {
    let a = eigen_matrices(field, field.delta);
    let b = eigen_matrices(field, 2.0 * field.delta);
    let r: Vec<f64> = a.iter().zip(&b).map(|(x, y)| max_entry(&(x * C64::from(2.0) - y))).collect();
    EigenResidual { alpha: EigenTriple { f: r[0], a: r[1], b: r[2] }, beta: EigenTriple { f: r[3], a: r[4], b: r[5] } }
}

/// Same relations at the field's own δ without extrapolation.
pub fn eigenoperator_residual_raw(field: &IncomingField) -> EigenResidual {
    let r: Vec<f64> = eigen_matrices(field, field.delta).iter().map(max_entry).collect();
    EigenResidual { alpha: EigenTriple { f: r[0], a: r[1], b: r[2] }, beta: EigenTriple { f: r[3], a: r[4], b: r[5] } }
}

fn eigen_matrices(field: &IncomingField, delta: f64) -> [CMat; 6] {
    let (wl, wr) = (&field.left.weights, &field.right.weights);
    let (ul, ur) = (&field.left.couplings, &field.right.couplings);
    let (el, er) = (&field.left.energies, &field.right.energies);
    let pl = packets(&field.left, grid_band(&field.left), PACKETS);
    let pr = packets(&field.right, grid_band(&field.right), PACKETS);
    let nlev = field.levels.len();
    let m = field.kernel_at(Kernel::M, delta);
    let n = field.kernel_at(Kernel::N, delta);
    let mb = field.kernel_at(Kernel::MBar, delta);
    let nb = field.kernel_at(Kernel::NBar, delta);
    let wu = |w: &[f64], u: &[f64]| CMat::from_fn(w.len(), 1, |j, _| C64::from(w[j] * u[j]));
    let sm = &m * wu(wl, ul);
    let sn = &n * wu(wr, ur);
    let smb = &mb * wu(wl, ul);
    let snb = &nb * wu(wr, ur);

    // u_k w_own + (ε − e_k) h^k + w^L Σ' K^M u + w^R Σ' K^N u^R
    let tf = |h: &CMat, e: &[f64], u: &[f64], w_own: &[C64], s_m: &CMat, s_n: &CMat| {
        CMat::from_fn(e.len(), nlev, |k, l| {
            u[k] * w_own[l] + h[(k, l)] * (field.levels[l] - e[k]) + field.w_l[l] * s_m[(k, 0)] + field.w_r[l] * s_n[(k, 0)]
        })
    };
    // u_{k'} (w†h^k) + K_{kk'} (e'_{k'} − e_k)
    let tk = |h: &CMat, e: &[f64], w: &[C64], e2: &[f64], u2: &[f64], kern: &CMat| {
        let proj: Vec<C64> = (0..e.len()).map(|k| (0..nlev).map(|l| w[l].conj() * h[(k, l)]).sum()).collect();
        CMat::from_fn(e.len(), e2.len(), |k, kp| u2[kp] * proj[k] + kern[(k, kp)] * (e2[kp] - e[k]))
    };
    [
        pl.transpose() * tf(&field.h, el, ul, &field.w_l, &sm, &sn),
        pl.transpose() * tk(&field.h, el, &field.w_l, el, ul, &m) * &pl,
        pl.transpose() * tk(&field.h, el, &field.w_r, er, ur, &n) * &pr,
        pr.transpose() * tf(&field.hbar, er, ur, &field.w_r, &smb, &snb),
        pr.transpose() * tk(&field.hbar, er, &field.w_l, el, ul, &mb) * &pl,
        pr.transpose() * tk(&field.hbar, er, &field.w_r, er, ur, &nb) * &pr,
    ]
}

/// Size of the reservoir part of α(φ) transported back to time t:
/// max over packets of ‖Σ_{k'} w' K_{kk'} e^{i(e_k − e'_{k'})t} φ(k')‖.
/// For the −iδ branch this vanishes as t → −∞.
pub fn vanishing_term(field: &IncomingField, t: f64) -> f64 {
    let pl = packets(&field.left, grid_band(&field.left), PACKETS);
    let pr = packets(&field.right, grid_band(&field.right), PACKETS);
    let phase = |k: &CMat, e: &[f64], e2: &[f64]| {
        CMat::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] * C64::from_polar(1.0, (e[i] - e2[j]) * t))
    };
    let (el, er) = (&field.left.energies, &field.right.energies);
    let mt = phase(&field.kernel(Kernel::M), el, el);
    let nt = phase(&field.kernel(Kernel::N), el, er);
    let v = mt * &pl + nt * &pr;
    (0..PACKETS)
        .map(|a| {
            let col = v.column(a);
            col.iter().zip(&field.left.weights).map(|(z, w)| w * z.norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// Vanishing term at t = −1/δ for the −iδ and +iδ kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchDiagnostic {
    pub t: f64,
    pub minus: f64,
    pub plus: f64,
}

pub fn branch_diagnostic(field: &IncomingField) -> BranchDiagnostic {
    let t = -1.0 / field.delta;
    BranchDiagnostic {
        t,
        minus: vanishing_term(&field.with_branch(Branch::Minus), t),
        plus: vanishing_term(&field.with_branch(Branch::Plus), t),
    }
}

/// Real zeros of det M(ω) outside both bands: discrete eigenvalues of the
/// full one-particle Hamiltonian. The scan starts one spacing `dw` away
/// from each edge.
pub fn bound_state_scan(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    dw: f64,
) -> Result<Vec<f64>> {
    if sys.is_decoupled() {
        return Ok(Vec::new());
    }
    let (bl, br) = (res_l.band(), res_r.band());
    let hull = bl.hull(&br);
    let norm2 = |w: &[C64]| w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let strength = norm2(sys.coupling_l()) * res_l.total_weight() + norm2(sys.coupling_r()) * res_r.total_weight();
    let far = sys.levels().iter().map(|&e| hull.distance(e)).fold(0.0, f64::max);
    let reach = 2.0 * (far + strength.sqrt()) + 0.1 * hull.width() + dw;
    let mut intervals = vec![(hull.lo - reach, hull.lo - dw), (hull.hi + dw, hull.hi + reach)];
    if bl.intersect(&br).is_none() {
        let (lo, hi) = if bl.hi < br.lo { (bl.hi, br.lo) } else { (br.hi, bl.lo) };
        if hi - lo > 2.0 * dw {
            intervals.push((lo + dw, hi - dw));
        }
    }
    let det = |om: f64| -> Result<f64> {
        let xi = exterior_value(res_l, om)?;
        let eta = exterior_value(res_r, om)?;
        Ok(resolvent_determinant(sys, C64::from(xi), C64::from(eta), C64::from(om)).re)
    };
    let mut roots = Vec::new();
    for (a, b) in intervals {
        let h = (b - a) / SCAN_PANELS as f64;
        let mut x0 = a;
        let mut f0 = det(x0)?;
        for p in 1..=SCAN_PANELS {
            let x1 = a + p as f64 * h;
            let f1 = det(x1)?;
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut lo, mut hi, mut flo) = (x0, x1, f0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let fm = det(mid)?;
                    if fm * flo <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                    if hi - lo < 1e-13 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            f0 = f1;
        }
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// Full certificate: residuals plus discrete states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessCheck {
    #[serde(flatten)]
    pub report: ResidualReport,
    pub bound_states: Vec<f64>,
}

impl CompletenessCheck {
    pub fn passes(&self) -> bool {
        self.report.passes() && self.bound_states.is_empty()
    }
}

pub fn check_completeness(
    sys: &SystemSpec,
    res_l: &dyn ReservoirChannel,
    res_r: &dyn ReservoirChannel,
    m: usize,
) -> Result<CompletenessCheck> {
    let field = incoming_on_uniform(sys, res_l, res_r, m, Branch::Minus)?;
    let dw = field.left.spacing().max(field.right.spacing());
    let bound_states = bound_state_scan(sys, res_l, res_r, dw)?;
    Ok(CompletenessCheck { report: completeness_residuals(&field), bound_states })
}

/// The N = 1 closed form h^k = u_k w_L / (ω_k − ε − ξ w_L² − η w_R²).
pub fn single_level_h(eps: f64, w_l: f64, w_r: f64, xi: C64, eta: C64, omega: f64, u: f64) -> C64 {
    u * w_l / (C64::from(omega - eps) - xi * w_l * w_l - eta * w_r * w_r)
}
