//! Quadrature building blocks: Gauss–Legendre rules, graded panels,
//! adaptive Gauss–Kronrod, compensated summation and a few special
//! functions used by the oscillatory rules.

use std::sync::OnceLock;

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const CACHE_MAX: usize = 64;
static CACHE: [OnceLock<GaussLegendre>; CACHE_MAX + 1] = [const { OnceLock::new() }; CACHE_MAX + 1];

impl GaussLegendre {
    /// n-point rule on [-1, 1] by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared instance for small orders.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        assert!(n <= CACHE_MAX, "cached rules go up to {CACHE_MAX} nodes");
        CACHE[n].get_or_init(|| GaussLegendre::new(n))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut acc = Neumaier::default();
        for (x, w) in self.mapped(a, b) {
            acc.add(w * f(x));
        }
        acc.value()
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        let mut re = Neumaier::default();
        let mut im = Neumaier::default();
        for (x, w) in self.mapped(a, b) {
            let v = w * f(x);
            re.add(v.re);
            im.add(v.im);
        }
        Complex64::new(re.value(), im.value())
    }
}

/// P_n(x) and P_n'(x).
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * (n * (n + 1)) as f64 * x.powi(n as i32 + 1)
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, d)
}

/// P_0(x) .. P_{n-1}(x).
pub fn legendre_table(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let (mut p0, mut p1) = (1.0, x);
    for k in 0..n {
        match k {
            0 => out.push(1.0),
            1 => out.push(x),
            _ => {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
                out.push(p2);
            }
        }
    }
    out
}

/// Q[i][j] = ∫_{-1}^{x_i} ℓ_j(s) ds for the Lagrange basis on the rule's nodes.
pub fn integration_matrix(rule: &GaussLegendre) -> Vec<Vec<f64>> {
    let n = rule.len();
    let tables: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| legendre_table(n + 1, x)).collect();
    let antider: Vec<Vec<f64>> = tables
        .iter()
        .zip(&rule.nodes)
        .map(|(p, &y)| {
            (0..n)
                .map(|k| if k == 0 { y + 1.0 } else { (p[k + 1] - p[k - 1]) / (2 * k + 1) as f64 })
                .collect()
        })
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let s: f64 = (0..n).map(|k| (k as f64 + 0.5) * tables[j][k] * antider[i][k]).sum();
                    rule.weights[j] * s
                })
                .collect()
        })
        .collect()
}

/// Spherical Bessel functions j_0(θ) .. j_nmax(θ) by normalized downward recurrence.
pub fn spherical_bessel(nmax: usize, theta: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    let th = theta.abs();
    if th < 1e-4 {
        // two-term series θ^n/(2n+1)!! · (1 − θ²/(2(2n+3)))
        let mut lead = 1.0;
        for k in 0..=nmax {
            if k > 0 {
                lead *= th / (2 * k + 1) as f64;
            }
            let v = lead * (1.0 - th * th / (2 * (2 * k + 3)) as f64);
            out[k] = if theta < 0.0 && k % 2 == 1 { -v } else { v };
        }
        return out;
    }
    let start = nmax.max(th.ceil() as usize) + 40;
    let mut f = vec![0.0; start + 2];
    f[start] = 1.0;
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k < start {
            f[k] = (2 * k + 3) as f64 / th * f[k + 1] - f[k + 2];
        }
        if f[k].abs() > 1e100 {
            for v in f.iter_mut().skip(k) {
                *v *= 1e-100;
            }
            norm *= 1e-200;
        }
        norm += (2 * k + 1) as f64 * f[k] * f[k];
    }
    let scale = 1.0 / norm.sqrt();
    let j0 = th.sin() / th;
    let j1 = th.sin() / (th * th) - th.cos() / th;
    let sign = if j0.abs() > j1.abs() { j0.signum() * f[0].signum() } else { j1.signum() * f[1].signum() };
    for k in 0..=nmax {
        out[k] = sign * scale * f[k];
        if theta < 0.0 && k % 2 == 1 {
            out[k] = -out[k];
        }
    }
    out
}

/// Breakpoints on [a, b] geometrically refined (ratio 1/2) toward the selected ends.
pub fn graded_breakpoints(a: f64, b: f64, levels: usize, toward_a: bool, toward_b: bool) -> Vec<f64> {
    let mut pts = vec![a, b];
    let len = b - a;
    match (toward_a, toward_b) {
        (true, true) => {
            for l in 1..=levels {
                let s = 0.5 * 0.5f64.powi(l as i32 - 1) * len * 0.5;
                pts.push(a + s);
                pts.push(b - s);
            }
            pts.push(0.5 * (a + b));
        }
        (true, false) => {
            for l in 1..=levels {
                pts.push(a + len * 0.5f64.powi(l as i32));
            }
        }
        (false, true) => {
            for l in 1..=levels {
                pts.push(b - len * 0.5f64.powi(l as i32));
            }
        }
        (false, false) => {}
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Neumaier::default();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7K15 panel: (Kronrod value, |Kronrod − Gauss|).
pub fn gauss_kronrod_15<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let s = f(mid - dx) + f(mid + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * half, ((k - g) * half).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive G7K15 over the intervals delimited by `breakpoints`:
/// bisects the panel with the largest error estimate until the total
/// estimate drops below max(abs_tol, rel_tol·|value|) or the budget runs out.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    breakpoints: &[f64],
    mut f: F,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> AdaptiveResult {
    let mut panels: Vec<(f64, f64, f64, f64)> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gauss_kronrod_15(w[0], w[1], &mut f);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let value = neumaier_sum(panels.iter().map(|p| p.2));
        let error: f64 = panels.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || panels.len() >= max_panels {
            return AdaptiveResult { value, error, panels: panels.len() };
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (a, b, _, _) = panels.swap_remove(idx);
        let m = 0.5 * (a + b);
        let (v1, e1) = gauss_kronrod_15(a, m, &mut f);
        let (v2, e2) = gauss_kronrod_15(m, b, &mut f);
        panels.push((a, m, v1, e1));
        panels.push((m, b, v2, e2));
    }
}
