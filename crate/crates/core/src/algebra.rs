//! Finite-dimensional spectral calculus: operator norm, Gelfand radius,
//! resolvent series, positive square root, orthogonal decomposition and
//! Cayley transform.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermiticity_defect, max_abs, op_norm, CMat, C64, I};

/// A square complex matrix with its cached operator norm.
#[derive(Debug, Clone, PartialEq)]
pub struct MatElement {
    m: CMat,
    norm: f64,
}

impl MatElement {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let norm = op_norm(&m);
        Ok(Self { m, norm })
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermiticity_defect(&self.m) <= tol * self.norm.max(f64::MIN_POSITIVE)
    }
}

fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖A^{2^j}‖^{1/2^j} for j = 0..=J, 2^J ≤ n_terms, by squaring with
/// renormalization at every step.
pub fn gelfand_sequence(a: &MatElement, n_terms: u64) -> Result<Vec<f64>> {
    if n_terms < 4 {
        return Err(Error::InvalidInput(format!("n_terms must be at least 4, got {n_terms}")));
    }
    let levels = 63 - n_terms.leading_zeros() as usize;
    let mut out = vec![a.norm];
    if a.norm == 0.0 {
        out.resize(levels + 1, 0.0);
        return Ok(out);
    }
    let mut b = a.m.unscale(a.norm);
    let mut log_c = a.norm.ln();
    let mut power = 1.0f64;
    for _ in 0..levels {
        b = &b * &b;
        log_c *= 2.0;
        power *= 2.0;
        let nb = op_norm(&b);
        if nb == 0.0 {
            out.push(0.0);
            while out.len() < levels + 1 {
                out.push(0.0);
            }
            return Ok(out);
        }
        if !nb.is_finite() || nb < f64::MIN_POSITIVE {
            return Err(Error::Overflow);
        }
        b.unscale_mut(nb);
        log_c += nb.ln();
        out.push((log_c / power).exp());
    }
    Ok(out)
}

pub fn spectral_radius_gelfand(a: &MatElement, n_terms: u64) -> Result<f64> {
    gelfand_sequence(a, n_terms).map(|s| *s.last().expect("nonempty"))
}

/// (λ − A)^{-1} = λ^{-1} Σ (A/λ)^m for |λ| > ‖A‖.
pub fn resolvent_series(a: &MatElement, lambda: C64, tol: f64) -> Result<MatElement> {
    let q = a.norm / lambda.norm();
    if !(lambda.norm() > a.norm) || q >= 1.0 - 1e-12 {
        return Err(Error::OutsideDisk { lambda_abs: lambda.norm(), norm: a.norm });
    }
    let d = a.dim();
    let step = a.m.map(|z| z / lambda);
    let mut term = CMat::identity(d, d);
    let mut acc = CMat::zeros(d, d);
    let tail = 1.0 / (1.0 - q);
    let mut count = 0usize;
    loop {
        acc += &term;
        term = &term * &step;
        count += 1;
        if frobenius(&term) * tail < tol * frobenius(&acc).max(1.0) * 0.1 || frobenius(&term) == 0.0 {
            break;
        }
        if count > 1_000_000 {
            return Err(Error::SlowConvergence { terms: count });
        }
    }
    let r = acc.map(|z| z / lambda);
    let check = (CMat::identity(d, d) * lambda - &a.m) * &r - CMat::identity(d, d);
    let residual = op_norm(&check);
    if residual > 10.0 * tol.max(1e-15 * d as f64) {
        return Err(Error::Residual { residual, tol });
    }
    MatElement::new(r)
}

const SQRT_MAX_TERMS: usize = 100_000;

fn check_hermitian(a: &MatElement) -> Result<()> {
    if !a.is_hermitian(1e-12) {
        return Err(Error::InvalidInput("matrix is not Hermitian".into()));
    }
    Ok(())
}

/// B = sqrt(‖A‖)·[I + Σ c_n (I − A/‖A‖)^n] with c_1 = −1/2,
/// c_{n+1} = c_n(2n − 1)/(2n + 2).
pub fn positive_sqrt_series(a: &MatElement) -> Result<MatElement> {
    check_hermitian(a)?;
    let d = a.dim();
    if a.norm == 0.0 {
        return MatElement::new(CMat::zeros(d, d));
    }
    let (eig, _) = hermitian_eigen(&a.m);
    let min_eig = eig.first().copied().unwrap_or(0.0);
    if min_eig < -1e-12 * a.norm {
        return Err(Error::NotPositive { min_eig });
    }
    let id = CMat::identity(d, d);
    let c_mat = &id - a.m.unscale(a.norm);
    let threshold = 1e-14 * d as f64;
    let mut sum = id.clone();
    let mut power = c_mat.clone();
    let mut coeff = -0.5;
    let mut coeff_total = 0.0;
    let mut n = 1usize;
    loop {
        sum += power.map(|z| z * coeff);
        coeff_total += coeff;
        let term = coeff.abs() * frobenius(&power);
        if term < threshold {
            break;
        }
        let next = &power * &c_mat;
        if max_abs(&(&next - &power)) <= 1e-15 * (1.0 + max_abs(&power)) {
            // C^{m} = C^n for all m > n: add the remaining coefficients at once (Σ c_n = −1).
            let rest = -1.0 - coeff_total;
            sum += power.map(|z| z * rest);
            break;
        }
        power = next;
        coeff *= (2 * n) as f64 - 1.0;
        coeff /= (2 * n) as f64 + 2.0;
        n += 1;
        if n > SQRT_MAX_TERMS {
            return Err(Error::SlowConvergence { terms: n });
        }
    }
    let b = hermitian_part_of(sum.map(|z| z * a.norm.sqrt()));
    let residual = op_norm(&(&b * &b - &a.m));
    if residual > 1e-8 * a.norm {
        return Err(Error::Residual { residual, tol: 1e-8 * a.norm });
    }
    MatElement::new(b)
}

fn hermitian_part_of(m: CMat) -> CMat {
    (&m + m.adjoint()).map(|z| z * 0.5)
}

/// A = A₊ − A₋ with A_± = (|A| ± A)/2 and |A| = sqrt(A²).
pub fn orthogonal_decomposition(a: &MatElement) -> Result<(MatElement, MatElement)> {
    check_hermitian(a)?;
    let sq = MatElement::new(hermitian_part_of(&a.m * &a.m))?;
    let abs = positive_sqrt_series(&sq)?;
    let plus = (abs.matrix() + &a.m).map(|z| z * 0.5);
    let minus = (abs.matrix() - &a.m).map(|z| z * 0.5);
    Ok((MatElement::new(plus)?, MatElement::new(minus)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cayley {
    pub k: MatElement,
    pub alpha: f64,
}

/// K = (iα − A)^{-1}(iα + A), α = 2‖A‖.
pub fn cayley_transform(a: &MatElement) -> Result<Cayley> {
    check_hermitian(a)?;
    if a.norm == 0.0 {
        return Err(Error::InvalidInput("Cayley transform needs A != 0".into()));
    }
    let d = a.dim();
    let alpha = 2.0 * a.norm;
    let ia = CMat::identity(d, d) * (I * alpha);
    let k = (&ia - &a.m)
        .lu()
        .solve(&(&ia + &a.m))
        .ok_or(Error::SingularMatrix { residual: f64::INFINITY })?;
    Ok(Cayley { k: MatElement::new(k)?, alpha })
}

/// A = iα(K − 1)(K + 1)^{-1}.
pub fn inverse_cayley(c: &Cayley) -> Result<CMat> {
    let d = c.k.dim();
    let id = CMat::identity(d, d);
    let num = c.k.matrix() - &id;
    let den = c.k.matrix() + &id;
    // (K − 1) and (K + 1) commute, so the right division equals the left solve.
    let x = den.lu().solve(&num).ok_or(Error::SingularMatrix { residual: f64::INFINITY })?;
    Ok(x * (I * c.alpha))
}

/// Largest eigenvalue modulus of a general complex matrix, from the real
/// 2d×2d embedding (its spectrum is σ(A) ∪ conj σ(A)).
pub fn eigen_spectral_radius(a: &CMat) -> f64 {
    let d = a.nrows();
    let real = DMatrix::<f64>::from_fn(2 * d, 2 * d, |i, j| {
        let z = a[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    real.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_function;

    fn el(m: CMat) -> MatElement {
        MatElement::new(m).unwrap()
    }

    fn diag(v: &[f64]) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::from(x))))
    }

    #[test]
    fn gelfand_unitary_and_nilpotent() {
        let th = 0.7f64;
        let u = CMat::from_row_slice(2, 2, &[C64::from(th.cos()), C64::from(-th.sin()), C64::from(th.sin()), C64::from(th.cos())]);
        assert!((spectral_radius_gelfand(&el(u), 1 << 20).unwrap() - 1.0).abs() < 1e-12);
        let n = CMat::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(0.0), C64::from(0.0)]);
        let s = gelfand_sequence(&el(n), 4).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0]);
        assert!(gelfand_sequence(&el(CMat::identity(2, 2)), 3).is_err());
    }

    #[test]
    fn resolvent_examples() {
        let a = el(CMat::zeros(3, 3));
        let lam = C64::new(0.5, 2.0);
        assert!(max_abs(&(resolvent_series(&a, lam, 1e-14).unwrap().into_matrix() - CMat::identity(3, 3) / lam)) < 1e-15);
        let d = el(diag(&[1.0, -3.0, 0.5]));
        let lam = C64::from(6.0);
        let r = resolvent_series(&d, lam, 1e-13).unwrap();
        for (i, a) in [1.0, -3.0, 0.5].iter().enumerate() {
            assert!((r.matrix()[(i, i)] - 1.0 / (6.0 - a)).norm() < 1e-10);
        }
        assert!(matches!(resolvent_series(&d, C64::from(2.7), 1e-12), Err(Error::OutsideDisk { .. })));
    }

    #[test]
    fn sqrt_examples() {
        let id = el(CMat::identity(3, 3));
        assert!(max_abs(&(positive_sqrt_series(&id).unwrap().into_matrix() - CMat::identity(3, 3))) < 1e-14);
        let v = nalgebra::DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let p = &v * v.adjoint();
        let b = positive_sqrt_series(&el(p.clone())).unwrap();
        assert!(max_abs(&(b.matrix() - &p)) < 1e-12);
        let b = positive_sqrt_series(&el(diag(&[4.0, 9.0]))).unwrap();
        assert!(max_abs(&(b.into_matrix() - diag(&[2.0, 3.0]))) < 1e-12);
        assert!(matches!(positive_sqrt_series(&el(diag(&[1.0, -0.5]))), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn sqrt_with_kernel_uses_projector_tail() {
        let b = positive_sqrt_series(&el(diag(&[0.0, 1.0, 4.0]))).unwrap();
        assert!(max_abs(&(b.into_matrix() - diag(&[0.0, 1.0, 2.0]))) < 1e-8);
    }

    #[test]
    fn decomposition_example() {
        let (p, m) = orthogonal_decomposition(&el(diag(&[1.0, -2.0]))).unwrap();
        assert!(max_abs(&(p.into_matrix() - diag(&[1.0, 0.0]))) < 1e-12);
        assert!(max_abs(&(m.into_matrix() - diag(&[0.0, 2.0]))) < 1e-12);
        let psd = diag(&[0.5, 2.0]);
        let (p, m) = orthogonal_decomposition(&el(psd.clone())).unwrap();
        assert!(max_abs(&(p.into_matrix() - psd)) < 1e-12 && m.norm() < 1e-12);
    }

    #[test]
    fn cayley_scalar_and_inverse() {
        let a = el(diag(&[1.5]));
        let c = cayley_transform(&a).unwrap();
        assert!((c.k.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-15);
        let back = inverse_cayley(&c).unwrap();
        assert!((back[(0, 0)] - 1.5).norm() < 1e-12);
        assert!(cayley_transform(&el(CMat::zeros(2, 2))).is_err());
    }

    #[test]
    fn eigen_radius_oracle() {
        let h = diag(&[0.3, -2.0, 1.0]);
        assert!((eigen_spectral_radius(&h) - 2.0).abs() < 1e-12);
        let f = hermitian_function(&h, |x| C64::from_polar(1.0, x));
        assert!((eigen_spectral_radius(&f) - 1.0).abs() < 1e-12);
    }
}
