//! Operator arithmetic on `GL(d, R)`: spectral norms, the metric
//! `d(A,B) = |A - B| + |A^-1 - B^-1|`, quasiconformal distortion and the
//! two perturbation lemmas used by the shadowing arguments.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

pub type Matrix = DMatrix<f64>;

/// Largest accepted `|A A^-1 - I|` at construction.
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-10;

/// Relative slack allowed when checking inequalities between computed norms.
const CHECK_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinopsError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix must be square and nonempty, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("inverse residual {0:e} exceeds {INVERSE_RESIDUAL_TOL:e}")]
    IllConditioned(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("lemma not applicable: r = {0} >= 1")]
    NotApplicable(f64),
    #[error("norm hypothesis violated: {norm} > M = {bound}")]
    NormHypothesis { norm: f64, bound: f64 },
    #[error("singular value decomposition did not converge")]
    SvdFailed,
}

/// Largest singular value. Errors on non-finite input.
pub fn op_norm(a: &Matrix) -> Result<f64, LinopsError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinopsError::NonFinite);
    }
    Ok(extreme_singular_values(a)?.0)
}

/// `(sigma_max, sigma_min)`; closed form for 2x2, SVD otherwise.
pub fn extreme_singular_values(a: &Matrix) -> Result<(f64, f64), LinopsError> {
    if a.nrows() == 2 && a.ncols() == 2 {
        return Ok(singular_values_2x2(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]));
    }
    if a.is_empty() {
        return Ok((0.0, 0.0));
    }
    let svd = a
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or(LinopsError::SvdFailed)?;
    let sv = &svd.singular_values;
    Ok((sv.max(), sv.min()))
}

/// Spectral norm of a matrix known to be finite.
#[inline]
pub(crate) fn spectral_norm(a: &Matrix) -> f64 {
    extreme_singular_values(a).map(|s| s.0).unwrap_or(f64::NAN)
}

pub(crate) fn singular_values_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    // sigma_max = (h1 + h2)/2 and sigma_min = |h1 - h2|/2, free of cancellation
    let h1 = (a + d).hypot(b - c);
    let h2 = (a - d).hypot(b + c);
    (0.5 * (h1 + h2), 0.5 * (h1 - h2).abs())
}

/// An invertible matrix with its inverse and both spectral norms cached.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorValue {
    matrix: Matrix,
    inverse: Matrix,
    norm: f64,
    inv_norm: f64,
}

impl OperatorValue {
    /// Inverts `matrix` and rejects it unless `|A A^-1 - I| <= 1e-10`.
    pub fn new(matrix: Matrix) -> Result<Self, LinopsError> {
        if matrix.nrows() != matrix.ncols() || matrix.is_empty() {
            return Err(LinopsError::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(LinopsError::NonFinite);
        }
        let inverse = matrix.clone().try_inverse().ok_or(LinopsError::Singular)?;
        if inverse.iter().any(|v| !v.is_finite()) {
            return Err(LinopsError::Singular);
        }
        let d = matrix.nrows();
        let residual = op_norm(&(&matrix * &inverse - Matrix::identity(d, d)))
            .map_err(|_| LinopsError::Singular)?;
        if residual > INVERSE_RESIDUAL_TOL {
            return Err(LinopsError::IllConditioned(residual));
        }
        Ok(Self::from_parts(matrix, inverse))
    }

    /// Row-major constructor.
    pub fn from_rows(d: usize, entries: &[f64]) -> Result<Self, LinopsError> {
        if entries.len() != d * d || d == 0 {
            return Err(LinopsError::NotSquare { rows: d, cols: if d == 0 { 0 } else { entries.len() / d } });
        }
        Self::new(Matrix::from_row_slice(d, d, entries))
    }

    pub(crate) fn from_parts(matrix: Matrix, inverse: Matrix) -> Self {
        let norm = spectral_norm(&matrix);
        let inv_norm = spectral_norm(&inverse);
        Self { matrix, inverse, norm, inv_norm }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_parts(Matrix::identity(d, d), Matrix::identity(d, d))
    }

    pub fn scalar(c: f64, d: usize) -> Result<Self, LinopsError> {
        Self::new(Matrix::identity(d, d) * c)
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self, LinopsError> {
        Self::new(Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)))
    }

    /// Rotation by `theta` in the plane of the first two coordinates.
    pub fn rotation(d: usize, theta: f64) -> Self {
        assert!(d >= 2, "rotation needs d >= 2");
        let (s, c) = theta.sin_cos();
        let mut r = Matrix::identity(d, d);
        r[(0, 0)] = c;
        r[(0, 1)] = -s;
        r[(1, 0)] = s;
        r[(1, 1)] = c;
        let mut inv = r.clone();
        inv[(0, 1)] = s;
        inv[(1, 0)] = -s;
        Self { matrix: r, inverse: inv, norm: 1.0, inv_norm: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
    pub fn inverse_matrix(&self) -> &Matrix {
        &self.inverse
    }
    pub fn norm(&self) -> f64 {
        self.norm
    }
    pub fn inv_norm(&self) -> f64 {
        self.inv_norm
    }
    /// `max(|A|, |A^-1|)`.
    pub fn max_norm(&self) -> f64 {
        self.norm.max(self.inv_norm)
    }

    /// `Q(A) = |A| |A^-1|`.
    pub fn quasiconformal(&self) -> f64 {
        self.norm * self.inv_norm
    }

    /// `self ∘ rhs`. The inverse is the product of cached inverses.
    pub fn compose(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.dim(), rhs.dim());
        Self::from_parts(&self.matrix * &rhs.matrix, &rhs.inverse * &self.inverse)
    }

    pub fn inverse(&self) -> Self {
        Self {
            matrix: self.inverse.clone(),
            inverse: self.matrix.clone(),
            norm: self.inv_norm,
            inv_norm: self.norm,
        }
    }

    /// `d(self, other)` without the dimension check.
    #[inline]
    pub fn distance(&self, other: &Self) -> f64 {
        spectral_norm(&(&self.matrix - &other.matrix)) + spectral_norm(&(&self.inverse - &other.inverse))
    }

    /// `|self - I|`.
    pub fn distance_to_identity_norm(&self) -> f64 {
        let d = self.dim();
        spectral_norm(&(&self.matrix - Matrix::identity(d, d)))
    }
}

/// Serialized as its rows.
impl Serialize for OperatorValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(serializer)
    }
}

/// Value of the metric `d(A,B) = |A - B| + |A^-1 - B^-1|`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct GlDistance(pub f64);

impl GlDistance {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn gl_distance(a: &OperatorValue, b: &OperatorValue) -> Result<GlDistance, LinopsError> {
    if a.dim() != b.dim() {
        return Err(LinopsError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(GlDistance(a.distance(b)))
}

pub fn quasiconformal(a: &OperatorValue) -> f64 {
    a.quasiconformal()
}

/// Outcome of the distortion lemma check
/// `(1-r)/(1+r) <= Q(A)/Q(B) <= (1+r)/(1-r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionCheck {
    pub holds: bool,
    pub r: f64,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn distortion_ratio_bounds(a: &OperatorValue, b: &OperatorValue) -> Result<DistortionCheck, LinopsError> {
    if a.dim() != b.dim() {
        return Err(LinopsError::DimMismatch(a.dim(), b.dim()));
    }
    let d = a.dim();
    let id = Matrix::identity(d, d);
    let r1 = spectral_norm(&(&a.inverse * &b.matrix - &id));
    let r2 = spectral_norm(&(&a.matrix * &b.inverse - &id));
    let r = r1.min(r2);
    if r >= 1.0 {
        return Err(LinopsError::NotApplicable(r));
    }
    let ratio = a.quasiconformal() / b.quasiconformal();
    let lower = (1.0 - r) / (1.0 + r);
    let upper = (1.0 + r) / (1.0 - r);
    let holds = ratio >= lower * (1.0 - CHECK_SLACK) && ratio <= upper * (1.0 + CHECK_SLACK);
    Ok(DistortionCheck { holds, r, ratio, lower, upper })
}

/// Outcome of `d(A∘B, Ã∘B̃) <= M (d(A,Ã) + d(B,B̃))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositionCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

pub fn composition_distance_bound(
    a: &OperatorValue,
    a_t: &OperatorValue,
    b: &OperatorValue,
    b_t: &OperatorValue,
    m_bound: f64,
) -> Result<CompositionCheck, LinopsError> {
    let d = a.dim();
    for op in [a_t, b, b_t] {
        if op.dim() != d {
            return Err(LinopsError::DimMismatch(d, op.dim()));
        }
    }
    for op in [a, a_t, b, b_t] {
        for norm in [op.norm(), op.inv_norm()] {
            if norm > m_bound {
                return Err(LinopsError::NormHypothesis { norm, bound: m_bound });
            }
        }
    }
    let lhs = a.compose(b).distance(&a_t.compose(b_t));
    let rhs = m_bound * (a.distance(a_t) + b.distance(b_t));
    let holds = lhs <= rhs * (1.0 + CHECK_SLACK) + CHECK_SLACK;
    Ok(CompositionCheck { holds, lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: cyclic Jacobi eigenvalue iteration on the symmetric `AᵀA`.
    fn jacobi_largest_eigenvalue(s: &Matrix) -> f64 {
        let n = s.nrows();
        let mut a = s.clone();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s_ = t * c;
                    let mut j = Matrix::identity(n, n);
                    j[(p, p)] = c;
                    j[(q, q)] = c;
                    j[(p, q)] = s_;
                    j[(q, p)] = -s_;
                    a = j.transpose() * &a * &j;
                }
            }
        }
        (0..n).map(|i| a[(i, i)]).fold(f64::MIN, f64::max)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Matrix {
        Matrix::from_fn(d, d, |_, _| rng.gen_range(-scale..scale))
    }

    fn random_invertible(rng: &mut ChaCha8Rng, d: usize) -> OperatorValue {
        loop {
            let m = Matrix::identity(d, d) + random_matrix(rng, d, 0.6);
            if let Ok(op) = OperatorValue::new(m) {
                if op.quasiconformal() < 50.0 {
                    return op;
                }
            }
        }
    }

    #[test]
    fn norm_examples() {
        assert_eq!(op_norm(&Matrix::identity(3, 3)).unwrap(), 1.0);
        let d = OperatorValue::diagonal(&[2.0, 0.5]).unwrap();
        assert_eq!(d.norm(), 2.0);
        assert_eq!(d.quasiconformal(), 4.0);
        assert!(matches!(
            op_norm(&Matrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0])),
            Err(LinopsError::NonFinite)
        ));
    }

    #[test]
    fn norm_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2usize, 3, 4, 5] {
            for _ in 0..50 {
                let a = random_matrix(&mut rng, d, 3.0);
                let oracle = jacobi_largest_eigenvalue(&(a.transpose() * &a)).sqrt();
                assert_relative_eq!(op_norm(&a).unwrap(), oracle, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn smallest_singular_value_of_2x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let a = random_matrix(&mut rng, 2, 2.0);
            let (_, smin) = extreme_singular_values(&a).unwrap();
            let svd = a.clone().svd(false, false);
            assert_relative_eq!(smin, svd.singular_values.min(), epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_singular_and_ill_conditioned() {
        let sing = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(OperatorValue::new(sing).is_err());
        let hilbert = Matrix::from_fn(12, 12, |i, j| 1.0 / (i + j + 1) as f64);
        assert!(OperatorValue::new(hilbert).is_err());
        assert!(OperatorValue::new(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn distance_examples() {
        let id = OperatorValue::identity(2);
        let two = OperatorValue::scalar(2.0, 2).unwrap();
        assert_eq!(gl_distance(&id, &id).unwrap().value(), 0.0);
        assert_relative_eq!(gl_distance(&id, &two).unwrap().value(), 1.5, epsilon = 1e-15);
        assert!(gl_distance(&id, &OperatorValue::identity(3)).is_err());
    }

    #[test]
    fn rotations_are_conformal() {
        for k in 0..20 {
            let r = OperatorValue::rotation(2, 0.37 * k as f64);
            let checked = OperatorValue::new(r.matrix().clone()).unwrap();
            assert_relative_eq!(checked.quasiconformal(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn distortion_examples() {
        let a = OperatorValue::identity(2);
        let same = distortion_ratio_bounds(&a, &a).unwrap();
        assert_eq!((same.r, same.ratio, same.lower, same.upper), (0.0, 1.0, 1.0, 1.0));
        assert!(same.holds);
        let b = OperatorValue::diagonal(&[1.3, 1.0]).unwrap();
        let chk = distortion_ratio_bounds(&a, &b).unwrap();
        // |A^-1 B - I| = 0.3 but |A B^-1 - I| = 1 - 1/1.3 is smaller
        assert_relative_eq!(chk.r, 1.0 - 1.0 / 1.3, epsilon = 1e-14);
        assert_relative_eq!(1.0 / chk.ratio, 1.3, epsilon = 1e-14);
        assert!(1.0 / chk.ratio <= 1.3 / 0.7);
        assert!(chk.holds);
        let far = OperatorValue::diagonal(&[3.0, 1.0 / 3.0]).unwrap();
        assert!(matches!(distortion_ratio_bounds(&a, &far), Err(LinopsError::NotApplicable(_))));
    }

    #[test]
    fn composition_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_invertible(&mut rng, 3);
        let b = random_invertible(&mut rng, 3);
        let m = a.max_norm().max(b.max_norm());
        let chk = composition_distance_bound(&a, &a, &b, &b, m).unwrap();
        assert_eq!((chk.lhs, chk.rhs), (0.0, 0.0));
        let id = OperatorValue::identity(3);
        let b2 = random_invertible(&mut rng, 3);
        let m = b.max_norm().max(b2.max_norm()).max(1.0);
        let chk = composition_distance_bound(&id, &id, &b, &b2, m).unwrap();
        assert_relative_eq!(chk.lhs, b.distance(&b2), epsilon = 1e-12);
        assert!(chk.holds);
        assert!(matches!(
            composition_distance_bound(&a, &a, &b, &b, 0.5),
            Err(LinopsError::NormHypothesis { .. })
        ));
    }

    #[test]
    fn randomized_lemma_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut applicable = 0;
        for t in 0..2000 {
            let d = 2 + t % 3;
            let a = random_invertible(&mut rng, d);
            let e = random_matrix(&mut rng, d, 0.3 / d as f64);
            if let Ok(b) = OperatorValue::new(a.matrix() + e * a.matrix()) {
                if let Ok(chk) = distortion_ratio_bounds(&a, &b) {
                    assert!(chk.holds, "{chk:?}");
                    applicable += 1;
                }
            }
        }
        assert!(applicable > 1000);
    }

    #[test]
    fn algebraic_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = random_invertible(&mut rng, 3);
            let b = random_invertible(&mut rng, 3);
            assert!(a.compose(&b).norm() <= a.norm() * b.norm() * (1.0 + 1e-12));
            assert_eq!(a.quasiconformal(), a.inverse().quasiconformal());
            assert!(a.compose(&b).quasiconformal() <= a.quasiconformal() * b.quasiconformal() * (1.0 + 1e-12));
            assert_eq!(a.distance(&b), a.inverse().distance(&b.inverse()));
            assert!(a.quasiconformal() >= 1.0 - 1e-14);
            let c = rng.gen_range(0.2..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let ca = OperatorValue::new(a.matrix() * c).unwrap();
            assert_relative_eq!(ca.quasiconformal(), a.quasiconformal(), max_relative = 1e-12);
        }
    }
}
