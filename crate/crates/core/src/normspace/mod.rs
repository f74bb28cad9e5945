//! The metric space of norms on `R^d`.
//!
//! A norm is stored as a finite maximum of pulled-back Euclidean norms,
//! `φ(v) = max_i |A_i v|`. This class contains the Euclidean norm `φ0`, is
//! closed under pull-back `A*φ(v) = φ(Av)` and under finite maxima, which is
//! all the invariant-norm construction needs. Distances
//! `dist(φ1, φ2) = log max(sup φ1/φ2, sup φ2/φ1)` and
//! `dist'(φ1, φ2) = sup_{|v| <= 1} |φ1(v) - φ2(v)|` come back as certified
//! intervals.

mod planar;
mod sphere;

pub(crate) use planar::{Envelope, Sinusoid};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linops::{spectral_norm, Matrix, OperatorValue};

/// `A` is dropped next to `B` once `|A B^-1| <= 1 + PRUNE_SLACK`.
pub const PRUNE_SLACK: f64 = 1e-12;

/// Relative width given to closed-form values that are exact up to rounding.
const ROUNDING: f64 = 1e-12;

/// Cells per cube face edge for grid bounds in `d = 3`.
const CUBE_CELLS: usize = 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("a norm needs at least one generator")]
    Empty,
    #[error("norm has equivalence constant {constant} > K = {k}")]
    OutsideBall { k: f64, constant: f64 },
    #[error("grid bounds are only available for d <= 3, got d = {0}")]
    GridUnavailable(usize),
    #[error("lists have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Closed interval `[lo, hi]` enclosing a certified quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo: lo.min(hi), hi: hi.max(lo) }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lo - slack && v <= self.hi + slack
    }

    pub fn overlaps(&self, other: &Interval, slack: f64) -> bool {
        self.lo <= other.hi + slack && other.lo <= self.hi + slack
    }
}

/// `φ(v) = max_i |A_i v|` over a pruned generator set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormRep {
    #[serde(skip)]
    dim: usize,
    generators: Vec<OperatorValue>,
}

impl NormRep {
    /// The background norm `φ0 = |.|`.
    pub fn euclidean(d: usize) -> Self {
        Self { dim: d, generators: vec![OperatorValue::identity(d)] }
    }

    pub fn singleton(a: OperatorValue) -> Self {
        Self { dim: a.dim(), generators: vec![canonical(a)] }
    }

    /// Pruned maximum of `|A_i v|`.
    pub fn new(generators: impl IntoIterator<Item = OperatorValue>) -> Result<Self, NormError> {
        let mut it = generators.into_iter();
        let mut phi = Self::singleton(it.next().ok_or(NormError::Empty)?);
        for a in it {
            phi.check_dim(a.dim())?;
            phi.insert(a);
        }
        Ok(phi)
    }

    /// Keeps every generator, dominated or not.
    pub fn unpruned(generators: Vec<OperatorValue>) -> Result<Self, NormError> {
        let dim = generators.first().ok_or(NormError::Empty)?.dim();
        if let Some(a) = generators.iter().find(|a| a.dim() != dim) {
            return Err(NormError::DimMismatch { expected: dim, found: a.dim() });
        }
        Ok(Self { dim, generators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[OperatorValue] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Adds `a` unless an existing generator dominates it, then drops the
    /// generators `a` dominates. Returns whether `a` was kept.
    pub fn insert(&mut self, a: OperatorValue) -> bool {
        debug_assert_eq!(a.dim(), self.dim);
        let a = canonical(a);
        if self.generators.iter().any(|b| dominated(&a, b)) {
            return false;
        }
        self.generators.retain(|b| !dominated(b, &a));
        self.generators.push(a);
        true
    }

    pub fn eval(&self, v: &[f64]) -> Result<f64, NormError> {
        self.check_dim(v.len())?;
        let v = DVector::from_column_slice(v);
        Ok(self.generators.iter().map(|a| (a.matrix() * &v).norm()).fold(0.0, f64::max))
    }

    /// `max_i |A_i|`, so `φ(v) <= upper() |v|`; also the Lipschitz constant of `φ`.
    pub fn upper(&self) -> f64 {
        self.generators.iter().map(OperatorValue::norm).fold(0.0, f64::max)
    }

    /// `1 / max_i σ_min(A_i)`, so `φ(v) >= |v| / lower()`.
    pub fn lower(&self) -> f64 {
        self.generators.iter().map(OperatorValue::inv_norm).fold(f64::INFINITY, f64::min)
    }

    /// Smallest `K` with `φ ∈ N_K`.
    pub fn equivalence_constant(&self) -> f64 {
        self.upper().max(self.lower())
    }

    pub fn in_ball(&self, k: f64) -> bool {
        self.equivalence_constant() <= k * (1.0 + ROUNDING)
    }

    /// `A*φ`, with generators `A_i A`.
    pub fn pullback(&self, a: &OperatorValue) -> Result<Self, NormError> {
        self.check_dim(a.dim())?;
        Self::new(self.generators.iter().map(|b| b.compose(a)))
    }

    /// Values of `φ` on the columns of `dirs`.
    pub(crate) fn eval_columns(&self, dirs: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0_f64; dirs.ncols()];
        for a in &self.generators {
            let img = a.matrix() * dirs;
            for (o, col) in out.iter_mut().zip(img.column_iter()) {
                *o = o.max(col.norm());
            }
        }
        out
    }

    pub(crate) fn envelope(&self) -> Envelope {
        Envelope::from_matrices(self.generators.iter().map(OperatorValue::matrix))
    }

    fn check_dim(&self, found: usize) -> Result<(), NormError> {
        if found != self.dim {
            return Err(NormError::DimMismatch { expected: self.dim, found });
        }
        Ok(())
    }
}

/// `|A v| <= |B v|` for every `v`.
fn dominated(a: &OperatorValue, b: &OperatorValue) -> bool {
    spectral_norm(&(a.matrix() * b.inverse_matrix())) <= 1.0 + PRUNE_SLACK
}

/// Orthogonal generators pull back `φ0` to itself.
fn canonical(a: OperatorValue) -> OperatorValue {
    if a.norm() <= 1.0 + PRUNE_SLACK && a.inv_norm() <= 1.0 + PRUNE_SLACK {
        OperatorValue::identity(a.dim())
    } else {
        a
    }
}

pub fn eval_norm(phi: &NormRep, v: &[f64]) -> Result<f64, NormError> {
    phi.eval(v)
}

pub fn pullback(a: &OperatorValue, phi: &NormRep) -> Result<NormRep, NormError> {
    phi.pullback(a)
}

/// Pointwise maximum.
pub fn max_norms(phis: &[NormRep]) -> Result<NormRep, NormError> {
    let first = phis.first().ok_or(NormError::Empty)?;
    let mut out = first.clone();
    for phi in &phis[1..] {
        out.check_dim(phi.dim)?;
        for a in &phi.generators {
            out.insert(a.clone());
        }
    }
    Ok(out)
}

/// Enclosure of `sup_v φ1(v)/φ2(v)`.
fn sup_ratio(phi1: &NormRep, phi2: &NormRep) -> Interval {
    let algebraic = phi1
        .generators
        .iter()
        .map(|a| {
            phi2.generators
                .iter()
                .map(|b| spectral_norm(&(a.matrix() * b.inverse_matrix())))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    if phi1.len() == 1 && phi2.len() == 1 {
        return Interval::point(algebraic);
    }
    match phi1.dim {
        1 => Interval::point(phi1.upper() / phi2.upper()),
        2 => {
            let r = phi1.envelope().sup_ratio(&phi2.envelope()).sqrt();
            let lo = r * (1.0 - ROUNDING);
            Interval::new(lo, algebraic.min(r * (1.0 + ROUNDING)).max(lo))
        }
        d => {
            let dirs = sphere::unit_directions(d, sphere::SAMPLE_COUNT);
            let mut lo = sampled_max(&phi1.eval_columns(&dirs), &phi2.eval_columns(&dirs), |a, b| a / b);
            let mut hi = algebraic;
            if d == 3 {
                let grid = sphere::cube_grid(CUBE_CELLS);
                let h = sphere::cube_covering_radius(CUBE_CELLS);
                let (f1, f2) = (phi1.eval_columns(&grid), phi2.eval_columns(&grid));
                lo = lo.max(sampled_max(&f1, &f2, |a, b| a / b));
                let (k1, k2) = (phi1.upper(), phi2.upper());
                let grid_hi = sampled_max(&f1, &f2, |a, b| {
                    let den = b - k2 * h;
                    if den > 0.0 {
                        (a + k1 * h) / den
                    } else {
                        f64::INFINITY
                    }
                });
                hi = hi.min(grid_hi);
            }
            Interval::new(lo, hi.max(lo))
        }
    }
}

fn sampled_max(f1: &[f64], f2: &[f64], op: impl Fn(f64, f64) -> f64) -> f64 {
    f1.iter().zip(f2).map(|(&a, &b)| op(a, b)).fold(0.0, f64::max)
}

/// Enclosure of `dist(φ1, φ2) = log max(sup φ1/φ2, sup φ2/φ1)`.
///
/// Singletons give the zero-width value `log max(|AB^-1|, |BA^-1|)`; in
/// `d = 2` the suprema are computed exactly from the envelopes; otherwise the
/// lower end comes from deterministic sphere samples and the upper end from
/// `max_i min_j |A_i B_j^-1|`, sharpened by a Lipschitz grid in `d = 3`.
pub fn norm_distance(phi1: &NormRep, phi2: &NormRep) -> Result<Interval, NormError> {
    phi1.check_dim(phi2.dim)?;
    let (a, b) = (sup_ratio(phi1, phi2), sup_ratio(phi2, phi1));
    Ok(Interval::new(a.lo.max(b.lo).ln().max(0.0), a.hi.max(b.hi).ln().max(0.0)))
}

/// How the upper end of `dist'` is certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DistPrimeMethod {
    /// Grid when `d <= 3`, algebraic otherwise.
    #[default]
    Auto,
    /// Grid with a curvature correction on the circle in `d = 2`, Lipschitz
    /// corrected cube surface grid in `d = 3`.
    Grid,
    /// `(e^dist - 1) max(K_1, K_2)`, with `K_i = max |A|` over generators.
    Algebraic,
}

pub fn norm_distance_prime(phi1: &NormRep, phi2: &NormRep) -> Result<Interval, NormError> {
    norm_distance_prime_with(phi1, phi2, DistPrimeMethod::Auto)
}

/// Enclosure of `dist'(φ1, φ2) = sup_{|v| <= 1} |φ1(v) - φ2(v)|`.
pub fn norm_distance_prime_with(
    phi1: &NormRep,
    phi2: &NormRep,
    method: DistPrimeMethod,
) -> Result<Interval, NormError> {
    phi1.check_dim(phi2.dim)?;
    let d = phi1.dim;
    let grid = match method {
        DistPrimeMethod::Auto => d <= 3,
        DistPrimeMethod::Grid if d > 3 => return Err(NormError::GridUnavailable(d)),
        DistPrimeMethod::Grid => true,
        DistPrimeMethod::Algebraic => false,
    };
    if d == 1 {
        return Ok(Interval::point((phi1.upper() - phi2.upper()).abs()));
    }
    let (k1, k2) = (phi1.upper(), phi2.upper());
    if grid && d == 2 {
        let (lo, hi) = phi1.envelope().sup_root_gap(&phi2.envelope(), 1e-10);
        return Ok(Interval::new(lo, hi));
    }
    let dirs = sphere::unit_directions(d, sphere::SAMPLE_COUNT);
    let gap = |a: f64, b: f64| (a - b).abs();
    let lo = sampled_max(&phi1.eval_columns(&dirs), &phi2.eval_columns(&dirs), gap);
    if grid {
        let mut pts = sphere::cube_grid(CUBE_CELLS);
        for mut col in pts.column_iter_mut() {
            let n = col.norm();
            col /= n;
        }
        let h = sphere::cube_covering_radius(CUBE_CELLS);
        let top = sampled_max(&phi1.eval_columns(&pts), &phi2.eval_columns(&pts), gap);
        return Ok(Interval::new(lo.max(top), top + (k1 + k2) * h));
    }
    let dist = norm_distance(phi1, phi2)?;
    Ok(Interval::new(lo, (dist.hi.exp_m1() * k1.max(k2)).max(lo)))
}

fn require_ball(k: f64, phis: &[&NormRep]) -> Result<(), NormError> {
    for phi in phis {
        if !phi.in_ball(k) {
            return Err(NormError::OutsideBall { k, constant: phi.equivalence_constant() });
        }
    }
    Ok(())
}

/// Slack for comparing certified endpoints.
const CHECK_SLACK: f64 = 1e-12;

/// `dist' <= K^3 dist` and `dist <= K dist'` on `N_K`, compared at the
/// favourable endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub k: f64,
    pub dist: Interval,
    pub dist_prime: Interval,
    pub holds: bool,
}

pub fn check_metric_equivalence(phi1: &NormRep, phi2: &NormRep, k: f64) -> Result<EquivalenceReport, NormError> {
    require_ball(k, &[phi1, phi2])?;
    let dist = norm_distance(phi1, phi2)?;
    let dist_prime = norm_distance_prime(phi1, phi2)?;
    let holds = dist_prime.lo <= k.powi(3) * dist.hi + CHECK_SLACK && dist.lo <= k * dist_prime.hi + CHECK_SLACK;
    Ok(EquivalenceReport { k, dist, dist_prime, holds })
}

/// `dist(A*φ, Ã*φ) <= K^4 |A - Ã|` whenever `φ, A*φ, Ã*φ ∈ N_K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackReport {
    pub k: f64,
    pub dist: Interval,
    pub operator_gap: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn check_pullback_lipschitz(
    a: &OperatorValue,
    a_t: &OperatorValue,
    phi: &NormRep,
    k: f64,
) -> Result<PullbackReport, NormError> {
    phi.check_dim(a.dim())?;
    phi.check_dim(a_t.dim())?;
    let pa = phi.pullback(a)?;
    let pt = phi.pullback(a_t)?;
    require_ball(k, &[phi, &pa, &pt])?;
    let dist = norm_distance(&pa, &pt)?;
    let operator_gap = spectral_norm(&(a.matrix() - a_t.matrix()));
    let bound = k.powi(4) * operator_gap;
    let holds = dist.lo <= bound * (1.0 + CHECK_SLACK) + CHECK_SLACK;
    Ok(PullbackReport { k, dist, operator_gap, bound, holds })
}

/// `dist(max φ_i, max φ̃_i) <= max_i dist(φ_i, φ̃_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxInequalityReport {
    pub lhs: Interval,
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_max_inequality(phis: &[NormRep], phis_t: &[NormRep]) -> Result<MaxInequalityReport, NormError> {
    if phis.len() != phis_t.len() {
        return Err(NormError::LengthMismatch(phis.len(), phis_t.len()));
    }
    let lhs = norm_distance(&max_norms(phis)?, &max_norms(phis_t)?)?;
    let mut rhs: f64 = 0.0;
    for (p, q) in phis.iter().zip(phis_t) {
        rhs = rhs.max(norm_distance(p, q)?.hi);
    }
    let holds = lhs.lo <= rhs + CHECK_SLACK;
    Ok(MaxInequalityReport { lhs, rhs, holds })
}

#[cfg(test)]
mod tests;
