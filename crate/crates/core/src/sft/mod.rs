//! Mixing subshifts of finite type.
//!
//! Points are eventually periodic sequences, so equality, distance, brackets
//! and closing are all decided exactly.

mod matrix;
mod orbit;
mod point;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::TransitionMatrix;
pub use orbit::{close_orbit, dense_orbit_segment, periodic_points, ClosingCertificate};
pub use point::{Point, PointRepr};

pub type Symbol = u8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SftError {
    #[error("transition matrix needs at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("transition matrix has {0} symbols, more than supported")]
    TooManySymbols(usize),
    #[error("row {row} has length {len}, expected {k}")]
    NotSquare { row: usize, len: usize, k: usize },
    #[error("entry ({row},{col}) is {value}, expected 0 or 1")]
    NonBinaryEntry { row: usize, col: usize, value: u8 },
    #[error("symbol {0} has an empty row or column")]
    StrandedSymbol(usize),
    #[error("no power M^N with N <= {bound} is positive")]
    NotPrimitive { bound: usize },
    #[error("symbol {0} is outside the alphabet")]
    UnknownSymbol(Symbol),
    #[error("transition {from} -> {to} is not allowed")]
    Inadmissible { from: Symbol, to: Symbol },
    #[error("word {0:?} is not admissible")]
    NotAdmissible(Vec<Symbol>),
    #[error("word {0:?} is not cyclically admissible")]
    NotCyclic(Vec<Symbol>),
    #[error("period words must be nonempty")]
    EmptyPeriod,
    #[error("points live on alphabets of size {0} and {1}")]
    AlphabetMismatch(usize, usize),
    #[error("no bracket: x_0 = {x0} but z_0 = {z0}")]
    NoBracket { x0: Symbol, z0: Symbol },
    #[error("splice junction {from} -> {to} at coordinate {at} is not allowed")]
    BadSplice { from: Symbol, to: Symbol, at: i64 },
    #[error("closing failed: junction x_{{k-1}} = {from} -> x_0 = {to} is not allowed")]
    ClosingFailed { from: Symbol, to: Symbol },
    #[error("closing needs dist(x, f^k x) <= nu, but x and f^k x differ at 0")]
    ClosingPrecondition,
    #[error("period must be at least 1")]
    ZeroPeriod,
    #[error("nu must lie in (0,1), got {0}")]
    BadNu(f64),
}

/// The metric `dist(x,y) = nu^n(x,y)` with `n(x,y) = min{|i| : x_i != y_i}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShiftMetric {
    nu: f64,
}

impl Default for ShiftMetric {
    fn default() -> Self {
        Self { nu: 0.5 }
    }
}

impl TryFrom<f64> for ShiftMetric {
    type Error = SftError;
    fn try_from(nu: f64) -> Result<Self, SftError> {
        Self::new(nu)
    }
}

impl From<ShiftMetric> for f64 {
    fn from(m: ShiftMetric) -> f64 {
        m.nu
    }
}

impl ShiftMetric {
    pub fn new(nu: f64) -> Result<Self, SftError> {
        if nu > 0.0 && nu < 1.0 {
            Ok(Self { nu })
        } else {
            Err(SftError::BadNu(nu))
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `nu^n`.
    pub fn radius(&self, n: u64) -> f64 {
        self.nu.powf(n as f64)
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64, SftError> {
        Ok(agreement(x, y)?.map_or(0.0, |n| self.radius(n)))
    }
}

/// `n(x,y) = min{|i| : x_i != y_i}`, or `None` when `x = y`.
pub fn agreement(x: &Point, y: &Point) -> Result<Option<u64>, SftError> {
    if x.alphabet() != y.alphabet() {
        return Err(SftError::AlphabetMismatch(x.alphabet(), y.alphabet()));
    }
    if x == y {
        return Ok(None);
    }
    let radius = x.scan_radius(y);
    for t in 0..=radius {
        if x.coord(t) != y.coord(t) || x.coord(-t) != y.coord(-t) {
            return Ok(Some(t as u64));
        }
    }
    unreachable!("distinct canonical points differ within the scan radius")
}

pub fn shift(x: &Point, n: i64) -> Point {
    x.shift(n)
}

pub fn distance(x: &Point, y: &Point, m: &ShiftMetric) -> Result<f64, SftError> {
    m.distance(x, y)
}

/// `y` in `W^s_loc(x)`: `y_i = x_i` for every `i >= 0`.
pub fn is_in_local_stable(x: &Point, y: &Point) -> bool {
    x.alphabet() == y.alphabet() && (0..=x.scan_radius(y)).all(|i| x.coord(i) == y.coord(i))
}

/// `y` in `W^u_loc(x)`: `y_i = x_i` for every `i <= 0`.
pub fn is_in_local_unstable(x: &Point, y: &Point) -> bool {
    x.alphabet() == y.alphabet() && (0..=x.scan_radius(y)).all(|i| x.coord(-i) == y.coord(-i))
}

/// The sequence equal to `past` on `i <= cut` and to `future` on `i > cut`.
pub fn splice(m: &TransitionMatrix, past: &Point, future: &Point, cut: i64) -> Result<Point, SftError> {
    if past.alphabet() != future.alphabet() {
        return Err(SftError::AlphabetMismatch(past.alphabet(), future.alphabet()));
    }
    let (from, to) = (past.coord(cut), future.coord(cut + 1));
    if !m.allowed(from, to) {
        return Err(SftError::BadSplice { from, to, at: cut });
    }
    let a = past.core_lo().min(cut + 1);
    let b = future.core_hi().max(cut);
    let q = past.left_period().len() as i64;
    let p = future.right_period().len() as i64;
    let left = (a - q..a).map(|i| past.coord(i)).collect();
    let right = (b + 1..=b + p).map(|i| future.coord(i)).collect();
    let core = (a..=b)
        .map(|i| if i <= cut { past.coord(i) } else { future.coord(i) })
        .collect();
    Ok(Point::raw(past.alphabet(), left, core, a, right).canonical())
}

/// The local product `[x, z]`: agrees with `x` on `i >= 0` and with `z` on `i <= 0`.
pub fn bracket(m: &TransitionMatrix, x: &Point, z: &Point) -> Result<Point, SftError> {
    if x.alphabet() != z.alphabet() {
        return Err(SftError::AlphabetMismatch(x.alphabet(), z.alphabet()));
    }
    let (x0, z0) = (x.coord(0), z.coord(0));
    if x0 != z0 {
        return Err(SftError::NoBracket { x0, z0 });
    }
    splice(m, z, x, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> TransitionMatrix {
        TransitionMatrix::golden_mean()
    }

    /// Small exhaustive set of eventually periodic points on the golden mean shift.
    fn sample_points(m: &TransitionMatrix) -> Vec<Point> {
        let mut pts = Vec::new();
        let periods = [vec![0u8], vec![0, 1], vec![0, 0, 1]];
        for core in m.admissible_words(3) {
            for l in &periods {
                for r in &periods {
                    if let Ok(p) = Point::new(m, l.clone(), core.clone(), -1, r.clone()) {
                        pts.push(p);
                    }
                }
            }
        }
        pts.sort();
        pts.dedup();
        pts
    }

    fn scan_agreement(x: &Point, y: &Point, depth: i64) -> Option<u64> {
        (0..=depth).find(|&t| x.coord(t) != y.coord(t) || x.coord(-t) != y.coord(-t)).map(|t| t as u64)
    }

    #[test]
    fn distance_examples() {
        let m = TransitionMatrix::full_shift(2).unwrap();
        let metric = ShiftMetric::default();
        let x = Point::periodic(&m, &[0]).unwrap();
        let y = Point::new(&m, vec![0], vec![1], 0, vec![0]).unwrap();
        assert_eq!(metric.distance(&x, &x).unwrap(), 0.0);
        assert_eq!(metric.distance(&x, &y).unwrap(), 1.0);
        let z = Point::new(&m, vec![0], vec![1], 4, vec![0]).unwrap();
        let w = Point::new(&m, vec![0], vec![1], -4, vec![0]).unwrap();
        assert_eq!(agreement(&x, &z).unwrap(), Some(4));
        assert_eq!(agreement(&z, &w).unwrap(), Some(4));
        // agree exactly on |i| <= 3
        assert_eq!(metric.distance(&x, &z).unwrap(), 0.0625);
        let u = Point::new(&m, vec![1], vec![0; 7], -3, vec![1]).unwrap();
        assert_eq!(metric.distance(&x, &u).unwrap(), 0.0625);
    }

    #[test]
    fn distance_matches_deep_scan() {
        let m = golden();
        let pts = sample_points(&m);
        for x in &pts {
            for y in &pts {
                assert_eq!(agreement(x, y).unwrap(), scan_agreement(x, y, 64));
            }
        }
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let a = Point::periodic(&golden(), &[0]).unwrap();
        let b = Point::periodic(&TransitionMatrix::full_shift(3).unwrap(), &[0]).unwrap();
        assert!(matches!(agreement(&a, &b), Err(SftError::AlphabetMismatch(2, 3))));
    }

    #[test]
    fn ultrametric_on_exhaustive_triples() {
        let m = golden();
        let metric = ShiftMetric::new(0.3).unwrap();
        let pts = sample_points(&m);
        let pts: Vec<_> = pts.iter().step_by(3).collect();
        for x in &pts {
            for y in &pts {
                let dxy = metric.distance(x, y).unwrap();
                assert_eq!(dxy, metric.distance(y, x).unwrap());
                for z in &pts {
                    let dxz = metric.distance(x, z).unwrap();
                    let dyz = metric.distance(y, z).unwrap();
                    assert!(dxz <= dxy.max(dyz));
                }
            }
        }
    }

    #[test]
    fn stable_pairs_contract_under_shift() {
        let m = golden();
        let metric = ShiftMetric::default();
        let pts = sample_points(&m);
        for x in &pts {
            for y in &pts {
                if x == y || !is_in_local_stable(x, y) {
                    continue;
                }
                let d = metric.distance(x, y).unwrap();
                for n in 0..6 {
                    let dn = metric.distance(&x.shift(n), &y.shift(n)).unwrap();
                    assert_eq!(dn, d * metric.radius(n as u64));
                }
            }
        }
    }

    #[test]
    fn bracket_lands_in_both_local_sets() {
        let m = golden();
        let pts = sample_points(&m);
        let mut checked = 0;
        for x in &pts {
            for z in &pts {
                match bracket(&m, x, z) {
                    Ok(y) => {
                        assert!(is_in_local_stable(x, &y));
                        assert!(is_in_local_unstable(z, &y));
                        assert_eq!(bracket(&m, &y, z).unwrap(), y);
                        checked += 1;
                    }
                    Err(e) => {
                        assert_ne!(x.coord(0), z.coord(0));
                        assert!(matches!(e, SftError::NoBracket { .. }));
                    }
                }
            }
            assert_eq!(bracket(&m, x, x).unwrap(), *x);
        }
        assert!(checked > 100);
    }

    #[test]
    fn splice_rejects_forbidden_junction() {
        let m = golden();
        let ones = Point::new(&m, vec![0], vec![1], 0, vec![0]).unwrap();
        assert!(splice(&m, &ones, &ones, -1).is_ok());
        assert!(matches!(splice(&m, &ones, &ones.shift(-1), 0), Err(SftError::BadSplice { .. })));
    }

    #[test]
    fn metric_validation() {
        assert!(ShiftMetric::new(0.0).is_err());
        assert!(ShiftMetric::new(1.0).is_err());
        assert_eq!(ShiftMetric::default().nu(), 0.5);
    }
}
