use serde::Serialize;

use super::{agreement, Point, SftError, ShiftMetric, Symbol, TransitionMatrix};

/// Every point with `f^k p = p`, one per cyclically admissible word `p_0 .. p_{k-1}`.
pub fn periodic_points(m: &TransitionMatrix, k: usize) -> Vec<Point> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    m.for_each_word(k, |w| {
        if m.allowed(w[k - 1], w[0]) {
            out.push(Point::periodic(m, w).expect("cyclically admissible"));
        }
    });
    out
}

/// Shadowing certificate produced by [`close_orbit`].
///
/// Distances are stored as agreement radii: `per_step_bounds[i] = n(f^i x, f^i p)`,
/// `None` when the two points coincide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosingCertificate {
    pub periodic_point: Point,
    pub k: usize,
    pub d_prime: f64,
    pub gamma: f64,
    pub return_agreement: Option<u64>,
    pub per_step_bounds: Vec<Option<u64>>,
}

impl ClosingCertificate {
    /// `dist(f^i x, f^i p) <= D' dist(x, f^k x) gamma^min(i, k-i)` for every `i`,
    /// checked on agreement radii, so without rounding.
    pub fn holds(&self) -> bool {
        let Some(n) = self.return_agreement else {
            return self.per_step_bounds.iter().all(Option::is_none);
        };
        self.per_step_bounds.iter().enumerate().all(|(i, b)| match b {
            None => true,
            Some(ni) => *ni >= n + i.min(self.k - i) as u64,
        })
    }

    pub fn distances(&self, metric: &ShiftMetric) -> Vec<f64> {
        self.per_step_bounds.iter().map(|b| b.map_or(0.0, |n| metric.radius(n))).collect()
    }
}

/// Closes the orbit segment `x, ..., f^k x` by the periodic extension of
/// `x_0 .. x_{k-1}`. Requires `x_0 = x_k` (that is, `dist(x, f^k x) <= nu`).
pub fn close_orbit(
    m: &TransitionMatrix,
    x: &Point,
    k: usize,
    metric: &ShiftMetric,
) -> Result<ClosingCertificate, SftError> {
    if k == 0 {
        return Err(SftError::ZeroPeriod);
    }
    let word = x.window(0, k);
    let (from, to) = (word[k - 1], word[0]);
    if !m.allowed(from, to) {
        return Err(SftError::ClosingFailed { from, to });
    }
    let fk = x.shift(k as i64);
    let return_agreement = agreement(x, &fk)?;
    if return_agreement == Some(0) {
        return Err(SftError::ClosingPrecondition);
    }
    let p = Point::periodic(m, &word)?;
    let per_step_bounds = (0..=k as i64)
        .map(|i| agreement(&x.shift(i), &p.shift(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClosingCertificate {
        periodic_point: p,
        k,
        d_prime: 1.0,
        gamma: metric.nu(),
        return_agreement,
        per_step_bounds,
    })
}

/// A periodic point `z` and a horizon `m` such that every admissible word of
/// length `depth` occurs as `z_j .. z_{j+depth-1}` inside `[-m, m]`.
///
/// The period of `z` is a tour through all such words in lexicographic order,
/// skipping words already covered and joining the rest by shortest connectors.
pub fn dense_orbit_segment(m: &TransitionMatrix, depth: usize) -> (Point, usize) {
    if depth == 0 {
        return (Point::extending(m, &[0], 0).expect("symbol 0 has a cycle"), 0);
    }
    let words = m.admissible_words(depth);
    let mut tour: Vec<Symbol> = Vec::new();
    for w in &words {
        if contains_word(&tour, w) {
            continue;
        }
        if let Some(&last) = tour.last() {
            tour.extend(m.connector(last, w[0]));
        }
        tour.extend(w);
    }
    let lo = -(tour.len() as i64 / 2);
    let z = Point::extending(m, &tour, lo).expect("tour is admissible");
    let horizon = (-lo).max(lo + tour.len() as i64 - 1) as usize;
    (z, horizon)
}

fn contains_word(hay: &[Symbol], needle: &[Symbol]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}
