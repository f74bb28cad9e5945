use serde::Serialize;

use crate::linops::{spectral_norm, Matrix};
use crate::sft::{agreement, is_in_local_stable, is_in_local_unstable, Point, ShiftMetric, Symbol};

use super::{encode, BunchingCertificate, CocycleError, Generator};

/// Which local leaf a pair of points shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Leaf {
    Stable,
    Unstable,
}

/// Exact holonomy defects of a locally constant generator.
///
/// For a stable pair (`y_i = x_i` for `i >= 0`) the defect is
/// `sup_{n >= 0} |(A_y^n)^-1 A_x^n - I|`; for an unstable pair it is
/// `sup_{n >= 0} |(A_y^-n)^-1 A_x^-n - I|`. Both depend only on the
/// agreement radius `n(x,y)` through finitely many windows, so the maxima
/// below are taken over complete word enumerations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessProfile {
    /// `stable[n0 - 1]`: largest stable defect over pairs with `n(x,y) = n0`, `n0 = 1..=r`.
    pub stable: Vec<f64>,
    pub unstable: Vec<f64>,
    /// Smallest `c` with defect `<= c dist(x,y)^beta` on both leaves.
    pub c: f64,
    pub beta: f64,
    pub nu: f64,
}

impl ClosenessProfile {
    /// Largest defect over pairs (either leaf) with `n(x,y) >= n0`; zero beyond the depth.
    pub fn modulus(&self, n0: u64) -> f64 {
        let start = n0.max(1) as usize - 1;
        (start..self.stable.len())
            .map(|i| self.stable[i].max(self.unstable[i]))
            .fold(0.0, f64::max)
    }

    /// The smaller of `c nu^(beta n0)` and the exact modulus at `n0`.
    pub fn bound(&self, n0: u64) -> f64 {
        (self.c * self.nu.powf(self.beta * n0 as f64)).min(self.modulus(n0))
    }
}

pub fn closeness_profile(g: &Generator, metric: &ShiftMetric) -> ClosenessProfile {
    let r = g.depth();
    let mut stable = Vec::with_capacity(r);
    let mut unstable = Vec::with_capacity(r);
    for n0 in 1..=r {
        stable.push(max_stable_defect(g, n0));
        unstable.push(max_unstable_defect(g, n0));
    }
    let beta = g.beta();
    let c = (1..=r)
        .map(|n0| stable[n0 - 1].max(unstable[n0 - 1]) / metric.radius(n0 as u64).powf(beta))
        .fold(0.0, f64::max);
    ClosenessProfile { stable, unstable, c, beta, nu: metric.nu() }
}

/// Stable pairs with `n(x,y) = n0 <= r`: windows `j = 0 .. r-n0` differ, later ones agree.
/// Coordinates `[-r, 2r - n0]` of `x` are free; `y` replaces `[-r, -n0]`.
fn max_stable_defect(g: &Generator, n0: usize) -> f64 {
    let m = g.transition_matrix();
    let r = g.depth();
    let steps = r - n0 + 1;
    let x_len = 3 * r - n0 + 1;
    let y_len = r - n0 + 1;
    let ys = m.admissible_words(y_len);
    let mut best: f64 = 0.0;
    m.for_each_word(x_len, |xw| {
        for yp in &ys {
            // y_{-n0} differs from x_{-n0} and must feed into x_{-n0+1}
            if yp[y_len - 1] == xw[y_len - 1] || !m.allowed(yp[y_len - 1], xw[y_len]) {
                continue;
            }
            let mut yw = yp.clone();
            yw.extend_from_slice(&xw[y_len..]);
            best = best.max(forward_defect(g, xw, &yw, steps));
        }
    });
    best
}

/// Unstable pairs with `n(x,y) = n0 <= r`: windows of `f^-j` for `j = 1 .. r-n0` differ.
/// Coordinates `[-(r-n0) - r, r-1]` of `x` are free; `y` replaces `[n0, r-1]`.
fn max_unstable_defect(g: &Generator, n0: usize) -> f64 {
    let m = g.transition_matrix();
    let r = g.depth();
    let steps = r - n0;
    if steps == 0 {
        return 0.0;
    }
    let x_len = 2 * r - n0 + r;
    let y_len = r - n0;
    let split = x_len - y_len;
    let ys = m.admissible_words(y_len);
    let mut best: f64 = 0.0;
    m.for_each_word(x_len, |xw| {
        for ys_ in &ys {
            if ys_[0] == xw[split] || !m.allowed(xw[split - 1], ys_[0]) {
                continue;
            }
            let mut yw = xw[..split].to_vec();
            yw.extend_from_slice(ys_);
            best = best.max(backward_defect(g, xw, &yw, steps));
        }
    });
    best
}

/// `max_{1 <= n <= steps} |(A_y^n)^-1 A_x^n - I|` where window `j` of a word
/// starts at offset `j`.
fn forward_defect(g: &Generator, xw: &[Symbol], yw: &[Symbol], steps: usize) -> f64 {
    let k = g.transition_matrix().symbol_count();
    let w = g.window_len();
    let d = g.dim();
    let id = Matrix::identity(d, d);
    let mut px = Matrix::identity(d, d);
    let mut py_inv = Matrix::identity(d, d);
    let mut best: f64 = 0.0;
    for j in 0..steps {
        let ax = g.table[encode(&xw[j..j + w], k)].as_ref().expect("admissible");
        let ay = g.table[encode(&yw[j..j + w], k)].as_ref().expect("admissible");
        px = ax.matrix() * px;
        py_inv = py_inv * ay.inverse_matrix();
        best = best.max(spectral_norm(&(&py_inv * &px - &id)));
    }
    best
}

/// `max_{1 <= n <= steps} |A_{f^-n y}^n (A_{f^-n x}^n)^-1 - I|` where the window of
/// `f^-j` is the `j`-th window counted from the right end of the word.
fn backward_defect(g: &Generator, xw: &[Symbol], yw: &[Symbol], steps: usize) -> f64 {
    let k = g.transition_matrix().symbol_count();
    let w = g.window_len();
    let d = g.dim();
    let id = Matrix::identity(d, d);
    let mut py = Matrix::identity(d, d);
    let mut px_inv = Matrix::identity(d, d);
    let len = xw.len();
    let mut best: f64 = 0.0;
    for j in 1..=steps {
        let lo = len - w - (j - 1);
        let ax = g.table[encode(&xw[lo..lo + w], k)].as_ref().expect("admissible");
        let ay = g.table[encode(&yw[lo..lo + w], k)].as_ref().expect("admissible");
        py = py * ay.matrix();
        px_inv = ax.inverse_matrix() * px_inv;
        best = best.max(spectral_norm(&(&py * &px_inv - &id)));
    }
    best
}

/// Defect sequence of a single pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub leaf: Leaf,
    /// `defects[n-1] = |(A_y^n)^-1 A_x^n - I|` (with `-n` on the unstable leaf).
    pub defects: Vec<f64>,
    pub sup_defect: f64,
    /// `sup_defect / dist(x,y)^beta`; zero when `x = y`.
    pub fitted_c: f64,
    /// `max |D_{n+1} - D_n| / theta^n` over the first half of the sequence.
    pub increment_constant: f64,
    /// Whether the second half of the increments obeys the same geometric bound.
    pub geometric: bool,
}

/// Runs the defect sequence for a pair on a common local leaf of a
/// fiber-bunched generator.
pub fn stable_closeness_defect(
    g: &Generator,
    cert: &BunchingCertificate,
    x: &Point,
    y: &Point,
    n_max: usize,
    metric: &ShiftMetric,
    leaf: Leaf,
) -> Result<DefectReport, CocycleError> {
    let on_leaf = match leaf {
        Leaf::Stable => is_in_local_stable(x, y),
        Leaf::Unstable => is_in_local_unstable(x, y),
    };
    if !on_leaf {
        return Err(CocycleError::NotInLocalLeaf(leaf));
    }
    let d = g.dim();
    let id = Matrix::identity(d, d);
    let mut defects = Vec::with_capacity(n_max);
    let (mut px, mut py_inv) = (Matrix::identity(d, d), Matrix::identity(d, d));
    for n in 1..=n_max as i64 {
        let (ax, ay) = match leaf {
            Leaf::Stable => (g.at(x, n - 1), g.at(y, n - 1)),
            Leaf::Unstable => (g.at(x, -n), g.at(y, -n)),
        };
        match leaf {
            Leaf::Stable => {
                px = ax.matrix() * px;
                py_inv = py_inv * ay.inverse_matrix();
                defects.push(spectral_norm(&(&py_inv * &px - &id)));
            }
            Leaf::Unstable => {
                // (A_y^-n)^-1 A_x^-n = A(f^-1 y) .. A(f^-n y) A(f^-n x)^-1 .. A(f^-1 x)^-1
                px = ax.inverse_matrix() * px;
                py_inv = py_inv * ay.matrix();
                defects.push(spectral_norm(&(&py_inv * &px - &id)));
            }
        }
    }
    let sup_defect = defects.iter().copied().fold(0.0, f64::max);
    let dist = metric.distance(x, y)?;
    let fitted_c = if agreement(x, y)?.is_none() { 0.0 } else { sup_defect / dist.powf(g.beta()) };
    let increments: Vec<f64> = defects.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let half = increments.len() / 2;
    let theta = cert.theta;
    let increment_constant = increments[..half.max(1).min(increments.len())]
        .iter()
        .enumerate()
        .map(|(n, inc)| inc / theta.powi(n as i32 + 1))
        .fold(0.0, f64::max);
    let geometric = increments
        .iter()
        .enumerate()
        .skip(half)
        .all(|(n, inc)| *inc <= increment_constant * theta.powi(n as i32 + 1) + 1e-12);
    Ok(DefectReport { leaf, defects, sup_defect, fitted_c, increment_constant, geometric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{certify_fiber_bunching, CylinderTable};
    use crate::linops::OperatorValue;
    use crate::sft::{splice, TransitionMatrix};
    use approx::assert_relative_eq;

    fn varying_conjugacy(m: &TransitionMatrix) -> Generator {
        let c = CylinderTable::from_fn(m, 1, |w| {
            let s = 0.06 * w[0] as f64 - 0.04 * w[2] as f64 + 0.03 * w[1] as f64;
            OperatorValue::from_rows(2, &[1.1 + s, 0.1 - s, 0.05, 1.0 / 1.1]).unwrap()
        });
        let theta = CylinderTable::from_fn(m, 1, |w| 0.7 + 0.05 * w[0] as f64 + 0.02 * w[2] as f64);
        Generator::conjugated_rotation(m, &c, &theta).unwrap()
    }

    /// Brute force: enumerate pairs of points built from long words.
    fn brute_profile(g: &Generator, n0: usize, leaf: Leaf) -> f64 {
        let m = g.transition_matrix();
        let r = g.depth() as i64;
        let span = 3 * r as usize + 2;
        let mut best: f64 = 0.0;
        let words = m.admissible_words(span);
        for xw in &words {
            let x = Point::extending(m, xw, -(r + 1)).unwrap();
            for yw in &words {
                let y0 = Point::extending(m, yw, -(r + 1)).unwrap();
                let y = match leaf {
                    Leaf::Stable => splice(m, &y0, &x, -1),
                    Leaf::Unstable => splice(m, &x, &y0, 0),
                };
                let Ok(y) = y else { continue };
                if agreement(&x, &y).unwrap() != Some(n0 as u64) {
                    continue;
                }
                for n in 1..=(2 * r + 2) {
                    let t = match leaf {
                        Leaf::Stable => g.evaluate(&y, n).inverse().compose(&g.evaluate(&x, n)),
                        Leaf::Unstable => g.evaluate(&y, -n).inverse().compose(&g.evaluate(&x, -n)),
                    };
                    best = best.max(t.distance_to_identity_norm());
                }
            }
        }
        best
    }

    #[test]
    fn profile_matches_brute_force() {
        let m = TransitionMatrix::golden_mean();
        let metric = ShiftMetric::default();
        let g = varying_conjugacy(&m);
        assert_eq!(g.depth(), 2);
        let prof = closeness_profile(&g, &metric);
        for n0 in 1..=2 {
            assert_relative_eq!(prof.stable[n0 - 1], brute_profile(&g, n0, Leaf::Stable), epsilon = 1e-12);
            assert_relative_eq!(prof.unstable[n0 - 1], brute_profile(&g, n0, Leaf::Unstable), epsilon = 1e-12);
        }
        assert!(prof.c > 0.0);
        assert_eq!(prof.modulus(3), 0.0);
        assert!(prof.bound(1) <= prof.c * 0.5 + 1e-15);
    }

    #[test]
    fn depth_zero_has_no_defect() {
        let m = TransitionMatrix::full_shift(2).unwrap();
        let vals = [OperatorValue::identity(2), OperatorValue::diagonal(&[2.0, 1.0]).unwrap()];
        let g = Generator::per_symbol(&m, &vals).unwrap();
        let prof = closeness_profile(&g, &ShiftMetric::default());
        assert_eq!(prof.c, 0.0);
        assert_eq!(prof.modulus(1), 0.0);
    }

    #[test]
    fn defect_sequence_on_stable_pairs() {
        let m = TransitionMatrix::golden_mean();
        let metric = ShiftMetric::default();
        let g = varying_conjugacy(&m);
        let cert = certify_fiber_bunching(&g, &metric, 20).unwrap();
        let prof = closeness_profile(&g, &metric);
        let mut pairs = 0;
        // all stable pairs at distance nu^3
        for xw in m.admissible_words(9) {
            let x = Point::extending(&m, &xw, -4).unwrap();
            for yw in m.admissible_words(9) {
                let y0 = Point::extending(&m, &yw, -4).unwrap();
                let Ok(y) = splice(&m, &y0, &x, -1) else { continue };
                if agreement(&x, &y).unwrap() != Some(3) {
                    continue;
                }
                let rep = stable_closeness_defect(&g, &cert, &x, &y, 40, &metric, Leaf::Stable).unwrap();
                assert!(rep.geometric);
                assert!(rep.fitted_c.is_finite());
                assert!(rep.sup_defect <= prof.bound(3) + 1e-12);
                pairs += 1;
            }
        }
        assert!(pairs > 0);
        let x = Point::periodic(&m, &[0, 1]).unwrap();
        let same = stable_closeness_defect(&g, &cert, &x, &x, 10, &metric, Leaf::Stable).unwrap();
        assert!(same.sup_defect < 1e-12);
        let z = Point::periodic(&m, &[0]).unwrap();
        assert!(stable_closeness_defect(&g, &cert, &x, &z, 10, &metric, Leaf::Stable).is_err());
    }

    #[test]
    fn defect_at_distance_nu_is_bounded_by_c() {
        let m = TransitionMatrix::golden_mean();
        let metric = ShiftMetric::default();
        let g = varying_conjugacy(&m);
        let cert = certify_fiber_bunching(&g, &metric, 20).unwrap();
        let prof = closeness_profile(&g, &metric);
        for xw in m.admissible_words(7) {
            let x = Point::extending(&m, &xw, -3).unwrap();
            for yw in m.admissible_words(7) {
                let y0 = Point::extending(&m, &yw, -3).unwrap();
                for leaf in [Leaf::Stable, Leaf::Unstable] {
                    let y = match leaf {
                        Leaf::Stable => splice(&m, &y0, &x, -1),
                        Leaf::Unstable => splice(&m, &x, &y0, 0),
                    };
                    let Ok(y) = y else { continue };
                    let rep = stable_closeness_defect(&g, &cert, &x, &y, 12, &metric, leaf).unwrap();
                    let dist = metric.distance(&x, &y).unwrap();
                    assert!(rep.sup_defect <= prof.c * dist + 1e-12);
                }
            }
        }
    }
}
