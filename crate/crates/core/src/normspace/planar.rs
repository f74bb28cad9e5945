//! Exact suprema for norms on `R^2`.
//!
//! With `v = (cos t, sin t)` and `s = 2t`, the square `|A v|^2` of a
//! pulled-back Euclidean norm is the sinusoid `a + b cos s + c sin s`, where
//! `AᵀA = [[p, q], [q, r]]`, `a = (p+r)/2`, `b = (p-r)/2`, `c = q`. A
//! max-of-generators norm squared is the upper envelope of such sinusoids,
//! and two of them cross at most twice, so envelopes have linearly many arcs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use crate::linops::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Sinusoid {
    a: f64,
    b: f64,
    c: f64,
}

impl Sinusoid {
    pub(crate) fn of(m: &Matrix) -> Self {
        let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let p = m00 * m00 + m10 * m10;
        let r = m01 * m01 + m11 * m11;
        let q = m00 * m01 + m10 * m11;
        Self { a: 0.5 * (p + r), b: 0.5 * (p - r), c: q }
    }

    #[inline]
    pub(crate) fn at(&self, s: f64) -> f64 {
        let (sn, cs) = s.sin_cos();
        self.a + self.b * cs + self.c * sn
    }
}

/// Solutions in `[0, 2π)` of `alpha + beta cos s + gamma sin s = 0`.
fn trig_roots(alpha: f64, beta: f64, gamma: f64) -> Vec<f64> {
    let rho = beta.hypot(gamma);
    let scale = alpha.abs().max(rho);
    if scale == 0.0 || rho <= 1e-15 * scale || alpha.abs() > rho {
        return Vec::new();
    }
    let phase = gamma.atan2(beta);
    let spread = (-alpha / rho).clamp(-1.0, 1.0).acos();
    let mut roots: Vec<f64> = [phase - spread, phase + spread].iter().map(|s| s.rem_euclid(TAU)).collect();
    if (roots[0] - roots[1]).abs() < 1e-15 {
        roots.pop();
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Arc {
    s0: f64,
    s1: f64,
    owner: usize,
}

/// Upper envelope of a nonempty family of sinusoids over `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Envelope {
    funcs: Vec<Sinusoid>,
    arcs: Vec<Arc>,
}

impl Envelope {
    pub(crate) fn new(first: Sinusoid) -> Self {
        Self { funcs: vec![first], arcs: vec![Arc { s0: 0.0, s1: TAU, owner: 0 }] }
    }

    pub(crate) fn from_matrices<'a>(mats: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let mut it = mats.into_iter();
        let mut env = Self::new(Sinusoid::of(it.next().expect("nonempty generator set")));
        for m in it {
            env.insert(Sinusoid::of(m));
        }
        env
    }

    #[cfg(test)]
    pub(crate) fn value(&self, s: f64) -> f64 {
        self.funcs.iter().map(|f| f.at(s)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Splits every arc where `f` rises above its owner.
    pub(crate) fn insert(&mut self, f: Sinusoid) {
        let idx = self.funcs.len();
        self.funcs.push(f);
        let mut out: Vec<Arc> = Vec::with_capacity(self.arcs.len() + 2);
        for arc in &self.arcs {
            let h = self.funcs[arc.owner];
            let mut cuts = vec![arc.s0];
            let mut inner: Vec<f64> = trig_roots(f.a - h.a, f.b - h.b, f.c - h.c)
                .into_iter()
                .filter(|&s| s > arc.s0 && s < arc.s1)
                .collect();
            inner.sort_by(f64::total_cmp);
            cuts.extend(inner);
            cuts.push(arc.s1);
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let owner = if f.at(mid) > h.at(mid) { idx } else { arc.owner };
                match out.last_mut() {
                    Some(last) if last.owner == owner => last.s1 = w[1],
                    _ => out.push(Arc { s0: w[0], s1: w[1], owner }),
                }
            }
        }
        self.arcs = out;
    }

    /// `sup_s f(s) / self(s)`.
    pub(crate) fn sup_ratio_of(&self, f: &Sinusoid) -> f64 {
        self.arcs
            .iter()
            .map(|arc| piece_sup(f, &self.funcs[arc.owner], arc.s0, arc.s1))
            .fold(0.0, f64::max)
    }

    /// `sup_s self(s) / other(s)`, over the common refinement of the two arc lists.
    pub(crate) fn sup_ratio(&self, other: &Envelope) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut best: f64 = 0.0;
        let mut s0 = 0.0;
        while i < self.arcs.len() && j < other.arcs.len() {
            let (a, b) = (self.arcs[i], other.arcs[j]);
            let s1 = a.s1.min(b.s1);
            if s1 > s0 {
                best = best.max(piece_sup(&self.funcs[a.owner], &other.funcs[b.owner], s0, s1));
            }
            s0 = s1;
            if a.s1 <= s1 {
                i += 1;
            }
            if b.s1 <= s1 {
                j += 1;
            }
        }
        best
    }

    /// `sup_s |sqrt(self(s)) - sqrt(other(s))|` to within `gap`, as `(lo, hi)`.
    ///
    /// On each piece of the common refinement both envelopes are single
    /// sinusoids, so the difference of roots is smooth with a computable
    /// bound `M` on its second derivative, and a cell `[s0, s1]` can exceed
    /// its endpoint values by at most `M (s1 - s0)^2 / 8`. Cells are split
    /// best-first until the bound is within `gap` of the best value seen.
    pub(crate) fn sup_root_gap(&self, other: &Envelope, gap: f64) -> (f64, f64) {
        let mut heap = BinaryHeap::new();
        let mut lo: f64 = 0.0;
        let (mut i, mut j) = (0, 0);
        let mut s0 = 0.0;
        while i < self.arcs.len() && j < other.arcs.len() {
            let (a, b) = (self.arcs[i], other.arcs[j]);
            let s1 = a.s1.min(b.s1);
            if s1 > s0 {
                let piece = RootGap { g: self.funcs[a.owner], h: other.funcs[b.owner] };
                let (v0, v1) = (piece.at(s0), piece.at(s1));
                lo = lo.max(v0).max(v1);
                heap.push(piece.cell(s0, s1, v0, v1));
            }
            s0 = s1;
            if a.s1 <= s1 {
                i += 1;
            }
            if b.s1 <= s1 {
                j += 1;
            }
        }
        let mut steps = 0;
        while let Some(top) = heap.peek() {
            if top.ub - lo <= gap || steps > 1_000_000 {
                break;
            }
            let cell = heap.pop().expect("peeked");
            steps += 1;
            let mid = 0.5 * (cell.s0 + cell.s1);
            let vm = cell.piece.at(mid);
            lo = lo.max(vm);
            heap.push(cell.piece.cell(cell.s0, mid, cell.v0, vm));
            heap.push(cell.piece.cell(mid, cell.s1, vm, cell.v1));
        }
        let hi = heap.peek().map_or(lo, |c| c.ub.max(lo));
        (lo, hi)
    }
}

/// `|sqrt(g) - sqrt(h)|` on a piece where both envelopes are single sinusoids.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RootGap {
    g: Sinusoid,
    h: Sinusoid,
}

impl RootGap {
    fn at(&self, s: f64) -> f64 {
        (self.g.at(s).max(0.0).sqrt() - self.h.at(s).max(0.0).sqrt()).abs()
    }

    /// Bound on `|(sqrt f)''|`: with amplitude `ρ` and minimum `m = a - ρ`,
    /// `(sqrt f)'' = f''/(2 sqrt f) - f'^2/(4 f^{3/2})` and `|f'|, |f''| <= ρ`.
    fn curvature(f: &Sinusoid) -> f64 {
        let rho = f.b.hypot(f.c);
        let m = f.a - rho;
        if rho == 0.0 {
            0.0
        } else if m <= 0.0 {
            f64::INFINITY
        } else {
            rho / (2.0 * m.sqrt()) + rho * rho / (4.0 * m.powf(1.5))
        }
    }

    fn cell(&self, s0: f64, s1: f64, v0: f64, v1: f64) -> Cell {
        let m = Self::curvature(&self.g) + Self::curvature(&self.h);
        let w = s1 - s0;
        let bump = if m == 0.0 { 0.0 } else { m * w * w / 8.0 };
        Cell { ub: v0.max(v1) + bump, s0, s1, v0, v1, piece: *self }
    }
}

#[derive(Debug, PartialEq)]
struct Cell {
    ub: f64,
    s0: f64,
    s1: f64,
    v0: f64,
    v1: f64,
    piece: RootGap,
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.ub.total_cmp(&o.ub)
    }
}

/// `sup g/h` on `[s0, s1]`: the derivative of `g/h` vanishes where
/// `(b2 c1 - b1 c2) + (a1 b2 - a2 b1) sin s + (a2 c1 - a1 c2) cos s = 0`.
fn piece_sup(g: &Sinusoid, h: &Sinusoid, s0: f64, s1: f64) -> f64 {
    let ratio = |s: f64| g.at(s) / h.at(s);
    let mut best = ratio(s0).max(ratio(s1));
    let kappa = h.b * g.c - g.b * h.c;
    let sin_coef = g.a * h.b - h.a * g.b;
    let cos_coef = h.a * g.c - g.a * h.c;
    for s in trig_roots(kappa, cos_coef, sin_coef) {
        if s > s0 && s < s1 {
            best = best.max(ratio(s));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix {
        loop {
            let m = Matrix::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
            if m.determinant().abs() > 0.2 {
                return m;
            }
        }
    }

    /// Grid maximum over `[0, 2π)`, refined twice around the best node so
    /// that corner peaks of the envelopes are resolved.
    fn grid_sup(n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (mut lo, mut width) = (0.0, TAU);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..3 {
            let step = width / n as f64;
            let (k, v) = (0..=n)
                .map(|k| (k, f(lo + step * k as f64)))
                .fold((0, f64::NEG_INFINITY), |acc, kv| if kv.1 > acc.1 { kv } else { acc });
            best = best.max(v);
            lo += step * (k as f64 - 1.0);
            width = 2.0 * step;
        }
        best
    }

    #[test]
    fn sinusoid_is_squared_norm() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let f = Sinusoid::of(&m);
        for k in 0..16 {
            let t = 0.37 * k as f64;
            let v = nalgebra::DVector::from_column_slice(&[t.cos(), t.sin()]);
            assert!(((&m * v).norm_squared() - f.at(2.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn roots_solve_the_equation() {
        for (a, b, c) in [(0.3, 1.0, -0.5), (-0.9, 0.2, 1.1), (0.0, 1.0, 0.0)] {
            let roots = trig_roots(a, b, c);
            assert!(!roots.is_empty());
            for s in roots {
                assert!((a + b * s.cos() + c * s.sin()).abs() < 1e-12);
            }
        }
        assert!(trig_roots(2.0, 1.0, 1.0).is_empty());
    }

    #[test]
    fn envelope_matches_pointwise_max_and_grid_suprema() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let n1 = rng.gen_range(1..7);
            let n2 = rng.gen_range(1..7);
            let g: Vec<Matrix> = (0..n1).map(|_| random_matrix(&mut rng)).collect();
            let h: Vec<Matrix> = (0..n2).map(|_| random_matrix(&mut rng)).collect();
            let eg = Envelope::from_matrices(&g);
            let eh = Envelope::from_matrices(&h);
            for arc in &eg.arcs {
                let mid = 0.5 * (arc.s0 + arc.s1);
                assert!((eg.funcs[arc.owner].at(mid) - eg.value(mid)).abs() < 1e-12);
            }
            let exact = eg.sup_ratio(&eh);
            let grid = grid_sup(20_000, |s| eg.value(s) / eh.value(s));
            assert!(exact >= grid - 1e-12);
            assert!(exact <= grid * (1.0 + 1e-9), "{exact} {grid}");
            let single = Sinusoid::of(&g[0]);
            let exact1 = eh.sup_ratio_of(&single);
            let grid1 = grid_sup(20_000, |s| single.at(s) / eh.value(s));
            assert!(exact1 >= grid1 - 1e-12 && exact1 <= grid1 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn root_gap_encloses_grid_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let g: Vec<Matrix> = (0..3).map(|_| random_matrix(&mut rng)).collect();
            let h: Vec<Matrix> = (0..2).map(|_| random_matrix(&mut rng)).collect();
            let eg = Envelope::from_matrices(&g);
            let eh = Envelope::from_matrices(&h);
            let (lo, hi) = eg.sup_root_gap(&eh, 1e-10);
            let grid = grid_sup(20_000, |s| (eg.value(s).sqrt() - eh.value(s).sqrt()).abs());
            assert!(lo <= hi && hi - lo <= 1e-9);
            assert!(grid <= hi + 1e-12 && grid >= lo - 1e-9, "{lo} {hi} {grid}");
        }
    }
}
