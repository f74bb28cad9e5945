use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linops::{singular_values_2x2, spectral_norm, Matrix};
use crate::sft::{ShiftMetric, Symbol};

use super::{encode, Generator};

/// Witness that `Q_A(x,n) nu^(beta|n|) < L theta^|n|` for every `x` and `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BunchingCertificate {
    pub l: f64,
    pub theta: f64,
    pub witness_n: usize,
    /// `q_0 ..= q_witness_n`.
    pub q: Vec<f64>,
}

impl BunchingCertificate {
    /// Recomputes `q_n` for `n <= horizon` and checks `q_n < L theta^n`.
    pub fn verify(&self, g: &Generator, metric: &ShiftMetric, horizon: usize) -> bool {
        bunching_sequence(g, metric, horizon)
            .iter()
            .enumerate()
            .all(|(n, &q)| q < self.l * self.theta.powi(n as i32))
    }
}

/// The horizon ran out before any `q_n` dropped below 1.
#[derive(Debug, Clone, PartialEq, Serialize, Error)]
#[error("not fiber bunched within horizon {}", q.len() - 1)]
pub struct NotCertified {
    /// `q_0 ..= q_horizon`.
    pub q: Vec<f64>,
}

/// `q_n = max_x Q_A(x,n) nu^(beta n)` for `n = 0..=horizon`, exact over the
/// admissible words of length `n + 2r` that determine `A_x^n`.
pub fn bunching_sequence(g: &Generator, metric: &ShiftMetric, horizon: usize) -> Vec<f64> {
    let mut q = vec![1.0];
    for n in 1..=horizon {
        q.push(max_distortion(g, n) * metric.radius(n as u64).powf(g.beta()));
    }
    q
}

/// First `n` with `q_n < 1` gives `theta = q_n^(1/n)` and
/// `L = max_{j<n} q_j / theta^j`, slightly inflated so the inequality is strict.
/// Submultiplicativity of `q` carries the bound to every `n`.
pub fn certify_fiber_bunching(
    g: &Generator,
    metric: &ShiftMetric,
    horizon: usize,
) -> Result<BunchingCertificate, NotCertified> {
    let mut q = vec![1.0];
    for n in 1..=horizon {
        let qn = max_distortion(g, n) * metric.radius(n as u64).powf(g.beta());
        q.push(qn);
        if qn < 1.0 {
            let theta = qn.powf(1.0 / n as f64);
            let l = (0..n)
                .map(|j| q[j] / theta.powi(j as i32))
                .fold(1.0_f64, f64::max)
                * (1.0 + 1e-9);
            return Ok(BunchingCertificate { l, theta, witness_n: n, q });
        }
    }
    Err(NotCertified { q })
}

/// `max_x Q_A(x,n)` over all admissible words of length `n + 2r`.
pub(crate) fn max_distortion(g: &Generator, n: usize) -> f64 {
    let m = g.transition_matrix();
    let w = g.window_len();
    let starts = m.admissible_words(w);
    starts
        .par_iter()
        .map(|start| {
            let mut search = Search::new(g, n);
            let first = g.value(start);
            search.descend(start.clone(), first.matrix().clone(), first.inverse_matrix().clone(), 1);
            search.best
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(1.0, f64::max)
}

struct Search<'a> {
    g: &'a Generator,
    n: usize,
    best: f64,
}

impl<'a> Search<'a> {
    fn new(g: &'a Generator, n: usize) -> Self {
        Self { g, n, best: 1.0 }
    }

    /// `word` holds the coordinates seen so far; `prod` is the product of the
    /// `steps` windows it contains.
    fn descend(&mut self, word: Vec<Symbol>, prod: Matrix, inv: Matrix, steps: usize) {
        if steps == self.n {
            self.best = self.best.max(distortion(&prod, &inv));
            return;
        }
        let m = self.g.transition_matrix();
        let k = m.symbol_count();
        let w = self.g.window_len();
        let last = *word.last().expect("nonempty");
        for s in m.successors(last) {
            let mut next = word.clone();
            next.push(s);
            let code = encode(&next[next.len() - w..], k);
            let a = self.g.table[code].as_ref().expect("admissible window");
            self.descend(next, a.matrix() * &prod, &inv * a.inverse_matrix(), steps + 1);
        }
    }
}

fn distortion(prod: &Matrix, inv: &Matrix) -> f64 {
    if prod.nrows() == 2 {
        let (smax, smin) = singular_values_2x2(prod[(0, 0)], prod[(0, 1)], prod[(1, 0)], prod[(1, 1)]);
        // |A^-1| = 1/sigma_min(A); use the cached inverse when sigma_min underflows
        if smin > 0.0 {
            return smax / smin;
        }
    }
    spectral_norm(prod) * spectral_norm(inv)
}
