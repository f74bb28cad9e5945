//! Invariant norm families built from partial maxima
//! `φ_x^m = max {(A_x^n)*φ0 : |n| <= m}`.
//!
//! For a cocycle with relatively compact value set the partial maxima
//! converge to a norm `φ_x` with `A_x` an isometry from `φ_x` to `φ_{fx}`.
//! Here the iteration is truncated once the residual `dist(φ^m, φ^{m+1})`
//! stays below a tolerance; unbounded cocycles report divergence instead.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cocycle::{closeness_profile, Generator};
use crate::linops::OperatorValue;
use crate::normspace::{norm_distance, Envelope, Interval, NormError, NormRep, Sinusoid};
use crate::sft::{agreement, bracket, is_in_local_stable, is_in_local_unstable, Point, ShiftMetric, SftError};

/// Consecutive residuals below the tolerance needed to stop.
const STREAK: usize = 3;

/// Auxiliary bracket points added to a family so that it contains pairs on
/// common local leaves.
const MAX_BRACKETS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error("point {0:?} is not stored in the family")]
    MissingPoint(Box<Point>),
    #[error("no stored pair shares a local stable or unstable set")]
    NoPairs,
}

/// Outcome of the truncated iteration at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantNorm {
    pub norm: NormRep,
    /// Last `m` reached, so `norm = φ_x^m`.
    pub m: usize,
    pub converged: bool,
    /// Residuals stopped decreasing: the last third of the trace averages
    /// at least 0.9 times the middle third and stays above the tolerance.
    pub diverged: bool,
    /// `trace[m] ⊇ dist(φ^m, φ^{m+1})`.
    pub trace: Vec<Interval>,
}

/// `φ_x^m`, generated by `A_x^n` for `|n| <= m`.
pub fn partial_norm(g: &Generator, x: &Point, m: usize) -> NormRep {
    let mi = m as i64;
    NormRep::new(g.orbit_products(x, -mi, mi)).expect("nonempty and of one dimension")
}

/// Iterates `φ_x^m` until `dist(φ^m, φ^{m+1}) < tol` three times in a row or
/// `m = m_max`.
pub fn invariant_norm(g: &Generator, x: &Point, tol: f64, m_max: usize) -> InvariantNorm {
    let h = m_max as i64;
    let prods = g.orbit_products(x, -h, h);
    let at = |n: i64| &prods[(n + h) as usize];
    let mut phi = NormRep::euclidean(g.dim());
    let mut env = (g.dim() == 2).then(|| phi.envelope());
    let mut trace = Vec::with_capacity(m_max);
    let mut streak = 0;
    let mut m = 0;
    while m < m_max {
        let step = m as i64 + 1;
        let fresh = [at(step), at(-step)];
        let residual = match &env {
            Some(env) => planar_residual(env, &fresh),
            None => {
                let mut next = phi.clone();
                for a in fresh {
                    next.insert(a.clone());
                }
                norm_distance(&phi, &next).expect("same dimension")
            }
        };
        for a in fresh {
            if phi.insert(a.clone()) {
                if let Some(env) = env.as_mut() {
                    env.insert(Sinusoid::of(a.matrix()));
                }
            }
        }
        trace.push(residual);
        m += 1;
        streak = if residual.hi < tol { streak + 1 } else { 0 };
        if streak == STREAK {
            break;
        }
    }
    let converged = streak == STREAK;
    let diverged = !converged && stalled(&trace, tol);
    InvariantNorm { norm: phi, m, converged, diverged, trace }
}

/// `dist(φ, max(φ, |B_1 .|, |B_2 .|)) = log max(1, sup_i sup_v |B_i v| / φ(v))`.
fn planar_residual(env: &Envelope, fresh: &[&OperatorValue]) -> Interval {
    let r = fresh
        .iter()
        .map(|a| env.sup_ratio_of(&Sinusoid::of(a.matrix())))
        .fold(1.0_f64, f64::max)
        .sqrt();
    let v = r.ln();
    Interval::new((v - 1e-12).max(0.0), v + 1e-12)
}

/// Every late step still grows by `tol` and the rate has not decayed.
fn stalled(trace: &[Interval], tol: f64) -> bool {
    let n = trace.len();
    if n < 3 {
        return false;
    }
    let mean = |s: &[Interval]| s.iter().map(|i| i.hi).sum::<f64>() / s.len() as f64;
    let middle = mean(&trace[n / 3..2 * n / 3]);
    let tail = &trace[2 * n / 3..];
    let last = mean(tail);
    last >= 0.9 * middle && tail.iter().all(|i| i.hi >= tol)
}

/// Invariant norms on cylinder representatives.
#[derive(Debug, Clone, PartialEq)]
pub struct NormFamily {
    /// Periodic extensions of the admissible words of length `L`, placed on
    /// `[-⌊L/2⌋, L-1-⌊L/2⌋]`, together with their full orbits.
    pub base_points: Vec<Point>,
    /// Brackets `[x, z]` of base points, stored for the Hölder profile.
    pub auxiliary_points: Vec<Point>,
    pub norms: BTreeMap<Point, InvariantNorm>,
    pub cylinder_depth: usize,
    pub tol: f64,
    /// Largest `m` reached over all stored points.
    pub convergence_m: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Hull of the final residuals.
    pub residual: Interval,
    /// `max |A_x^n|, |(A_x^n)^-1|` over the products used; every stored norm lies in `N_K`.
    pub k: f64,
}

impl NormFamily {
    pub fn norm(&self, x: &Point) -> Option<&NormRep> {
        self.norms.get(x).map(|r| &r.norm)
    }
}

/// Builds the family on depth-`depth` cylinder representatives.
pub fn build_family(g: &Generator, depth: usize, tol: f64, m_max: usize) -> NormFamily {
    let m = g.transition_matrix();
    let lo = -(depth as i64 / 2);
    let mut base: BTreeSet<Point> = BTreeSet::new();
    for w in m.admissible_words(depth.max(1)) {
        let p = Point::extending(m, &w, lo).expect("admissible word");
        base.extend(p.orbit(p.period().expect("periodic")));
    }
    let base_points: Vec<Point> = base.iter().cloned().collect();
    let mut auxiliary: BTreeSet<Point> = BTreeSet::new();
    'outer: for x in &base_points {
        for z in &base_points {
            if let Ok(y) = bracket(m, x, z) {
                if !base.contains(&y) && auxiliary.insert(y) && auxiliary.len() == MAX_BRACKETS {
                    break 'outer;
                }
            }
        }
    }
    let auxiliary_points: Vec<Point> = auxiliary.into_iter().collect();
    let all: Vec<&Point> = base_points.iter().chain(&auxiliary_points).collect();
    let results: Vec<InvariantNorm> = all.par_iter().map(|x| invariant_norm(g, x, tol, m_max)).collect();
    let mut k: f64 = 1.0;
    for x in &all {
        let h = m_max as i64;
        for a in g.orbit_products(x, -h, h) {
            k = k.max(a.max_norm());
        }
    }
    let convergence_m = results.iter().map(|r| r.m).max().unwrap_or(0);
    let converged = results.iter().all(|r| r.converged);
    let diverged = results.iter().any(|r| r.diverged);
    let residual = results
        .iter()
        .filter_map(|r| r.trace.last())
        .fold(Interval::point(0.0), |acc, i| Interval::new(acc.lo.max(i.lo), acc.hi.max(i.hi)));
    let norms = all.into_iter().cloned().zip(results).collect();
    NormFamily {
        base_points,
        auxiliary_points,
        norms,
        cylinder_depth: depth,
        tol,
        convergence_m,
        converged,
        diverged,
        residual,
        k,
    }
}

/// Enclosure of `dist(φ_x, A(x)*φ_{fx})`.
pub fn isometry_defect(g: &Generator, family: &NormFamily, x: &Point) -> Result<Interval, InvariantError> {
    let missing = |p: &Point| InvariantError::MissingPoint(Box::new(p.clone()));
    let here = family.norm(x).ok_or_else(|| missing(x))?;
    let fx = x.shift(1);
    let there = family.norm(&fx).ok_or_else(|| missing(&fx))?;
    Ok(norm_distance(here, &there.pullback(g.at(x, 0))?)?)
}

/// Empirical Hölder constant of `x ↦ φ_x` on stored pairs sharing a local leaf.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderProfile {
    /// `max dist_lo(φ_x, φ_z) / dist(x,z)^β`.
    pub raw_c1: f64,
    /// Same after subtracting the truncation slack `6 tol` from each distance.
    pub fitted_c1: f64,
    /// Closeness constant of the generator.
    pub c: f64,
    pub k: f64,
    /// `K^10 c`.
    pub bound: f64,
    /// `fitted_c1 / bound`, zero when both vanish.
    pub bound_ratio: f64,
    pub pairs: usize,
    pub holds: bool,
}

pub fn holder_profile(g: &Generator, family: &NormFamily, metric: &ShiftMetric) -> Result<HolderProfile, InvariantError> {
    let points: Vec<&Point> = family.norms.keys().collect();
    let slack = 2.0 * STREAK as f64 * family.tol;
    let mut pairs = 0;
    let (mut raw_c1, mut fitted_c1): (f64, f64) = (0.0, 0.0);
    for (i, x) in points.iter().enumerate() {
        for z in &points[i + 1..] {
            if !(is_in_local_stable(x, z) || is_in_local_unstable(x, z)) {
                continue;
            }
            let Some(n) = agreement(x, z)? else { continue };
            pairs += 1;
            let scale = metric.radius(n).powf(g.beta());
            let d = norm_distance(&family.norms[*x].norm, &family.norms[*z].norm)?;
            raw_c1 = raw_c1.max(d.lo / scale);
            fitted_c1 = fitted_c1.max((d.lo - slack).max(0.0) / scale);
        }
    }
    if pairs == 0 {
        return Err(InvariantError::NoPairs);
    }
    let c = closeness_profile(g, metric).c;
    let bound = family.k.powi(10) * c;
    let bound_ratio = if fitted_c1 == 0.0 { 0.0 } else { fitted_c1 / bound };
    Ok(HolderProfile { raw_c1, fitted_c1, c, k: family.k, bound, bound_ratio, pairs, holds: fitted_c1 <= bound })
}
