use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{closeness_profile, Generator};
use crate::linops::{spectral_norm, Matrix, OperatorValue};
use crate::sft::{agreement, bracket, close_orbit, dense_orbit_segment, Point, ShiftMetric};

use super::{AnalysisError, PeriodicData, SLACK};

/// Largest holonomy defect `r` with `(1+r)/(1-r) <= 2`.
const DEFECT_LIMIT: f64 = 1.0 / 3.0;

/// A nearly periodic segment `w, .., f^k w` of the orbit of `z`, `w = f^n1 z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowingTrial {
    pub n1: i64,
    pub k: usize,
    pub w: Point,
    /// `n(w, f^k w)`, `None` when `f^k w = w`.
    pub agreement: Option<u64>,
    /// Holonomy defect bound for pairs at this agreement.
    pub defect_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSet {
    pub z: Point,
    pub horizon: usize,
    /// Least agreement `n0` with defect bound at most 1/3, so `delta0 = nu^n0`.
    pub n0: u64,
    pub delta0: f64,
    /// Number of qualifying pairs before sampling.
    pub available: usize,
    pub trials: Vec<ShadowingTrial>,
}

/// Pairs `(f^n1 z, k)` with `|n1| <= m`, `1 <= k <= k_max` and
/// `dist(w, f^k w) <= delta0`, taken from the orbit segment covering all
/// words of length `depth`. At most `count` pairs are kept, sampled with
/// `seed` and returned in orbit order.
pub fn shadowing_trials(
    g: &Generator,
    pd: &PeriodicData,
    count: usize,
    depth: usize,
    seed: u64,
    metric: &ShiftMetric,
) -> TrialSet {
    let profile = closeness_profile(g, metric);
    let n0 = (1..).find(|&n| profile.bound(n) <= DEFECT_LIMIT).expect("bound vanishes beyond the depth");
    let (z, horizon) = dense_orbit_segment(g.transition_matrix(), depth);
    let h = horizon as i64;
    let mut all = Vec::new();
    for n1 in -h..=h {
        let w = z.shift(n1);
        for k in 1..=pd.k_max {
            let a = agreement(&w, &w.shift(k as i64)).expect("same alphabet");
            if a.map_or(true, |a| a >= n0) {
                let defect_bound = a.map_or(0.0, |a| profile.bound(a));
                all.push(ShadowingTrial { n1, k, w: w.clone(), agreement: a, defect_bound });
            }
        }
    }
    let available = all.len();
    let trials = if available <= count {
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, available, count).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| all[i].clone()).collect()
    };
    TrialSet { z, horizon, n0, delta0: metric.radius(n0), available, trials }
}

/// The three orbit values of one trial.
struct Shadow {
    closing_holds: bool,
    a_p: OperatorValue,
    a_y: OperatorValue,
    a_w: OperatorValue,
}

fn shadow(g: &Generator, t: &ShadowingTrial, metric: &ShiftMetric) -> Result<Shadow, AnalysisError> {
    let m = g.transition_matrix();
    let cert = close_orbit(m, &t.w, t.k, metric)?;
    let p = cert.periodic_point.clone();
    let y = bracket(m, &p, &t.w)?;
    let k = t.k as i64;
    Ok(Shadow { closing_holds: cert.holds(), a_p: g.evaluate(&p, k), a_y: g.evaluate(&y, k), a_w: g.evaluate(&t.w, k) })
}

fn defect(a: &Matrix, b: &Matrix) -> f64 {
    let d = a.nrows();
    spectral_norm(&(a * b - Matrix::identity(d, d)))
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + SLACK) + SLACK
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionTrial {
    pub n1: i64,
    pub k: usize,
    pub agreement: Option<u64>,
    pub defect_bound: f64,
    /// `|(A_y^k)^-1 A_p^k - Id|`.
    pub r_py: f64,
    /// `|A_w^k (A_y^k)^-1 - Id|`.
    pub r_wy: f64,
    pub q_p: f64,
    pub q_y: f64,
    pub q_w: f64,
    pub closing_holds: bool,
    pub holds: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowingDistortionReport {
    pub c_per: f64,
    pub trials: Vec<DistortionTrial>,
    pub violations: usize,
    /// Largest `Q(w,k) / Q(p,k)`.
    pub max_ratio: f64,
    pub max_q_w: f64,
    pub passes: bool,
}

/// Checks `Q(y,k)/Q(p,k) <= (1+r)/(1-r) <= 2`, `Q(w,k)/Q(y,k) <= 2` and
/// `Q(w,k) <= 4 Q(p,k) <= 4 C_per` on every trial, with each defect `r`
/// below the closeness bound at the trial's agreement.
pub fn shadowing_distortion_check(
    g: &Generator,
    pd: &PeriodicData,
    set: &TrialSet,
    metric: &ShiftMetric,
) -> ShadowingDistortionReport {
    let trials: Vec<DistortionTrial> = set
        .trials
        .par_iter()
        .map(|t| {
            let mut out = DistortionTrial {
                n1: t.n1,
                k: t.k,
                agreement: t.agreement,
                defect_bound: t.defect_bound,
                r_py: f64::NAN,
                r_wy: f64::NAN,
                q_p: f64::NAN,
                q_y: f64::NAN,
                q_w: f64::NAN,
                closing_holds: false,
                holds: false,
                error: None,
            };
            let s = match shadow(g, t, metric) {
                Ok(s) => s,
                Err(e) => {
                    out.error = Some(e.to_string());
                    return out;
                }
            };
            out.closing_holds = s.closing_holds;
            out.r_py = defect(s.a_y.inverse_matrix(), s.a_p.matrix());
            out.r_wy = defect(s.a_w.matrix(), s.a_y.inverse_matrix());
            out.q_p = s.a_p.quasiconformal();
            out.q_y = s.a_y.quasiconformal();
            out.q_w = s.a_w.quasiconformal();
            let factor = |r: f64| (1.0 + r) / (1.0 - r);
            out.holds = s.closing_holds
                && within(out.r_py, t.defect_bound)
                && within(out.r_wy, t.defect_bound)
                && out.r_py < 1.0
                && out.r_wy < 1.0
                && within(out.q_y / out.q_p, factor(out.r_py))
                && within(factor(out.r_py), 2.0)
                && within(out.q_w / out.q_y, factor(out.r_wy))
                && within(factor(out.r_wy), 2.0)
                && within(out.q_w, 4.0 * out.q_p)
                && within(out.q_p, pd.c_per);
            out
        })
        .collect();
    let violations = trials.iter().filter(|t| !t.holds).count();
    let max_ratio = trials.iter().map(|t| t.q_w / t.q_p).fold(0.0, f64::max);
    let max_q_w = trials.iter().map(|t| t.q_w).fold(0.0, f64::max);
    ShadowingDistortionReport { c_per: pd.c_per, trials, violations, max_ratio, max_q_w, passes: violations == 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormTrial {
    pub n1: i64,
    pub k: usize,
    pub defect_bound: f64,
    /// `|(A_y^k)^-1 A_p^k - Id|` and `|(A_p^k)^-1 A_y^k - Id|`.
    pub r_py: f64,
    pub r_yp: f64,
    /// `|A_w^k (A_y^k)^-1 - Id|` and `|A_y^k (A_w^k)^-1 - Id|`.
    pub r_wy: f64,
    pub r_yw: f64,
    pub norm_y: f64,
    pub inv_norm_y: f64,
    pub norm_w: f64,
    pub inv_norm_w: f64,
    pub holds: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowingNormReport {
    pub c_prime_per: f64,
    pub trials: Vec<NormTrial>,
    pub violations: usize,
    pub max_norm_w: f64,
    pub passes: bool,
}

/// Checks `|(A_y^k)^-1| <= (1+r) |(A_p^k)^-1| <= 2 C'_per`, the same for
/// `|A_y^k|`, then `|A_w^k| <= (1+r) |A_y^k|` and
/// `|(A_w^k)^-1| <= (1+r) |(A_y^k)^-1|`, ending in both norms of `A_w^k`
/// at most `4 C'_per`.
pub fn shadowing_norm_check(
    g: &Generator,
    pd: &PeriodicData,
    set: &TrialSet,
    metric: &ShiftMetric,
) -> ShadowingNormReport {
    let c = pd.c_prime_per;
    let trials: Vec<NormTrial> = set
        .trials
        .par_iter()
        .map(|t| {
            let mut out = NormTrial {
                n1: t.n1,
                k: t.k,
                defect_bound: t.defect_bound,
                r_py: f64::NAN,
                r_yp: f64::NAN,
                r_wy: f64::NAN,
                r_yw: f64::NAN,
                norm_y: f64::NAN,
                inv_norm_y: f64::NAN,
                norm_w: f64::NAN,
                inv_norm_w: f64::NAN,
                holds: false,
                error: None,
            };
            let s = match shadow(g, t, metric) {
                Ok(s) => s,
                Err(e) => {
                    out.error = Some(e.to_string());
                    return out;
                }
            };
            out.r_py = defect(s.a_y.inverse_matrix(), s.a_p.matrix());
            out.r_yp = defect(s.a_p.inverse_matrix(), s.a_y.matrix());
            out.r_wy = defect(s.a_w.matrix(), s.a_y.inverse_matrix());
            out.r_yw = defect(s.a_y.matrix(), s.a_w.inverse_matrix());
            out.norm_y = s.a_y.norm();
            out.inv_norm_y = s.a_y.inv_norm();
            out.norm_w = s.a_w.norm();
            out.inv_norm_w = s.a_w.inv_norm();
            let b = t.defect_bound;
            out.holds = s.closing_holds
                && [out.r_py, out.r_yp, out.r_wy, out.r_yw].iter().all(|&r| within(r, b) && within(1.0 + r, 2.0))
                && within(out.inv_norm_y, (1.0 + out.r_py) * s.a_p.inv_norm())
                && within(out.norm_y, (1.0 + out.r_yp) * s.a_p.norm())
                && within(s.a_p.norm().max(s.a_p.inv_norm()), c)
                && within(out.norm_w, (1.0 + out.r_wy) * out.norm_y)
                && within(out.inv_norm_w, (1.0 + out.r_yw) * out.inv_norm_y)
                && within(out.norm_w, 4.0 * c)
                && within(out.inv_norm_w, 4.0 * c);
            out
        })
        .collect();
    let violations = trials.iter().filter(|t| !t.holds).count();
    let max_norm_w = trials.iter().map(|t| t.norm_w.max(t.inv_norm_w)).fold(0.0, f64::max);
    ShadowingNormReport { c_prime_per: c, trials, violations, max_norm_w, passes: violations == 0 }
}
