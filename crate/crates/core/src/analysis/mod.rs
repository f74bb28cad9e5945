//! Periodic data, the shadowing bounds of the dense-orbit argument, finite
//! ε-nets of the value set and a boundedness verdict.
//!
//! A nearly periodic orbit segment `w, .., f^k w` is closed by a periodic
//! point `p`; the bracket `y` of `p` and `w` lies on the local stable set of
//! `p` and the local unstable set of `w`, so `A_p^k`, `A_y^k` and `A_w^k`
//! differ by factors close to the identity. Every inequality in that chain is
//! evaluated and checked on its own.

mod net;
mod shadowing;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cocycle::{certify_fiber_bunching, BunchingCertificate, CocycleError, Generator, NotCertified};
use crate::linops::OperatorValue;
use crate::sft::{periodic_points, Point, ShiftMetric, SftError};

pub use net::{build_epsilon_net, build_epsilon_net_auto, ClassNet, Coverage, EpsilonNet, NetElement, Propagation};
pub use shadowing::{
    shadowing_distortion_check, shadowing_norm_check, shadowing_trials, DistortionTrial, NormTrial,
    ShadowingDistortionReport, ShadowingNormReport, ShadowingTrial, TrialSet,
};

/// Relative slack when comparing computed norms against bounds built from other computed norms.
pub(crate) const SLACK: f64 = 1e-12;

/// `C_per` above this level is read as unbounded growth.
pub const UNBOUNDED_LEVEL: f64 = 1e6;
/// Least slope of `log C_per(k)` per period that counts as growth.
pub const GROWTH_SLOPE: f64 = 0.05;
/// Least coefficient of determination for the growth fit.
pub const GROWTH_R2: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error("periodic data grows: C_per = {c_per:e}, C'_per = {c_prime_per:e}")]
    Unbounded { c_per: f64, c_prime_per: f64 },
    #[error("orbit segment misses admissible words of length {len}")]
    NotDense { len: usize },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
}

/// One periodic orbit value `A_p^k` with `f^k p = p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicRecord {
    pub k: usize,
    pub point: Point,
    pub q: f64,
    pub norm: f64,
    pub inv_norm: f64,
    /// `d(A_p^k, Id)`.
    pub dist_to_id: f64,
    #[serde(skip)]
    pub value: OperatorValue,
}

/// Maxima over the points of one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodSummary {
    pub k: usize,
    pub count: usize,
    pub c_per: f64,
    pub c_prime_per: f64,
}

/// `A_P` restricted to periods `k <= k_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicData {
    pub k_max: usize,
    /// Every `p` with `f^k p = p`, grouped by `k` in increasing order.
    pub records: Vec<PeriodicRecord>,
    pub per_period: Vec<PeriodSummary>,
    /// `max Q(p,k)`, at least 1.
    pub c_per: f64,
    /// `max(|A_p^k|, |(A_p^k)^-1|)`, at least 1.
    pub c_prime_per: f64,
}

/// Exhaustive over `k = 1..=k_max`; a point of primitive period `j | k`
/// appears once for every such `k`.
pub fn collect_periodic_data(g: &Generator, k_max: usize) -> PeriodicData {
    let m = g.transition_matrix();
    let per_k: Vec<Vec<PeriodicRecord>> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            periodic_points(m, k)
                .into_iter()
                .map(|p| {
                    let value = g.evaluate(&p, k as i64);
                    let id = OperatorValue::identity(g.dim());
                    PeriodicRecord {
                        k,
                        q: value.quasiconformal(),
                        norm: value.norm(),
                        inv_norm: value.inv_norm(),
                        dist_to_id: value.distance(&id),
                        point: p,
                        value,
                    }
                })
                .collect()
        })
        .collect();
    let per_period: Vec<PeriodSummary> = per_k
        .iter()
        .enumerate()
        .map(|(i, recs)| PeriodSummary {
            k: i + 1,
            count: recs.len(),
            c_per: recs.iter().map(|r| r.q).fold(1.0, f64::max),
            c_prime_per: recs.iter().map(|r| r.norm.max(r.inv_norm)).fold(1.0, f64::max),
        })
        .collect();
    let c_per = per_period.iter().map(|s| s.c_per).fold(1.0, f64::max);
    let c_prime_per = per_period.iter().map(|s| s.c_prime_per).fold(1.0, f64::max);
    PeriodicData { k_max, records: per_k.into_iter().flatten().collect(), per_period, c_per, c_prime_per }
}

/// Least-squares line through `(k, log C(k))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    /// Zero when the data are constant.
    pub r2: f64,
}

impl LogFit {
    fn of(points: &[(f64, f64)]) -> Self {
        let n = points.len() as f64;
        if points.len() < 2 {
            return Self { slope: 0.0, r2: 0.0 };
        }
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sxy / sxx;
        let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 0.0 };
        Self { slope, r2 }
    }

    fn grows(&self) -> bool {
        self.slope > GROWTH_SLOPE && self.r2 > GROWTH_R2
    }
}

/// Growth screen of the periodic data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthScreen {
    /// Fit of `log C_per(k)`, the largest distortion at period `k`.
    pub distortion: LogFit,
    /// Fit of `log C'_per(k)`.
    pub norms: LogFit,
    pub unbounded: bool,
    /// Orbit attaining the largest `max(Q, |A|, |A^-1|)`.
    pub witness: Option<PeriodicRecord>,
}

pub fn growth_screen(pd: &PeriodicData) -> GrowthScreen {
    let pts = |f: fn(&PeriodSummary) -> f64| -> Vec<(f64, f64)> {
        pd.per_period.iter().filter(|s| s.count > 0).map(|s| (s.k as f64, f(s).ln())).collect()
    };
    let distortion = LogFit::of(&pts(|s| s.c_per));
    let norms = LogFit::of(&pts(|s| s.c_prime_per));
    let unbounded = pd.c_per > UNBOUNDED_LEVEL
        || pd.c_prime_per > UNBOUNDED_LEVEL
        || distortion.grows()
        || norms.grows();
    let size = |r: &PeriodicRecord| r.q.max(r.norm).max(r.inv_norm);
    let witness = pd
        .records
        .iter()
        .fold(None::<&PeriodicRecord>, |best, r| match best {
            Some(b) if size(b) >= size(r) => Some(b),
            _ => Some(r),
        })
        .cloned();
    GrowthScreen { distortion, norms, unbounded, witness }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Unbounded,
    BoundedEvidence,
    PrecompactEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Periodic,
    Bunching,
    Shadowing,
    Nets,
}

/// Work limits of [`verdict`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Budget {
    pub k_max: usize,
    pub bunching_horizon: usize,
    pub trials: usize,
    /// Word length covered by the orbit segment the trials are drawn from.
    pub trial_depth: usize,
    pub seed: u64,
    /// ε scales for the net stage; precompactness needs every one of them.
    pub eps: Vec<f64>,
    pub n_test: usize,
    pub metric: ShiftMetric,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            k_max: 10,
            bunching_horizon: 12,
            trials: 100,
            trial_depth: 8,
            seed: 0,
            eps: vec![0.2, 0.1],
            n_test: 1000,
            metric: ShiftMetric::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BunchingOutcome {
    Certified(BunchingCertificate),
    NotCertified(NotCertified),
}

impl BunchingOutcome {
    pub fn run(g: &Generator, metric: &ShiftMetric, horizon: usize) -> Self {
        match certify_fiber_bunching(g, metric, horizon) {
            Ok(c) => Self::Certified(c),
            Err(e) => Self::NotCertified(e),
        }
    }
}

/// Net stage outcome at one scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NetOutcome {
    Built(Box<EpsilonNet>),
    Failed { eps: f64, error: String },
}

impl NetOutcome {
    pub fn covers(&self) -> bool {
        matches!(self, Self::Built(n) if n.coverage.complete() && n.propagation.violations == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// First stage that did not pass.
    pub failed_stage: Option<Stage>,
    pub periodic: Vec<PeriodSummary>,
    pub c_per: f64,
    pub c_prime_per: f64,
    pub growth: GrowthScreen,
    pub bunching: BunchingOutcome,
    pub distortion: Option<ShadowingDistortionReport>,
    pub norms: Option<ShadowingNormReport>,
    pub nets: Vec<NetOutcome>,
}

/// Verdict from the stage outcomes, naming the first stage that did not pass.
///
/// `UNBOUNDED`: the periodic data grows. `BOUNDED_EVIDENCE`: bounded
/// periodic data, certified bunching and shadowing checks without violation.
/// `PRECOMPACT_EVIDENCE`: in addition, nets at every ε scale cover the tested
/// orbit range. `INCONCLUSIVE` otherwise. `shadowing` is `None` and `nets`
/// empty when those stages did not run.
pub fn classify(
    growth: &GrowthScreen,
    bunching: &BunchingOutcome,
    shadowing: Option<bool>,
    nets: &[NetOutcome],
) -> (VerdictKind, Option<Stage>) {
    if growth.unbounded {
        return (VerdictKind::Unbounded, Some(Stage::Periodic));
    }
    if matches!(bunching, BunchingOutcome::NotCertified(_)) {
        return (VerdictKind::Inconclusive, Some(Stage::Bunching));
    }
    if shadowing != Some(true) {
        return (VerdictKind::Inconclusive, Some(Stage::Shadowing));
    }
    if nets.is_empty() || !nets.iter().all(NetOutcome::covers) {
        return (VerdictKind::BoundedEvidence, Some(Stage::Nets));
    }
    (VerdictKind::PrecompactEvidence, None)
}

/// Runs the stages in order, stopping at the first that fails, and
/// classifies the outcome.
pub fn verdict(g: &Generator, budget: &Budget) -> Verdict {
    let pd = collect_periodic_data(g, budget.k_max);
    let growth = growth_screen(&pd);
    let bunching = BunchingOutcome::run(g, &budget.metric, budget.bunching_horizon);
    let mut distortion = None;
    let mut norms = None;
    let mut nets = Vec::new();
    if !growth.unbounded && matches!(bunching, BunchingOutcome::Certified(_)) {
        let trials = shadowing_trials(g, &pd, budget.trials, budget.trial_depth, budget.seed, &budget.metric);
        let d = shadowing_distortion_check(g, &pd, &trials, &budget.metric);
        let n = shadowing_norm_check(g, &pd, &trials, &budget.metric);
        if !trials.trials.is_empty() && d.passes && n.passes {
            nets = build_nets(g, &pd, &budget.eps, budget.n_test, &budget.metric);
        }
        distortion = Some(d);
        norms = Some(n);
    }
    let shadowing = distortion.as_ref().zip(norms.as_ref()).map(|(d, n)| !d.trials.is_empty() && d.passes && n.passes);
    let (kind, failed_stage) = classify(&growth, &bunching, shadowing, &nets);
    Verdict {
        kind,
        failed_stage,
        periodic: pd.per_period,
        c_per: pd.c_per,
        c_prime_per: pd.c_prime_per,
        growth,
        bunching,
        distortion,
        norms,
        nets,
    }
}

/// [`build_epsilon_net_auto`] at each scale, keeping failures as outcomes.
pub fn build_nets(g: &Generator, pd: &PeriodicData, eps: &[f64], n_test: usize, metric: &ShiftMetric) -> Vec<NetOutcome> {
    eps.iter()
        .map(|&e| match build_epsilon_net_auto(g, e, pd, n_test, metric) {
            Ok(n) => NetOutcome::Built(Box::new(n)),
            Err(err) => NetOutcome::Failed { eps: e, error: err.to_string() },
        })
        .collect()
}
