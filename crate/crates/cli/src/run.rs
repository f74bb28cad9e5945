//! Suite orchestration and report output.

use std::path::Path;

use cocycle_core::analysis::{
    build_nets, classify, collect_periodic_data, growth_screen, shadowing_distortion_check, shadowing_norm_check,
    shadowing_trials, BunchingOutcome, GrowthScreen, NetOutcome, PeriodSummary, PeriodicData, ShadowingDistortionReport,
    ShadowingNormReport, Stage, VerdictKind,
};
use cocycle_core::cocycle::closeness_profile;
use cocycle_core::invariant::{build_family, holder_profile, isometry_defect, HolderProfile, NormFamily};
use cocycle_core::normspace::Interval;
use cocycle_core::sft::dense_orbit_segment;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Job, JobConfig, Suite};
use crate::CliError;

/// Horizon of the `Q(z,n)` trace.
const DISTORTION_TRACE: i64 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// A checked inequality failed.
    Fail,
    /// Computed, but the stage's hypothesis does not hold (no bunching
    /// certificate, diverging norms, refused net).
    NotApplicable,
    /// Not run because an earlier stage ruled it out.
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub suite: Suite,
    pub status: Status,
    pub note: String,
    pub detail: Value,
}

/// Constants collected over the stages that ran.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Constants {
    pub c_per: Option<f64>,
    pub c_prime_per: Option<f64>,
    /// Closeness constant `c`.
    pub c: Option<f64>,
    /// Bunching certificate `L` and `theta`.
    pub l: Option<f64>,
    pub theta: Option<f64>,
    /// Norm bound `M` of the finest net.
    pub m: Option<f64>,
    /// Equivalence constant `K` of the norm family.
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub symbols: usize,
    pub depth: usize,
    pub dim: usize,
    pub beta: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: JobConfig,
    pub summary: Summary,
    pub stages: Vec<StageReport>,
    pub constants: Constants,
    /// Present when every stage of the verdict ran.
    pub verdict: Option<VerdictKind>,
    pub failed_stage: Option<Stage>,
    /// No checked inequality failed.
    pub passed: bool,
}

/// One row of `traces.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub series: &'static str,
    pub x: i64,
    pub y: f64,
}

pub struct Outcome {
    pub report: Report,
    pub traces: Vec<TraceRow>,
}

fn detail<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn stage(suite: Suite, status: Status, note: impl Into<String>, value: Value) -> StageReport {
    StageReport { suite, status, note: note.into(), detail: value }
}

#[derive(Serialize)]
struct PeriodicDetail<'a> {
    k_max: usize,
    per_period: &'a [PeriodSummary],
    c_per: f64,
    c_prime_per: f64,
    growth: &'a GrowthScreen,
}

#[derive(Serialize)]
struct ShadowingDetail<'a> {
    n0: u64,
    delta0: f64,
    available: usize,
    distortion: &'a ShadowingDistortionReport,
    norms: &'a ShadowingNormReport,
}

#[derive(Serialize)]
struct FamilyDetail {
    cylinder_depth: usize,
    base_points: usize,
    auxiliary_points: usize,
    converged_points: usize,
    convergence_m: usize,
    converged: bool,
    diverged: bool,
    residual: Interval,
    k: f64,
    /// Points whose norm and whose image's norm both converged.
    defect_points: usize,
    max_defect: Option<f64>,
    defect_limit: f64,
    holder: Option<HolderProfile>,
}

/// Runs the configured suites (or `only`, when given) and collects the report.
pub fn run(job: &Job, only: Option<Suite>) -> Result<Outcome, CliError> {
    let cfg = &job.config;
    let g = &job.generator;
    let metric = &job.metric;
    let runs = |s: Suite| match only {
        Some(Suite::All) => true,
        Some(o) => o == s,
        None => cfg.runs(s),
    };
    let all = runs(Suite::All);
    let mut stages = Vec::new();
    let mut traces = Vec::new();
    let mut constants = Constants::default();

    let need_pd = runs(Suite::Periodic) || runs(Suite::Shadowing) || runs(Suite::Nets);
    let pd: Option<PeriodicData> = need_pd.then(|| collect_periodic_data(g, cfg.k_max));
    let growth = pd.as_ref().map(growth_screen);
    if let (Some(pd), Some(growth)) = (&pd, &growth) {
        constants.c_per = Some(pd.c_per);
        constants.c_prime_per = Some(pd.c_prime_per);
        for s in &pd.per_period {
            traces.push(TraceRow { series: "c_per", x: s.k as i64, y: s.c_per });
            traces.push(TraceRow { series: "c_prime_per", x: s.k as i64, y: s.c_prime_per });
        }
        if runs(Suite::Periodic) {
            let note = if growth.unbounded { "periodic data grows" } else { "periodic data bounded" };
            let d = PeriodicDetail {
                k_max: pd.k_max,
                per_period: &pd.per_period,
                c_per: pd.c_per,
                c_prime_per: pd.c_prime_per,
                growth,
            };
            stages.push(stage(Suite::Periodic, Status::Pass, note, detail(&d)));
        }
    }

    let need_bunching = runs(Suite::Bunching) || runs(Suite::Shadowing);
    let bunching = need_bunching.then(|| BunchingOutcome::run(g, metric, cfg.bunching_horizon));
    if let Some(b) = &bunching {
        let q = match b {
            BunchingOutcome::Certified(c) => &c.q,
            BunchingOutcome::NotCertified(n) => &n.q,
        };
        for (n, &v) in q.iter().enumerate() {
            traces.push(TraceRow { series: "bunching_q", x: n as i64, y: v });
        }
        if runs(Suite::Bunching) {
            let s = match b {
                BunchingOutcome::Certified(c) => {
                    constants.l = Some(c.l);
                    constants.theta = Some(c.theta);
                    if c.verify(g, metric, cfg.bunching_horizon) {
                        stage(Suite::Bunching, Status::Pass, format!("certified at n = {}", c.witness_n), detail(b))
                    } else {
                        stage(Suite::Bunching, Status::Fail, "certificate fails within the horizon", detail(b))
                    }
                }
                BunchingOutcome::NotCertified(_) => {
                    stage(Suite::Bunching, Status::NotApplicable, "no q_n below 1 within the horizon", detail(b))
                }
            };
            stages.push(s);
        }
    }

    let mut shadowing_ok = None;
    if runs(Suite::Shadowing) {
        let (pd, growth, bunching) = (pd.as_ref().unwrap(), growth.as_ref().unwrap(), bunching.as_ref().unwrap());
        let s = if growth.unbounded {
            stage(Suite::Shadowing, Status::NotApplicable, "periodic data grows", Value::Null)
        } else if matches!(bunching, BunchingOutcome::NotCertified(_)) {
            stage(Suite::Shadowing, Status::Skipped, "not fiber bunched", Value::Null)
        } else {
            let set = shadowing_trials(g, pd, cfg.trials, cfg.trial_depth, cfg.seed, metric);
            let dist = shadowing_distortion_check(g, pd, &set, metric);
            let norms = shadowing_norm_check(g, pd, &set, metric);
            let ok = !set.trials.is_empty() && dist.passes && norms.passes;
            shadowing_ok = Some(ok);
            let d = ShadowingDetail { n0: set.n0, delta0: set.delta0, available: set.available, distortion: &dist, norms: &norms };
            let note = format!(
                "{} trials, {} distortion and {} norm violations",
                set.trials.len(),
                dist.violations,
                norms.violations
            );
            stage(Suite::Shadowing, if ok { Status::Pass } else { Status::Fail }, note, detail(&d))
        };
        stages.push(s);
    }

    let mut nets: Vec<NetOutcome> = Vec::new();
    if runs(Suite::Nets) {
        let pd = pd.as_ref().unwrap();
        let s = if growth.as_ref().unwrap().unbounded {
            stage(Suite::Nets, Status::NotApplicable, "periodic data grows", Value::Null)
        } else if all && shadowing_ok != Some(true) {
            stage(Suite::Nets, Status::Skipped, "shadowing stage did not pass", Value::Null)
        } else {
            nets = build_nets(g, pd, &cfg.eps, cfg.n_test, metric);
            constants.m = nets
                .iter()
                .filter_map(|n| match n {
                    NetOutcome::Built(n) => Some(n.m_bound),
                    NetOutcome::Failed { .. } => None,
                })
                .last();
            let sizes: Vec<String> = nets
                .iter()
                .map(|n| match n {
                    NetOutcome::Built(n) => format!("ε = {}: {} elements, {}/{} covered", n.eps, n.len(), n.coverage.covered, n.coverage.tested),
                    NetOutcome::Failed { eps, error } => format!("ε = {eps}: {error}"),
                })
                .collect();
            let ok = nets.iter().all(NetOutcome::covers);
            stage(Suite::Nets, if ok { Status::Pass } else { Status::Fail }, sizes.join("; "), detail(&nets))
        };
        stages.push(s);
    }

    if runs(Suite::InvariantNorms) {
        let family = build_family(g, cfg.cylinder_depth, cfg.tol, cfg.m_max);
        constants.k = Some(family.k);
        let steps = family.norms.values().map(|r| r.trace.len()).max().unwrap_or(0);
        for m in 0..steps {
            let hi = family.norms.values().filter_map(|r| r.trace.get(m)).map(|i| i.hi).fold(0.0, f64::max);
            traces.push(TraceRow { series: "residual", x: m as i64 + 1, y: hi });
        }
        stages.push(invariant_stage(job, &family)?);
    }

    if runs(Suite::Shadowing) || runs(Suite::Nets) || runs(Suite::InvariantNorms) {
        constants.c = Some(closeness_profile(g, metric).c);
    }
    let (z, _) = dense_orbit_segment(&job.matrix, cfg.trial_depth);
    for n in -DISTORTION_TRACE..=DISTORTION_TRACE {
        traces.push(TraceRow { series: "q_orbit", x: n, y: g.quasiconformal_distortion(&z, n) });
    }

    let (verdict, failed_stage) = if all {
        let (kind, failed) = classify(growth.as_ref().unwrap(), bunching.as_ref().unwrap(), shadowing_ok, &nets);
        (Some(kind), failed)
    } else {
        (None, None)
    };
    let passed = stages.iter().all(|s| s.status != Status::Fail);
    let report = Report {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        summary: Summary {
            symbols: job.matrix.symbol_count(),
            depth: g.depth(),
            dim: g.dim(),
            beta: g.beta(),
            nu: metric.nu(),
        },
        stages,
        constants,
        verdict,
        failed_stage,
        passed,
    };
    Ok(Outcome { report, traces })
}

fn invariant_stage(job: &Job, family: &NormFamily) -> Result<StageReport, CliError> {
    let g = &job.generator;
    let tol = job.config.tol;
    let limit = 3.0 * tol;
    let mut defects = Vec::new();
    for x in &family.base_points {
        let fx = x.shift(1);
        if family.norms[x].converged && family.norms.get(&fx).is_some_and(|r| r.converged) {
            defects.push(isometry_defect(g, family, x).map_err(|e| CliError::Run(e.to_string()))?.hi);
        }
    }
    let max_defect = defects.iter().copied().reduce(f64::max);
    let holder = if family.diverged { None } else { holder_profile(g, family, &job.metric).ok() };
    let d = FamilyDetail {
        cylinder_depth: family.cylinder_depth,
        base_points: family.base_points.len(),
        auxiliary_points: family.auxiliary_points.len(),
        converged_points: family.norms.values().filter(|r| r.converged).count(),
        convergence_m: family.convergence_m,
        converged: family.converged,
        diverged: family.diverged,
        residual: family.residual,
        k: family.k,
        defect_points: defects.len(),
        max_defect,
        defect_limit: limit,
        holder: holder.clone(),
    };
    let value = detail(&d);
    if family.diverged {
        return Ok(stage(Suite::InvariantNorms, Status::NotApplicable, "partial maxima diverge", value));
    }
    let defects_ok = max_defect.map_or(true, |m| m <= limit);
    // the Hölder bound is asserted on a fully converged family only
    let holder_ok = !family.converged || holder.as_ref().map_or(true, |h| h.holds);
    let status = if defects_ok && holder_ok { Status::Pass } else { Status::Fail };
    let note = format!(
        "{} of {} norms converged by m = {}, isometry defect {} on {} points",
        d.converged_points,
        family.norms.len(),
        family.convergence_m,
        max_defect.map_or("n/a".to_owned(), |m| format!("{m:.3e}")),
        defects.len()
    );
    Ok(stage(Suite::InvariantNorms, status, note, value))
}

/// Writes `report.json` and `traces.csv` into `dir`.
pub fn write(outcome: &Outcome, dir: &Path) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut json = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    json.push('\n');
    std::fs::write(dir.join("report.json"), json).map_err(io)?;
    let mut w = csv::Writer::from_path(dir.join("traces.csv")).map_err(|e| CliError::Io(e.to_string()))?;
    for row in &outcome.traces {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(io)?;
    Ok(())
}
