//! Job configuration: JSON schema, defaults and validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cocycle_core::cocycle::{CocycleError, CylinderTable, Generator};
use cocycle_core::linops::OperatorValue;
use cocycle_core::sft::{ShiftMetric, Symbol, TransitionMatrix};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Bunching,
    Periodic,
    Shadowing,
    Nets,
    InvariantNorms,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["bunching", "periodic", "shadowing", "nets", "invariant_norms", "all"];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| format!("unknown suite `{s}`, expected one of {}", Suite::NAMES.join(", ")))
    }
}

/// A word of length `2r+1` and the matrix (as rows) assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub word: Vec<Symbol>,
    pub matrix: Vec<Vec<f64>>,
}

/// Locally constant table of matrices on words of length `2 depth + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTable {
    pub depth: usize,
    pub entries: Vec<MatrixEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleEntry {
    pub word: Vec<Symbol>,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleTable {
    pub depth: usize,
    pub entries: Vec<AngleEntry>,
}

/// A constant angle or a table of angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Constant(f64),
    Table(AngleTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Identity { dim: usize },
    Diagonal { entries: Vec<f64> },
    /// `A(x)` read from an explicit table.
    Table(MatrixTable),
    /// `A(x) = C(fx) C(x)^-1`.
    Coboundary { c: MatrixTable },
    /// `A(x) = C(fx) R(theta(x)) C(x)^-1`.
    ConjugatedRotation { c: MatrixTable, theta: AngleSpec },
}

/// Externally tagged twin of [`GeneratorSpec`]. Internally tagged enums lose
/// the path below the tag, so generator errors are re-located through this.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
#[allow(dead_code)]
enum GeneratorBody {
    Identity { dim: usize },
    Diagonal { entries: Vec<f64> },
    Table(MatrixTable),
    Coboundary { c: MatrixTable },
    ConjugatedRotation { c: MatrixTable, theta: AngleSpec },
}

/// Path and message of the first error inside `generator`, if the text is
/// valid JSON with a string `kind`.
fn locate_generator_error(text: &str) -> Option<(String, String)> {
    let mut root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut body = root.get_mut("generator")?.as_object_mut()?.clone();
    let kind = body.remove("kind")?.as_str()?.to_owned();
    let tagged = serde_json::json!({ kind: body });
    let err = serde_path_to_error::deserialize::<_, GeneratorBody>(tagged).err()?;
    let path = err.path().to_string();
    let below = path.split_once('.').map_or("", |(_, rest)| rest);
    let field = if below.is_empty() { "generator".to_owned() } else { format!("generator.{below}") };
    Some((field, err.into_inner().to_string()))
}

fn default_nu() -> f64 {
    0.5
}
fn default_beta() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-6
}
fn default_m_max() -> usize {
    60
}
fn default_k_max() -> usize {
    10
}
fn default_cylinder_depth() -> usize {
    6
}
fn default_suites() -> Vec<Suite> {
    vec![Suite::All]
}
fn default_trials() -> usize {
    100
}
fn default_trial_depth() -> usize {
    8
}
fn default_eps() -> Vec<f64> {
    vec![0.2, 0.1]
}
fn default_n_test() -> usize {
    1000
}
fn default_bunching_horizon() -> usize {
    12
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("cocycle-lab-out")
}

/// Everything a run needs. Only `transition_matrix` and `generator` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub transition_matrix: Vec<Vec<u8>>,
    pub generator: GeneratorSpec,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Cylinder depth `L` of the invariant norm family.
    #[serde(default = "default_cylinder_depth")]
    pub cylinder_depth: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_trial_depth")]
    pub trial_depth: usize,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_bunching_horizon")]
    pub bunching_horizon: usize,
    /// Where outputs go; left out of reports so they depend only on the job.
    #[serde(default = "default_out_dir", skip_serializing)]
    pub out_dir: PathBuf,
}

/// A validated configuration with its generator built.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: JobConfig,
    pub matrix: TransitionMatrix,
    pub metric: ShiftMetric,
    pub generator: Generator,
}

impl JobConfig {
    /// Parses JSON, reporting the path of the offending field and its line.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "generator" {
                if let Some((field, msg)) = locate_generator_error(text) {
                    return CliError::Config(format!(
                        "field `{field}`: {msg} at line {} column {}",
                        inner.line(),
                        inner.column()
                    ));
                }
            }
            CliError::Config(format!("field `{path}`: {inner}"))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn runs(&self, suite: Suite) -> bool {
        self.suites.contains(&Suite::All) || self.suites.contains(&suite)
    }

    /// Validates every field and builds the generator.
    pub fn build(self) -> Result<Job, CliError> {
        let bad = |field: &str, msg: String| CliError::Config(format!("field `{field}`: {msg}"));
        let matrix = TransitionMatrix::new(self.transition_matrix.clone())
            .map_err(|e| bad("transition_matrix", e.to_string()))?;
        let metric = ShiftMetric::new(self.nu).map_err(|e| bad("nu", e.to_string()))?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(bad("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.k_max == 0 {
            return Err(bad("k_max", "must be at least 1".into()));
        }
        if self.suites.is_empty() {
            return Err(bad("suites", "must name at least one suite".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(bad("eps", format!("must be positive, got {e}")));
        }
        let generator = build_generator(&matrix, &self.generator)?
            .with_beta(self.beta)
            .map_err(|e| bad("beta", e.to_string()))?;
        Ok(Job { config: self, matrix, metric, generator })
    }
}

fn operator(rows: &[Vec<f64>], field: &str) -> Result<OperatorValue, CliError> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Config(format!("field `{field}`: matrix must be square and nonempty")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    OperatorValue::from_rows(d, &flat).map_err(|e| CliError::Config(format!("field `{field}`: {e}")))
}

/// Lists every inadmissible word at once.
fn check_words<'a>(m: &TransitionMatrix, words: impl Iterator<Item = &'a Vec<Symbol>>, field: &str) -> Result<(), CliError> {
    let bad: Vec<String> = words.filter(|w| !m.is_admissible(w)).map(|w| format!("{w:?}")).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("field `{field}`: inadmissible words {}", bad.join(", "))))
    }
}

fn table(m: &TransitionMatrix, t: &MatrixTable, field: &str) -> Result<CylinderTable<OperatorValue>, CliError> {
    check_words(m, t.entries.iter().map(|e| &e.word), field)?;
    let mut entries = std::collections::BTreeMap::new();
    for (i, e) in t.entries.iter().enumerate() {
        entries.insert(e.word.clone(), operator(&e.matrix, &format!("{field}.entries[{i}].matrix"))?);
    }
    let table = CylinderTable::new(t.depth, entries);
    table.validate(m).map_err(|e| CliError::Config(format!("field `{field}`: {e}")))?;
    Ok(table)
}

fn cocycle_error(field: &str) -> impl Fn(CocycleError) -> CliError + '_ {
    move |e| CliError::Config(format!("field `{field}`: {e}"))
}

fn build_generator(m: &TransitionMatrix, spec: &GeneratorSpec) -> Result<Generator, CliError> {
    match spec {
        GeneratorSpec::Identity { dim } => {
            if *dim == 0 {
                return Err(CliError::Config("field `generator.dim`: must be at least 1".into()));
            }
            Ok(Generator::identity(m, *dim))
        }
        GeneratorSpec::Diagonal { entries } => {
            Generator::diagonal(m, entries).map_err(cocycle_error("generator.entries"))
        }
        GeneratorSpec::Table(t) => {
            check_words(m, t.entries.iter().map(|e| &e.word), "generator.entries")?;
            let entries = t
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| Ok((e.word.clone(), operator(&e.matrix, &format!("generator.entries[{i}].matrix"))?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            Generator::from_table(m, t.depth, entries).map_err(cocycle_error("generator.entries"))
        }
        GeneratorSpec::Coboundary { c } => {
            Generator::coboundary(m, &table(m, c, "generator.c")?).map_err(cocycle_error("generator.c"))
        }
        GeneratorSpec::ConjugatedRotation { c, theta } => {
            let c = table(m, c, "generator.c")?;
            let theta = match theta {
                AngleSpec::Constant(a) => CylinderTable::constant(m, *a),
                AngleSpec::Table(t) => {
                    check_words(m, t.entries.iter().map(|e| &e.word), "generator.theta")?;
                    let entries = t.entries.iter().map(|e| (e.word.clone(), e.angle)).collect();
                    CylinderTable::new(t.depth, entries)
                }
            };
            Generator::conjugated_rotation(m, &c, &theta).map_err(cocycle_error("generator"))
        }
    }
}
