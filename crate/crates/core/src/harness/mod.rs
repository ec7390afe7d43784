//! Experiment presets, JSON configuration and CSV artifacts with per-criterion verdicts.

pub mod experiments;
pub mod probes;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CuspError, Result};
use crate::flow::{Boundary, InnerBoundary, InputTerms, OuterBoundary, ReducedTrace};
use crate::tensor::io::fmt_f64;

pub use experiments::Session;

/// Environment variable overriding the output root.
pub const OUTPUT_ROOT_ENV: &str = "CUSPFLOW_OUTPUT_ROOT";

/// Default output root when neither the spec nor the environment names one.
pub const DEFAULT_OUTPUT_ROOT: &str = "cuspflow-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
}

impl Preset {
    pub const ALL: [Preset; 8] =
        [Preset::E1, Preset::E2, Preset::E3, Preset::E4, Preset::E5, Preset::E6, Preset::E7, Preset::E8];

    /// Acceptance criterion exercised by the preset.
    pub fn criterion(self) -> u8 {
        self as u8 + 1
    }

    pub fn id(self) -> &'static str {
        ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8"][self as usize]
    }

    pub fn title(self) -> &'static str {
        match self {
            Preset::E1 => "linear invariant decay rates",
            Preset::E2 => "operator cross-validation and positivity",
            Preset::E3 => "linearization and quadratic remainder",
            Preset::E4 => "singular convolution bound and kernel scalings",
            Preset::E5 => "Duhamel identity",
            Preset::E6 => "nonlinear cusp stability",
            Preset::E7 => "modified-flow cancellation and pullback",
            Preset::E8 => "weighted integral and bootstrap",
        }
    }
}

/// Inner/outer boundary profile ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryProfile {
    /// `h = 0` at `s_min`, Neumann at `s_max`.
    Zero,
    /// `h` frozen at its initial value at `s_min`, Neumann at `s_max`.
    Frozen,
    /// No condition at either end.
    Free,
}

impl BoundaryProfile {
    pub fn boundary(self) -> Boundary {
        match self {
            BoundaryProfile::Zero => Boundary { inner: InnerBoundary::Zero, outer: OuterBoundary::Neumann },
            BoundaryProfile::Frozen => Boundary { inner: InnerBoundary::Frozen, outer: OuterBoundary::Neumann },
            BoundaryProfile::Free => Boundary { inner: InnerBoundary::Free, outer: OuterBoundary::Free },
        }
    }
}

/// Input-term profile ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputProfile {
    None,
    /// `I` along the trace-free torus block and `J` along the mixed entries, both with
    /// amplitude `amplitude` and the profile `e^{-s-(n-1+δ)t}`.
    Decaying,
}

impl InputProfile {
    pub fn terms(self, n: usize, amplitude: f64, delta: f64) -> Option<InputTerms> {
        match self {
            InputProfile::None => None,
            InputProfile::Decaying => {
                let mut i_shape = vec![0.0; n * n];
                i_shape[n + 1] = 1.0;
                i_shape[2 * n + 2] = -1.0;
                let mut j_shape = vec![0.0; n * n];
                j_shape[1] = 1.0;
                j_shape[n] = 1.0;
                Some(InputTerms { delta, i_amp: amplitude, i_shape, j_amp: 0.5 * amplitude, j_shape })
            }
        }
    }
}

/// One experiment: a preset plus optional overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: Option<Preset>,
    pub dimension: Option<usize>,
    pub torus_lengths: Option<Vec<f64>>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub ns: Option<usize>,
    pub torus_counts: Option<Vec<usize>>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub lambda_w: Option<f64>,
    pub beta_w: Option<f64>,
    pub amplitude: Option<f64>,
    pub modified: Option<bool>,
    pub boundary: Option<BoundaryProfile>,
    pub inputs: Option<InputProfile>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

fn config_error(e: serde_json::Error) -> CuspError {
    CuspError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
}

impl ExperimentSpec {
    pub fn preset(p: Preset) -> Self {
        Self { preset: Some(p), ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(config_error)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CuspError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CuspError::Config(m) => CuspError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn preset_id(&self) -> Result<Preset> {
        self.preset.ok_or_else(|| CuspError::Config("missing key `preset`".into()))
    }

    fn check(&self) -> Result<()> {
        self.preset_id()?;
        if let Some(n) = self.dimension {
            if !(3..=4).contains(&n) {
                return Err(CuspError::Config(format!("key `dimension`: {n} is not 3 or 4")));
            }
        }
        let positive = [
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("sigma", self.sigma),
            ("lambda_w", self.lambda_w),
            ("beta_w", self.beta_w),
        ];
        for (key, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CuspError::Config(format!("key `{key}`: {v} must be positive")));
                }
            }
        }
        if let Some(a) = self.amplitude {
            if !(a.abs() < 0.1) {
                return Err(CuspError::Config(format!("key `amplitude`: |{a}| must be < 0.1")));
            }
        }
        Ok(())
    }

    /// Output directory: the spec's `output_dir` (or the preset id) under the root taken
    /// from [`OUTPUT_ROOT_ENV`], [`DEFAULT_OUTPUT_ROOT`] otherwise. Absolute `output_dir`
    /// values are used as given unless the environment variable is set.
    pub fn output_path(&self) -> Result<PathBuf> {
        let id = self.preset_id()?.id().to_lowercase();
        let env = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
        Ok(match (&self.output_dir, env) {
            (Some(dir), Some(root)) => root.join(dir.file_name().map(PathBuf::from).unwrap_or_else(|| id.into())),
            (Some(dir), None) if dir.is_absolute() => dir.clone(),
            (Some(dir), None) => PathBuf::from(DEFAULT_OUTPUT_ROOT).join(dir),
            (None, Some(root)) => root.join(id),
            (None, None) => PathBuf::from(DEFAULT_OUTPUT_ROOT).join(id),
        })
    }
}

/// A list of experiments, as read by `verify`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub experiments: Vec<ExperimentSpec>,
}

impl SuiteSpec {
    /// Every preset with default settings.
    pub fn full() -> Self {
        Self { experiments: Preset::ALL.iter().map(|p| ExperimentSpec::preset(*p)).collect() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let suite: Self = serde_json::from_str(text).map_err(config_error)?;
        for e in &suite.experiments {
            e.check()?;
        }
        Ok(suite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Relation {
    AtMost,
    AtLeast,
    /// `|value - target| <= tol`.
    Within {
        target: f64,
        tol: f64,
    },
    /// Nothing to measure (zero data); passes trivially.
    Vacuous,
}

/// One checked inequality of an acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub criterion: u8,
    pub check: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn at_most(criterion: u8, check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { criterion, check: check.into(), value, relation: Relation::AtMost, bound, pass: value <= bound }
    }

    pub fn at_least(criterion: u8, check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { criterion, check: check.into(), value, relation: Relation::AtLeast, bound, pass: value >= bound }
    }

    pub fn within(criterion: u8, check: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            criterion,
            check: check.into(),
            value,
            relation: Relation::Within { target, tol },
            bound: tol,
            pass: (value - target).abs() <= tol,
        }
    }

    /// A check that holds vacuously (for example on identically zero data).
    pub fn vacuous(criterion: u8, check: impl Into<String>) -> Self {
        Self { criterion, check: check.into(), value: 0.0, relation: Relation::Vacuous, bound: 0.0, pass: true }
    }

    pub fn relation_label(&self) -> String {
        match self.relation {
            Relation::AtMost => "<=".into(),
            Relation::AtLeast => ">=".into(),
            Relation::Vacuous => "vacuous".into(),
            Relation::Within { target, .. } => format!("|value - {}| <=", fmt_f64(target)),
        }
    }

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.criterion.to_string(),
            self.check.clone(),
            fmt_f64(self.value),
            self.relation_label(),
            fmt_f64(self.bound),
            if self.pass { "pass" } else { "fail" }.into(),
        ]
    }
}

pub const VERDICT_HEADER: [&str; 6] = ["criterion", "check", "value", "relation", "bound", "pass"];

/// Tabular or trace artifact of an experiment.
#[derive(Clone, Debug)]
pub enum ArtifactData {
    Table { header: Vec<String>, rows: Vec<Vec<f64>> },
    Reduced(ReducedTrace),
}

#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub data: ArtifactData,
}

impl Artifact {
    pub fn table(name: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self {
            name: name.into(),
            data: ArtifactData::Table { header: header.iter().map(|h| h.to_string()).collect(), rows },
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(&self.name);
        match &self.data {
            ArtifactData::Table { header, rows } => {
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(header)?;
                for r in rows {
                    w.write_record(r.iter().map(|v| fmt_f64(*v)))?;
                }
                w.flush()?;
                Ok(())
            }
            ArtifactData::Reduced(t) => t.write_csv(&path),
        }
    }
}

/// Result of one experiment.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub preset: Preset,
    pub rows: Vec<CheckRow>,
    pub artifacts: Vec<Artifact>,
    pub elapsed_s: f64,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            a.write(dir)?;
        }
        let mut w = csv::Writer::from_path(dir.join("verdict.csv"))?;
        w.write_record(VERDICT_HEADER)?;
        for r in &self.rows {
            w.write_record(r.csv_fields())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs one experiment without writing anything.
pub fn evaluate(spec: &ExperimentSpec, session: &mut Session) -> Result<Outcome> {
    spec.check()?;
    let preset = spec.preset_id()?;
    let start = Instant::now();
    let (rows, artifacts) = match preset {
        Preset::E1 => experiments::e1(spec)?,
        Preset::E2 => experiments::e2(spec)?,
        Preset::E3 => experiments::e3(spec)?,
        Preset::E4 => experiments::e4(spec)?,
        Preset::E5 => experiments::e5(spec)?,
        Preset::E6 => experiments::e6(spec, session)?,
        Preset::E7 => experiments::e7(spec)?,
        Preset::E8 => experiments::e8(spec, session)?,
    };
    Ok(Outcome { preset, rows, artifacts, elapsed_s: start.elapsed().as_secs_f64() })
}

/// Runs one experiment and writes its artifacts and `verdict.csv`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    run_in_session(spec, &mut Session::default())
}

pub fn run_in_session(spec: &ExperimentSpec, session: &mut Session) -> Result<Outcome> {
    let out = evaluate(spec, session)?;
    out.write(&spec.output_path()?)?;
    Ok(out)
}

/// Rows of every experiment in a suite.
#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub outcomes: Vec<Outcome>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(Outcome::passed)
    }

    /// Per-criterion verdicts in criterion order.
    pub fn criteria(&self) -> Vec<(u8, bool)> {
        let mut out: Vec<(u8, bool)> = Vec::new();
        for o in &self.outcomes {
            for r in &o.rows {
                match out.iter_mut().find(|c| c.0 == r.criterion) {
                    Some(c) => c.1 &= r.pass,
                    None => out.push((r.criterion, r.pass)),
                }
            }
        }
        out.sort();
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["preset"];
        header.extend(VERDICT_HEADER);
        w.write_record(&header)?;
        for o in &self.outcomes {
            for r in &o.rows {
                let mut row = vec![o.preset.id().to_string()];
                row.extend(r.csv_fields());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Output root for suite-level files.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// Runs every experiment (sharing one session), writes each output directory and
/// `summary.csv` under the output root.
pub fn verify_all(specs: &[ExperimentSpec]) -> Result<Summary> {
    let mut session = Session::default();
    let mut summary = Summary::default();
    for spec in specs {
        summary.outcomes.push(run_in_session(spec, &mut session)?);
    }
    summary.write_csv(&output_root().join("summary.csv"))?;
    Ok(summary)
}
