//! Config-driven runs: validate, execute one experiment, write CSVs and
//! plots, then the manifest.

mod experiments;
mod presets;

pub use presets::{list_presets, preset, Preset, PRESETS};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::classical::{eom_rhs, Branch, ClassicalState, LyapunovSettings};
use crate::error::{Error, Result};
use crate::evolution::CoefficientVector;
use crate::observables::initial_state_poisson_like;
use crate::ode::Tolerances;
use crate::output::{write_csv, Plot};
use crate::params::ModelParameters;
use crate::quantum::{build_basis, Basis, BasisIndex};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Left in the output directory when a run fails after it started writing.
pub const INCOMPLETE_MARKER: &str = "RUN_INCOMPLETE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ModelParameters,
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    ClassicalPoincare(PoincareConfig),
    ClassicalCritical(CriticalConfig),
    ChaosScan(ScanConfig),
    QuantumEvolve(QuantumConfig),
    QuantumObservables(ObservablesConfig),
    TwoLevelOracle(TwoLevelConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ClassicalPoincare(_) => "classical-poincare",
            Experiment::ClassicalCritical(_) => "classical-critical",
            Experiment::ChaosScan(_) => "chaos-scan",
            Experiment::QuantumEvolve(_) => "quantum-evolve",
            Experiment::QuantumObservables(_) => "quantum-observables",
            Experiment::TwoLevelOracle(_) => "two-level-oracle",
        }
    }
}

/// Initial conditions shared by every trajectory of a classical grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalGrid {
    pub initial_n: Vec<f64>,
    pub psi0: f64,
    pub p0: f64,
    pub theta0: f64,
}

impl ClassicalGrid {
    pub fn states(&self) -> Vec<ClassicalState> {
        self.initial_n
            .iter()
            .map(|&n| ClassicalState::new(n, self.psi0, self.p0, self.theta0))
            .collect()
    }

    fn validate(&self, params: &ModelParameters) -> Result<()> {
        if self.initial_n.is_empty() {
            return Err(Error::Config("initial_n grid is empty".into()));
        }
        for s in self.states() {
            eom_rhs(&s.reduced(), params)
                .map_err(|e| Error::Config(format!("initial state n = {}: {e}", s.n)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    pub grid: ClassicalGrid,
    pub crossings: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
}

fn default_tau_max() -> f64 {
    1e7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalConfig {
    pub branches: Vec<Branch>,
    /// Reference resonance centre on the ψ = π branch to compare against.
    #[serde(default)]
    pub reference_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub w_grid: Vec<f64>,
    pub grid: ClassicalGrid,
    pub lyapunov: LyapunovSettings,
    /// Fixed threshold; when absent it is `baseline_factor` times the
    /// largest W = 0 exponent over the same grid.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_baseline_factor")]
    pub baseline_factor: f64,
}

fn default_baseline_factor() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    BasisState { state: BasisIndex },
    PoissonLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumConfig {
    #[serde(default = "three")]
    pub n_max: u32,
    #[serde(default = "three")]
    pub l_max: u32,
    #[serde(default)]
    pub k_filter: Option<Vec<i64>>,
    pub initial: InitialState,
    pub tau_end: f64,
    pub sample_dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(default)]
    pub tracked: Vec<BasisIndex>,
    /// Drive strengths to run in turn; empty means the W in `params`.
    #[serde(default)]
    pub w_sweep: Vec<f64>,
}

fn three() -> u32 {
    3
}

impl QuantumConfig {
    pub fn basis(&self, params: &ModelParameters) -> Result<Basis> {
        build_basis(self.n_max, self.l_max, params, self.k_filter.as_deref())
    }

    pub fn initial_vector(&self, basis: std::sync::Arc<Basis>) -> Result<CoefficientVector> {
        match &self.initial {
            InitialState::BasisState { state } => CoefficientVector::basis_state(basis, *state),
            InitialState::PoissonLike => initial_state_poisson_like(basis),
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances::new(self.rel_tol, self.abs_tol)
    }

    pub fn drives(&self, params: &ModelParameters) -> Vec<f64> {
        if self.w_sweep.is_empty() {
            vec![params.w]
        } else {
            self.w_sweep.clone()
        }
    }

    fn validate(&self, params: &ModelParameters) -> Result<()> {
        self.tolerances().check().map_err(config)?;
        if !(self.tau_end > 0.0 && self.tau_end.is_finite()) {
            return Err(Error::Config(format!(
                "tau_end must be positive, got {}",
                self.tau_end
            )));
        }
        positive("sample_dt", self.sample_dt)?;
        for &w in &self.w_sweep {
            params.with_drive(w).validate().map_err(config)?;
        }
        let basis = std::sync::Arc::new(self.basis(params).map_err(config)?);
        self.initial_vector(basis.clone()).map_err(config)?;
        if let Some(s) = self.tracked.iter().find(|s| basis.index_of(**s).is_none()) {
            return Err(Error::Config(format!(
                "tracked state {s} is not in the basis"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Picture {
    /// ⟨X̂⟩ against ⟨P̂⟩.
    Xp,
    /// ⟨n̂⟩ as radius, arg⟨e^{iϑ̂}⟩ as angle.
    NumberPhase,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    pub run: QuantumConfig,
    #[serde(default = "both")]
    pub picture: Picture,
}

fn both() -> Picture {
    Picture::Both
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelConfig {
    pub initial: BasisIndex,
    pub final_state: BasisIndex,
    pub tau_end: f64,
    pub sample_dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Also evolve |initial⟩ in the full n, l ≤ caps basis and compare the
    /// peak final-state population with the two-level prediction.
    #[serde(default)]
    pub full_basis: Option<FullBasisCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullBasisCheck {
    pub n_max: u32,
    pub l_max: u32,
    pub tau_end: f64,
    pub sample_dt: f64,
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let p = self.params.validate().map_err(config)?;
        match &self.experiment {
            Experiment::ClassicalPoincare(c) => {
                Tolerances::new(c.rel_tol, c.abs_tol)
                    .check()
                    .map_err(config)?;
                positive("tau_max", c.tau_max)?;
                if c.crossings == 0 {
                    return Err(Error::Config("crossings must be at least 1".into()));
                }
                c.grid.validate(&p)
            }
            Experiment::ClassicalCritical(c) => {
                if c.branches.is_empty() {
                    return Err(Error::Config("no branches requested".into()));
                }
                Ok(())
            }
            Experiment::ChaosScan(c) => {
                if c.w_grid.is_empty() {
                    return Err(Error::Config("w_grid is empty".into()));
                }
                for &w in &c.w_grid {
                    p.with_drive(w).validate().map_err(config)?;
                }
                let l = &c.lyapunov;
                Tolerances::new(l.rel_tol, l.abs_tol)
                    .check()
                    .map_err(config)?;
                positive("renorm_interval", l.renorm_interval)?;
                positive("separation", l.separation)?;
                if l.tau_end < l.renorm_interval {
                    return Err(Error::Config(
                        "lyapunov tau_end is shorter than renorm_interval".into(),
                    ));
                }
                if let Some(t) = c.threshold {
                    positive("threshold", t)?;
                }
                positive("baseline_factor", c.baseline_factor)?;
                c.grid.validate(&p)
            }
            Experiment::QuantumEvolve(q) => q.validate(&p),
            Experiment::QuantumObservables(o) => o.run.validate(&p),
            Experiment::TwoLevelOracle(t) => {
                Tolerances::new(t.rel_tol, t.abs_tol)
                    .check()
                    .map_err(config)?;
                positive("tau_end", t.tau_end)?;
                positive("sample_dt", t.sample_dt)?;
                crate::evolution::two_level_parameters(t.initial, t.final_state, &p)
                    .map_err(config)?;
                if let Some(f) = &t.full_basis {
                    positive("full_basis.tau_end", f.tau_end)?;
                    positive("full_basis.sample_dt", f.sample_dt)?;
                    let b = build_basis(f.n_max, f.l_max, &p, None).map_err(config)?;
                    for s in [t.initial, t.final_state] {
                        if b.index_of(s).is_none() {
                            return Err(Error::Config(format!("{s} is outside the full basis")));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub experiment: String,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputRecord>,
    pub warnings: Vec<String>,
    pub summary: Value,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Rejected before anything was written.
    #[error("{0}")]
    Config(Error),
    /// Failed while running; partial outputs and the incomplete marker remain.
    #[error("{0}")]
    Runtime(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 3,
        }
    }
}

/// Collects files, warnings and summary values while an experiment runs.
pub(crate) struct Sink {
    dir: PathBuf,
    plots: bool,
    files: Vec<String>,
    warnings: Vec<String>,
    summary: Map<String, Value>,
}

impl Sink {
    pub(crate) fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        write_csv(&self.dir.join(name), header, rows)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub(crate) fn plot(&mut self, name: &str, plot: &Plot) -> Result<()> {
        if self.plots {
            plot.write(&self.dir.join(name))?;
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub(crate) fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    pub(crate) fn note<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).expect("summary value serializes"),
        );
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Runs one experiment. The manifest is written last and only on success.
pub fn run(config: &RunConfig) -> std::result::Result<RunManifest, RunError> {
    config.validate().map_err(RunError::Config)?;
    let dir = &config.output_dir;
    let runtime = RunError::Runtime;
    fs::create_dir_all(dir).map_err(|e| runtime(e.into()))?;
    for stale in [MANIFEST_FILE, INCOMPLETE_MARKER] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| runtime(e.into()))?;
        }
    }
    let started = Instant::now();
    let mut sink = Sink {
        dir: dir.clone(),
        plots: config.plots,
        files: Vec::new(),
        warnings: Vec::new(),
        summary: Map::new(),
    };
    let outcome = experiments::execute(config, &mut sink).and_then(|()| {
        let outputs = sink
            .files
            .iter()
            .map(|f| {
                let path = dir.join(f);
                Ok(OutputRecord {
                    file: f.clone(),
                    sha256: sha256_file(&path)?,
                    bytes: fs::metadata(&path)?.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            config: config.clone(),
            experiment: config.experiment.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs,
            warnings: sink.warnings.clone(),
            summary: Value::Object(sink.summary.clone()),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(manifest)
    });
    outcome.map_err(|e| {
        let note = format!(
            "run failed: {e}\nfiles written: {}\n",
            sink.files.join(", ")
        );
        let _ = fs::write(dir.join(INCOMPLETE_MARKER), note);
        runtime(e)
    })
}
