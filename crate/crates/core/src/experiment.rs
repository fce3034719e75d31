//! Monte Carlo experiment grid: every `(method, η, d)` cell is evaluated
//! over independent seeded trials and summarised by trimmed means.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::christoffel::{check_eta, classify, ClassifierConfig, ObservationSet};
use crate::error::{Error, Result};
use crate::evalmetrics::{aligned_mse, trimmed_mean, upsilon, DEFAULT_TRIM};
use crate::ica::{separate_supervised, FixedPointIca};
use crate::io::write_json;
use crate::synthdata::{derive_seed, gen_mixture, GeneratedData, MixtureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain ICA on every sample.
    IgnoreP1,
    /// Classify with the Christoffel score, then ICA on the kept samples.
    Proposed,
    /// ICA on the samples whose true label is 0.
    KnownR,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::IgnoreP1 => "ignore_p1",
            Method::Proposed => "proposed",
            Method::KnownR => "known_r",
        }
    }

    fn row_label(self, d: Option<usize>) -> String {
        match (self, d) {
            (Method::IgnoreP1, _) => "ICA ignoring P1".into(),
            (Method::KnownR, _) => "ICA with known r".into(),
            (Method::Proposed, Some(d)) => format!("Proposed (order d={d})"),
            (Method::Proposed, None) => "Proposed".into(),
        }
    }
}

fn default_trials() -> usize {
    200
}

fn default_trim() -> f64 {
    DEFAULT_TRIM
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_methods() -> Vec<Method> {
    vec![Method::IgnoreP1, Method::Proposed, Method::KnownR]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Source model; its `eta` is replaced by each entry of `eta_list`.
    pub generator: MixtureSpec,
    #[serde(rename = "T")]
    pub t: usize,
    pub degree_list: Vec<usize>,
    pub eta_list: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_trim")]
    pub trim_frac: f64,
    /// Measure wall-clock times. When off, every runtime column reads 0 and
    /// the report is byte-for-byte reproducible.
    #[serde(default = "default_true")]
    pub timing: bool,
    #[serde(default)]
    pub ica: FixedPointIca,
}

impl ExperimentConfig {
    /// The five-source grid: vanishing pair, `T = 2000`, `d ∈ {2,4,6,8}`,
    /// `η ∈ {0.2,0.4,0.6,0.8}`.
    pub fn vanishing_grid(trials: usize, seed: u64) -> Self {
        Self {
            generator: MixtureSpec::vanishing(0.5),
            t: 2000,
            degree_list: vec![2, 4, 6, 8],
            eta_list: vec![0.2, 0.4, 0.6, 0.8],
            trials,
            seed,
            methods: default_methods(),
            output_dir: default_output_dir(),
            trim_frac: DEFAULT_TRIM,
            timing: true,
            ica: FixedPointIca::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.t == 0 {
            return bad("T must be at least 1");
        }
        if self.eta_list.is_empty() || self.methods.is_empty() {
            return bad("eta_list and methods must be non-empty");
        }
        if self.methods.contains(&Method::Proposed) && self.degree_list.is_empty() {
            return bad("the proposed method needs at least one degree");
        }
        if !(0.0..0.5).contains(&self.trim_frac) {
            return bad("trim_frac must lie in [0, 0.5)");
        }
        for &eta in &self.eta_list {
            check_eta(eta)?;
        }
        self.generator.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Cells in report order: methods as listed, then η, then d.
    fn cells(&self) -> Vec<(Method, usize, Option<usize>)> {
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        let mut out = Vec::new();
        for &m in &methods {
            for e in 0..self.eta_list.len() {
                if m == Method::Proposed {
                    out.extend(self.degree_list.iter().map(|&d| (m, e, Some(d))));
                } else {
                    out.push((m, e, None));
                }
            }
        }
        out
    }
}

/// Outcome of one method on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub method: Method,
    pub eta: f64,
    pub d: Option<usize>,
    pub trial: usize,
    pub mse: Option<f64>,
    pub upsilon: Option<f64>,
    pub runtime_ms: f64,
    pub classify_ms: f64,
    pub retained: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub method: Method,
    pub eta: f64,
    /// `None` for methods that do not depend on the degree.
    pub d: Option<usize>,
    pub trials_kept: usize,
    pub failed: usize,
    pub mse_trimmed: f64,
    pub upsilon_trimmed: f64,
    /// Mean wall-clock of classification plus ICA.
    pub runtime_ms_mean: f64,
    /// Mean wall-clock of the classification step alone.
    pub classify_ms_mean: f64,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentManifest {
    pub config: ExperimentConfig,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
    pub trials: Vec<TrialRecord>,
    pub manifest: ExperimentManifest,
}

struct Timer {
    start: Option<Instant>,
}

impl Timer {
    fn start(enabled: bool) -> Self {
        Self {
            start: enabled.then(Instant::now),
        }
    }

    fn ms(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)
    }
}

struct Measured {
    mse: f64,
    upsilon: f64,
    retained: usize,
    runtime_ms: f64,
    classify_ms: f64,
}

fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    eta: f64,
    d: Option<usize>,
    obs: &ObservationSet,
    data: &GeneratedData,
    seed: u64,
) -> Result<Measured> {
    let truth = &data.labels;
    let total = Timer::start(cfg.timing);
    let (labels, classify_ms) = match method {
        Method::IgnoreP1 => (vec![0; obs.len()], 0.0),
        Method::KnownR => (truth.to_vec(), 0.0),
        Method::Proposed => {
            let timer = Timer::start(cfg.timing);
            let report = classify(obs, &ClassifierConfig::new(d.unwrap_or_default(), eta))?;
            (report.labels, timer.ms())
        }
    };
    let result = separate_supervised(obs, &labels, &cfg.ica, seed)?;
    let runtime_ms = total.ms();
    Ok(Measured {
        mse: aligned_mse(&result.s_hat, &data.s)?,
        upsilon: upsilon(&labels, truth)?,
        retained: result.retained_count,
        runtime_ms,
        classify_ms,
    })
}

fn run_trial(cfg: &ExperimentConfig, eta_idx: usize, trial: usize) -> Vec<TrialRecord> {
    let eta = cfg.eta_list[eta_idx];
    let seed = derive_seed(derive_seed(cfg.seed, trial as u64), eta_idx as u64);
    let cells: Vec<_> = cfg.cells().into_iter().filter(|c| c.1 == eta_idx).collect();
    let record = |method, d, outcome: Result<Measured>| match outcome {
        Ok(m) => TrialRecord {
            method,
            eta,
            d,
            trial,
            mse: Some(m.mse),
            upsilon: Some(m.upsilon),
            runtime_ms: m.runtime_ms,
            classify_ms: m.classify_ms,
            retained: Some(m.retained),
            error: None,
        },
        Err(e) => TrialRecord {
            method,
            eta,
            d,
            trial,
            mse: None,
            upsilon: None,
            runtime_ms: 0.0,
            classify_ms: 0.0,
            retained: None,
            error: Some(e.to_string()),
        },
    };
    let data = gen_mixture(&cfg.generator.with_eta(eta), cfg.t, seed)
        .and_then(|data| Ok((data.observations()?, data)));
    let (obs, data) = match data {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            return cells
                .into_iter()
                .map(|(m, _, d)| record(m, d, Err(Error::InvalidArgument(msg.clone()))))
                .collect();
        }
    };
    let ica_seed = derive_seed(seed, 4);
    cells
        .into_iter()
        .map(|(method, _, d)| {
            let outcome = run_method(cfg, method, eta, d, &obs, &data, ica_seed);
            if let Err(e) = &outcome {
                log::debug!("{} eta={eta} d={d:?} trial {trial}: {e}", method.name());
            }
            record(method, d, outcome)
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Runs the whole grid. Trials run in parallel; the output order does not
/// depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let units: Vec<(usize, usize)> = (0..cfg.eta_list.len())
        .flat_map(|e| (0..cfg.trials).map(move |k| (e, k)))
        .collect();
    let per_unit: Vec<Vec<TrialRecord>> = units
        .par_iter()
        .map(|&(e, k)| run_trial(cfg, e, k))
        .collect();

    let mut cells = Vec::new();
    let mut trials = Vec::new();
    for (method, eta_idx, d) in cfg.cells() {
        let recs: Vec<&TrialRecord> = per_unit
            .iter()
            .filter(|unit| unit.first().is_some_and(|r| r.eta == cfg.eta_list[eta_idx]))
            .flatten()
            .filter(|r| r.method == method && r.d == d)
            .collect();
        let ok: Vec<&&TrialRecord> = recs.iter().filter(|r| r.error.is_none()).collect();
        let mses: Vec<f64> = ok.iter().filter_map(|r| r.mse).collect();
        let ups: Vec<f64> = ok.iter().filter_map(|r| r.upsilon).collect();
        let failed = recs.len() - ok.len();
        if failed > 0 {
            log::warn!(
                "{} eta={} d={d:?}: {failed} of {} trials failed",
                method.name(),
                cfg.eta_list[eta_idx],
                recs.len()
            );
        }
        let trimmed = |v: &[f64]| {
            if v.is_empty() {
                Ok(f64::NAN)
            } else {
                trimmed_mean(v, cfg.trim_frac)
            }
        };
        cells.push(CellReport {
            method,
            eta: cfg.eta_list[eta_idx],
            d,
            trials_kept: ok.len(),
            failed,
            mse_trimmed: trimmed(&mses)?,
            upsilon_trimmed: trimmed(&ups)?,
            runtime_ms_mean: mean(&ok.iter().map(|r| r.runtime_ms).collect::<Vec<_>>()),
            classify_ms_mean: mean(&ok.iter().map(|r| r.classify_ms).collect::<Vec<_>>()),
            first_error: recs.iter().find_map(|r| r.error.clone()),
        });
        let mut sorted: Vec<TrialRecord> = recs.into_iter().cloned().collect();
        sorted.sort_by_key(|r| r.trial);
        trials.extend(sorted);
    }
    Ok(ExperimentReport {
        cells,
        trials,
        manifest: ExperimentManifest {
            config: cfg.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, eta: f64, d: Option<usize>) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.eta == eta && c.d == d)
    }

    /// One row per cell.
    pub fn report_csv(&self) -> String {
        let mut out = String::from(
            "method,eta,d,trials_kept,mse_trimmed,upsilon_trimmed,runtime_ms_mean,classify_ms_mean,failed\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.method.name(),
                c.eta,
                opt(&c.d),
                c.trials_kept,
                c.mse_trimmed,
                c.upsilon_trimmed,
                c.runtime_ms_mean,
                c.classify_ms_mean,
                c.failed
            );
        }
        out
    }

    /// Long format, one row per method and trial.
    pub fn trials_csv(&self) -> String {
        let mut out =
            String::from("method,eta,d,trial,mse,upsilon,runtime_ms,classify_ms,retained,error\n");
        for r in &self.trials {
            let error = r.error.as_deref().unwrap_or("").replace(['"', ','], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.method.name(),
                r.eta,
                opt(&r.d),
                r.trial,
                opt(&r.mse),
                opt(&r.upsilon),
                r.runtime_ms,
                r.classify_ms,
                opt(&r.retained),
                error
            );
        }
        out
    }

    /// Trimmed-mean MSE with one row per method (and degree) and one column
    /// per η.
    pub fn markdown_table(&self) -> String {
        let etas = &self.manifest.config.eta_list;
        let mut out = String::from("| Method |");
        for eta in etas {
            let _ = write!(out, " η={eta} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(etas.len()));
        out.push('\n');
        let mut rows: Vec<(Method, Option<usize>)> = Vec::new();
        for c in &self.cells {
            if !rows.contains(&(c.method, c.d)) {
                rows.push((c.method, c.d));
            }
        }
        rows.sort_by_key(|&(m, d)| {
            let rank = match m {
                Method::IgnoreP1 => 0,
                Method::Proposed => 1,
                Method::KnownR => 2,
            };
            (rank, d)
        });
        for (m, d) in rows {
            let _ = write!(out, "| {} |", m.row_label(d));
            for &eta in etas {
                match self.cell(m, eta, d) {
                    Some(c) if c.trials_kept > 0 => {
                        let _ = write!(out, " {:.4} |", c.mse_trimmed);
                    }
                    _ => out.push_str(" failed |"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `report.csv`, `trials.csv`, `table.md` and `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.report_csv())?;
        fs::write(dir.join("trials.csv"), self.trials_csv())?;
        fs::write(dir.join("table.md"), self.markdown_table())?;
        write_json(&dir.join("manifest.json"), &self.manifest)
    }
}
