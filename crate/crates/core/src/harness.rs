//! Experiment configuration, grid execution and reports.
//!
//! A run walks the grid dataset × t0 policy × n_I × split × model × metric.
//! For every (dataset, policy, n_I) the samples are extracted once; for
//! every split each model is trained on the training indices only, predicts
//! the test inputs, and its predictions are converted to the form each
//! metric needs before scoring.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{extract_dataset, Dataset, ExtractionParams, ExtractionStats, Sample, T0Policy};
use crate::io::{config_hash, create_dir, load_scenes, read_json, write_file, write_json};
use crate::metrics::{evaluate_binary, evaluate_trajectory, random_baseline, MetricKind, PolicyCheck};
use crate::models::{ModelSpec, Prediction, PredictionForm, PredictionModel, RetrievalModel, DEFAULT_NP};
use crate::scenario::{scenario_for, ScenarioDefinition, ScenarioParams};
use crate::scene::Scene;
use crate::splitting::{split, SplitMethod, SplitResult};
use crate::synthgen::{generate, GeneratorConfig};
use crate::transforms::{auto_chain, chain_path, TransformContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Generator { config: GeneratorConfig },
    /// Directory of scene CSV files with JSON sidecars.
    Path { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub source: DatasetSource,
}

fn default_policies() -> Vec<T0Policy<f64>> {
    vec![T0Policy::Initial]
}

fn default_n_inputs() -> Vec<usize> {
    vec![2]
}

fn default_step() -> f64 {
    0.1
}

fn default_t_epsilon() -> f64 {
    0.5
}

fn default_np() -> usize {
    DEFAULT_NP
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("gapbench-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    #[serde(default)]
    pub scenario: ScenarioParams<f64>,
    #[serde(default = "default_t_epsilon")]
    pub t_epsilon: f64,
    #[serde(default = "default_policies")]
    pub policies: Vec<T0Policy<f64>>,
    #[serde(default = "default_n_inputs")]
    pub n_inputs: Vec<usize>,
    /// Time step `δt` of the input and output windows.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub splits: Vec<SplitMethod>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub metrics: Vec<MetricKind>,
    #[serde(default = "default_np")]
    pub n_p: usize,
    /// Candidate pool size for trajectory reconstruction; `10 · n_p` if unset.
    #[serde(default)]
    pub pool_size: Option<usize>,
    /// Seed for per-sample prediction randomness.
    #[serde(default)]
    pub seed: u64,
    /// Keep per-sample metric values in the report.
    #[serde(default)]
    pub per_sample: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let config: Self = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Config(why));
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique".into());
        }
        for d in &self.datasets {
            match &d.source {
                DatasetSource::Generator { config } => config.validate()?,
                DatasetSource::Path { path } if !path.is_dir() => {
                    return bad(format!("dataset {}: {} is not a directory", d.name, path.display()))
                }
                DatasetSource::Path { .. } => {}
            }
        }
        if self.policies.is_empty() || self.n_inputs.is_empty() {
            return bad("need at least one policy and one n_inputs value".into());
        }
        for &n_i in &self.n_inputs {
            ExtractionParams { policy: T0Policy::Initial, n_inputs: n_i, step: self.step, t_epsilon: self.t_epsilon }
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        for p in &self.policies {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.scenario.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.n_p == 0 {
            return bad("n_p must be at least 1".into());
        }
        let mut model_names: Vec<String> = self.models.iter().map(ModelSpec::name).collect();
        model_names.sort_unstable();
        if model_names.windows(2).any(|w| w[0] == w[1]) {
            return bad("model entries must be distinct".into());
        }
        for m in &self.models {
            m.build::<f64>(self.n_p)?;
        }
        for metric in &self.metrics {
            match *metric {
                MetricKind::Ade { beta } | MetricKind::Fde { beta } if !(beta > 0.0 && beta <= 1.0) => {
                    return bad(format!("beta must lie in (0, 1], got {beta}"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Replaces the prediction seed, every generator seed and every random
    /// split seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        for d in &mut self.datasets {
            if let DatasetSource::Generator { config } = &mut d.source {
                config.seed = seed;
            }
        }
        for s in &mut self.splits {
            if let SplitMethod::RandomStratified { seed: s } = s {
                *s = seed;
            }
        }
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    fn pool_size(&self) -> usize {
        self.pool_size.unwrap_or(10 * self.n_p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok {
        value: f64,
        /// Expected score of a uniformly random binary predictor.
        baseline: Option<f64>,
        policy_check: PolicyCheck,
        n_train: usize,
        n_test: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        per_sample: Option<Vec<f64>>,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    pub policy: String,
    pub n_inputs: usize,
    pub split: String,
    pub model: String,
    pub metric: String,
    /// Transforms applied to reach the metric's prediction form.
    pub chain: Vec<String>,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub dataset: String,
    pub policy: String,
    pub n_inputs: usize,
    #[serde(flatten)]
    pub outcome: ExtractionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExtractionOutcome {
    Ok { provenance: String, stats: ExtractionStats },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub seed: u64,
    pub extractions: Vec<ExtractionSummary>,
    pub cells: Vec<Cell>,
}

impl Report {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c.outcome, CellOutcome::Error { .. })).count()
    }

    pub fn all_ok(&self) -> bool {
        self.failed_cells() == 0
            && self.extractions.iter().all(|e| matches!(e.outcome, ExtractionOutcome::Ok { .. }))
    }
}

/// SplitMix64 finalizer, used to derive independent per-sample seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn load_source(entry: &DatasetEntry) -> Result<Vec<Scene<f64>>> {
    match &entry.source {
        DatasetSource::Generator { config } => Ok(generate(config)?.scenes),
        DatasetSource::Path { path } => load_scenes(path),
    }
}

/// Builds a model and trains it on the training indices only.
pub fn train_for_split(
    spec: &ModelSpec,
    dataset: &Dataset<f64>,
    split: &SplitResult,
    n_p: usize,
) -> Result<Box<dyn PredictionModel<f64>>> {
    let mut model = spec.build::<f64>(n_p)?;
    let train: Vec<&Sample<f64>> = dataset.subset(&split.train_idx);
    model.train(&train)?;
    Ok(model)
}

/// Conditional models for trajectory reconstruction, trained on the
/// training split.
pub struct ConditionalModels {
    pub accepted: RetrievalModel<f64>,
    pub rejected: RetrievalModel<f64>,
}

impl ConditionalModels {
    pub fn train(dataset: &Dataset<f64>, split: &SplitResult) -> Result<Self> {
        let train = dataset.subset(&split.train_idx);
        Ok(Self {
            accepted: RetrievalModel::train(&train, Some(true))?,
            rejected: RetrievalModel::train(&train, Some(false))?,
        })
    }
}

fn needs_conditional(from: PredictionForm, to: PredictionForm) -> bool {
    from != PredictionForm::Trajectory && to != PredictionForm::Binary && from != to
}

struct CellKey<'a> {
    dataset: &'a str,
    policy: String,
    n_inputs: usize,
}

fn error_cell(key: &CellKey<'_>, split: String, model: String, metric: String, message: String) -> Cell {
    Cell {
        dataset: key.dataset.to_owned(),
        policy: key.policy.clone(),
        n_inputs: key.n_inputs,
        split,
        model,
        metric,
        chain: Vec::new(),
        outcome: CellOutcome::Error { message },
    }
}

/// Every (split, model, metric) cell below one extraction, as errors.
fn fail_all(config: &ExperimentConfig, key: &CellKey<'_>, message: &str, cells: &mut Vec<Cell>) {
    for s in &config.splits {
        for m in &config.models {
            for metric in &config.metrics {
                cells.push(error_cell(key, s.name(), m.name(), metric.name(), message.to_owned()));
            }
        }
    }
}

struct Scored {
    chain: Vec<String>,
    outcome: CellOutcome,
}

#[allow(clippy::too_many_arguments)]
fn score_metric(
    config: &ExperimentConfig,
    metric: &MetricKind,
    policy: &T0Policy<f64>,
    dataset: &Dataset<f64>,
    split: &SplitResult,
    preds: &[Prediction<f64>],
    from: PredictionForm,
    scenario: &dyn ScenarioDefinition<f64>,
    conditional: Option<&ConditionalModels>,
) -> Result<Scored> {
    let to = metric.required_form();
    let chain: Vec<String> = chain_path(from, to).iter().map(|s| s.to_string()).collect();
    let mut ctx = TransformContext::new(scenario, config.n_p);
    ctx.pool_size = config.pool_size();
    if let Some(c) = conditional {
        ctx = ctx.with_models(&c.accepted, &c.rejected);
    }
    let test: Vec<&Sample<f64>> = dataset.subset(&split.test_idx);
    let converted: Vec<Prediction<f64>> = test
        .par_iter()
        .zip(preds.par_iter())
        .enumerate()
        .map(|(i, (sample, pred))| {
            auto_chain(pred, to, &ctx, &sample.input, mix_seed(config.seed ^ 0x0074_7261_6e73, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut result = if metric.is_binary() {
        let scores: Vec<f64> = converted.iter().map(|p| p.a_pred().expect("binary prediction")).collect();
        let truths: Vec<bool> = test.iter().map(|s| s.output.accepted).collect();
        evaluate_binary(metric, &scores, &truths)?
    } else {
        let sets: Vec<Vec<Vec<_>>> = converted
            .into_iter()
            .map(|p| match p {
                Prediction::TrajectorySet { trajs } => trajs,
                _ => unreachable!("converted to trajectories"),
            })
            .collect();
        let truths: Vec<Vec<_>> = test.iter().map(|s| s.output.target_future.clone()).collect();
        evaluate_trajectory(metric, &sets, &truths)?
    };
    result.policy_check = metric.check_policy(policy);
    let truths: Vec<bool> = test.iter().map(|s| s.output.accepted).collect();
    let baseline = if metric.is_binary() { random_baseline::<f64>(metric, &truths)? } else { None };
    Ok(Scored {
        chain,
        outcome: CellOutcome::Ok {
            value: result.value,
            baseline,
            policy_check: result.policy_check,
            n_train: split.train_idx.len(),
            n_test: split.test_idx.len(),
            per_sample: if config.per_sample { result.per_sample } else { None },
        },
    })
}

fn run_extraction(
    config: &ExperimentConfig,
    key: &CellKey<'_>,
    policy: &T0Policy<f64>,
    dataset: &Dataset<f64>,
    scenario: &dyn ScenarioDefinition<f64>,
    cells: &mut Vec<Cell>,
) {
    for method in &config.splits {
        let split_result = match split(dataset, *method) {
            Ok(s) => s,
            Err(e) => {
                for m in &config.models {
                    for metric in &config.metrics {
                        cells.push(error_cell(key, method.name(), m.name(), metric.name(), format!("split: {e}")));
                    }
                }
                continue;
            }
        };
        let needs_any_conditional = config.models.iter().any(|m| {
            m.build::<f64>(config.n_p).is_ok_and(|b| {
                config.metrics.iter().any(|metric| needs_conditional(b.output_form(), metric.required_form()))
            })
        });
        let conditional = if needs_any_conditional {
            Some(ConditionalModels::train(dataset, &split_result).map_err(|e| e.to_string()))
        } else {
            None
        };
        let test: Vec<&Sample<f64>> = dataset.subset(&split_result.test_idx);

        for spec in &config.models {
            let predictions = train_for_split(spec, dataset, &split_result, config.n_p).and_then(|model| {
                let form = model.output_form();
                let preds = test
                    .par_iter()
                    .enumerate()
                    .map(|(i, s)| model.predict(&s.input, mix_seed(config.seed, i as u64)))
                    .collect::<Result<Vec<_>>>()?;
                Ok((form, preds))
            });
            for metric in &config.metrics {
                let name = (method.name(), spec.name(), metric.name());
                let (form, preds) = match &predictions {
                    Ok(p) => p,
                    Err(e) => {
                        cells.push(error_cell(key, name.0, name.1, name.2, format!("model: {e}")));
                        continue;
                    }
                };
                let cond = match (&conditional, needs_conditional(*form, metric.required_form())) {
                    (Some(Err(e)), true) => {
                        cells.push(error_cell(key, name.0, name.1, name.2, format!("conditional models: {e}")));
                        continue;
                    }
                    (Some(Ok(c)), true) => Some(c),
                    _ => None,
                };
                let scored =
                    score_metric(config, metric, policy, dataset, &split_result, preds, *form, scenario, cond);
                cells.push(match scored {
                    Ok(s) => Cell {
                        dataset: key.dataset.to_owned(),
                        policy: key.policy.clone(),
                        n_inputs: key.n_inputs,
                        split: name.0,
                        model: name.1,
                        metric: name.2,
                        chain: s.chain,
                        outcome: s.outcome,
                    },
                    Err(e) => error_cell(key, name.0, name.1, name.2, e.to_string()),
                });
            }
        }
    }
}

/// Extracts one dataset per (source, policy, n_I).
pub fn extract_for(
    config: &ExperimentConfig,
    scenes: &[Scene<f64>],
    policy: T0Policy<f64>,
    n_inputs: usize,
) -> Result<Dataset<f64>> {
    let kind = scenes
        .first()
        .map(|s| s.scenario_kind)
        .ok_or(Error::Empty("scene set"))?;
    let scenario = scenario_for(kind, config.scenario);
    let params = ExtractionParams { policy, n_inputs, step: config.step, t_epsilon: config.t_epsilon };
    extract_dataset(scenes, &params, scenario.as_ref())
}

/// Runs the configured grid. Failures are recorded per cell; the run always
/// completes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let mut extractions = Vec::new();
    let mut cells = Vec::new();
    for entry in &config.datasets {
        let scenes = load_source(entry);
        for policy in &config.policies {
            for &n_inputs in &config.n_inputs {
                let key = CellKey { dataset: &entry.name, policy: policy.name(), n_inputs };
                let extracted = match &scenes {
                    Ok(scenes) => extract_for(config, scenes, *policy, n_inputs).map(|d| {
                        let kind = scenes[0].scenario_kind;
                        (d, kind)
                    }),
                    Err(e) => Err(Error::Config(format!("loading dataset {}: {e}", entry.name))),
                };
                match extracted {
                    Ok((dataset, kind)) => {
                        extractions.push(ExtractionSummary {
                            dataset: entry.name.clone(),
                            policy: key.policy.clone(),
                            n_inputs,
                            outcome: ExtractionOutcome::Ok {
                                provenance: dataset.provenance.clone(),
                                stats: dataset.stats.clone(),
                            },
                        });
                        let scenario = scenario_for(kind, config.scenario);
                        run_extraction(config, &key, policy, &dataset, scenario.as_ref(), &mut cells);
                    }
                    Err(e) => {
                        extractions.push(ExtractionSummary {
                            dataset: entry.name.clone(),
                            policy: key.policy.clone(),
                            n_inputs,
                            outcome: ExtractionOutcome::Error { message: e.to_string() },
                        });
                        fail_all(config, &key, &format!("extraction: {e}"), &mut cells);
                    }
                }
            }
        }
    }
    Ok(Report { config_hash: config.hash()?, seed: config.seed, extractions, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const REPORT_CSV_COLUMNS: [&str; 14] = [
    "dataset",
    "policy",
    "n_inputs",
    "split",
    "model",
    "metric",
    "status",
    "value",
    "baseline",
    "policy_check",
    "n_train",
    "n_test",
    "chain",
    "error",
];

pub fn report_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_COLUMNS)?;
    for c in &report.cells {
        let (status, value, baseline, check, n_train, n_test, error) = match &c.outcome {
            CellOutcome::Ok { value, baseline, policy_check, n_train, n_test, .. } => (
                "ok",
                value.to_string(),
                baseline.map(|b| b.to_string()).unwrap_or_default(),
                match policy_check {
                    PolicyCheck::Pass => "pass".to_owned(),
                    PolicyCheck::Warn(why) => format!("warn: {why}"),
                },
                n_train.to_string(),
                n_test.to_string(),
                String::new(),
            ),
            CellOutcome::Error { message } => {
                ("error", String::new(), String::new(), String::new(), String::new(), String::new(), message.clone())
            }
        };
        w.write_record([
            c.dataset.clone(),
            c.policy.clone(),
            c.n_inputs.to_string(),
            c.split.clone(),
            c.model.clone(),
            c.metric.clone(),
            status.to_owned(),
            value,
            baseline,
            check,
            n_train,
            n_test,
            c.chain.join(">"),
            error,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `report.json` and/or `report.csv` into `dir`; returns the paths.
pub fn emit_report(report: &Report, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    for format in formats {
        let path = match format {
            ReportFormat::Json => {
                let p = dir.join("report.json");
                write_json(&p, report)?;
                p
            }
            ReportFormat::Csv => {
                let p = dir.join("report.csv");
                write_file(&p, report_csv(report)?)?;
                p
            }
        };
        written.push(path);
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<Report> {
    read_json(path)
}
