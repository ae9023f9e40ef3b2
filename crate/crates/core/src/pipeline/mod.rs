//! Iterated data generation with metric-based selection.
//!
//! Two loop orderings are provided over any [`WorldPort`] backend:
//!
//! - evolve-then-select: generate `D` from the prompts, evolve the prompts,
//!   generate `D'` from the evolved prompts, re-score `D'` under the current
//!   model, keep its top-k `D'_k`, and train on `D ∪ D'_k`;
//! - select-then-evolve: generate `D`, keep its top-k `D_k`, evolve the
//!   prompts of `D_k`, generate `D'_k` from them, and train on `D ∪ D'_k`.
//!
//! The prompt set passed in is used unchanged at every iteration; `D` is never
//! filtered. When an artifact directory is configured, every iteration writes
//! `iter_{t}/D.jsonl`, `X_evolved.txt`, `D_prime.jsonl`,
//! `selected.manifest.json` and `train_set.jsonl` before training, then
//! `report.json` after it.

mod bandit_world;
mod file_world;

pub use bandit_world::{bandit_world, BanditModel, BanditWorld, BanditWorldConfig};
pub use file_world::{file_world, FileWorld};

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::{score_dataset, Metric, MetricConfig};
use crate::record::{write_jsonl, PreferenceRecord};
use crate::selection::{k_from_fraction, select_top_k, SelectionResult};

/// Which dataset a `gen_dataset` call produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// `D`, from the original prompts.
    Base,
    /// `D'` (or `D'_k`), from evolved prompts.
    Evolved,
}

impl Source {
    pub fn tag(self) -> &'static str {
        match self {
            Source::Base => "D",
            Source::Evolved => "D_prime",
        }
    }
}

/// Where in the loop a port call happens. Iterations count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub iteration: usize,
    pub source: Source,
}

impl Stage {
    /// Id prefix for generated records, unique per iteration and source.
    pub fn id_prefix(&self) -> String {
        format!("t{}/{}", self.iteration, self.source.tag())
    }
}

/// The operations a backend supplies: sampling and annotating responses,
/// evolving prompts, training, and recomputing log-probabilities.
pub trait WorldPort {
    type Model: Clone;

    fn initial_model(&self) -> Self::Model;

    fn gen_dataset(
        &mut self,
        prompts: &[String],
        model: &Self::Model,
        stage: Stage,
    ) -> Result<Vec<PreferenceRecord>>;

    /// Must return a non-empty list for non-empty input.
    fn evolve(&mut self, prompts: &[String], iteration: usize) -> Result<Vec<String>>;

    fn train(
        &mut self,
        model: Self::Model,
        records: &[PreferenceRecord],
        iteration: usize,
    ) -> Result<Self::Model>;

    /// Return `record` with its log-probability fields recomputed under `model`.
    fn score_context(
        &self,
        model: &Self::Model,
        record: &PreferenceRecord,
    ) -> Result<PreferenceRecord>;

    /// Backend-specific quality signal for the model on `prompts` (lower is better).
    fn quality(&self, _model: &Self::Model, _prompts: &[String]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    EvolveThenSelect,
    SelectThenEvolve,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::EvolveThenSelect => "evolve_then_select",
            Mode::SelectThenEvolve => "select_then_evolve",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evolve_then_select" => Ok(Mode::EvolveThenSelect),
            "select_then_evolve" => Ok(Mode::SelectThenEvolve),
            other => Err(Error::Config(format!("unknown pipeline mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSize {
    TopK(usize),
    Fraction(f64),
}

impl SelectionSize {
    fn resolve(self, n: usize, warnings: &mut Vec<String>) -> Result<usize> {
        match self {
            SelectionSize::Fraction(f) => {
                if n == 0 {
                    // still validate the fraction
                    k_from_fraction(1, f)?;
                    return Ok(0);
                }
                k_from_fraction(n, f)
            }
            SelectionSize::TopK(0) => Err(Error::Config("k must be positive".into())),
            SelectionSize::TopK(k) if k > n => {
                let msg = format!("k = {k} exceeds the {n} candidate records; clamped to {n}");
                log::warn!("{msg}");
                warnings.push(msg);
                Ok(n)
            }
            SelectionSize::TopK(k) => Ok(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub iterations: usize,
    pub selection: SelectionSize,
    pub metric: Metric,
    pub metric_cfg: MetricConfig,
    pub mode: Mode,
    pub seed: u64,
    pub artifact_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        self.metric_cfg.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub t: usize,
    pub mode: Mode,
    pub metric: Metric,
    pub size_d: usize,
    pub size_d_prime: usize,
    pub size_d_prime_k: usize,
    pub k: usize,
    pub tau_k: Option<f64>,
    /// Mean score of the pool the top-k was taken from (`D'` or `D`).
    pub mean_score_pool: Option<f64>,
    /// Mean score of the selected subset (`D'_k` or `D_k`).
    pub mean_score_selected: Option<f64>,
    /// Select-then-evolve only: mean score of the regenerated `D'_k`.
    pub mean_score_evolved: Option<f64>,
    pub quality_before: Option<f64>,
    pub quality_after: Option<f64>,
    /// Stage names in execution order.
    pub stages: Vec<String>,
    pub warnings: Vec<String>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

struct Artifacts {
    dir: Option<PathBuf>,
}

impl Artifacts {
    fn for_iteration(root: Option<&Path>, t: usize) -> Self {
        Artifacts {
            dir: root.map(|r| r.join(format!("iter_{t}"))),
        }
    }

    fn records(&self, name: &str, records: &[PreferenceRecord]) -> Result<()> {
        if let Some(dir) = &self.dir {
            let mut buf = Vec::new();
            write_jsonl(&mut buf, records)?;
            write_atomic(&dir.join(name), &buf)?;
        }
        Ok(())
    }

    fn prompts(&self, prompts: &[String]) -> Result<()> {
        if let Some(dir) = &self.dir {
            let mut text = prompts.join("\n");
            if !prompts.is_empty() {
                text.push('\n');
            }
            write_atomic(&dir.join("X_evolved.txt"), text.as_bytes())?;
        }
        Ok(())
    }

    fn manifest(&self, selection: &SelectionResult) -> Result<()> {
        if let Some(dir) = &self.dir {
            write_atomic(
                &dir.join("selected.manifest.json"),
                selection.to_manifest_json()?.as_bytes(),
            )?;
        }
        Ok(())
    }

    fn report(&self, report: &IterationReport) -> Result<()> {
        if let Some(dir) = &self.dir {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            write_atomic(&dir.join("report.json"), s.as_bytes())?;
        }
        Ok(())
    }
}

fn stage_err(iteration: usize, stage: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::Stage {
        iteration,
        stage: stage.to_string(),
        source: Box::new(e),
    }
}

fn rescore<W: WorldPort>(
    world: &W,
    model: &W::Model,
    pool: &[PreferenceRecord],
) -> Result<Vec<PreferenceRecord>> {
    pool.iter().map(|r| world.score_context(model, r)).collect()
}

/// `(selection, selected records, pool mean, selected mean)`
type Selected = (
    SelectionResult,
    Vec<PreferenceRecord>,
    Option<f64>,
    Option<f64>,
);

/// Pick the top-k of an already re-scored pool.
fn select_from(
    rescored: &[PreferenceRecord],
    config: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<Selected> {
    let k = config.selection.resolve(rescored.len(), warnings)?;
    if k == 0 {
        let msg = "no candidate records; selection is empty".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        let empty = SelectionResult {
            metric: config.metric.name().into(),
            k: 0,
            tau_k: None,
            seed: Some(config.seed),
            rng: None,
            chosen_ids: Vec::new(),
        };
        return Ok((empty, Vec::new(), None, None));
    }
    let scored = score_dataset(rescored, config.metric, &config.metric_cfg)?;
    warnings.extend(scored.warnings.iter().map(|w| w.to_string()));
    let mut selection = select_top_k(&scored.scores, k)?.with_metric(scored.metric.name());
    selection.seed = Some(config.seed);

    let lookup: std::collections::HashMap<&str, (usize, f64)> = scored
        .scores
        .iter()
        .enumerate()
        .map(|(i, (id, s))| (id.as_str(), (i, *s)))
        .collect();
    let mut chosen = Vec::with_capacity(k);
    let mut chosen_scores = Vec::with_capacity(k);
    for id in &selection.chosen_ids {
        let (i, s) = lookup[id.as_str()];
        chosen.push(rescored[i].clone());
        chosen_scores.push(s);
    }
    Ok((
        selection,
        chosen,
        mean(&scored.values()),
        mean(&chosen_scores),
    ))
}

fn union_disjoint(
    base: &[PreferenceRecord],
    extra: &[PreferenceRecord],
) -> Result<Vec<PreferenceRecord>> {
    let ids: HashSet<&str> = base.iter().map(|r| r.id.as_str()).collect();
    if let Some(clash) = extra.iter().find(|r| ids.contains(r.id.as_str())) {
        return Err(Error::DuplicateId(clash.id.clone()));
    }
    Ok(base.iter().chain(extra).cloned().collect())
}

fn mean_metric(records: &[PreferenceRecord], config: &PipelineConfig) -> Result<Option<f64>> {
    if records.is_empty() {
        return Ok(None);
    }
    Ok(mean(
        &score_dataset(records, config.metric, &config.metric_cfg)?.values(),
    ))
}

pub fn run_evolve_then_select<W: WorldPort>(
    world: &mut W,
    prompts: &[String],
    config: &PipelineConfig,
) -> Result<(W::Model, Vec<IterationReport>)> {
    run_pipeline(
        world,
        prompts,
        &PipelineConfig {
            mode: Mode::EvolveThenSelect,
            ..config.clone()
        },
    )
}

pub fn run_select_then_evolve<W: WorldPort>(
    world: &mut W,
    prompts: &[String],
    config: &PipelineConfig,
) -> Result<(W::Model, Vec<IterationReport>)> {
    run_pipeline(
        world,
        prompts,
        &PipelineConfig {
            mode: Mode::SelectThenEvolve,
            ..config.clone()
        },
    )
}

/// Dispatch on `config.mode`.
pub fn run_pipeline<W: WorldPort>(
    world: &mut W,
    prompts: &[String],
    config: &PipelineConfig,
) -> Result<(W::Model, Vec<IterationReport>)> {
    config.validate()?;
    if prompts.is_empty() {
        return Err(Error::Config("pipeline needs at least one prompt".into()));
    }
    let mut model = world.initial_model();
    let mut reports = Vec::with_capacity(config.iterations);
    for t in 1..=config.iterations {
        let (next, report) = match config.mode {
            Mode::EvolveThenSelect => evolve_then_select_step(world, model, prompts, config, t)?,
            Mode::SelectThenEvolve => select_then_evolve_step(world, model, prompts, config, t)?,
        };
        model = next;
        reports.push(report);
    }
    Ok((model, reports))
}

fn evolve_then_select_step<W: WorldPort>(
    world: &mut W,
    model: W::Model,
    prompts: &[String],
    config: &PipelineConfig,
    t: usize,
) -> Result<(W::Model, IterationReport)> {
    let out = Artifacts::for_iteration(config.artifact_dir.as_deref(), t);
    let mut warnings = Vec::new();
    let mut stages = Vec::new();

    let base = Stage {
        iteration: t,
        source: Source::Base,
    };
    let d = world
        .gen_dataset(prompts, &model, base)
        .map_err(stage_err(t, "gen_dataset D"))?;
    out.records("D.jsonl", &d)?;
    stages.push("gen_dataset:D".to_string());

    let evolved = world.evolve(prompts, t).map_err(stage_err(t, "evolve"))?;
    out.prompts(&evolved)?;
    stages.push("evolve".to_string());

    let evolved_stage = Stage {
        iteration: t,
        source: Source::Evolved,
    };
    let d_prime = world
        .gen_dataset(&evolved, &model, evolved_stage)
        .map_err(stage_err(t, "gen_dataset D_prime"))?;
    stages.push("gen_dataset:D_prime".to_string());

    // Scores must reflect the current model, so D' is re-scored before selection.
    let d_prime = rescore(world, &model, &d_prime).map_err(stage_err(t, "score_context"))?;
    out.records("D_prime.jsonl", &d_prime)?;
    let (selection, d_prime_k, pool_mean, selected_mean) =
        select_from(&d_prime, config, &mut warnings).map_err(stage_err(t, "select"))?;
    out.manifest(&selection)?;
    stages.push("select:D_prime_k".to_string());

    let train_set = union_disjoint(&d, &d_prime_k).map_err(stage_err(t, "train_set"))?;
    out.records("train_set.jsonl", &train_set)?;

    let quality_before = world.quality(&model, prompts);
    let model = world
        .train(model, &train_set, t)
        .map_err(stage_err(t, "train"))?;
    let quality_after = world.quality(&model, prompts);
    stages.push("train".to_string());

    let report = IterationReport {
        t,
        mode: Mode::EvolveThenSelect,
        metric: config.metric,
        size_d: d.len(),
        size_d_prime: d_prime.len(),
        size_d_prime_k: d_prime_k.len(),
        k: selection.k,
        tau_k: selection.tau_k,
        mean_score_pool: pool_mean,
        mean_score_selected: selected_mean,
        mean_score_evolved: None,
        quality_before,
        quality_after,
        stages,
        warnings,
    };
    out.report(&report)?;
    Ok((model, report))
}

fn select_then_evolve_step<W: WorldPort>(
    world: &mut W,
    model: W::Model,
    prompts: &[String],
    config: &PipelineConfig,
    t: usize,
) -> Result<(W::Model, IterationReport)> {
    let out = Artifacts::for_iteration(config.artifact_dir.as_deref(), t);
    let mut warnings = Vec::new();
    let mut stages = Vec::new();

    let base = Stage {
        iteration: t,
        source: Source::Base,
    };
    let d = world
        .gen_dataset(prompts, &model, base)
        .map_err(stage_err(t, "gen_dataset D"))?;
    out.records("D.jsonl", &d)?;
    stages.push("gen_dataset:D".to_string());

    let rescored = rescore(world, &model, &d).map_err(stage_err(t, "score_context"))?;
    let (selection, d_k, pool_mean, selected_mean) =
        select_from(&rescored, config, &mut warnings).map_err(stage_err(t, "select"))?;
    out.manifest(&selection)?;
    stages.push("select:D_k".to_string());

    let mut selected_prompts: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for r in &d_k {
        let prompt = r.prompt.clone().ok_or_else(|| {
            stage_err(t, "select")(Error::invalid(&r.id, "record has no prompt to evolve"))
        })?;
        if seen.insert(prompt.clone()) {
            selected_prompts.push(prompt);
        }
    }
    let evolved = if selected_prompts.is_empty() {
        Vec::new()
    } else {
        world
            .evolve(&selected_prompts, t)
            .map_err(stage_err(t, "evolve"))?
    };
    out.prompts(&evolved)?;
    stages.push("evolve".to_string());

    let evolved_stage = Stage {
        iteration: t,
        source: Source::Evolved,
    };
    let d_prime_k = if evolved.is_empty() {
        Vec::new()
    } else {
        world
            .gen_dataset(&evolved, &model, evolved_stage)
            .map_err(stage_err(t, "gen_dataset D_prime"))?
    };
    out.records("D_prime.jsonl", &d_prime_k)?;
    stages.push("gen_dataset:D_prime_k".to_string());
    let evolved_mean = mean_metric(&d_prime_k, config).map_err(stage_err(t, "score D_prime_k"))?;

    let train_set = union_disjoint(&d, &d_prime_k).map_err(stage_err(t, "train_set"))?;
    out.records("train_set.jsonl", &train_set)?;

    let quality_before = world.quality(&model, prompts);
    let model = world
        .train(model, &train_set, t)
        .map_err(stage_err(t, "train"))?;
    let quality_after = world.quality(&model, prompts);
    stages.push("train".to_string());

    let report = IterationReport {
        t,
        mode: Mode::SelectThenEvolve,
        metric: config.metric,
        size_d: d.len(),
        size_d_prime: d_prime_k.len(),
        size_d_prime_k: d_prime_k.len(),
        k: selection.k,
        tau_k: selection.tau_k,
        mean_score_pool: pool_mean,
        mean_score_selected: selected_mean,
        mean_score_evolved: evolved_mean,
        quality_before,
        quality_after,
        stages,
        warnings,
    };
    out.report(&report)?;
    Ok((model, report))
}
