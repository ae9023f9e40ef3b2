//! A closed-loop world where a tabular softmax bandit plays the policy, the
//! reward table plays the reward model, and fixed-rate DPO steps play the
//! trainer.
//!
//! Prompts are context ids. Each generated record is a pair of distinct arms
//! sampled from the current policy and labelled by the reward table; it uses
//! unit lengths and the uniform reference log-probability `-ln|Y|`, so its
//! DPO-style implicit margin is `β(θ_w - θ_l)` and its `M_1` score equals the
//! residual gap `|ξ_w - ξ_l|` of the simulator.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Stage, WorldPort};
use crate::bandit::{mean_squared_pair_gap, pair_delta, BanditInstance};
use crate::error::{Error, Result};
use crate::metrics::{ImplicitKind, MetricConfig};
use crate::record::PreferenceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditWorldConfig {
    /// Response pairs sampled per prompt by `gen_dataset`.
    pub pairs_per_context: usize,
    /// Std of the Gaussian perturbation applied to a parent's rewards on evolve.
    pub evolve_noise: f64,
    /// DPO steps per `train` call.
    pub train_steps: usize,
    /// Fixed learning rate; `None` means `4/β²`.
    pub eta: Option<f64>,
    pub seed: u64,
}

impl Default for BanditWorldConfig {
    fn default() -> Self {
        BanditWorldConfig {
            pairs_per_context: 4,
            evolve_noise: 0.1,
            train_steps: 200,
            eta: None,
            seed: 0,
        }
    }
}

/// `θ` per context id; contexts absent from the map are at `θ = 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BanditModel {
    pub theta: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone)]
struct PairRef {
    context: String,
    chosen: usize,
    rejected: usize,
}

pub struct BanditWorld {
    beta: f64,
    n_arms: usize,
    eta: f64,
    cfg: BanditWorldConfig,
    base_prompts: Vec<String>,
    rewards: BTreeMap<String, Vec<f64>>,
    pairs: HashMap<String, PairRef>,
    evolved_count: usize,
    rng: ChaCha8Rng,
}

/// Build a bandit-backed world; contexts of `instance` become prompts `x0, x1, ...`.
pub fn bandit_world(instance: &BanditInstance, cfg: BanditWorldConfig) -> Result<BanditWorld> {
    instance.validate()?;
    if cfg.pairs_per_context == 0 {
        return Err(Error::Config("pairs_per_context must be >= 1".into()));
    }
    if !(cfg.evolve_noise.is_finite() && cfg.evolve_noise >= 0.0) {
        return Err(Error::Config(format!(
            "evolve_noise must be >= 0, got {}",
            cfg.evolve_noise
        )));
    }
    let eta = cfg.eta.unwrap_or(4.0 / (instance.beta * instance.beta));
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    let mut rewards = BTreeMap::new();
    let mut base_prompts = Vec::with_capacity(instance.n_contexts);
    for x in 0..instance.n_contexts {
        let id = format!("x{x}");
        rewards.insert(id.clone(), instance.reward_row(x).to_vec());
        base_prompts.push(id);
    }
    Ok(BanditWorld {
        beta: instance.beta,
        n_arms: instance.n_arms,
        eta,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
        base_prompts,
        rewards,
        pairs: HashMap::new(),
        evolved_count: 0,
    })
}

impl BanditWorld {
    pub fn prompts(&self) -> Vec<String> {
        self.base_prompts.clone()
    }

    /// Metric settings under which record scores match the simulator's residuals.
    pub fn metric_config(&self, alpha: f64) -> MetricConfig {
        MetricConfig {
            beta: self.beta,
            alpha,
            implicit_kind: ImplicitKind::DpoReference,
            normalize: false,
        }
    }

    pub fn rewards(&self, context: &str) -> Option<&[f64]> {
        self.rewards.get(context).map(Vec::as_slice)
    }

    /// `|ξ_w - ξ_l|` for a generated record, computed from the reward table and `θ`.
    pub fn residual_gap(&self, model: &BanditModel, record_id: &str) -> Result<f64> {
        let pair = self.pair(record_id)?;
        let r = &self.rewards[&pair.context];
        let theta = self.theta_row(model, &pair.context);
        let xi = |y: usize| self.beta * theta[y] - r[y];
        Ok((xi(pair.chosen) - xi(pair.rejected)).abs())
    }

    /// `Dist` restricted to `prompts`.
    pub fn dist(&self, model: &BanditModel, prompts: &[String]) -> Option<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for p in prompts {
            let r = self.rewards.get(p)?;
            let theta = self.theta_row(model, p);
            let xi: Vec<f64> = theta
                .iter()
                .zip(r)
                .map(|(t, r)| self.beta * t - r)
                .collect();
            total += mean_squared_pair_gap(&xi);
            n += 1;
        }
        (n > 0).then(|| (total / n as f64).sqrt())
    }

    fn pair(&self, record_id: &str) -> Result<&PairRef> {
        self.pairs
            .get(record_id)
            .ok_or_else(|| Error::invalid(record_id, "record was not generated by this world"))
    }

    fn theta_row(&self, model: &BanditModel, context: &str) -> Vec<f64> {
        model
            .theta
            .get(context)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.n_arms])
    }

    fn log_softmax(theta: &[f64]) -> Vec<f64> {
        let max = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + theta.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        theta.iter().map(|t| t - log_z).collect()
    }

    fn sample_arm(&mut self, probs: &[f64], exclude: Option<usize>) -> usize {
        let mass: f64 = probs
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(_, p)| p)
            .sum();
        let mut u = self.rng.random::<f64>() * mass;
        let mut last = 0;
        for (i, p) in probs.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            last = i;
            if u < *p {
                return i;
            }
            u -= p;
        }
        last
    }

    fn make_record(
        &self,
        id: String,
        context: &str,
        logp: &[f64],
        chosen: usize,
        rejected: usize,
    ) -> PreferenceRecord {
        let r = &self.rewards[context];
        let reference = -(self.n_arms as f64).ln();
        PreferenceRecord {
            id,
            prompt: Some(context.to_string()),
            reward_w: r[chosen],
            reward_l: r[rejected],
            logp_w: logp[chosen],
            len_w: 1,
            logp_l: logp[rejected],
            len_l: 1,
            ref_logp_w: Some(reference),
            ref_logp_l: Some(reference),
        }
    }
}

impl WorldPort for BanditWorld {
    type Model = BanditModel;

    fn initial_model(&self) -> BanditModel {
        BanditModel::default()
    }

    fn gen_dataset(
        &mut self,
        prompts: &[String],
        model: &BanditModel,
        stage: Stage,
    ) -> Result<Vec<PreferenceRecord>> {
        let mut out = Vec::with_capacity(prompts.len() * self.cfg.pairs_per_context);
        for context in prompts {
            let r = self
                .rewards
                .get(context)
                .ok_or_else(|| Error::Config(format!("unknown context {context:?}")))?
                .clone();
            let logp = Self::log_softmax(&self.theta_row(model, context));
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            for i in 0..self.cfg.pairs_per_context {
                let a = self.sample_arm(&probs, None);
                let b = self.sample_arm(&probs, Some(a));
                // higher reward wins; ties go to the lower arm index
                let (chosen, rejected) = if r[a] > r[b] || (r[a] == r[b] && a < b) {
                    (a, b)
                } else {
                    (b, a)
                };
                let id = format!("{}/{}/{}", stage.id_prefix(), context, i);
                self.pairs.insert(
                    id.clone(),
                    PairRef {
                        context: context.clone(),
                        chosen,
                        rejected,
                    },
                );
                out.push(self.make_record(id, context, &logp, chosen, rejected));
            }
        }
        Ok(out)
    }

    fn evolve(&mut self, prompts: &[String], _iteration: usize) -> Result<Vec<String>> {
        let noise =
            Normal::new(0.0, self.cfg.evolve_noise).map_err(|e| Error::Config(e.to_string()))?;
        let mut out = Vec::with_capacity(prompts.len());
        for parent in prompts {
            let base = self
                .rewards
                .get(parent)
                .ok_or_else(|| Error::Config(format!("unknown context {parent:?}")))?
                .clone();
            let child: Vec<f64> = base
                .iter()
                .map(|r| (r + noise.sample(&mut self.rng)).clamp(0.0, 1.0))
                .collect();
            let id = format!("{parent}~e{}", self.evolved_count);
            self.evolved_count += 1;
            self.rewards.insert(id.clone(), child);
            out.push(id);
        }
        Ok(out)
    }

    fn train(
        &mut self,
        mut model: BanditModel,
        records: &[PreferenceRecord],
        _iteration: usize,
    ) -> Result<BanditModel> {
        if records.is_empty() {
            return Ok(model);
        }
        let pairs = records
            .iter()
            .map(|r| self.pair(&r.id).cloned())
            .collect::<Result<Vec<_>>>()?;
        for _ in 0..self.cfg.train_steps {
            let pair = &pairs[self.rng.random_range(0..pairs.len())];
            let r = &self.rewards[&pair.context];
            let theta = model
                .theta
                .entry(pair.context.clone())
                .or_insert_with(|| vec![0.0; self.n_arms]);
            let d = pair_delta(
                r[pair.chosen] - r[pair.rejected],
                theta[pair.chosen] - theta[pair.rejected],
                self.beta,
            );
            let step = 0.5 * self.eta * self.beta * d;
            theta[pair.chosen] += step;
            theta[pair.rejected] -= step;
        }
        Ok(model)
    }

    fn score_context(
        &self,
        model: &BanditModel,
        record: &PreferenceRecord,
    ) -> Result<PreferenceRecord> {
        let pair = self.pair(&record.id)?;
        let logp = Self::log_softmax(&self.theta_row(model, &pair.context));
        let mut out = record.clone();
        out.logp_w = logp[pair.chosen];
        out.logp_l = logp[pair.rejected];
        Ok(out)
    }

    fn quality(&self, model: &BanditModel, prompts: &[String]) -> Option<f64> {
        self.dist(model, prompts)
    }
}
