use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{sample_adversarial, sample_uniform, Sampler};
use super::{dist, error_v, step_fixed, step_optimal, BanditInstance, PolicyState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrMode {
    Fixed(f64),
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sampler: Sampler,
    pub lr_mode: LrMode,
    pub max_steps: u64,
    /// Stop once `Dist <= target_ratio * Dist⁰`; must lie in (0, 1).
    pub target_ratio: f64,
    pub trials: usize,
    pub record_every: u64,
    /// Keep stepping after the target is reached (until `max_steps`).
    pub run_past_target: bool,
    /// Draw a fresh `U[0,1]` reward table for every trial.
    pub fresh_rewards: bool,
    /// Cross-check the recorded `Dist` against `sqrt(2V)` at every record.
    pub audit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sampler: Sampler::Adversarial,
            lr_mode: LrMode::Optimal,
            max_steps: 100_000,
            target_ratio: 1e-3,
            trials: 1,
            record_every: 1,
            run_past_target: false,
            fresh_rewards: true,
            audit: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let LrMode::Fixed(eta) = self.lr_mode {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::Config(format!(
                    "fixed learning rate must be positive, got {eta}"
                )));
            }
        }
        if !(self.target_ratio > 0.0 && self.target_ratio < 1.0) {
            return Err(Error::Config(format!(
                "target ratio must be in (0, 1), got {}",
                self.target_ratio
            )));
        }
        if self.max_steps == 0 || self.trials == 0 || self.record_every == 0 {
            return Err(Error::Config(
                "max_steps, trials and record_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: u64,
    pub dist: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub trial: usize,
    pub steps: Vec<TracePoint>,
    /// First `t` with `Dist <= target_ratio * Dist⁰`.
    pub iterations_to_target: Option<u64>,
}

impl Trace {
    pub fn initial(&self) -> TracePoint {
        self.steps[0]
    }

    pub fn last(&self) -> TracePoint {
        *self.steps.last().expect("trace always holds t = 0")
    }

    /// First recorded `t` with `Dist <= ratio * Dist⁰`.
    pub fn first_below(&self, ratio: f64) -> Option<u64> {
        let d0 = self.initial().dist;
        self.steps
            .iter()
            .find(|p| p.dist <= ratio * d0)
            .map(|p| p.t)
    }
}

// Absolute slack for the audit: differences of residuals near 1 carry
// ~1e-16 of rounding, which swamps any relative bound once Dist hits the floor.
const AUDIT_FLOOR: f64 = 1e-13;
const AUDIT_RELATIVE: f64 = 1e-12;

fn record(
    instance: &BanditInstance,
    state: &PolicyState,
    v: f64,
    audit: bool,
) -> Result<TracePoint> {
    let direct = dist(instance, state);
    let via_variance = (2.0 * v).sqrt();
    if audit
        && (direct - via_variance).abs() > AUDIT_RELATIVE * direct.max(via_variance) + AUDIT_FLOOR
    {
        return Err(Error::AuditMismatch {
            step: state.step,
            direct,
            via_variance,
        });
    }
    Ok(TracePoint {
        t: state.step,
        dist: direct,
        v,
    })
}

/// One trial on `instance`, starting from `state`.
pub fn run_trial(
    instance: &BanditInstance,
    mut state: PolicyState,
    config: &RunConfig,
    rng: &mut ChaCha8Rng,
    trial: usize,
) -> Result<(Trace, PolicyState)> {
    config.validate()?;
    let v0 = error_v(instance, &state);
    let target_v = config.target_ratio * config.target_ratio * v0;
    let mut steps = vec![record(instance, &state, v0, config.audit)?];
    let mut reached = (v0 <= target_v).then_some(state.step);
    let mut v = v0;
    while state.step < config.max_steps && (reached.is_none() || config.run_past_target) {
        let (x, y, y_prime) = match config.sampler {
            Sampler::Uniform { include_diagonal } => {
                sample_uniform(instance, rng, include_diagonal)
            }
            Sampler::Adversarial => {
                let pick = sample_adversarial(instance, &state);
                (pick.x, pick.y, pick.y_prime)
            }
        };
        if y == y_prime {
            state.step += 1;
        } else {
            match config.lr_mode {
                LrMode::Fixed(eta) => step_fixed(instance, &mut state, x, y, y_prime, eta)?,
                LrMode::Optimal => step_optimal(instance, &mut state, x, y, y_prime)?,
            }
            v = error_v(instance, &state);
        }
        let hit = reached.is_none() && v <= target_v;
        if hit {
            reached = Some(state.step);
        }
        let finished = state.step >= config.max_steps || (hit && !config.run_past_target);
        if state.step.is_multiple_of(config.record_every) || hit || finished {
            steps.push(record(instance, &state, v, config.audit)?);
        }
    }
    Ok((
        Trace {
            trial,
            steps,
            iterations_to_target: reached,
        },
        state,
    ))
}

/// Run `config.trials` independent trials from `θ⁰ = 0`. Trial `i` uses a
/// ChaCha8 stream seeded with `instance.seed + i`, which first draws the
/// reward table (when `fresh_rewards`) and then drives the sampler.
pub fn run(instance: &BanditInstance, config: &RunConfig) -> Result<Vec<Trace>> {
    instance.validate()?;
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(instance.seed.wrapping_add(trial as u64));
            let inst = if config.fresh_rewards {
                let mut fresh = BanditInstance::random_with(
                    instance.n_contexts,
                    instance.n_arms,
                    instance.beta,
                    &mut rng,
                )?;
                fresh.seed = instance.seed;
                fresh
            } else {
                instance.clone()
            };
            let state = PolicyState::zeros(&inst);
            run_trial(&inst, state, config, &mut rng, trial).map(|(trace, _)| trace)
        })
        .collect()
}
