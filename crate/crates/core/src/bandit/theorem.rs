use serde::{Deserialize, Serialize};

use super::run::{run, LrMode, RunConfig};
use super::sampler::Sampler;
use super::BanditInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConfig {
    pub n_contexts: usize,
    pub n_arms: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Per-trial step cap; unconverged trials count as failures.
    pub max_steps: u64,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        TheoremConfig {
            n_contexts: 1,
            n_arms: 10,
            beta: 0.1,
            epsilon: 1e-3,
            trials: 200,
            seed: 0,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    #[serde(rename = "analytic_T_u")]
    pub analytic_t_u: f64,
    #[serde(rename = "analytic_T_adv")]
    pub analytic_t_adv: f64,
    #[serde(rename = "measured_mean_T_u")]
    pub measured_mean_t_u: f64,
    #[serde(rename = "measured_T_adv")]
    pub measured_t_adv: f64,
    /// `measured_mean_T_u / measured_T_adv`
    pub ratio: f64,
    /// `analytic_T_u / analytic_T_adv`
    pub analytic_ratio: f64,
    pub trials: usize,
    pub unconverged_trials: usize,
    pub pass: bool,
}

/// Iterations predicted for a per-step contraction `1 - rate_num/(|X||Y|)`
/// of `V` to bring `Dist` down by `epsilon`: `2 ln ε / ln(1 - rate_num/(|X||Y|))`.
pub fn analytic_iterations(cells: usize, epsilon: f64, rate_num: f64) -> f64 {
    2.0 * epsilon.ln() / (1.0 - rate_num / cells as f64).ln()
}

/// Compare uniform and adversarial sampling under the optimal learning rate.
///
/// Both samplers see the same per-trial reward tables. The uniform sampler
/// draws from all `|Y|²` ordered pairs (diagonal included), which is the
/// sampling measure the analytic uniform rate is derived for.
pub fn theorem_check(config: &TheoremConfig) -> Result<TheoremReport> {
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        return Err(Error::Config(format!(
            "epsilon must be in (0, 1), got {}",
            config.epsilon
        )));
    }
    let instance =
        BanditInstance::random(config.n_contexts, config.n_arms, config.beta, config.seed)?;
    let base = RunConfig {
        sampler: Sampler::Adversarial,
        lr_mode: LrMode::Optimal,
        max_steps: config.max_steps,
        target_ratio: config.epsilon,
        trials: config.trials,
        record_every: config.max_steps,
        run_past_target: false,
        fresh_rewards: true,
        audit: true,
    };
    let adversarial = run(&instance, &base)?;
    let uniform = run(
        &instance,
        &RunConfig {
            sampler: Sampler::Uniform {
                include_diagonal: true,
            },
            ..base
        },
    )?;

    let mut unconverged = 0;
    let mut mean_iterations = |traces: &[super::Trace]| {
        let total: u64 = traces
            .iter()
            .map(|t| {
                t.iterations_to_target.unwrap_or_else(|| {
                    unconverged += 1;
                    config.max_steps
                })
            })
            .sum();
        total as f64 / traces.len() as f64
    };
    let measured_t_adv = mean_iterations(&adversarial);
    let measured_mean_t_u = mean_iterations(&uniform);

    let cells = instance.cells();
    let analytic_t_u = analytic_iterations(cells, config.epsilon, 1.0);
    let analytic_t_adv = analytic_iterations(cells, config.epsilon, 2.0);
    Ok(TheoremReport {
        analytic_t_u,
        analytic_t_adv,
        measured_mean_t_u,
        measured_t_adv,
        ratio: measured_mean_t_u / measured_t_adv,
        analytic_ratio: analytic_t_u / analytic_t_adv,
        trials: config.trials,
        unconverged_trials: unconverged,
        pass: unconverged == 0 && measured_t_adv < 0.5 * measured_mean_t_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_closed_forms() {
        let t_u = analytic_iterations(10, 1e-3, 1.0);
        let t_adv = analytic_iterations(10, 1e-3, 2.0);
        assert!((t_u - 2.0 * 1e-3f64.ln() / 0.9f64.ln()).abs() < 1e-9);
        assert!((t_adv - 2.0 * 1e-3f64.ln() / 0.8f64.ln()).abs() < 1e-9);
        let ratio = t_u / t_adv;
        assert!((ratio - 0.8f64.ln() / 0.9f64.ln()).abs() < 1e-12);
        assert!(ratio > 2.0 && (ratio - 2.118).abs() < 1e-3);
    }

    #[test]
    fn small_check_passes() {
        let report = theorem_check(&TheoremConfig {
            trials: 50,
            ..TheoremConfig::default()
        })
        .unwrap();
        assert!(report.pass, "{report:?}");
        let json = serde_json::to_value(&report).unwrap();
        for key in [
            "analytic_T_u",
            "analytic_T_adv",
            "measured_mean_T_u",
            "measured_T_adv",
            "ratio",
            "pass",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        let cfg = TheoremConfig {
            epsilon: 1.5,
            ..TheoremConfig::default()
        };
        assert!(theorem_check(&cfg).is_err());
    }
}
