//! Stochastic DPO on a tabular contextual bandit.
//!
//! The policy is a softmax over a parameter table `θ(x, y)` and the reference
//! policy is uniform, so the implicit reward of arm `y` is `βθ(x, y)` up to a
//! per-context constant. The optimum family is `βθ* = r + c(x)`, which makes
//! the residual `ξ = βθ - r` constant within each context. Progress is
//! measured by the per-context variance of `ξ` averaged over contexts (`V`)
//! and by `Dist = sqrt(2V)`, the root-mean-square `M_1` gap over all pairs.
//!
//! Each update moves `θ(x, y)` and `θ(x, y')` by equal and opposite amounts.
//! To keep the per-context sum of `θ` exactly invariant in floating point,
//! all entries of a [`PolicyState`] live on a dyadic lattice of spacing
//! `quantum` and every increment is rounded to that lattice before it is
//! applied. Sums and differences of lattice points within the state's range
//! are exact, so paired updates never drift the mean.

mod run;
mod sampler;
mod theorem;

pub use run::{run, run_trial, LrMode, RunConfig, Trace, TracePoint};
pub use sampler::{sample_adversarial, sample_uniform, AdversarialPick, Sampler};
pub use theorem::{analytic_iterations, theorem_check, TheoremConfig, TheoremReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sigmoid, KahanSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub n_contexts: usize,
    pub n_arms: usize,
    /// Row-major `[n_contexts][n_arms]`, entries in `[0, 1]`.
    pub rewards: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
}

impl BanditInstance {
    pub fn new(n_contexts: usize, n_arms: usize, rewards: Vec<f64>, beta: f64) -> Result<Self> {
        let inst = BanditInstance {
            n_contexts,
            n_arms,
            rewards,
            beta,
            seed: 0,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Rewards drawn i.i.d. from `U[0, 1)`.
    pub fn random(n_contexts: usize, n_arms: usize, beta: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = Self::random_with(n_contexts, n_arms, beta, &mut rng)?;
        inst.seed = seed;
        Ok(inst)
    }

    pub fn random_with<R: Rng + ?Sized>(
        n_contexts: usize,
        n_arms: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let rewards = (0..n_contexts * n_arms)
            .map(|_| rng.random::<f64>())
            .collect();
        Self::new(n_contexts, n_arms, rewards, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_contexts == 0 {
            return Err(Error::Config("need at least one context".into()));
        }
        if self.n_arms < 2 {
            return Err(Error::Config(format!(
                "need at least two arms, got {}",
                self.n_arms
            )));
        }
        if self.rewards.len() != self.n_contexts * self.n_arms {
            return Err(Error::Config(format!(
                "reward table has {} entries, expected {}x{}",
                self.rewards.len(),
                self.n_contexts,
                self.n_arms
            )));
        }
        if let Some(bad) = self.rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("reward {bad} outside [0, 1]")));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn reward(&self, x: usize, y: usize) -> f64 {
        self.rewards[x * self.n_arms + y]
    }

    pub fn reward_row(&self, x: usize) -> &[f64] {
        &self.rewards[x * self.n_arms..(x + 1) * self.n_arms]
    }

    /// Number of table cells, `|X||Y|`.
    pub fn cells(&self) -> usize {
        self.n_contexts * self.n_arms
    }

    pub(crate) fn check_pair(&self, x: usize, y: usize, y_prime: usize) -> Result<()> {
        if x >= self.n_contexts || y >= self.n_arms || y_prime >= self.n_arms {
            return Err(Error::Argument(format!(
                "(x={x}, y={y}, y'={y_prime}) outside {}x{}",
                self.n_contexts, self.n_arms
            )));
        }
        if y == y_prime {
            return Err(Error::Argument(format!("y and y' must differ (both {y})")));
        }
        Ok(())
    }
}

/// Parameter table `θ` plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    n_contexts: usize,
    n_arms: usize,
    theta: Vec<f64>,
    quantum: f64,
    pub step: u64,
}

impl PolicyState {
    /// `θ = 0` everywhere.
    pub fn zeros(instance: &BanditInstance) -> Self {
        Self::from_table(instance, vec![0.0; instance.cells()]).expect("zero table is valid")
    }

    /// Start from an arbitrary table; entries are snapped to the lattice.
    pub fn from_table(instance: &BanditInstance, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != instance.cells() {
            return Err(Error::Argument(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                instance.cells()
            )));
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::Argument(format!("theta entry {bad} is not finite")));
        }
        let quantum = lattice_quantum(instance, &theta);
        let theta = theta
            .into_iter()
            .map(|t| (t / quantum).round() * quantum)
            .collect();
        Ok(PolicyState {
            n_contexts: instance.n_contexts,
            n_arms: instance.n_arms,
            theta,
            quantum,
            step: 0,
        })
    }

    pub fn theta(&self, x: usize, y: usize) -> f64 {
        self.theta[x * self.n_arms + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.theta[x * self.n_arms..(x + 1) * self.n_arms]
    }

    pub fn table(&self) -> &[f64] {
        &self.theta
    }

    /// Spacing of the update lattice.
    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    /// Exact sum of `θ(x, ·)`, rounded once.
    pub fn context_sum(&self, x: usize) -> f64 {
        let units: i128 = self.row(x).iter().map(|t| (t / self.quantum) as i128).sum();
        units as f64 * self.quantum
    }

    pub fn context_mean(&self, x: usize) -> f64 {
        self.context_sum(x) / self.n_arms as f64
    }

    /// Move `θ(x, y)` up by `amount` and `θ(x, y')` down by the same lattice-rounded amount.
    fn apply_pair(&mut self, x: usize, y: usize, y_prime: usize, amount: f64) -> Result<()> {
        let q = self.quantum;
        let step = (amount / q).round() * q;
        if step == 0.0 {
            return Ok(());
        }
        let limit = q * 2f64.powi(53);
        let i = x * self.n_arms + y;
        let j = x * self.n_arms + y_prime;
        let up = self.theta[i] + step;
        let down = self.theta[j] - step;
        if up.abs() >= limit || down.abs() >= limit || !step.is_finite() {
            return Err(Error::LatticeOverflow { context: x, limit });
        }
        self.theta[i] = up;
        self.theta[j] = down;
        Ok(())
    }
}

/// Choose a power-of-two spacing whose 2^53 range comfortably holds every θ
/// reachable by a non-expansive update from `theta0`.
fn lattice_quantum(instance: &BanditInstance, theta0: &[f64]) -> f64 {
    let n = instance.n_arms;
    let spread = |row: &[f64]| {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            });
        hi - lo
    };
    let mut bound: f64 = 1.0;
    for x in 0..instance.n_contexts {
        let r = instance.reward_row(x);
        let t = &theta0[x * n..(x + 1) * n];
        let xi: Vec<f64> = t
            .iter()
            .zip(r)
            .map(|(t, r)| instance.beta * t - r)
            .collect();
        let max_abs = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        bound = bound.max(2.0 * (max_abs + (spread(&xi) + spread(r)) / instance.beta));
    }
    let exp = bound.log2().ceil() as i32;
    2f64.powi(exp - 52)
}

/// `ξ = βθ - r` for every cell.
pub fn residual(instance: &BanditInstance, state: &PolicyState) -> Vec<f64> {
    state
        .theta
        .iter()
        .zip(&instance.rewards)
        .map(|(t, r)| instance.beta * t - r)
        .collect()
}

fn residual_row(instance: &BanditInstance, state: &PolicyState, x: usize) -> Vec<f64> {
    state
        .row(x)
        .iter()
        .zip(instance.reward_row(x))
        .map(|(t, r)| instance.beta * t - r)
        .collect()
}

/// Variance of `ξ(x, ·)` for one context.
pub fn context_variance(instance: &BanditInstance, state: &PolicyState, x: usize) -> f64 {
    let xi = residual_row(instance, state, x);
    let n = xi.len() as f64;
    let mean = xi.iter().copied().collect::<KahanSum>().total() / n;
    xi.iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<KahanSum>()
        .total()
        / n
}

/// `V = 1/(|X||Y|) Σ_x Σ_y (ξ(x,y) - ξ̄(x))²`.
pub fn error_v(instance: &BanditInstance, state: &PolicyState) -> f64 {
    let total: KahanSum = (0..instance.n_contexts)
        .map(|x| context_variance(instance, state, x))
        .collect();
    total.total() / instance.n_contexts as f64
}

/// `1/|Y|² Σ_{y,y'} (ξ_y - ξ_y')²` for one context's residuals, by direct double sum.
pub fn mean_squared_pair_gap(xi: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for a in xi {
        for b in xi {
            acc.add((a - b) * (a - b));
        }
    }
    let n = xi.len() as f64;
    acc.total() / (n * n)
}

/// Direct evaluation of `sqrt(1/(|X||Y|²) Σ_x Σ_{y,y'} M_1(x,y,y')²)`.
pub fn dist(instance: &BanditInstance, state: &PolicyState) -> f64 {
    let total: KahanSum = (0..instance.n_contexts)
        .map(|x| mean_squared_pair_gap(&residual_row(instance, state, x)))
        .collect();
    (total.total() / instance.n_contexts as f64).sqrt()
}

/// `σ(reward_gap) - σ(β·theta_gap)` for the pair `(y, y')`, where
/// `reward_gap = r_y - r_y'` and `theta_gap = θ_y - θ_y'`.
pub fn pair_delta(reward_gap: f64, theta_gap: f64, beta: f64) -> f64 {
    // evaluate one canonical orientation so swapping the pair negates the result bit-for-bit
    if reward_gap < 0.0 || (reward_gap == 0.0 && theta_gap < 0.0) {
        return -pair_delta(-reward_gap, -theta_gap, beta);
    }
    sigmoid(reward_gap) - sigmoid(beta * theta_gap)
}

/// `Δ = σ(r_y - r_y') - σ(β(θ_y - θ_y'))`.
pub fn delta(
    instance: &BanditInstance,
    state: &PolicyState,
    x: usize,
    y: usize,
    y_prime: usize,
) -> f64 {
    pair_delta(
        instance.reward(x, y) - instance.reward(x, y_prime),
        state.theta(x, y) - state.theta(x, y_prime),
        instance.beta,
    )
}

/// One stochastic DPO step with learning rate `eta`:
/// `θ_y += ηβΔ/2`, `θ_y' -= ηβΔ/2`.
pub fn step_fixed(
    instance: &BanditInstance,
    state: &mut PolicyState,
    x: usize,
    y: usize,
    y_prime: usize,
    eta: f64,
) -> Result<()> {
    instance.check_pair(x, y, y_prime)?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Argument(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    let amount = 0.5 * eta * instance.beta * delta(instance, state, x, y, y_prime);
    state.apply_pair(x, y, y_prime, amount)?;
    state.step += 1;
    Ok(())
}

/// One step under the optimal learning rate, which averages the two sampled
/// residuals: `θ_y -= (ξ_y - ξ_y')/(2β)`, `θ_y' += (ξ_y - ξ_y')/(2β)`.
pub fn step_optimal(
    instance: &BanditInstance,
    state: &mut PolicyState,
    x: usize,
    y: usize,
    y_prime: usize,
) -> Result<()> {
    instance.check_pair(x, y, y_prime)?;
    let gap = instance.beta * (state.theta(x, y) - state.theta(x, y_prime))
        - (instance.reward(x, y) - instance.reward(x, y_prime));
    state.apply_pair(x, y, y_prime, -gap / (2.0 * instance.beta))?;
    state.step += 1;
    Ok(())
}
