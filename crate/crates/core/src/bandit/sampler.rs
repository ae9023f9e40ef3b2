use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{residual, BanditInstance, PolicyState};

/// How the next `(x, y, y')` triple is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Uniform context, uniform ordered arm pair. With `include_diagonal`
    /// the pair is drawn from all `|Y|²` ordered pairs, so `y == y'` occurs
    /// and the step is a no-op; otherwise only `y != y'` is drawn.
    Uniform { include_diagonal: bool },
    /// The triple with the largest `M_1` gap.
    Adversarial,
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Uniform { .. } => "uniform",
            Sampler::Adversarial => "adversarial",
        }
    }
}

/// Uniform draw of `(x, y, y')`.
pub fn sample_uniform<R: Rng + ?Sized>(
    instance: &BanditInstance,
    rng: &mut R,
    include_diagonal: bool,
) -> (usize, usize, usize) {
    let x = rng.random_range(0..instance.n_contexts);
    let y = rng.random_range(0..instance.n_arms);
    let y_prime = if include_diagonal {
        rng.random_range(0..instance.n_arms)
    } else {
        let other = rng.random_range(0..instance.n_arms - 1);
        if other >= y {
            other + 1
        } else {
            other
        }
    };
    (x, y, y_prime)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialPick {
    pub x: usize,
    /// Arm with the largest residual.
    pub y: usize,
    /// Arm with the smallest residual.
    pub y_prime: usize,
    /// `ξ_y - ξ_y'`, the `M_1` score of the pick.
    pub spread: f64,
}

/// The context with the widest residual spread and its argmax/argmin arms.
/// Ties go to the lowest index; a spread-free state returns `(0, 0, 1)`.
pub fn sample_adversarial(instance: &BanditInstance, state: &PolicyState) -> AdversarialPick {
    let xi = residual(instance, state);
    let n = instance.n_arms;
    let mut best = AdversarialPick {
        x: 0,
        y: 0,
        y_prime: 1,
        spread: 0.0,
    };
    for x in 0..instance.n_contexts {
        let row = &xi[x * n..(x + 1) * n];
        let (mut hi, mut lo) = (0, 0);
        for (i, v) in row.iter().enumerate() {
            if *v > row[hi] {
                hi = i;
            }
            if *v < row[lo] {
                lo = i;
            }
        }
        let spread = row[hi] - row[lo];
        if spread > best.spread {
            best = AdversarialPick {
                x,
                y: hi,
                y_prime: lo,
                spread,
            };
        }
    }
    best
}
