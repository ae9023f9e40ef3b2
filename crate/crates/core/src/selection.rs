//! Top-k and uniform-random subset selection over scored records.
//!
//! Scores are totally ordered by `(score desc, id asc)`, so the chosen set
//! never depends on input order. The uniform baseline draws without
//! replacement with a partial Fisher-Yates shuffle driven by ChaCha8 seeded
//! through `seed_from_u64`; the generator name is written into manifests.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the generator used by [`select_uniform`], recorded in manifests.
pub const UNIFORM_RNG: &str = "chacha8/seed_from_u64/partial-fisher-yates";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub metric: String,
    pub k: usize,
    /// k-th largest score; `None` for the uniform baseline.
    pub tau_k: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    pub chosen_ids: Vec<String>,
}

impl SelectionResult {
    pub fn with_metric(mut self, name: impl Into<String>) -> Self {
        self.metric = name.into();
        self
    }

    pub fn to_manifest_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// `(score desc, id asc)`
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

fn check_scores(scores: &[(String, f64)]) -> Result<()> {
    let mut seen = HashSet::with_capacity(scores.len());
    for (id, s) in scores {
        if !s.is_finite() {
            return Err(Error::invalid(id, format!("score is not finite ({s})")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

pub fn select_top_k(scores: &[(String, f64)], k: usize) -> Result<SelectionResult> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k must be in 1..={n}, got {k}")));
    }
    check_scores(scores)?;
    let mut ranked: Vec<&(String, f64)> = scores.iter().collect();
    ranked.sort_by(|a, b| rank_order(a, b));
    ranked.truncate(k);
    Ok(SelectionResult {
        metric: String::new(),
        k,
        tau_k: Some(ranked[k - 1].1),
        seed: None,
        rng: None,
        chosen_ids: ranked.into_iter().map(|(id, _)| id.clone()).collect(),
    })
}

/// `floor(fraction * n)`, at least 1.
pub fn k_from_fraction(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(((fraction * n as f64).floor() as usize).clamp(1, n))
}

pub fn select_fraction(scores: &[(String, f64)], fraction: f64) -> Result<SelectionResult> {
    let k = k_from_fraction(scores.len(), fraction)?;
    select_top_k(scores, k)
}

/// Seeded uniform sample of `floor(fraction * n)` ids, returned in input order.
pub fn select_uniform(ids: &[String], fraction: f64, seed: u64) -> Result<SelectionResult> {
    let k = k_from_fraction(ids.len(), fraction)?;
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    Ok(SelectionResult {
        metric: "uniform".into(),
        k,
        tau_k: None,
        seed: Some(seed),
        rng: Some(UNIFORM_RNG.into()),
        chosen_ids: picked.into_iter().map(|i| ids[i].clone()).collect(),
    })
}
