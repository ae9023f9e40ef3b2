//! Reward margins and the gap metrics built from them.
//!
//! Every metric is a function of two margins of a preference pair:
//!
//! - the explicit margin `r(x, y_w) - r(x, y_l)` assigned by the reward model;
//! - the implicit margin `r̂(x, y_w) - r̂(x, y_l)` implied by the current policy,
//!   where `r̂` is either the length-normalized reward `β·log π(y|x)/|y|` or the
//!   reference-relative reward `β·(log π(y|x) - log π_ref(y|x))`.
//!
//! `M_1` is the absolute gap between the two signed margins, `M_+` drops the
//! absolute value, and the alignment potential `M_AP = |Δr| - |Δr̂|` compares
//! magnitudes only. The z-score variant rescales both terms by corpus-level
//! standard deviations and mixes them with weight `alpha`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::mean_std_population;
use crate::record::{PreferenceRecord, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicitKind {
    /// `β·logp/len`
    SimpoLengthNormalized,
    /// `β·(logp - ref_logp)`
    DpoReference,
}

impl FromStr for ImplicitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simpo" | "simpo_length_normalized" => Ok(Self::SimpoLengthNormalized),
            "dpo" | "dpo_reference" => Ok(Self::DpoReference),
            other => Err(Error::Config(format!(
                "unknown implicit reward kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Implicit-reward scale; must be > 0.
    pub beta: f64,
    /// Weight of the implicit term in the normalized alignment potential; >= 0.
    pub alpha: f64,
    pub implicit_kind: ImplicitKind,
    /// Score `m_ap_raw` requests with the z-score normalized variant instead.
    pub normalize: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            alpha: 1.0,
            implicit_kind: ImplicitKind::SimpoLengthNormalized,
            normalize: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "beta must be a positive finite number, got {}",
                self.beta
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Corpus-level spreads used by the normalized alignment potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Population std of `|Δr|`.
    pub sigma_r: f64,
    /// Population std of the β-free implicit margin `|Δ logp/len|`.
    pub sigma_pi: f64,
    pub mean_r: f64,
    pub mean_pi: f64,
    pub n: usize,
}

/// Notice raised when a corpus spread is zero and divisor 1 is used instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsWarning {
    ZeroSigmaR,
    ZeroSigmaPi,
}

impl fmt::Display for StatsWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsWarning::ZeroSigmaR => f.write_str("sigma_r is 0; explicit term divided by 1"),
            StatsWarning::ZeroSigmaPi => f.write_str("sigma_pi is 0; implicit term divided by 1"),
        }
    }
}

impl DatasetStats {
    pub fn r_divisor(&self) -> f64 {
        if self.sigma_r > 0.0 {
            self.sigma_r
        } else {
            1.0
        }
    }

    pub fn pi_divisor(&self) -> f64 {
        if self.sigma_pi > 0.0 {
            self.sigma_pi
        } else {
            1.0
        }
    }

    pub fn warnings(&self) -> Vec<StatsWarning> {
        let mut out = Vec::new();
        if self.sigma_r <= 0.0 {
            out.push(StatsWarning::ZeroSigmaR);
        }
        if self.sigma_pi <= 0.0 {
            out.push(StatsWarning::ZeroSigmaPi);
        }
        out
    }
}

pub fn implicit_reward(record: &PreferenceRecord, side: Side, cfg: &MetricConfig) -> Result<f64> {
    Ok(cfg.beta * unscaled_implicit_reward(record, side, cfg.implicit_kind)?)
}

fn unscaled_implicit_reward(
    record: &PreferenceRecord,
    side: Side,
    kind: ImplicitKind,
) -> Result<f64> {
    match kind {
        ImplicitKind::SimpoLengthNormalized => Ok(record.logp(side) / record.len(side) as f64),
        ImplicitKind::DpoReference => {
            let reference = record.ref_logp(side).ok_or_else(|| {
                Error::Config(format!(
                    "record {:?} has no reference log-probabilities; dpo_reference needs ref_logp_w and ref_logp_l",
                    record.id
                ))
            })?;
            Ok(record.logp(side) - reference)
        }
    }
}

/// Signed explicit margin `r_w - r_l`.
pub fn signed_explicit_margin(record: &PreferenceRecord) -> f64 {
    record.reward_w - record.reward_l
}

/// `M_r = |r_w - r_l|`.
pub fn explicit_margin(record: &PreferenceRecord) -> f64 {
    signed_explicit_margin(record).abs()
}

/// `r̂_w - r̂_l`, sign preserved.
pub fn signed_implicit_margin(record: &PreferenceRecord, cfg: &MetricConfig) -> Result<f64> {
    Ok(implicit_reward(record, Side::Chosen, cfg)? - implicit_reward(record, Side::Rejected, cfg)?)
}

/// `M_π = |r̂_w - r̂_l|`.
pub fn implicit_margin(record: &PreferenceRecord, cfg: &MetricConfig) -> Result<f64> {
    Ok(signed_implicit_margin(record, cfg)?.abs())
}

/// `M_+ = (r_w - r_l) - (r̂_w - r̂_l)`.
pub fn m_plus(record: &PreferenceRecord, cfg: &MetricConfig) -> Result<f64> {
    Ok(signed_explicit_margin(record) - signed_implicit_margin(record, cfg)?)
}

/// `M_1 = |(r_w - r_l) - (r̂_w - r̂_l)|`.
pub fn m_one(record: &PreferenceRecord, cfg: &MetricConfig) -> Result<f64> {
    Ok(m_plus(record, cfg)?.abs())
}

/// `M_AP = |r_w - r_l| - |r̂_w - r̂_l|`.
pub fn m_ap_raw(record: &PreferenceRecord, cfg: &MetricConfig) -> Result<f64> {
    Ok(explicit_margin(record) - implicit_margin(record, cfg)?)
}

/// β-free implicit margin magnitude used by the normalized metric.
fn unscaled_implicit_margin(record: &PreferenceRecord, kind: ImplicitKind) -> Result<f64> {
    Ok((unscaled_implicit_reward(record, Side::Chosen, kind)?
        - unscaled_implicit_reward(record, Side::Rejected, kind)?)
    .abs())
}

pub fn dataset_stats(records: &[PreferenceRecord], cfg: &MetricConfig) -> Result<DatasetStats> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let explicit: Vec<f64> = records.iter().map(explicit_margin).collect();
    let implicit = records
        .iter()
        .map(|r| unscaled_implicit_margin(r, cfg.implicit_kind))
        .collect::<Result<Vec<f64>>>()?;
    let (mean_r, sigma_r) = mean_std_population(&explicit).expect("non-empty");
    let (mean_pi, sigma_pi) = mean_std_population(&implicit).expect("non-empty");
    Ok(DatasetStats {
        sigma_r,
        sigma_pi,
        mean_r,
        mean_pi,
        n: records.len(),
    })
}

/// `|Δr|/σ_r - α·|Δ logp/len|/σ_π`; zero spreads are replaced by 1
/// (see [`DatasetStats::warnings`]).
pub fn m_ap_normalized(
    record: &PreferenceRecord,
    stats: &DatasetStats,
    cfg: &MetricConfig,
) -> Result<f64> {
    let explicit = explicit_margin(record) / stats.r_divisor();
    let implicit = unscaled_implicit_margin(record, cfg.implicit_kind)? / stats.pi_divisor();
    Ok(explicit - cfg.alpha * implicit)
}

/// The metrics available for dataset scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MR,
    MPiNeg,
    MPlus,
    MOne,
    MApRaw,
    MApNormalized,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::MR,
        Metric::MPiNeg,
        Metric::MPlus,
        Metric::MOne,
        Metric::MApRaw,
        Metric::MApNormalized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MR => "m_r",
            Metric::MPiNeg => "m_pi_neg",
            Metric::MPlus => "m_plus",
            Metric::MOne => "m_one",
            Metric::MApRaw => "m_ap_raw",
            Metric::MApNormalized => "m_ap_normalized",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// Per-record scores in input order, plus any degenerate-spread notices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    pub metric: Metric,
    pub scores: Vec<(String, f64)>,
    pub stats: Option<DatasetStats>,
    pub warnings: Vec<StatsWarning>,
}

impl ScoredDataset {
    pub fn values(&self) -> Vec<f64> {
        self.scores.iter().map(|(_, s)| *s).collect()
    }
}

pub fn score_record(
    record: &PreferenceRecord,
    metric: Metric,
    cfg: &MetricConfig,
    stats: Option<&DatasetStats>,
) -> Result<f64> {
    match metric {
        Metric::MR => Ok(explicit_margin(record)),
        Metric::MPiNeg => Ok(-implicit_margin(record, cfg)?),
        Metric::MPlus => m_plus(record, cfg),
        Metric::MOne => m_one(record, cfg),
        Metric::MApRaw => m_ap_raw(record, cfg),
        Metric::MApNormalized => {
            let stats =
                stats.ok_or_else(|| Error::Config("m_ap_normalized needs dataset stats".into()))?;
            m_ap_normalized(record, stats, cfg)
        }
    }
}

/// Score every record. Normalized scoring derives its stats from `records`.
pub fn score_dataset(
    records: &[PreferenceRecord],
    metric: Metric,
    cfg: &MetricConfig,
) -> Result<ScoredDataset> {
    cfg.validate()?;
    let metric = if cfg.normalize && metric == Metric::MApRaw {
        Metric::MApNormalized
    } else {
        metric
    };
    let stats = match metric {
        Metric::MApNormalized => Some(dataset_stats(records, cfg)?),
        _ => None,
    };
    let warnings = stats.map(|s| s.warnings()).unwrap_or_default();
    for w in &warnings {
        log::warn!("{w}");
    }
    let scores = records
        .iter()
        .map(|r| {
            score_record(r, metric, cfg, stats.as_ref())
                .map(|s| (r.id.clone(), s))
                .map_err(|e| match e {
                    e @ Error::InvalidRecord { .. } => e,
                    other => Error::invalid(&r.id, other.to_string()),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoredDataset {
        metric,
        scores,
        stats,
        warnings,
    })
}
