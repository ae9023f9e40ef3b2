//! Preference records and their JSONL encoding.
//!
//! One record is a `(x, y_w, y_l)` triple: the explicit (reward-model) scores
//! of both responses plus the summed token log-probabilities and token
//! lengths needed to form implicit rewards. Reference-model log-probabilities
//! are optional and only required for the DPO-style implicit reward.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which response of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The preferred response `y_w`.
    Chosen,
    /// The rejected response `y_l`.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub reward_w: f64,
    pub reward_l: f64,
    pub logp_w: f64,
    pub len_w: u64,
    pub logp_l: f64,
    pub len_l: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_logp_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_logp_l: Option<f64>,
}

/// Loader switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept records whose `reward_w < reward_l`. Margins are still computed
    /// with absolute values where the metric calls for them.
    pub allow_unordered: bool,
}

impl PreferenceRecord {
    pub fn reward(&self, side: Side) -> f64 {
        match side {
            Side::Chosen => self.reward_w,
            Side::Rejected => self.reward_l,
        }
    }

    pub fn logp(&self, side: Side) -> f64 {
        match side {
            Side::Chosen => self.logp_w,
            Side::Rejected => self.logp_l,
        }
    }

    pub fn len(&self, side: Side) -> u64 {
        match side {
            Side::Chosen => self.len_w,
            Side::Rejected => self.len_l,
        }
    }

    pub fn ref_logp(&self, side: Side) -> Option<f64> {
        match side {
            Side::Chosen => self.ref_logp_w,
            Side::Rejected => self.ref_logp_l,
        }
    }

    /// Exchange the chosen and rejected responses.
    pub fn swapped(&self) -> Self {
        PreferenceRecord {
            id: self.id.clone(),
            prompt: self.prompt.clone(),
            reward_w: self.reward_l,
            reward_l: self.reward_w,
            logp_w: self.logp_l,
            len_w: self.len_l,
            logp_l: self.logp_w,
            len_l: self.len_w,
            ref_logp_w: self.ref_logp_l,
            ref_logp_l: self.ref_logp_w,
        }
    }

    /// Check the record invariants.
    pub fn validate(&self, opts: LoadOptions) -> Result<()> {
        let fields = [
            ("reward_w", Some(self.reward_w)),
            ("reward_l", Some(self.reward_l)),
            ("logp_w", Some(self.logp_w)),
            ("logp_l", Some(self.logp_l)),
            ("ref_logp_w", self.ref_logp_w),
            ("ref_logp_l", self.ref_logp_l),
        ];
        for (name, value) in fields {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(Error::invalid(
                        &self.id,
                        format!("{name} is not finite ({v})"),
                    ));
                }
            }
        }
        if self.len_w == 0 || self.len_l == 0 {
            return Err(Error::invalid(&self.id, "response lengths must be >= 1"));
        }
        if !opts.allow_unordered && self.reward_w < self.reward_l {
            return Err(Error::invalid(
                &self.id,
                format!(
                    "reward_w ({}) < reward_l ({}); pass allow_unordered to accept raw pairs",
                    self.reward_w, self.reward_l
                ),
            ));
        }
        Ok(())
    }
}

/// Read JSONL records, validating each one. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_jsonl<R: BufRead>(reader: R, opts: LoadOptions) -> Result<Vec<PreferenceRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // serde_json rejects NaN/inf literals, so non-finite values surface here.
        let record: PreferenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate(opts).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate id {:?}", record.id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[PreferenceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PreferenceRecord {
        PreferenceRecord {
            id: "a".into(),
            prompt: None,
            reward_w: 0.9,
            reward_l: 0.4,
            logp_w: -20.0,
            len_w: 10,
            logp_l: -30.0,
            len_l: 10,
            ref_logp_w: None,
            ref_logp_l: None,
        }
    }

    #[test]
    fn parses_minimal_line() {
        let line = r#"{"id":"a","reward_w":1.0,"reward_l":0.5,"logp_w":-3,"len_w":2,"logp_l":-4,"len_l":3}"#;
        let recs = read_jsonl(line.as_bytes(), LoadOptions::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].len_l, 3);
        assert!(recs[0].ref_logp_w.is_none());
    }

    #[test]
    fn rejects_unknown_keys_with_line_number() {
        let text = "\n{\"id\":\"a\",\"reward_w\":1,\"reward_l\":0,\"logp_w\":0,\"len_w\":1,\"logp_l\":0,\"len_l\":1,\"extra\":1}";
        match read_jsonl(text.as_bytes(), LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_length_and_unordered() {
        let mut r = sample();
        r.len_w = 0;
        assert!(r.validate(LoadOptions::default()).is_err());

        let r = sample().swapped();
        assert!(r.validate(LoadOptions::default()).is_err());
        assert!(r
            .validate(LoadOptions {
                allow_unordered: true
            })
            .is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        let mut r = sample();
        r.logp_w = f64::NAN;
        let err = r.validate(LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("logp_w"));
        let text =
            r#"{"id":"a","reward_w":1e999,"reward_l":0,"logp_w":0,"len_w":1,"logp_l":0,"len_l":1}"#;
        assert!(read_jsonl(text.as_bytes(), LoadOptions::default()).is_err());
    }

    #[test]
    fn rejects_duplicate_ids() {
        let line = r#"{"id":"a","reward_w":1.0,"reward_l":0.5,"logp_w":-3,"len_w":2,"logp_l":-4,"len_l":3}"#;
        let text = format!("{line}\n{line}\n");
        assert!(read_jsonl(text.as_bytes(), LoadOptions::default()).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut r = sample();
        r.ref_logp_w = Some(-19.5);
        r.ref_logp_l = Some(-0.1 + 0.2);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&r)).unwrap();
        let back = read_jsonl(buf.as_slice(), LoadOptions::default()).unwrap();
        assert_eq!(back, vec![r]);
    }
}
