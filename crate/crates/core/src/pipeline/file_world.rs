//! A world backed by files written by external generation, annotation and
//! training jobs.
//!
//! Layout under the input directory:
//!
//! ```text
//! prompts.txt                 one prompt per line
//! iter_<t>/D.jsonl            responses on the base prompts
//! iter_<t>/X_evolved.txt      evolved prompts
//! iter_<t>/D_prime.jsonl      responses on the evolved prompts
//! iter_<t>/logp_refresh.jsonl optional {"id", "logp_w", "logp_l"} overrides
//! ```
//!
//! Training is a handoff: the model is just the number of completed rounds,
//! and the log-probabilities of the trained policy arrive through the next
//! iteration's files.

use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{Stage, WorldPort};
use crate::error::{Error, Result};
use crate::record::{read_jsonl, LoadOptions, PreferenceRecord};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogpRefresh {
    id: String,
    logp_w: f64,
    logp_l: f64,
}

pub struct FileWorld {
    input_dir: PathBuf,
    load: LoadOptions,
    /// iteration -> id -> (logp_w, logp_l)
    refresh: HashMap<usize, HashMap<String, (f64, f64)>>,
}

fn file_err(stage: &str, path: &Path, message: impl ToString) -> Error {
    Error::File {
        stage: stage.to_string(),
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn read_lines(stage: &str, path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| file_err(stage, path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn read_records(stage: &str, path: &Path, opts: LoadOptions) -> Result<Vec<PreferenceRecord>> {
    let file = fs::File::open(path).map_err(|e| file_err(stage, path, e))?;
    read_jsonl(BufReader::new(file), opts).map_err(|e| file_err(stage, path, e))
}

fn read_refresh(path: &Path) -> Result<HashMap<String, (f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| file_err("logp_refresh", path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: LogpRefresh = serde_json::from_str(line)
            .map_err(|e| file_err("logp_refresh", path, format!("line {}: {e}", i + 1)))?;
        if !(row.logp_w.is_finite() && row.logp_l.is_finite()) {
            return Err(file_err(
                "logp_refresh",
                path,
                format!("line {}: non-finite log-probability", i + 1),
            ));
        }
        if out
            .insert(row.id.clone(), (row.logp_w, row.logp_l))
            .is_some()
        {
            return Err(file_err(
                "logp_refresh",
                path,
                format!("line {}: duplicate id {:?}", i + 1, row.id),
            ));
        }
    }
    Ok(out)
}

/// Open a file-backed world rooted at `input_dir`. All `logp_refresh.jsonl`
/// files are read up front so malformed ones fail before any work starts.
pub fn file_world(input_dir: impl Into<PathBuf>, load: LoadOptions) -> Result<FileWorld> {
    let input_dir = input_dir.into();
    if !input_dir.is_dir() {
        return Err(file_err("open", &input_dir, "not a directory"));
    }
    let mut refresh = HashMap::new();
    for entry in fs::read_dir(&input_dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(t) = name
            .to_str()
            .and_then(|n| n.strip_prefix("iter_"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        let path = entry.path().join("logp_refresh.jsonl");
        if path.is_file() {
            refresh.insert(t, read_refresh(&path)?);
        }
    }
    Ok(FileWorld {
        input_dir,
        load,
        refresh,
    })
}

impl FileWorld {
    pub fn input_dir(&self) -> &Path {
        &self.input_dir
    }

    pub fn prompts(&self) -> Result<Vec<String>> {
        let path = self.input_dir.join("prompts.txt");
        let prompts = read_lines("prompts", &path)?;
        if prompts.is_empty() {
            return Err(file_err("prompts", &path, "no prompts"));
        }
        Ok(prompts)
    }

    fn iter_path(&self, t: usize, name: &str) -> PathBuf {
        self.input_dir.join(format!("iter_{t}")).join(name)
    }
}

impl WorldPort for FileWorld {
    /// Completed training rounds.
    type Model = usize;

    fn initial_model(&self) -> usize {
        0
    }

    fn gen_dataset(
        &mut self,
        prompts: &[String],
        _model: &usize,
        stage: Stage,
    ) -> Result<Vec<PreferenceRecord>> {
        let name = format!("{}.jsonl", stage.source.tag());
        let path = self.iter_path(stage.iteration, &name);
        let records = read_records(stage.source.tag(), &path, self.load)?;
        for r in &records {
            if let Some(p) = &r.prompt {
                if !prompts.contains(p) {
                    return Err(file_err(
                        stage.source.tag(),
                        &path,
                        format!(
                            "record {:?} has prompt {p:?} outside this stage's prompt set",
                            r.id
                        ),
                    ));
                }
            }
        }
        Ok(records)
    }

    fn evolve(&mut self, _prompts: &[String], iteration: usize) -> Result<Vec<String>> {
        read_lines("evolve", &self.iter_path(iteration, "X_evolved.txt"))
    }

    fn train(
        &mut self,
        model: usize,
        _records: &[PreferenceRecord],
        _iteration: usize,
    ) -> Result<usize> {
        Ok(model + 1)
    }

    fn score_context(&self, model: &usize, record: &PreferenceRecord) -> Result<PreferenceRecord> {
        let mut out = record.clone();
        if let Some(&(w, l)) = self
            .refresh
            .get(&(model + 1))
            .and_then(|m| m.get(&record.id))
        {
            out.logp_w = w;
            out.logp_l = l;
        }
        Ok(out)
    }
}
