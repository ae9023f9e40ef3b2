//! File formats: score CSV, trace CSV, flat key=value configs, atomic writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::bandit::Trace;
use crate::error::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Write `bytes` to `path` through a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn scores_to_csv(scores: &[(String, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "score"])?;
    for (id, s) in scores {
        w.write_record([id.as_str(), &fmt_f64(*s)])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Parse an `id,score` CSV with header. Line numbers in errors are 1-based
/// and count the header.
pub fn read_scores_csv<R: Read>(reader: R) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "score" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header id,score".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let score: f64 = row[1].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("score {:?} is not a number", &row[1]),
        })?;
        if !score.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("score {score} is not finite"),
            });
        }
        out.push((row[0].to_string(), score));
    }
    Ok(out)
}

/// `trial,t,dist,v` rows, then one `# trial=<i> iterations_to_target=<n|none>`
/// footer line per trial.
pub fn traces_to_csv(traces: &[Trace]) -> String {
    let mut out = String::from("trial,t,dist,v\n");
    for trace in traces {
        for p in &trace.steps {
            out.push_str(&format!(
                "{},{},{},{}\n",
                trace.trial,
                p.t,
                fmt_f64(p.dist),
                fmt_f64(p.v)
            ));
        }
    }
    for trace in traces {
        let hit = trace
            .iterations_to_target
            .map_or_else(|| "none".to_string(), |n| n.to_string());
        out.push_str(&format!(
            "# trial={} iterations_to_target={}\n",
            trace.trial, hit
        ));
    }
    out
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        if out.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate key {key:?}"),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::TracePoint;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1 + 0.2, 0.7, -1.5, 1e-300, 123456789.12345679, 1.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn scores_csv_round_trip_with_quoting() {
        let scores = vec![("a,b".to_string(), 0.1 + 0.2), ("c".to_string(), -3.0)];
        let bytes = scores_to_csv(&scores).unwrap();
        assert!(String::from_utf8_lossy(&bytes).starts_with("id,score\n"));
        assert_eq!(read_scores_csv(bytes.as_slice()).unwrap(), scores);
    }

    #[test]
    fn scores_csv_errors() {
        assert!(read_scores_csv("name,value\na,1\n".as_bytes()).is_err());
        match read_scores_csv("id,score\na,1\nb,oops\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_scores_csv("id,score\na,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let trace = Trace {
            trial: 0,
            steps: vec![TracePoint {
                t: 0,
                dist: 1.0,
                v: 0.5,
            }],
            iterations_to_target: None,
        };
        let text = traces_to_csv(&[trace]);
        assert_eq!(
            text,
            "trial,t,dist,v\n0,0,1.0,0.5\n# trial=0 iterations_to_target=none\n"
        );
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# c\niterations = 3\nmetric=m_one # inline\n\n").unwrap();
        assert_eq!(kv["iterations"], "3");
        assert_eq!(kv["metric"], "m_one");
        assert!(parse_key_values("novalue\n").is_err());
        assert!(parse_key_values("a=1\na=2\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
    }
}
