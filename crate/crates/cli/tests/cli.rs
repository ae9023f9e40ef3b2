use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn alignpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alignpot"))
        .args(args)
        .env_remove("ALIGNPOT_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn record_line(id: &str, rw: f64, rl: f64, lw: f64, ll: f64) -> String {
    format!(
        r#"{{"id":"{id}","reward_w":{rw},"reward_l":{rl},"logp_w":{lw},"len_w":1,"logp_l":{ll},"len_l":1}}"#
    )
}

#[test]
fn score_worked_example_record() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(&input, record_line("ex1", 6.2, 0.0, -5.5, 0.0) + "\n").unwrap();
    let csv = dir.path().join("s.csv");
    let out = alignpot(&[
        "score",
        "--input",
        p(&input),
        "--metric",
        "m_ap_raw",
        "--out",
        p(&csv),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = fs::read_to_string(&csv).unwrap();
    let row = text.lines().nth(1).unwrap();
    let (id, v) = row.split_once(',').unwrap();
    assert_eq!(id, "ex1");
    assert!((v.parse::<f64>().unwrap() - 0.7).abs() < 1e-9, "{row}");
    assert!(stdout(&out).contains("n=1"));
}

#[test]
fn score_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let csv = dir.path().join("s.csv");
    assert_eq!(
        code(&alignpot(&[
            "score",
            "--input",
            p(&empty),
            "--metric",
            "m_r",
            "--out",
            p(&csv)
        ])),
        2
    );
    assert!(!csv.exists());

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\": 3}\n").unwrap();
    assert_eq!(
        code(&alignpot(&[
            "score",
            "--input",
            p(&bad),
            "--metric",
            "m_r",
            "--out",
            p(&csv)
        ])),
        2
    );

    let unordered = dir.path().join("unordered.jsonl");
    fs::write(&unordered, record_line("u", 0.1, 0.9, -1.0, -2.0) + "\n").unwrap();
    let args = [
        "score",
        "--input",
        p(&unordered),
        "--metric",
        "m_r",
        "--out",
        p(&csv),
    ];
    assert_eq!(code(&alignpot(&args)), 2);
    let mut lenient = args.to_vec();
    lenient.push("--allow-unordered");
    assert_eq!(code(&alignpot(&lenient)), 0);

    assert_eq!(
        code(&alignpot(&[
            "score",
            "--input",
            p(&empty),
            "--metric",
            "m_zzz",
            "--out",
            p(&csv)
        ])),
        64
    );
    assert_eq!(
        code(&alignpot(&[
            "score",
            "--input",
            "/no/such/file",
            "--metric",
            "m_r",
            "--out",
            p(&csv)
        ])),
        64
    );
    assert_eq!(code(&alignpot(&["--help"])), 0);
    assert_eq!(code(&alignpot(&[])), 64);
}

fn write_scores(path: &Path, rows: &[(&str, f64)]) {
    let mut text = String::from("id,score\n");
    for (id, s) in rows {
        text.push_str(&format!("{id},{s}\n"));
    }
    fs::write(path, text).unwrap();
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn select_top_fraction_and_ties() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    let rows: Vec<(String, f64)> = (0..10).map(|i| (format!("r{i}"), i as f64)).collect();
    let rows_ref: Vec<(&str, f64)> = rows.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    write_scores(&scores, &rows_ref);
    let m = dir.path().join("m.json");
    let out = alignpot(&[
        "select",
        "--scores",
        p(&scores),
        "--top-fraction",
        "0.4",
        "--out",
        p(&m),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let v = manifest(&m);
    assert_eq!(v["k"], 4);
    assert_eq!(v["tau_k"], 6.0);
    assert_eq!(v["chosen_ids"], serde_json::json!(["r9", "r8", "r7", "r6"]));

    // ties break by id
    write_scores(&scores, &[("b", 1.0), ("a", 1.0), ("c", 0.0)]);
    assert_eq!(
        code(&alignpot(&[
            "select",
            "--scores",
            p(&scores),
            "--top-k",
            "1",
            "--out",
            p(&m)
        ])),
        0
    );
    assert_eq!(manifest(&m)["chosen_ids"], serde_json::json!(["a"]));

    let both = [
        "select",
        "--scores",
        p(&scores),
        "--top-k",
        "1",
        "--top-fraction",
        "0.5",
        "--out",
        p(&m),
    ];
    assert_eq!(code(&alignpot(&both)), 64);
    assert_eq!(
        code(&alignpot(&[
            "select",
            "--scores",
            p(&scores),
            "--out",
            p(&m)
        ])),
        64
    );
    assert_eq!(
        code(&alignpot(&[
            "select",
            "--scores",
            p(&scores),
            "--top-k",
            "9",
            "--out",
            p(&m)
        ])),
        64
    );
}

#[test]
fn select_uniform_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    let rows: Vec<(String, f64)> = (0..50).map(|i| (format!("r{i:02}"), 0.0)).collect();
    let rows_ref: Vec<(&str, f64)> = rows.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    write_scores(&scores, &rows_ref);
    let run = |seed: &str, name: &str| {
        let m = dir.path().join(name);
        let out = alignpot(&[
            "select",
            "--scores",
            p(&scores),
            "--uniform-fraction",
            "0.2",
            "--seed",
            seed,
            "--out",
            p(&m),
        ]);
        assert_eq!(code(&out), 0, "{out:?}");
        fs::read(&m).unwrap()
    };
    let a = run("7", "a.json");
    assert_eq!(a, run("7", "b.json"));
    assert_ne!(a, run("8", "c.json"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["k"], 10);
    assert_eq!(v["seed"], 7);
    assert!(v["tau_k"].is_null());

    // the environment seed stands in for --seed
    let m = dir.path().join("env.json");
    let out = Command::new(env!("CARGO_BIN_EXE_alignpot"))
        .args([
            "select",
            "--scores",
            p(&scores),
            "--uniform-fraction",
            "0.2",
            "--out",
            p(&m),
        ])
        .env("ALIGNPOT_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&m).unwrap(), a);
}

#[test]
fn select_filters_records() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("r.jsonl");
    let lines: Vec<String> = (0..4)
        .map(|i| record_line(&format!("r{i}"), 1.0, 0.0, -1.0, -2.0))
        .collect();
    fs::write(&records, lines.join("\n") + "\n").unwrap();
    let scores = dir.path().join("s.csv");
    write_scores(
        &scores,
        &[("r0", 0.1), ("r1", 0.9), ("r2", 0.5), ("r3", 0.2)],
    );
    let kept = dir.path().join("kept.jsonl");
    let out = alignpot(&[
        "select",
        "--scores",
        p(&scores),
        "--top-k",
        "2",
        "--out",
        p(&dir.path().join("m.json")),
        "--records",
        p(&records),
        "--records-out",
        p(&kept),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let ids: Vec<String> = fs::read_to_string(&kept)
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(ids, ["r1", "r2"]);
}

#[test]
fn stats_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let lines = [
        record_line("a", 1.0, 0.0, -1.0, -2.0),
        record_line("b", 3.0, 0.0, -1.0, -4.0),
    ];
    fs::write(&input, lines.join("\n") + "\n").unwrap();
    let out = alignpot(&["stats", "--input", p(&input)]);
    assert_eq!(code(&out), 0, "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.is_object());
    assert!(v["warnings"].is_array());
}

#[test]
fn simulate_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.conf");
    fs::write(
        &config,
        "contexts = 1\narms = 10\nbeta = 0.1\nsampler = adversarial\nlr_mode = optimal\nepsilon = 1e-3\ntrials = 3\nseed = 4\n",
    )
    .unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let out = alignpot(&["simulate", "--config", p(&config), "--out", p(&csv)]);
        assert_eq!(code(&out), 0, "{out:?}");
        fs::read_to_string(&csv).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert!(a.starts_with("trial,t,dist,v\n"));
    assert_eq!(a.lines().filter(|l| l.starts_with("# trial=")).count(), 3);

    // two arms under the optimal rate land on the fixed point in one step
    let out = alignpot(&["simulate", "--arms", "2", "--lr-mode", "optimal"]);
    assert_eq!(code(&out), 0);
    assert!(
        stdout(&out).contains("iterations_to_target=1"),
        "{}",
        stdout(&out)
    );

    // unreachable budgets are reported, not failures
    let out = alignpot(&[
        "simulate",
        "--max-steps",
        "2",
        "--sampler",
        "uniform",
        "--lr-mode",
        "fixed",
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("iterations_to_target=none"));

    fs::write(&config, "colour = red\n").unwrap();
    assert_eq!(code(&alignpot(&["simulate", "--config", p(&config)])), 64);
    assert_eq!(code(&alignpot(&["simulate", "--arms", "1"])), 64);
}

#[test]
fn theorem_defaults_pass() {
    let out = alignpot(&["theorem", "--trials", "40"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["measured_T_adv"].as_f64().unwrap() < 0.5 * v["measured_mean_T_u"].as_f64().unwrap());

    let out = alignpot(&["theorem", "--arms", "3", "--trials", "40"]);
    assert_eq!(code(&out), 0, "{out:?}");
}

#[test]
fn pipeline_bandit_backend_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["evolve_then_select", "select_then_evolve"] {
        let out_dir = dir.path().join(mode);
        let out = alignpot(&[
            "pipeline",
            "--iterations",
            "2",
            "--mode",
            mode,
            "--out",
            p(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{out:?}");
        for t in 1..=2 {
            let report: serde_json::Value = serde_json::from_slice(
                &fs::read(out_dir.join(format!("iter_{t}/report.json"))).unwrap(),
            )
            .unwrap();
            assert_eq!(report["t"], t);
            assert_eq!(report["mode"], mode);
        }
        assert!(!out_dir.join("iter_3").exists());
        assert_eq!(stdout(&out).lines().count(), 2);
    }
    let conflict = [
        "pipeline",
        "--fraction",
        "0.5",
        "--top-k",
        "3",
        "--out",
        p(dir.path()),
    ];
    assert_eq!(code(&alignpot(&conflict)), 64);
    assert_eq!(
        code(&alignpot(&[
            "pipeline",
            "--mode",
            "sideways",
            "--out",
            p(dir.path())
        ])),
        64
    );
}

fn file_fixture(root: &Path) {
    fs::write(root.join("prompts.txt"), "p0\np1\n").unwrap();
    fs::create_dir_all(root.join("iter_1")).unwrap();
    fs::write(root.join("iter_1/X_evolved.txt"), "q0\nq1\n").unwrap();
    let d: Vec<String> = (0..2)
        .map(|i| {
            format!(
                r#"{{"id":"d{i}","prompt":"p{i}","reward_w":1.0,"reward_l":0.0,"logp_w":-1.0,"len_w":1,"logp_l":-2.0,"len_l":1}}"#
            )
        })
        .collect();
    fs::write(root.join("iter_1/D.jsonl"), d.join("\n") + "\n").unwrap();
    let d_prime: Vec<String> = (0..10)
        .map(|i| {
            format!(
                r#"{{"id":"e{i}","prompt":"q{}","reward_w":{},"reward_l":0.0,"logp_w":-1.0,"len_w":1,"logp_l":-2.0,"len_l":1}}"#,
                i % 2,
                i as f64 / 10.0
            )
        })
        .collect();
    fs::write(root.join("iter_1/D_prime.jsonl"), d_prime.join("\n") + "\n").unwrap();
}

#[test]
fn pipeline_file_backend_is_byte_stable() {
    let input = tempfile::tempdir().unwrap();
    file_fixture(input.path());
    let out = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dest = out.path().join(name);
        let o = alignpot(&[
            "pipeline",
            "--backend",
            "file",
            "--input",
            p(input.path()),
            "--iterations",
            "1",
            "--metric",
            "m_ap_raw",
            "--out",
            p(&dest),
        ]);
        assert_eq!(code(&o), 0, "{o:?}");
        dest
    };
    let a = run("a");
    let b = run("b");
    for name in ["selected.manifest.json", "train_set.jsonl", "report.json"] {
        assert_eq!(
            fs::read(a.join("iter_1").join(name)).unwrap(),
            fs::read(b.join("iter_1").join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(manifest(&a.join("iter_1/selected.manifest.json"))["k"], 4);

    // missing stage inputs are data errors
    fs::remove_file(input.path().join("iter_1/D_prime.jsonl")).unwrap();
    let o = alignpot(&[
        "pipeline",
        "--backend",
        "file",
        "--input",
        p(input.path()),
        "--iterations",
        "1",
        "--out",
        p(&out.path().join("c")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("D_prime.jsonl"));

    assert_eq!(
        code(&alignpot(&[
            "pipeline",
            "--backend",
            "file",
            "--out",
            p(&out.path().join("d"))
        ])),
        64
    );
    let same = [
        "pipeline",
        "--backend",
        "file",
        "--input",
        p(input.path()),
        "--out",
        p(input.path()),
    ];
    assert_eq!(code(&alignpot(&same)), 64);
}
