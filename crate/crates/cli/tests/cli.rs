use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use whittle_cli::files::{ResultFile, read_arm};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn whittle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whittle"))
        .args(args)
        .env_remove("BANDIT_INDEX_TOL")
        .output()
        .expect("binary runs")
}

fn compute(name: &str, extra: &[&str]) -> (i32, Option<ResultFile>) {
    let path = fixture(name);
    let mut args = vec!["compute", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = whittle(&args);
    let parsed = serde_json::from_slice(&out.stdout).ok();
    (out.status.code().unwrap(), parsed)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn compute_indexable_arm() {
    for variant in ["naive", "cubic", "block"] {
        let (code, r) = compute("indexable3.json", &["--variant", variant]);
        let r = r.unwrap();
        assert_eq!(code, 0);
        assert_eq!(r.status, "indexable");
        let idx = r.indices.unwrap();
        assert_eq!(idx.len(), 3);
        for (got, want) in idx.iter().zip([0.3, 0.8, 0.7]) {
            assert!((got - want).abs() < 0.05, "{variant}: {idx:?}");
        }
        assert_eq!(r.sigma.unwrap().len(), 3);
    }
}

#[test]
fn compute_exit_codes() {
    let (code, r) = compute("non_indexable3.json", &[]);
    assert_eq!(code, 2);
    assert_eq!(r.unwrap().indices, None);
    let (code, r) = compute("multichain2.json", &[]);
    assert_eq!(code, 3);
    assert_eq!(r.unwrap().status, "multichain");
    let (code, _) = compute("non_indexable3.json", &["--no-index-check"]);
    assert_eq!(code, 0);
}

#[test]
fn infinite_index_is_a_string() {
    let path = fixture("infinite2.json");
    let out = whittle(&["compute", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("\"inf\""), "{text}");
    let r: ResultFile = serde_json::from_str(&text).unwrap();
    assert_eq!(r.indices.unwrap(), [f64::INFINITY, 0.0]);
}

#[test]
fn discounted_rested_chain() {
    let (code, r) = compute("rested_chain.json", &[]);
    assert_eq!(code, 0);
    let idx = r.unwrap().indices.unwrap();
    assert!(
        (idx[0] - 0.9).abs() < 1e-10 && (idx[1] - 1.0).abs() < 1e-10,
        "{idx:?}"
    );
    let (_, r) = compute("rested_chain.json", &["--beta", "0.5"]);
    let idx = r.unwrap().indices.unwrap();
    assert!((idx[0] - 0.5).abs() < 1e-10, "{idx:?}");
    let (code, _) = compute("indexable3.json", &["--criterion", "discounted"]);
    assert_eq!(code, 1);
}

#[test]
fn malformed_files_name_the_field() {
    let out = whittle(&["compute", fixture("bad_entry.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("P1[1][1]"), "{}", stderr(&out));
    let out = whittle(&["compute", fixture("missing_field.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("r1"), "{}", stderr(&out));
    let out = whittle(&["compute", "/nonexistent/arm.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tolerance_from_environment() {
    let path = fixture("indexable3.json");
    let run = |tol: &str| {
        Command::new(env!("CARGO_BIN_EXE_whittle"))
            .args(["compute", path.to_str().unwrap()])
            .env("BANDIT_INDEX_TOL", tol)
            .output()
            .unwrap()
    };
    assert_eq!(run("1e-8").status.code(), Some(0));
    let bad = run("tiny");
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("BANDIT_INDEX_TOL"));
}

#[test]
fn check_against_oracle() {
    let out = whittle(&[
        "check",
        fixture("indexable3.json").to_str().unwrap(),
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.trim_end().ends_with("AGREE"), "{text}");
    let delta: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max delta: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(delta <= 1e-6);

    let out = whittle(&[
        "check",
        fixture("ambiguous2.json").to_str().unwrap(),
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("UNSUPPORTED_BY_ORACLE"));

    let out = whittle(&[
        "check",
        fixture("indexable3.json").to_str().unwrap(),
        "--oracle",
        "--max-n",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_random_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = whittle(&[
        "generate",
        "--n",
        "6",
        "--seed",
        "100",
        "--count",
        "12",
        "--out-dir",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = whittle(&[
        "generate",
        "--n",
        "6",
        "--bandwidth",
        "3",
        "--seed",
        "200",
        "--count",
        "12",
        "--out-dir",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut checked = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        let out = whittle(&["check", p.to_str().unwrap(), "--oracle"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}: {}",
            p.display(),
            stdout(&out)
        );
        checked += 1;
    }
    assert_eq!(checked, 24);
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = whittle(&[
            "generate",
            "--n",
            "3",
            "--seed",
            "7",
            "--count",
            "2",
            "--out-dir",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2);
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn generate_banded_and_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = whittle(&[
        "generate",
        "--n",
        "50",
        "--bandwidth",
        "3",
        "--seed",
        "1",
        "--out-dir",
        d,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let path = PathBuf::from(stdout(&out).trim());
    let raw = read_arm(&path).unwrap().to_raw();
    for (i, row) in raw.p0.iter().chain(&raw.p1).enumerate() {
        let i = i % 50;
        for (j, &x) in row.iter().enumerate() {
            assert_eq!(x > 0.0, i.abs_diff(j) <= 1, "({i}, {j})");
        }
    }
    let out = whittle(&["generate", "--n", "1", "--out-dir", d]);
    let raw = read_arm(Path::new(stdout(&out).trim())).unwrap().to_raw();
    assert_eq!(raw.p0, [[1.0]]);
    assert_eq!(raw.p1, [[1.0]]);
    let out = whittle(&["generate", "--n", "5", "--bandwidth", "4", "--out-dir", d]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn generate_compute_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = whittle(&[
        "generate",
        "--n",
        "40",
        "--seed",
        "3",
        "--out-dir",
        d.to_str().unwrap(),
    ]);
    let arm = stdout(&out).trim().to_string();
    let mut runs = Vec::new();
    for k in 0..2 {
        let res = d.join(format!("result{k}.json"));
        let out = whittle(&["compute", &arm, "--out", res.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        let r: ResultFile = serde_json::from_slice(&std::fs::read(res).unwrap()).unwrap();
        runs.push(r);
    }
    let bits = |r: &ResultFile| -> Vec<u64> {
        r.indices
            .as_ref()
            .unwrap()
            .iter()
            .map(|x| x.to_bits())
            .collect()
    };
    assert_eq!(bits(&runs[0]), bits(&runs[1]));
    assert_eq!(runs[0].sigma, runs[1].sigma);
    let direct = whittle::compute_indices(
        &read_arm(Path::new(&arm)).unwrap(),
        &whittle::SolverOptions::default().with_variant(whittle::Variant::Block(
            whittle::default_recompute_count(40),
        )),
    )
    .unwrap();
    let want: Vec<u64> = direct
        .indices()
        .unwrap()
        .iter()
        .map(|x| x.to_bits())
        .collect();
    assert_eq!(bits(&runs[0]), want);
}

#[test]
fn stats_output_and_jobs_invariance() {
    let args = |jobs: &'static str| {
        whittle(&[
            "stats",
            "--n",
            "5,20",
            "--bandwidth",
            "dense,3",
            "--samples",
            "40",
            "--seed",
            "11",
            "--jobs",
            jobs,
        ])
    };
    let one = args("1");
    let many = args("3");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&many));
    let text = stdout(&one);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,bandwidth,samples,indexable,seed"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("5,dense,40,"));
    assert!(rows[3].starts_with("20,3,40,"));

    let zero = whittle(&["stats", "--n", "5", "--samples", "0"]);
    assert_ne!(zero.status.code(), Some(0));
}

#[test]
fn bench_single_repeat() {
    let out = whittle(&["bench", "--n", "30", "--repeats", "1", "--with-no-check"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,variant,check,median_ms"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 4, "{text}");
    assert!(rows[0].starts_with("30,cubic,true,"));
    assert!(rows[1].starts_with("30,cubic,false,"));
    for r in rows {
        let ms: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ms >= 0.0);
    }
}
