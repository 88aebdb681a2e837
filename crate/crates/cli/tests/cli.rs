//! End-to-end checks of the command-line interface via the built binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_srp-diot"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

#[test]
fn gen_ontology_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ont");
    let b = dir.path().join("b.ont");
    for out in [&a, &b] {
        let r = run_in(
            dir.path(),
            &["gen-ontology", "--leaves", "268", "--seed", "7", "--out", out.to_str().unwrap()],
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    // Leaf count within the generator's exact-target contract.
    let text = fs::read_to_string(&a).unwrap();
    let leaves = text
        .lines()
        .skip(1)
        .filter(|l| {
            let idx: usize = l.split(' ').next().unwrap().parse().unwrap();
            !text.lines().skip(1).any(|m| {
                m.split(' ').nth(1).map(|p| p.parse::<usize>() == Ok(idx)).unwrap_or(false)
            })
        })
        .count();
    assert_eq!(leaves, 268);
}

#[test]
fn gen_ontology_requires_leaves() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_in(dir.path(), &["gen-ontology", "--out", "x.ont"]);
    assert_eq!(r.status.code(), Some(2), "usage error must exit 2");
}

#[test]
fn run_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.ini");
    fs::write(
        &cfg,
        "[sim]\nnodes = 60\nduration = 120\nq_interval = 10\na_interval = 30\n\
         seed = 4\nontology_leaves = 30\nprotocol = srp-diot\n",
    )
    .unwrap();
    let out1 = dir.path().join("r1.csv");
    let out2 = dir.path().join("r2.csv");
    for out in [&out1, &out2] {
        let r = run_in(
            dir.path(),
            &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let c1 = fs::read(&out1).unwrap();
    assert_eq!(c1, fs::read(&out2).unwrap(), "same seed, same bytes");
    let text = String::from_utf8(c1).unwrap();
    assert!(text.starts_with("protocol,seed,nodes,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn unknown_protocol_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, "[sim]\nprotocol = quantum\n").unwrap();
    let r = run_in(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown protocol"));
}

#[test]
fn dry_run_prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.ini");
    fs::write(&cfg, "[sim]\nnodes = 42\n").unwrap();
    let r = run_in(dir.path(), &["run", "--config", cfg.to_str().unwrap(), "--dry-run"]);
    assert!(r.status.success());
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.contains("nodes = 42"));
    assert!(text.contains("[utility]"));
    assert!(!dir.path().join("results.csv").exists(), "dry run must not simulate");
}

#[test]
fn compare_produces_expected_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.ini");
    fs::write(
        &sweep,
        "[sweep]\naxis = node_count\nvalues = 40,60\nseeds = 1,2\n\
         protocols = flooding, centralized\n\n\
         [sim]\nduration = 90\nq_interval = 10\nontology_leaves = 20\n\
         [baseline]\nflood_hop_limit = 8\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let r = run_in(
        dir.path(),
        &[
            "compare",
            "--sweep",
            sweep.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            "2",
        ],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("merged.csv")).unwrap();
    // 2 values x 2 protocols x 2 seeds + header.
    assert_eq!(csv.lines().count(), 9);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("axis: node_count"));
    assert!(summary.contains('*'), "minimum-traffic flag present");
}

#[test]
fn compare_accepts_ablation_flags() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.ini");
    fs::write(
        &sweep,
        "[sweep]\naxis = mobility_mix\nvalues = 100/0/0\nseeds = 1\nprotocols = srp-diot\n\
         \n[sim]\nnodes = 40\nduration = 60\nq_interval = 15\nontology_leaves = 20\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let r = run_in(
        dir.path(),
        &[
            "compare",
            "--sweep",
            sweep.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--no-stability",
            "--no-coverage",
        ],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("merged.csv").exists());
}

#[test]
fn gen_mobility_trace_is_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let r = run_in(
        dir.path(),
        &[
            "gen-mobility",
            "--nodes",
            "10",
            "--duration",
            "30",
            "--seed",
            "2",
            "--out",
            trace.to_str().unwrap(),
        ],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let positions = srp_diot::simnet::read_trace(&trace, 10, 31).unwrap();
    assert_eq!(positions.len(), 10);

    // And a run can replay it.
    let cfg = dir.path().join("exp.ini");
    fs::write(
        &cfg,
        format!(
            "[sim]\nnodes = 10\nduration = 20\nq_interval = 5\nontology_leaves = 12\n\
             area = 1000x1000\nmobility_trace = {}\n",
            trace.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    let r = run_in(
        dir.path(),
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
}
