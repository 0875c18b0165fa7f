//! Emitted files against the in-memory report.

use std::collections::HashMap;
use std::fs;

use tool_innovation::config::RunConfig;
use tool_innovation::experiments::ExperimentReport;
use tool_innovation::io::{emit_outputs, verify_manifest};

fn small_run() -> (RunConfig, ExperimentReport) {
    let cfg = RunConfig {
        num_trials: 2,
        base_seed: 9,
        ..RunConfig::defaults(2)
    };
    let report = cfg.run().unwrap();
    (cfg, report)
}

#[test]
fn csvs_reparse_to_report_values() {
    let (cfg, report) = small_run();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&report, &cfg, dir.path()).unwrap();
    let arm = &report.arms[0];

    let mut rdr = csv::Reader::from_path(dir.path().join("steps.csv")).unwrap();
    let rows: Vec<(usize, usize, usize)> = rdr.deserialize().map(Result::unwrap).collect();
    let want: Vec<_> = arm
        .trials
        .iter()
        .flat_map(|t| {
            t.runs
                .iter()
                .enumerate()
                .map(move |(r, run)| (t.trial, r, run.steps_to_solve))
        })
        .collect();
    assert_eq!(rows, want);

    let mut rdr = csv::Reader::from_path(dir.path().join("probes.csv")).unwrap();
    let mut got: HashMap<(usize, usize, String), f64> = HashMap::new();
    for rec in rdr.deserialize::<(usize, usize, String, f64)>() {
        let (t, k, name, p) = rec.unwrap();
        got.insert((t, k, name), p);
    }
    for t in &arm.trials {
        for p in &t.probes {
            let v = got[&(t.trial, p.cumulative_step, p.name.clone())];
            assert!(
                (v - p.probability).abs() <= 5e-9 * p.probability.abs(),
                "{v} vs {}",
                p.probability
            );
        }
    }

    let mut rdr = csv::Reader::from_path(dir.path().join("ranks.csv")).unwrap();
    let ranks: Vec<(usize, usize, usize, usize, usize)> =
        rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(ranks.len(), 2 * 43 * 12);
    assert!(ranks.iter().all(|r| r.3 <= 256 && r.4 <= 256));
    let first = &arm.trials[0].runs[0].steps[0];
    assert_eq!(
        (ranks[0].3, ranks[0].4),
        (first.utility_rank, first.infogain_rank)
    );

    assert!(!dir.path().join("efe.csv").exists());
}

#[test]
fn same_seed_same_bytes_and_checksums_verify() {
    let (cfg, report) = small_run();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = emit_outputs(&report, &cfg, a.path()).unwrap();
    let (_, again) = small_run();
    let mb = emit_outputs(&again, &cfg, b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    for f in &ma.files {
        assert_eq!(
            fs::read(a.path().join(&f.path)).unwrap(),
            fs::read(b.path().join(&f.path)).unwrap(),
            "{}",
            f.path
        );
    }
    assert!(verify_manifest(a.path()).unwrap().is_empty());
}

#[test]
fn learned_tool_probe_never_decreases() {
    let (_, report) = small_run();
    for t in &report.arms[0].trials {
        let v = t.probe_series("V_from_null_left");
        assert_eq!(v.len(), 43 * 12 + 1);
        assert!(
            v.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            "trial {}",
            t.trial
        );
    }
}
