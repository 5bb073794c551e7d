//! Acceptance gate for the campaign runner's reproducibility contract: with a
//! fixed seed and timing recording off, `bench` must emit byte-identical
//! reports across repeated runs and across --jobs settings.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn verdict(name: &str, pass: bool, detail: String, started: Instant) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "acceptance {name}: {status} ({detail}; {:.2}s)",
        started.elapsed().as_secs_f64()
    );
    pass
}

fn run_bench(cwd: &Path, config: &Path, out_dir: &Path, jobs: &str, no_timing: bool) -> Vec<u8> {
    let mut args = vec![
        "bench".to_string(),
        "--config".into(),
        config.to_str().unwrap().into(),
        "--out-dir".into(),
        out_dir.to_str().unwrap().into(),
        "--jobs".into(),
        jobs.into(),
    ];
    if no_timing {
        args.push("--no-timing".into());
    }
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_gkcm"))
        .args(&args)
        .current_dir(cwd)
        .env_remove("GKCM_JOBS")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "bench failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn write_campaign(dir: &Path) -> PathBuf {
    let path = dir.join("campaign.json");
    fs::write(
        &path,
        r#"{
            "scenarios": [{"id": "null1"}, {"id": "alt1"}],
            "sample_sizes": [50],
            "reps": 5,
            "alpha": 0.05,
            "seed": 99,
            "methods": [
                {"name": "gkcm-rf", "config": {}},
                {
                    "name": "gkcm-krr",
                    "config": {
                        "regressor_x": {"method": "krr"},
                        "regressor_y": {"method": "krr"}
                    }
                },
                {
                    "name": "gcm",
                    "kind": "gcm",
                    "config": {
                        "regressor_x": {"method": "krr"},
                        "regressor_y": {"method": "krr"}
                    }
                }
            ]
        }"#,
    )
    .unwrap();
    path
}

/// Strips the runtime column so timing-on reports can be compared.
fn without_runtime_column(csv_text: &str) -> Vec<Vec<String>> {
    csv_text
        .lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| *i != 8)
                .map(|(_, f)| f.to_string())
                .collect()
        })
        .collect()
}

#[test]
fn criterion_9_campaign_reproducibility() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = write_campaign(dir.path());

    let mut reports = Vec::new();
    let mut stdouts = Vec::new();
    for (label, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out_dir = dir.path().join(format!("run_{label}"));
        stdouts.push(run_bench(dir.path(), &config, &out_dir, jobs, true));
        reports.push((
            fs::read(out_dir.join("campaign.csv")).unwrap(),
            fs::read(out_dir.join("campaign.json")).unwrap(),
        ));
    }
    let rerun_identical = reports[0] == reports[1] && stdouts[0] == stdouts[1];
    let jobs_identical = reports[0] == reports[2] && stdouts[0] == stdouts[2];

    // with timing on, everything but the runtime column must still agree
    let timed_a = run_bench(dir.path(), &config, &dir.path().join("timed_a"), "1", false);
    let timed_b = run_bench(dir.path(), &config, &dir.path().join("timed_b"), "2", false);
    let timed_agree = without_runtime_column(&String::from_utf8(timed_a).unwrap())
        == without_runtime_column(&String::from_utf8(timed_b).unwrap());

    let csv_rows = String::from_utf8_lossy(&reports[0].0).lines().count();
    let pass = verdict(
        "criterion 9 campaign reproducibility",
        rerun_identical && jobs_identical && timed_agree && csv_rows == 7,
        format!(
            "rerun identical {rerun_identical}, jobs 1 vs 3 identical {jobs_identical}, \
             timing-on rows agree off the runtime column {timed_agree}, {csv_rows} csv lines"
        ),
        started,
    );
    assert!(pass);
}
