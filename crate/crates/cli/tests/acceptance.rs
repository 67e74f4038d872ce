//! Acceptance criterion 10: `diagnose` and `experiment` with fixed seeds
//! produce byte-identical outputs across repeated runs and across 1 vs 8
//! worker threads. Run with `--nocapture` to see the PASS line.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_laplace-diag"))
}

#[test]
fn acceptance_10_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let status = bin()
        .args([
            "generate", "--d", "3", "--n", "90", "--seed", "5", "--out",
            data.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // diagnose: two runs at 1 worker, one at 8 workers
    let mut reports = Vec::new();
    for (tag, workers) in [("r1", "1"), ("r2", "1"), ("r8", "8")] {
        let out_path = dir.path().join(format!("report_{tag}.json"));
        let out = bin()
            .args([
                "diagnose", "--data", data.to_str().unwrap(), "--mc-samples", "5000", "--seed",
                "9", "--restarts", "8", "--workers", workers, "--out",
                out_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(reports[0], reports[1], "diagnose: repeated runs differ");
    assert_eq!(reports[0], reports[2], "diagnose: 1 vs 8 workers differ");

    // experiment (+ plot of its CSV): same three-way comparison
    let mut csvs = Vec::new();
    let mut svgs = Vec::new();
    for (tag, workers) in [("e1", "1"), ("e2", "1"), ("e8", "8")] {
        let csv_path = dir.path().join(format!("exp_{tag}.csv"));
        let out = bin()
            .args([
                "experiment", "--regime", "d2.5", "--dims", "4,8", "--replicates", "3", "--seed",
                "2", "--mc-samples", "5000", "--workers", workers, "--no-timing", "--out",
                csv_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push((std::fs::read(&csv_path).unwrap(), out.stdout));

        let svg_path = dir.path().join(format!("fig_{tag}.svg"));
        let out = bin()
            .args([
                "plot", "--in", csv_path.to_str().unwrap(), "--out", svg_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        svgs.push(std::fs::read(&svg_path).unwrap());
    }
    assert_eq!(csvs[0], csvs[1], "experiment: repeated runs differ");
    assert_eq!(csvs[0], csvs[2], "experiment: 1 vs 8 workers differ");
    assert_eq!(svgs[0], svgs[1], "plot: repeated runs differ");
    assert_eq!(svgs[0], svgs[2], "plot: worker counts differ");

    println!("acceptance 10 (byte-identical outputs across runs and workers): PASS");
}
