//! Acceptance criterion 10: killing the stream at any chunk boundary and
//! resuming from the snapshot reproduces the uninterrupted run byte for byte.

use std::fs;
use std::path::Path;
use std::process::Command;

fn streamstat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_streamstat"))
}

struct Rng(u64);

impl Rng {
    fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn gauss(&mut self) -> f64 {
        let u1 = self.next_f64().max(1e-12);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn run_stream(cfg: &Path, csv: &Path, snap: &Path, out: &Path, max_chunks: Option<usize>) {
    let mut cmd = streamstat();
    cmd.args([
        "stream",
        "--model",
        cfg.to_str().unwrap(),
        "--in",
        csv.to_str().unwrap(),
        "--snapshot",
        snap.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    if let Some(m) = max_chunks {
        cmd.args(["--max-chunks", &m.to_string()]);
    }
    let output = cmd.output().unwrap();
    assert!(
        output.status.success(),
        "stream failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn kill_resume_roundtrip(cfg_text: &str, csv_text: &str, total_chunks: usize, label: &str) {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    fs::write(&csv, csv_text).unwrap();
    let cfg = dir.path().join("model.json");
    fs::write(&cfg, cfg_text).unwrap();

    // uninterrupted run
    let full_snap = dir.path().join("full_snap.json");
    let full_out = dir.path().join("full_out");
    run_stream(&cfg, &csv, &full_snap, &full_out, None);
    let full_snap_bytes = fs::read(&full_snap).unwrap();
    let full_report_bytes = fs::read(full_out.join("report.json")).unwrap();

    for boundary in 1..total_chunks {
        let snap = dir.path().join(format!("snap_{boundary}.json"));
        let out = dir.path().join(format!("out_{boundary}"));
        // "kill" at the boundary
        run_stream(&cfg, &csv, &snap, &out, Some(boundary));
        // resume to completion
        run_stream(&cfg, &csv, &snap, &out, None);
        let snap_bytes = fs::read(&snap).unwrap();
        let report_bytes = fs::read(out.join("report.json")).unwrap();
        assert_eq!(
            snap_bytes, full_snap_bytes,
            "{label}: snapshot differs after kill/resume at boundary {boundary}"
        );
        assert_eq!(
            report_bytes, full_report_bytes,
            "{label}: report differs after kill/resume at boundary {boundary}"
        );
    }
}

#[test]
fn criterion_10_snapshot_determinism() {
    // linear model with diagnostics enabled
    let mut rng = Rng(2024);
    let mut csv = String::from("y,x1,x2\n");
    for _ in 0..130 {
        let x1 = rng.gauss();
        let x2 = rng.gauss();
        let y = 0.5 + 1.5 * x1 - 0.75 * x2 + 0.4 * rng.gauss();
        csv.push_str(&format!("{y},{x1},{x2}\n"));
    }
    let lm_cfg = r#"{
  "kind": "lm",
  "formula": {"response": "y", "covariates": ["x1", "x2"], "intercept": true},
  "chunk_size": 20,
  "diagnostics": {"t_test": true, "fdr_alpha": 0.05, "normal_f": true, "asymptotic_f": true, "m": 2}
}"#;
    kill_resume_roundtrip(lm_cfg, &csv, 7, "lm");

    // cumulative EE estimator
    let mut rng = Rng(4242);
    let mut csv = String::from("resp,a,b\n");
    for _ in 0..180 {
        let a = rng.gauss();
        let b = rng.gauss();
        let p = 1.0 / (1.0 + (-(0.4 + 0.9 * a - 0.6 * b)).exp());
        let y = i32::from(rng.next_f64() < p);
        csv.push_str(&format!("{y},{a},{b}\n"));
    }
    let cuee_cfg = r#"{
  "kind": "cuee",
  "family": "logistic",
  "formula": {"response": "resp", "covariates": ["a", "b"], "intercept": true},
  "chunk_size": 30
}"#;
    kill_resume_roundtrip(cuee_cfg, &csv, 6, "cuee");

    println!("acceptance 10 snapshot determinism: PASS (kill/resume at every boundary, lm and cuee, byte-identical)");
}
