use std::path::Path;
use std::process::Command;

use attrdiff::pipeline::{read_manifest, run_batch, save_image, RunConfig};
use attrdiff::{Error, ImageTensor, Range};

fn write_inputs(dir: &Path, names: &[&str], brightness: f64) {
    for (i, name) in names.iter().enumerate() {
        let img = ImageTensor::from_fn(20, 18, 3, Range::Unit, |y, x, c| {
            (brightness + 0.02 * i as f64 + 0.05 * ((x + 3 * y + c) as f64 * 0.4).sin())
                .clamp(0.0, 1.0)
        });
        save_image(&img, &dir.join(format!("{name}.png"))).unwrap();
    }
}

fn quick_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.guidance.omega = 4;
    cfg.guidance.seed = 3;
    cfg
}

#[test]
fn empty_input_dir_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_batch(dir.path(), &dir.path().join("out"), &quick_config(), None).unwrap_err();
    assert!(matches!(err, Error::Data(_)));
}

#[test]
fn batch_without_references() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    write_inputs(&input, &["a", "b", "c"], 0.08);
    let out = dir.path().join("out");
    let records = run_batch(&input, &out, &quick_config(), None).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records
        .iter()
        .all(|r| r.metrics.is_none() && r.output.exists()));
    assert!(records.iter().all(|r| r.trace.steps == 4));
    assert_eq!(read_manifest(&out.join("manifest.jsonl")).unwrap().len(), 3);
    let seeds: std::collections::HashSet<u64> = records.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 3);
}

#[test]
fn summary_mean_psnr_is_the_arithmetic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let (input, refs, out) = (
        dir.path().join("in"),
        dir.path().join("ref"),
        dir.path().join("out"),
    );
    write_inputs(&input, &["a", "b", "c"], 0.08);
    write_inputs(&refs, &["a", "b", "c"], 0.45);
    let records = run_batch(&input, &out, &quick_config(), Some(&refs)).unwrap();
    let psnrs: Vec<f64> = records
        .iter()
        .map(|r| r.metrics.as_ref().unwrap().psnr.unwrap())
        .collect();
    let mean = psnrs.iter().sum::<f64>() / 3.0;

    let mut reader = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[3][0], "mean");
    let written: f64 = rows[3][3].parse().unwrap();
    assert!((written - mean).abs() <= 1e-12 * mean.abs());
    for (row, p) in rows.iter().zip(&psnrs) {
        assert_eq!(row[3].parse::<f64>().unwrap(), *p);
    }
}

#[test]
fn unpaired_references_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let (input, refs) = (dir.path().join("in"), dir.path().join("ref"));
    write_inputs(&input, &["a", "b", "c"], 0.08);
    write_inputs(&refs, &["a"], 0.45);
    match run_batch(
        &input,
        &dir.path().join("out"),
        &quick_config(),
        Some(&refs),
    ) {
        Err(Error::Pairing(missing)) => {
            assert_eq!(missing.len(), 2);
            assert!(missing[0].ends_with("b.png") && missing[1].ends_with("c.png"));
        }
        other => panic!("expected a pairing error, got {other:?}"),
    }
}

#[test]
fn parallel_and_serial_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    write_inputs(&input, &["a", "b", "c", "d"], 0.1);
    let mut serial = quick_config();
    serial.parallel = false;
    let a = run_batch(&input, &dir.path().join("o1"), &quick_config(), None).unwrap();
    let b = run_batch(&input, &dir.path().join("o2"), &serial, None).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.output_checksum, y.output_checksum);
    }
}

#[test]
fn cli_flags_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    write_inputs(&input, &["a", "b"], 0.08);
    let out = dir.path().join("out");
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[guidance]\nomega = 50\nseed = 1\n").unwrap();
    let manifest = dir.path().join("m.jsonl");
    let bin = env!("CARGO_BIN_EXE_attrdiff");
    let status = Command::new(bin)
        .args([
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ])
        .args([
            "--config",
            config.to_str().unwrap(),
            "--omega",
            "3",
            "--scale",
            "1.5",
        ])
        .args([
            "--grad-steps",
            "2",
            "--lambda1",
            "500",
            "--lambda2",
            "5",
            "--lambda3",
            "0.01",
        ])
        .args([
            "--exposure-base",
            "0.5",
            "--exposure-amp",
            "0.2",
            "--pool-size",
            "8",
        ])
        .args([
            "--phase-mode",
            "raw",
            "--decomposer",
            "classical",
            "--no-color",
        ])
        .args(["--static-scale", "--static-steps", "--seed", "4"])
        .args(["--manifest", manifest.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let records = read_manifest(&manifest).unwrap();
    assert_eq!(records.len(), 2);
    let g = &records[0].config.guidance;
    assert_eq!((g.omega, g.scale, g.grad_steps, g.seed), (3, 1.5, 2, 4));
    assert!(g.static_scale && g.static_steps && !g.attributes.toggles.color);
    assert_eq!(g.attributes.pool_size, 8);
    assert_eq!(g.attributes.lambdas.exposure, 500.0);

    let replayed = Command::new(bin)
        .args(["--replay", manifest.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(replayed.status.success());
    assert_eq!(
        String::from_utf8_lossy(&replayed.stdout)
            .matches("match")
            .count(),
        2
    );
}
