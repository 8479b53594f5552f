use std::path::Path;
use std::process::Command;

use espframe::experiment::{
    cmd_analyze, cmd_denoise, cmd_estimate, cmd_frame_info, cmd_gen, cmd_prony, cmd_solve, cmd_sweep,
    ExperimentConfig, FrameKind, Method,
};
use espframe::io::{read_coeffs, read_csv_rows, read_signal_csv, CoeffKind};

/// A small synthetic problem that solves in well under a second.
fn small(dir: &Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
        [signal]
        sample_rate = 8000.0
        n = 128
        impulse_index = 4
        residues = "direct"
        resonances = [{{ frequency = 1000.0, tau = 4e-3 }}, {{ frequency = 2600.0, tau = 1e-3, amplitude = 0.5 }}]

        [frame]
        grid = {{ step = 0.3, offset = -3.5, count = 4 }}
        window_length = 16

        [solver]
        max_iterations = 40

        [output]
        dir = "{}"
        {extra}
        "#,
        dir.display()
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

#[test]
fn sweep_rows_summaries_and_byte_identical_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = r#"
        [noise]
        snr_db = [15.0, 0.0]
        seeds = [2, 1]
        [sweep]
        lambda_fractions = [1.0, 0.01, 0.1]
        frames = ["stft", "esp"]
    "#;
    let config = small(tmp.path(), extra);
    let report = cmd_sweep(&config).unwrap();
    assert_eq!(report.cells.len(), 2 * 2 * 2 * 3);
    assert_eq!(report.summaries.len(), 4);
    let first = std::fs::read(&report.path).unwrap();
    cmd_sweep(&config).unwrap();
    assert_eq!(first, std::fs::read(&report.path).unwrap());

    let (header, rows) = read_csv_rows(&report.path).unwrap();
    assert_eq!(
        header,
        ["kind", "frame", "snr_db", "seed", "lambda_fraction", "nonzero_pct", "reconstructed_snr_db", "gain_db"]
    );
    assert_eq!(rows.len(), 24 + 4);
    assert_eq!(rows[0][..4], ["cell", "esp", "0.0000", "1"]);
    for row in &rows[..24] {
        assert_eq!(row[6].split('.').nth(1).map(str::len), Some(4));
    }
    // the largest penalty keeps the fewest coefficients
    for cell in &report.cells {
        let at_one = report
            .cells
            .iter()
            .find(|c| (c.frame, c.snr_db, c.seed, c.lambda_fraction) == (cell.frame, cell.snr_db, cell.seed, 1.0))
            .unwrap();
        assert!(at_one.nonzero_pct <= cell.nonzero_pct);
    }
    for row in &rows[24..] {
        assert_eq!((row[0].as_str(), row[3].as_str()), ("summary", "all"));
    }
    for s in &report.summaries {
        let best = report
            .cells
            .iter()
            .filter(|c| c.frame == s.frame && c.snr_db == s.snr_db && c.lambda_fraction == s.lambda_fraction)
            .map(|c| c.gain_db)
            .sum::<f64>()
            / 2.0;
        assert!((best - s.gain_db).abs() < 1e-12);
        for fr in [0.01, 0.1, 1.0] {
            let mean = report
                .cells
                .iter()
                .filter(|c| c.frame == s.frame && c.snr_db == s.snr_db && c.lambda_fraction == fr)
                .map(|c| c.gain_db)
                .sum::<f64>()
                / 2.0;
            assert!(mean <= s.gain_db + 1e-12);
        }
    }
}

#[test]
fn single_lambda_single_seed_is_one_data_row() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "[noise]\nsnr_db = [10.0]\nseeds = [4]\n[sweep]\nlambda_fractions = [0.1]\n";
    let report = cmd_sweep(&small(tmp.path(), extra)).unwrap();
    let (_, rows) = read_csv_rows(&report.path).unwrap();
    assert_eq!(rows.iter().filter(|r| r[0] == "cell").count(), 1);
    let clean = small(tmp.path(), "[noise]\nsnr_db = [inf]\n");
    assert!(cmd_sweep(&clean).unwrap_err().is_config_error());
}

#[test]
fn denoise_writes_reports_reconstructions_and_projections() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small(tmp.path(), "[noise]\nsnr_db = [10.0]\nseeds = [1, 2]\n");
    let cases = cmd_denoise(&config).unwrap();
    assert_eq!(cases.len(), 2);
    let (header, rows) = read_csv_rows(&tmp.path().join("esp_quality.csv")).unwrap();
    assert_eq!(header[0], "case");
    assert_eq!(rows.len(), 2);
    for (row, case) in rows.iter().zip(&cases) {
        assert_eq!(row[0], case.label);
        assert_eq!(row[2], format!("{:.4}", case.report.reconstructed_snr_db));
        let recon = read_signal_csv(&tmp.path().join(format!("esp_{}_recon.csv", case.label)), 8000.0).unwrap();
        assert_eq!(recon.len(), 128);
        assert!(tmp.path().join(format!("esp_{}_recon.wav", case.label)).is_file());
        for axis in ["frequency", "time-shift"] {
            assert!(tmp.path().join(format!("esp_{}_mip_{axis}.png", case.label)).is_file());
            let (h, r) = read_csv_rows(&tmp.path().join(format!("esp_{}_mip_{axis}.csv", case.label))).unwrap();
            assert_eq!(r.len(), 4);
            assert_eq!(h[0], axis);
        }
    }

    // no noise: one clean case measured against the input
    let clean = cmd_denoise(&small(tmp.path(), "")).unwrap();
    assert_eq!(clean.len(), 1);
    assert_eq!(clean[0].label, "clean");
    assert!(clean[0].gain_db.is_nan());
}

#[test]
fn estimate_rows_and_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = r#"
        [solver]
        max_iterations = 30
        weights = { cutoff_m = 10, low = 0.1, high = 0.2 }
        [noise]
        snr_db = [inf, 20.0]
        seeds = [1, 2, 3]
        [estimate]
        methods = ["prony", "esp-unreg", "esp-bpd", "esp-weighted-bpd"]
        bands = [[800.0, 1200.0], [2400.0, 2800.0]]
        prony = { num_poles = 4, shift = 4 }
    "#;
    let mut config = small(tmp.path(), "");
    let patch: ExperimentConfig = ExperimentConfig::from_toml_str(extra).unwrap();
    config.noise = patch.noise;
    config.estimate = patch.estimate;
    config.solver.weights = patch.solver.weights;
    config.solver.max_iterations = 30;
    config.validate().unwrap();

    let (rows, summaries) = cmd_estimate(&config).unwrap();
    // 4 methods x (1 clean + 3 noisy) cases x 2 bands
    assert_eq!(rows.len(), 4 * 4 * 2);
    assert_eq!(summaries.len(), 4 * 2 * 2);
    for s in &summaries {
        if s.snr_db.is_infinite() {
            assert_eq!(s.count, 1);
            assert_eq!(s.frequency_std, 0.0);
            assert_eq!(s.tau_std, 0.0);
        }
        if s.method == Method::Prony && s.snr_db.is_infinite() {
            let target = if s.band.0 < 2000.0 { (1000.0, 4e-3) } else { (2600.0, 1e-3) };
            assert!((s.frequency_mean - target.0).abs() < 1e-6 * target.0);
            assert!((s.tau_mean - target.1).abs() < 1e-6 * target.1);
        }
        if s.method == Method::EspUnreg && s.snr_db.is_infinite() {
            // bins are 62.5 Hz apart
            let f = if s.band.0 < 2000.0 { 1000.0 } else { 2600.0 };
            assert!((s.frequency_mean - f).abs() <= 62.5);
        }
    }
    let (header, file_rows) = read_csv_rows(&tmp.path().join("estimates.csv")).unwrap();
    assert_eq!(header[0], "method");
    assert_eq!(file_rows.len(), rows.len());
    let (_, summary_rows) = read_csv_rows(&tmp.path().join("estimates_summary.csv")).unwrap();
    assert_eq!(summary_rows.len(), summaries.len());
    for (row, s) in summary_rows.iter().zip(&summaries) {
        assert_eq!(row[0], s.method.name());
        assert_eq!(row[5].parse::<f64>().unwrap(), s.frequency_mean);
    }
}

#[test]
fn single_shot_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small(tmp.path(), "[noise]\nsnr_db = [20.0]\nseeds = [9]\n");

    let written = cmd_gen(&config).unwrap();
    assert_eq!(written.len(), 4);
    let clean = read_signal_csv(&tmp.path().join("signal.csv"), 8000.0).unwrap();
    let built = config.build_signal().unwrap();
    for (a, b) in clean.samples().iter().zip(built.samples()) {
        assert_eq!(a, b);
    }

    let info = cmd_frame_info(&config).unwrap();
    assert!(info.contains("coefficient shape: 4 x 128 x 128"));

    let written = cmd_analyze(&config).unwrap();
    let (kind, c) = read_coeffs(&written[0]).unwrap();
    assert_eq!(kind, CoeffKind::Esp);
    assert_eq!(c.shape(), (4, 128, 128));

    let case = cmd_solve(&config).unwrap();
    assert_eq!(case.label, "snr20_seed9");
    assert!(tmp.path().join("esp_snr20_seed9_coeffs.bin").is_file());
    let (_, hist) = read_csv_rows(&tmp.path().join("esp_snr20_seed9_history.csv")).unwrap();
    assert_eq!(hist.len(), 40);

    let mut stft = config.clone();
    stft.frame.kind = FrameKind::Stft;
    let written = cmd_analyze(&stft).unwrap();
    assert_eq!(read_coeffs(&written[0]).unwrap().0, CoeffKind::Stft);

    let mut prony = config.clone();
    prony.noise.snr_db.clear();
    prony.estimate.prony.shift = 4;
    let poles = cmd_prony(&prony).unwrap();
    assert_eq!(poles.len(), 4);
    let (_, rows) = read_csv_rows(&tmp.path().join("prony.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), poles[0].frequency);
}

#[test]
fn config_files_resolve_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("input.csv"), "0\n1\n0.5\n-0.25\n0\n0\n0\n0\n").unwrap();
    std::fs::write(
        tmp.path().join("run.toml"),
        "[signal]\nsource = \"file\"\npath = \"input.csv\"\nsample_rate = 8.0\n[frame]\nkind = \"stft\"\nwindow_length = 4\n",
    )
    .unwrap();
    let config = ExperimentConfig::from_path(&tmp.path().join("run.toml")).unwrap();
    assert_eq!(config.build_signal().unwrap().len(), 8);
    std::fs::write(tmp.path().join("bad.toml"), "[signal]\nsource = \"file\"\npath = \"missing.csv\"\n").unwrap();
    assert!(ExperimentConfig::from_path(&tmp.path().join("bad.toml")).unwrap_err().is_config_error());
}

#[test]
fn cli_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_esp");
    let tmp = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| Command::new(exe).args(args).output().unwrap();

    let ok = run(&["frame-info", "--frame", "stft"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("2048 total"));

    // missing --seed/--out, bad values, missing files: configuration errors
    assert_eq!(run(&["denoise"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--lambda=-1"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--config", "/no/such.toml"]).status.code(), Some(2));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[signal]\nn = 0\n").unwrap();
    assert_eq!(run(&["gen", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    // a rank-deficient Prony problem is a numerical failure
    let zero = tmp.path().join("zero.csv");
    std::fs::write(&zero, "0\n".repeat(32)).unwrap();
    let out = tmp.path().join("out");
    let r = run(&["prony", "--input", zero.to_str().unwrap(), "--sample-rate", "8", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));

    let cfg = tmp.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "[signal]\nn = 256\n[frame]\nkind = \"stft\"\nwindow_length = 32\n[noise]\nsnr_db = [5.0]\nrealizations = 2\n[sweep]\nlambda_fractions = [0.1, 0.3]\n",
    )
    .unwrap();
    let r = run(&["sweep", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let (_, rows) = read_csv_rows(&out.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 4 + 1);
    assert_eq!(rows[0][3], "3");
    assert_eq!(rows[2][3], "4");
}
