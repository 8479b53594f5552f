//! A small penalty sweep comparing the ESP and STFT frames, driven by an
//! inline experiment configuration. Writes `sweep.csv` under the temp directory.

use espframe::experiment::{cmd_sweep, ExperimentConfig};

const CONFIG: &str = r#"
[frame]
grid = { step = 0.4, offset = -4.0, count = 5 }

[solver]
max_iterations = 100

[noise]
snr_db = [0.0, 15.0]
seeds = [1, 2]

[sweep]
lambda_fractions = [0.01, 0.05, 0.2]
frames = ["esp", "stft"]
"#;

fn main() -> espframe::error::Result<()> {
    let mut config = ExperimentConfig::from_toml_str(CONFIG)?;
    config.output.dir = std::env::temp_dir().join("espframe_sweep");
    let report = cmd_sweep(&config)?;
    for s in &report.summaries {
        println!(
            "{:<4} {:>4} dB: best gain {:.2} dB at {:.2} lambda_max ({:.2}% nonzero)",
            s.frame.name(),
            s.snr_db,
            s.gain_db,
            s.lambda_fraction,
            s.nonzero_pct
        );
    }
    println!("{}", report.path.display());
    Ok(())
}
