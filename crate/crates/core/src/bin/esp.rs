use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use espframe::error::{Error, Result};
use espframe::experiment::{
    cmd_analyze, cmd_denoise, cmd_estimate, cmd_frame_info, cmd_gen, cmd_prony, cmd_solve, cmd_sweep,
    ExperimentConfig, FrameKind, SignalSource,
};

#[derive(Parser)]
#[command(name = "esp", version, about = "Enveloped sinusoid Parseval frame experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the clean signal and its noisy versions
    Gen(Common),
    /// Describe the configured frame
    FrameInfo(Common),
    /// Analysis coefficients and projections of the input
    Analyze(Common),
    /// One sparse solve with coefficient export
    Solve(Common),
    /// Denoise every (snr, seed) case
    Denoise(Experiment),
    /// Reconstruction quality over a grid of penalties
    Sweep(Experiment),
    /// Resonance estimates over noise realizations
    Estimate(Experiment),
    /// Prony fit of the input
    Prony(Common),
}

#[derive(Args, Clone)]
struct Overrides {
    /// TOML experiment description
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal file (CSV or WAV) instead of the synthetic signal
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long, value_parser = parse_frame)]
    frame: Option<FrameKind>,
    /// Input SNR in dB; repeat for several
    #[arg(long = "snr", allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    lambda_fraction: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    prony_poles: Option<usize>,
    #[arg(long)]
    prony_shift: Option<usize>,
    #[arg(long)]
    prony_svd: Option<usize>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Experiment {
    #[command(flatten)]
    overrides: Overrides,
    /// First noise seed; realizations use seed, seed+1, ...
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_frame(s: &str) -> std::result::Result<FrameKind, String> {
    match s {
        "esp" => Ok(FrameKind::Esp),
        "stft" => Ok(FrameKind::Stft),
        _ => Err(format!("unknown frame '{s}' (esp or stft)")),
    }
}

fn load(o: &Overrides, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut c = match &o.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &o.input {
        c.signal.source = SignalSource::File;
        c.signal.path = Some(p.clone());
    }
    if let Some(v) = o.sample_rate {
        c.signal.sample_rate = v;
    }
    if let Some(v) = o.frame {
        c.frame.kind = v;
    }
    if !o.snr_db.is_empty() {
        c.noise.snr_db = o.snr_db.clone();
    }
    if let Some(v) = o.realizations {
        c.noise.realizations = v;
        c.noise.seeds = None;
    }
    if let Some(v) = seed {
        c.noise.base_seed = v;
        c.noise.seeds = None;
    }
    if let Some(v) = o.lambda_fraction {
        c.solver.lambda_fraction = Some(v);
        c.solver.lambda = None;
    }
    if let Some(v) = o.lambda {
        c.solver.lambda = Some(v);
        c.solver.lambda_fraction = None;
    }
    if let Some(v) = o.iterations {
        c.solver.max_iterations = v;
    }
    if let Some(v) = o.prony_poles {
        c.estimate.prony.num_poles = v;
    }
    if let Some(v) = o.prony_shift {
        c.estimate.prony.shift = v;
    }
    if o.prony_svd.is_some() {
        c.estimate.prony.svd_keep = o.prony_svd;
    }
    if let Some(v) = out {
        c.output.dir = v;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            for p in cmd_gen(&load(&a.overrides, a.seed, a.out)?)? {
                println!("{}", p.display());
            }
        }
        Command::FrameInfo(a) => print!("{}", cmd_frame_info(&load(&a.overrides, a.seed, a.out)?)?),
        Command::Analyze(a) => {
            for p in cmd_analyze(&load(&a.overrides, a.seed, a.out)?)? {
                println!("{}", p.display());
            }
        }
        Command::Solve(a) => {
            let c = cmd_solve(&load(&a.overrides, a.seed, a.out)?)?;
            println!(
                "{}: lambda {:.6e}, {} iterations, reconstructed SNR {:.4} dB, sparsity {:.4}%",
                c.label, c.lambda, c.iterations_run, c.report.reconstructed_snr_db, c.report.sparsity_percent
            );
        }
        Command::Denoise(a) => {
            for c in cmd_denoise(&load(&a.overrides, Some(a.seed), Some(a.out))?)? {
                println!(
                    "{}: reconstructed SNR {:.4} dB (gain {:.4} dB), sparsity {:.4}%",
                    c.label, c.report.reconstructed_snr_db, c.gain_db, c.report.sparsity_percent
                );
            }
        }
        Command::Sweep(a) => {
            let r = cmd_sweep(&load(&a.overrides, Some(a.seed), Some(a.out))?)?;
            for s in &r.summaries {
                println!(
                    "{} at {} dB: max gain {:.4} dB at lambda fraction {:.3e}",
                    s.frame.name(),
                    s.snr_db,
                    s.gain_db,
                    s.lambda_fraction
                );
            }
            println!("{}", r.path.display());
        }
        Command::Estimate(a) => {
            let (_, summaries) = cmd_estimate(&load(&a.overrides, Some(a.seed), Some(a.out))?)?;
            for s in &summaries {
                println!(
                    "{} snr {} band [{}, {}]: f {:.2} +- {:.2} Hz, tau {:.4e} +- {:.2e} s (n = {})",
                    s.method.name(),
                    s.snr_db,
                    s.band.0,
                    s.band.1,
                    s.frequency_mean,
                    s.frequency_std,
                    s.tau_mean,
                    s.tau_std,
                    s.count
                );
            }
        }
        Command::Prony(a) => {
            for p in cmd_prony(&load(&a.overrides, a.seed, a.out)?)? {
                println!(
                    "{:>12.3} Hz  tau {:>12.6e} s  |amp| {:.6e}{}",
                    p.frequency,
                    p.time_constant,
                    p.amplitude.norm(),
                    if p.is_stable() { "" } else { "  (unstable)" }
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        2
    } else {
        3
    }
}
