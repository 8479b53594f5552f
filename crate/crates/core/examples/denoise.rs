//! BPD denoising of the two-resonance test signal with the exponential ESP
//! frame at 10 dB input SNR.
//!
//! `cargo run --release --example denoise -- [iterations] [seed]`

use espframe::envelopes::{exponential_set, log_grid};
use espframe::frame::EspFrame;
use espframe::signal::{add_white_noise, QualityReport};
use espframe::solver::{lambda_max, solve_bpd, Lambda, SolveConfig};
use espframe::synth::reference_signal;

fn main() -> espframe::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let h = reference_signal();
    let fs = h.sample_rate();
    let taus = log_grid(0.2, -4.0, 9);
    let frame = EspFrame::new(exponential_set(h.len(), fs, &taus)?.parseval_normalize()?, fs)?;

    let noisy = add_white_noise(&h, 10.0, seed)?;
    let lambda = 0.1 * lambda_max(&frame, &noisy)?;
    let result = solve_bpd(&frame, &noisy, &SolveConfig::bpd(Lambda::Scalar(lambda), iterations))?;
    let recon = frame.synthesis(&result.coefficients)?;
    let q = QualityReport::evaluate(&recon, &h, result.coefficients.data())?;

    println!("mu = {:.4e}, {} iterations", result.mu, result.iterations_run);
    println!(
        "reconstructed SNR {:.2} dB (gain {:.2} dB), sparsity {:.3}% ({} nonzero)",
        q.reconstructed_snr_db,
        q.reconstructed_snr_db - 10.0,
        q.sparsity_percent,
        q.nonzero_count
    );
    Ok(())
}
