//! The same denoising problem with the sine-window STFT Parseval frame.

use espframe::signal::{add_white_noise, QualityReport};
use espframe::solver::{lambda_max, solve_bpd, Lambda, SolveConfig};
use espframe::stft::{StftFrame, DEFAULT_WINDOW_LENGTH};
use espframe::synth::reference_signal;

fn main() -> espframe::error::Result<()> {
    let h = reference_signal();
    let frame = StftFrame::new(h.len(), DEFAULT_WINDOW_LENGTH, h.sample_rate())?;
    println!(
        "{} frames of {} samples, hop {}, {} coefficients",
        frame.frame_count(),
        frame.window_length(),
        frame.hop(),
        frame.shape().1 * frame.shape().2
    );
    for snr in [0.0, 10.0, 30.0] {
        let noisy = add_white_noise(&h, snr, 0)?;
        let lambda = 0.1 * lambda_max(&frame, &noisy)?;
        let result = solve_bpd(&frame, &noisy, &SolveConfig::bpd(Lambda::Scalar(lambda), 1000))?;
        let recon = frame.synthesis(&result.coefficients)?;
        let q = QualityReport::evaluate(&recon, &h, result.coefficients.data())?;
        println!(
            "{snr:>4} dB in: {:.2} dB out, sparsity {:.2}%",
            q.reconstructed_snr_db, q.sparsity_percent
        );
    }
    Ok(())
}
