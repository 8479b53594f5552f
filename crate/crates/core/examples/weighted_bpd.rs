//! A time-shift prior: coefficients with shift below a cutoff are penalized
//! less, which pulls the energy of a decaying resonance to its onset.

use espframe::envelopes::{exponential_set, log_grid};
use espframe::frame::EspFrame;
use espframe::signal::add_white_noise;
use espframe::solver::{lambda_max, solve_bpd, time_shift_weights, Lambda, SolveConfig};
use espframe::synth::{resonant_impulse_response, ResidueMode, ResonanceSpec};

fn early_energy(c: &espframe::coeffs::CoeffTensor, cutoff: usize) -> f64 {
    let (_, _, cols) = c.shape();
    let total: f64 = c.data().iter().map(|z| z.norm_sqr()).sum();
    let early: f64 = c
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % cols < cutoff)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    early / total
}

fn main() -> espframe::error::Result<()> {
    let (n, fs) = (512, 16_000.0);
    let h = resonant_impulse_response(&[ResonanceSpec::new(4_800.0, 4e-3)], n, fs, 0, ResidueMode::Direct)?;
    let frame = EspFrame::new(exponential_set(n, fs, &log_grid(0.25, -3.0, 11))?.parseval_normalize()?, fs)?;
    let noisy = add_white_noise(&h, 10.0, 0)?;
    let lambda = 0.1 * lambda_max(&frame, &noisy)?;

    let plain = solve_bpd(&frame, &noisy, &SolveConfig::bpd(Lambda::Scalar(lambda), 300))?;
    let weights = time_shift_weights(frame.shape(), 10, 0.1, 0.2)?;
    let field = Lambda::Field(weights.iter().map(|w| w * lambda / 0.2).collect());
    let weighted = solve_bpd(&frame, &noisy, &SolveConfig::bpd(field, 300))?;

    println!("energy at m < 10: plain {:.1}%", 100.0 * early_energy(&plain.coefficients, 10));
    println!("energy at m < 10: weighted {:.1}%", 100.0 * early_energy(&weighted.coefficients, 10));
    Ok(())
}
