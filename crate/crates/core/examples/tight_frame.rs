//! Builds a Gaussian-envelope frame, checks the tight-frame identity against
//! the direct inner products, then normalizes it to a Parseval frame.

use espframe::envelopes::{gaussian_set, log_grid};
use espframe::frame::EspFrame;
use espframe::signal::Signal;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> espframe::error::Result<()> {
    let n = 256;
    let fs = 1.0;
    let sigmas = log_grid(0.25, 0.5, 5);
    let set = gaussian_set(n, fs, &sigmas)?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let w = Signal::new(w, fs)?;

    let frame = EspFrame::new(set.clone(), fs)?;
    let c = frame.analysis_direct(&w)?;
    let energy = c.norm().powi(2);
    let predicted = frame.alpha() * w.norm().powi(2);
    println!("alpha = {:.6}", frame.alpha());
    println!("sum |<w,a>|^2 = {energy:.9e}, alpha*|w|^2 = {predicted:.9e}");

    let fast = frame.analysis(&w)?;
    let diff = fast
        .data()
        .iter()
        .zip(c.data())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!("FFT vs direct analysis: max |diff| = {diff:.2e}");

    let parseval = EspFrame::new(set.parseval_normalize()?, fs)?;
    let back = parseval.synthesis(&parseval.analysis(&w)?)?;
    let err = back
        .samples()
        .iter()
        .zip(w.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / w.norm();
    println!("after normalization: alpha = {:.12}, reconstruction error = {err:.2e}", parseval.alpha());
    Ok(())
}
