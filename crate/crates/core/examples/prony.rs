//! Prony's method on the test signal, with and without skipping the leading
//! samples, and with a rank-2 SVD truncation on a noisy copy.

use espframe::prony::{prony_estimate, select_pole, PronyConfig};
use espframe::signal::add_white_noise;
use espframe::synth::{reference_signal, REFERENCE_IMPULSE};

fn report(label: &str, est: &[espframe::prony::PoleEstimate]) {
    println!("{label}");
    for band in [(4_000.0, 6_000.0), (12_000.0, 14_000.0)] {
        match select_pole(est, band) {
            Ok(p) => println!("  {:>9.2} Hz  tau {:.4} ms", p.frequency, p.time_constant * 1e3),
            Err(e) => println!("  {band:?}: {e}"),
        }
    }
}

fn main() -> espframe::error::Result<()> {
    let h = reference_signal();
    report("unshifted", &prony_estimate(&h, &PronyConfig::new(4))?);
    let shifted = PronyConfig::new(4).with_shift(REFERENCE_IMPULSE);
    report("shifted", &prony_estimate(&h, &shifted)?);
    let noisy = add_white_noise(&h, 20.0, 3)?;
    report("20 dB, shifted", &prony_estimate(&noisy, &shifted)?);
    report(
        "20 dB, shifted, order 16 truncated to rank 4",
        &prony_estimate(&noisy, &PronyConfig::new(16).with_shift(REFERENCE_IMPULSE).with_svd(4))?,
    );
    Ok(())
}
