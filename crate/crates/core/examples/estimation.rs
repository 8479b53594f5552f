//! Resonance frequency and time constant from the largest analysis
//! coefficients, with geometric interpolation between envelope time constants.

use espframe::envelopes::{exponential_set, log_grid};
use espframe::estimation::{estimate_resonance, EstimateSource};
use espframe::frame::EspFrame;
use espframe::synth::{reference_resonances, reference_signal};

fn main() -> espframe::error::Result<()> {
    let h = reference_signal();
    let fs = h.sample_rate();
    let frame = EspFrame::new(exponential_set(h.len(), fs, &log_grid(0.2, -4.0, 9))?.parseval_normalize()?, fs)?;
    let c = frame.analysis(&h)?;
    for spec in reference_resonances() {
        let band = (spec.frequency - 1_000.0, spec.frequency + 1_000.0);
        let e = estimate_resonance(&c, band, &frame, None, EstimateSource::Unregularized)?;
        println!(
            "true {:>6.0} Hz / {:.3} ms  ->  {:>8.1} Hz / {:.3} ms at shift {}",
            spec.frequency,
            spec.time_constant * 1e3,
            e.frequency,
            e.time_constant * 1e3,
            e.shift_index
        );
    }
    Ok(())
}
