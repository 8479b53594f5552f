//! Writes analysis coefficients to the binary format and a signal to WAV,
//! then reads both back.

use espframe::envelopes::{exponential_set, log_grid};
use espframe::frame::EspFrame;
use espframe::io::{read_coeffs, read_wav, write_coeffs, write_wav, CoeffKind};
use espframe::synth::reference_signal;

fn main() -> espframe::error::Result<()> {
    let dir = std::env::temp_dir().join("espframe_files");
    std::fs::create_dir_all(&dir).map_err(|e| espframe::error::Error::Config(e.to_string()))?;
    let h = reference_signal();
    let fs = h.sample_rate();
    let frame = EspFrame::new(exponential_set(h.len(), fs, &log_grid(0.4, -4.0, 5))?.parseval_normalize()?, fs)?;
    let c = frame.analysis(&h)?;

    let path = dir.join("coeffs.bin");
    write_coeffs(&path, &c, CoeffKind::Esp)?;
    let (kind, back) = read_coeffs(&path)?;
    let worst = c
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!("{kind:?} {:?}, max round-trip error {worst:.2e} (f32 storage)", back.shape());

    let wav = dir.join("signal.wav");
    write_wav(&wav, &h)?;
    let s = read_wav(&wav)?;
    println!("{} samples at {} Hz read back from {}", s.len(), s.sample_rate(), wav.display());
    Ok(())
}
