//! Reweighted basis pursuit on a single frame vector. The recovered
//! coefficients peak at the atom's index; the projections are written as PNG.
//!
//! `cargo run --release --example single_atom -- [iterations] [out_dir]`

use std::path::PathBuf;

use espframe::envelopes::{gaussian_set, log_grid};
use espframe::frame::EspFrame;
use espframe::mip::{frame_mip, CollapseAxis, DEFAULT_FLOOR_DB};
use espframe::solver::{solve_bp, Lambda, SolveConfig};
use espframe::synth::single_atom_signal;

fn main() -> espframe::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("espframe_single_atom"));

    let (n, fs) = (500, 100_000.0);
    let set = gaussian_set(n, fs, &log_grid(0.5, -4.0, 5))?.parseval_normalize()?;
    let frame = EspFrame::new(set, fs)?;
    let (l, k, m) = (2, 40, 120);
    let w = single_atom_signal(&frame, l, k, m)?;

    let config = SolveConfig::bp(Lambda::Scalar(1.0), iterations).with_reweight(50.0, 1);
    let result = solve_bp(&frame, &w, &config)?;
    let c = &result.coefficients;
    let (peak, _) = c
        .data()
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
    let mut mags: Vec<f64> = c.data().iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let background = mags[(0.999 * mags.len() as f64) as usize - 1];
    println!("atom at {:?}, recovered peak at {:?}", (l, k, m), c.unravel(peak));
    if background == 0.0 {
        println!("99.9% of the coefficients are exactly zero");
    } else {
        println!(
            "peak {:.1} dB above the 99.9th percentile",
            20.0 * (mags[mags.len() - 1] / background).log10()
        );
    }

    std::fs::create_dir_all(&out).map_err(|e| espframe::error::Error::Config(e.to_string()))?;
    for axis in [CollapseAxis::Frequency, CollapseAxis::TimeShift] {
        let img = frame_mip(c, &frame, axis, DEFAULT_FLOOR_DB)?;
        img.write_png(&out.join(format!("mip_{}.png", axis.name())), 16)?;
    }
    println!("projections written to {}", out.display());
    Ok(())
}
