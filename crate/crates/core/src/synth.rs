//! Synthetic test signals: damped resonances and single frame atoms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::EspFrame;
use crate::signal::Signal;

/// One damped resonance `exp(−t/τ)·cos(2πft + φ)` starting at `start_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceSpec {
    pub frequency: f64,
    pub time_constant: f64,
    pub start_time: f64,
    pub amplitude: Complex64,
}

impl ResonanceSpec {
    pub fn new(frequency: f64, time_constant: f64) -> Self {
        ResonanceSpec {
            frequency,
            time_constant,
            start_time: 0.0,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }

    /// Discrete pole `exp((−1/τ + 2πjf)/f_s)`.
    pub fn pole(&self, sample_rate: f64) -> Complex64 {
        (Complex64::new(-1.0 / self.time_constant, 2.0 * PI * self.frequency) / sample_rate).exp()
    }
}

/// How the complex weight of each pole is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidueMode {
    /// Each spec's `amplitude` is used as is.
    #[default]
    Direct,
    /// Partial-fraction residues of `(z − 1)/Π(z − p)` over all poles and
    /// their conjugates, times each spec's `amplitude`.
    TransferFunction,
}

/// Reference resonances: 5 kHz / 3 ms and 13 kHz / 0.8 ms.
pub const REFERENCE_SAMPLE_RATE: f64 = 100_000.0;
pub const REFERENCE_LEN: usize = 1000;
pub const REFERENCE_IMPULSE: usize = 50;

pub fn reference_resonances() -> Vec<ResonanceSpec> {
    let start = REFERENCE_IMPULSE as f64 / REFERENCE_SAMPLE_RATE;
    vec![
        ResonanceSpec {
            start_time: start,
            ..ResonanceSpec::new(5_000.0, 3e-3)
        },
        ResonanceSpec {
            start_time: start,
            ..ResonanceSpec::new(13_000.0, 0.8e-3)
        },
    ]
}

/// The two-resonance impulse response at 100 kHz, N = 1000, impulse at
/// sample 50, with transfer-function residues.
pub fn reference_signal() -> Signal {
    resonant_impulse_response(
        &reference_resonances(),
        REFERENCE_LEN,
        REFERENCE_SAMPLE_RATE,
        REFERENCE_IMPULSE,
        ResidueMode::TransferFunction,
    )
    .expect("reference parameters are valid")
}

/// Real impulse response `Σ_p 2·Re(A_p·z_p^(t − impulse))` for
/// `t ≥ impulse_index`, zero before.
pub fn resonant_impulse_response(
    specs: &[ResonanceSpec],
    n: usize,
    sample_rate: f64,
    impulse_index: usize,
    mode: ResidueMode,
) -> Result<Signal> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("at least one resonance is required".into()));
    }
    if impulse_index >= n {
        return Err(Error::IndexOutOfRange(format!(
            "impulse index {impulse_index} outside signal of length {n}"
        )));
    }
    for s in specs {
        if !(s.time_constant > 0.0 && s.time_constant.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time constant must be positive, got {}",
                s.time_constant
            )));
        }
        if !(s.frequency.abs() < sample_rate / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "frequency {} Hz aliases at sample rate {sample_rate} Hz",
                s.frequency
            )));
        }
    }
    let poles: Vec<Complex64> = specs.iter().map(|s| s.pole(sample_rate)).collect();
    let weights: Vec<Complex64> = match mode {
        ResidueMode::Direct => specs.iter().map(|s| s.amplitude).collect(),
        ResidueMode::TransferFunction => {
            let all: Vec<Complex64> = poles.iter().flat_map(|p| [*p, p.conj()]).collect();
            specs
                .iter()
                .zip(&poles)
                .map(|(s, &p)| {
                    let denom: Complex64 = all
                        .iter()
                        .filter(|&&q| q != p)
                        .map(|&q| p - q)
                        .product();
                    s.amplitude * (p - 1.0) / denom
                })
                .collect()
        }
    };
    let mut out = vec![0.0; n];
    for (&p, &a) in poles.iter().zip(&weights) {
        let mut term = a;
        for v in out[impulse_index..].iter_mut() {
            *v += 2.0 * term.re;
            term *= p;
        }
    }
    Signal::from_real(&out, sample_rate)
}

/// `√(NL)·a[l,k,m]`, a unit-norm signal on a Parseval frame.
pub fn single_atom_signal(frame: &EspFrame, l: usize, k: usize, m: usize) -> Result<Signal> {
    if !frame.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let scale = ((frame.n() * frame.l_count()) as f64).sqrt();
    let atom = frame.frame_vector(l, k, m)?;
    Signal::new(atom.into_iter().map(|z| z * scale).collect(), frame.sample_rate())
}
