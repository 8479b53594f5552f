//! Signal containers, noise injection and reconstruction-quality metrics.
//!
//! Signals are always stored as complex samples; real-valued data simply has
//! zero imaginary parts. Noise is drawn from a ChaCha8 stream seeded with a
//! `u64`, so a given `(signal, snr_db, seed)` triple produces the same bits
//! on every platform.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A finite, nonempty sequence of complex samples with a sample rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl Signal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("signal must have at least one sample".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("signal contains non-finite samples".into()));
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    pub fn from_real(samples: &[f64], sample_rate: f64) -> Result<Self> {
        Signal::new(
            samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            sample_rate,
        )
    }

    /// All-zero signal of length `n`.
    pub fn zeros(n: usize, sample_rate: f64) -> Result<Self> {
        Signal::new(vec![Complex64::new(0.0, 0.0); n], sample_rate)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|z| z.im == 0.0)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.samples)
    }

    /// Same samples, multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Signal {
        Signal {
            samples: self.samples.iter().map(|z| z * factor).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Drops the first `count` samples.
    pub fn skip(&self, count: usize) -> Result<Signal> {
        if count >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot skip {count} of {} samples",
                self.len()
            )));
        }
        Signal::new(self.samples[count..].to_vec(), self.sample_rate)
    }

    /// Circular shift to the right by `shift` samples (negative shifts left).
    pub fn circular_shift(&self, shift: isize) -> Signal {
        let n = self.len() as isize;
        let samples = (0..n)
            .map(|i| self.samples[(i - shift).rem_euclid(n) as usize])
            .collect();
        Signal {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Quality metrics for a reconstruction and the coefficients that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub relative_error: f64,
    pub reconstructed_snr_db: f64,
    pub sparsity_percent: f64,
    pub nonzero_count: usize,
}

/// Nonzero count and sparsity percentage of a coefficient array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sparsity {
    pub nonzero_count: usize,
    pub total: usize,
    pub percent: f64,
}

impl Sparsity {
    pub fn nonzero_percent(&self) -> f64 {
        100.0 - self.percent
    }
}

impl QualityReport {
    pub fn evaluate(
        reconstructed: &Signal,
        reference: &Signal,
        coefficients: &[Complex64],
    ) -> Result<Self> {
        let relative_error = relative_error(reconstructed, reference)?;
        let reconstructed_snr_db = snr_from_relative_error(relative_error);
        let s = sparsity(coefficients, default_zero_tol(coefficients));
        Ok(QualityReport {
            relative_error,
            reconstructed_snr_db,
            sparsity_percent: s.percent,
            nonzero_count: s.nonzero_count,
        })
    }
}

/// Adds white Gaussian noise so that `20·log10(‖signal‖/‖noise‖) = snr_db`.
///
/// The drawn noise vector is rescaled to the exact target norm. Real signals
/// receive real noise; complex signals receive circular complex noise.
pub fn add_white_noise(signal: &Signal, snr_db: f64, seed: u64) -> Result<Signal> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("snr_db must be finite, got {snr_db}")));
    }
    let power = signal.norm();
    if power == 0.0 {
        return Err(Error::ZeroPower("cannot scale noise against a zero signal"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = signal.is_real();
    let noise: Vec<Complex64> = (0..signal.len())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            if real {
                Complex64::new(re, 0.0)
            } else {
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
        })
        .collect();
    let drawn = norm(&noise);
    if drawn == 0.0 {
        return Err(Error::Numerical("drew an all-zero noise vector".into()));
    }
    let scale = power * 10f64.powf(-snr_db / 20.0) / drawn;
    let samples = signal
        .samples()
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + n * scale)
        .collect();
    Signal::new(samples, signal.sample_rate())
}

/// `‖reconstructed − reference‖ / ‖reference‖`.
pub fn relative_error(reconstructed: &Signal, reference: &Signal) -> Result<f64> {
    if reconstructed.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: reconstructed.len(),
        });
    }
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::ZeroPower("reference signal is zero"));
    }
    let diff: f64 = reconstructed
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(diff / denom)
}

/// `20·log10(‖reference‖ / ‖reconstructed − reference‖)`; `+∞` for an exact
/// reconstruction.
pub fn reconstructed_snr(reconstructed: &Signal, reference: &Signal) -> Result<f64> {
    relative_error(reconstructed, reference).map(snr_from_relative_error)
}

pub fn snr_from_relative_error(relative_error: f64) -> f64 {
    if relative_error == 0.0 {
        f64::INFINITY
    } else {
        -20.0 * relative_error.log10()
    }
}

/// Default zero tolerance: `1e-8 · max|c|`.
pub fn default_zero_tol(coeffs: &[Complex64]) -> f64 {
    1e-8 * coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Counts entries with `|c| > zero_tol`.
pub fn sparsity(coeffs: &[Complex64], zero_tol: f64) -> Sparsity {
    let total = coeffs.len();
    let nonzero_count = coeffs.iter().filter(|c| c.norm() > zero_tol).count();
    let percent = if total == 0 {
        100.0
    } else {
        100.0 * (1.0 - nonzero_count as f64 / total as f64)
    };
    Sparsity {
        nonzero_count,
        total,
        percent,
    }
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}

/// `Σ a[i]·conj(b[i])`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}
