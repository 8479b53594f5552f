//! Prony's method for damped sinusoids.
//!
//! The forward covariance linear-prediction system of order `p` is solved in
//! the least-squares sense, optionally after truncating the data matrix to
//! its `r` largest singular values. Roots of the prediction polynomial are
//! the companion-matrix eigenvalues, and amplitudes come from a Vandermonde
//! least-squares fit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::Signal;

const SCHUR_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PronyConfig {
    pub num_poles: usize,
    pub svd_keep: Option<usize>,
    /// Leading samples dropped before fitting.
    pub shift_samples: usize,
}

impl PronyConfig {
    pub fn new(num_poles: usize) -> Self {
        PronyConfig {
            num_poles,
            svd_keep: None,
            shift_samples: 0,
        }
    }

    pub fn with_svd(mut self, keep: usize) -> Self {
        self.svd_keep = Some(keep);
        self
    }

    pub fn with_shift(mut self, shift: usize) -> Self {
        self.shift_samples = shift;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleEstimate {
    pub z: Complex64,
    pub frequency: f64,
    /// `f64::INFINITY` for poles on or outside the unit circle.
    pub time_constant: f64,
    /// Complex weight of `z^n`, with `n` counted from the first kept sample.
    pub amplitude: Complex64,
}

impl PoleEstimate {
    fn from_pole(z: Complex64, amplitude: Complex64, sample_rate: f64) -> Self {
        let radius = z.norm();
        let time_constant = if radius < 1.0 {
            -1.0 / (sample_rate * radius.ln())
        } else {
            f64::INFINITY
        };
        PoleEstimate {
            z,
            frequency: z.arg() * sample_rate / (2.0 * PI),
            time_constant,
            amplitude,
        }
    }

    /// Decaying poles only; the others have no time constant.
    pub fn is_stable(&self) -> bool {
        self.z.norm() < 1.0
    }
}

pub fn prony_estimate(signal: &Signal, config: &PronyConfig) -> Result<Vec<PoleEstimate>> {
    let p = config.num_poles;
    let n = signal.len();
    if p == 0 {
        return Err(Error::InvalidParameter("num_poles must be >= 1".into()));
    }
    if n <= 2 * p + config.shift_samples {
        return Err(Error::InvalidParameter(format!(
            "signal of length {n} is too short for {p} poles after a shift of {}",
            config.shift_samples
        )));
    }
    if let Some(r) = config.svd_keep {
        if r == 0 || r > p {
            return Err(Error::InvalidParameter(format!(
                "svd_keep must be in 1..={p}, got {r}"
            )));
        }
    }
    let x = &signal.samples()[config.shift_samples..];
    let m = x.len();
    let rows = m - p;

    // x[p + i] = −Σ_j a[j]·x[p + i − 1 − j]
    let data = DMatrix::from_fn(rows, p, |i, j| x[p + i - 1 - j]);
    let rhs = DVector::from_fn(rows, |i, _| -x[p + i]);
    let svd = data.svd(true, true);
    let largest = svd.singular_values.max();
    if largest == 0.0 {
        return Err(Error::ZeroPower("prony needs a nonzero signal"));
    }
    let eps = largest * rows.max(p) as f64 * f64::EPSILON;
    let rank = svd.rank(eps);
    let required = config.svd_keep.unwrap_or(p);
    if rank < required {
        return Err(Error::RankDeficient { rank, required });
    }
    let cutoff = match config.svd_keep {
        // keep exactly the r largest singular values
        Some(r) => {
            let mut sorted: Vec<f64> = svd.singular_values.iter().copied().collect();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if r < p {
                (sorted[r] + sorted[r - 1]) / 2.0
            } else {
                eps
            }
        }
        None => eps,
    };
    let coeffs = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Numerical(e.to_string()))?;

    let roots = companion_roots(coeffs.as_slice())?;

    // amplitudes: x[n] ≈ Σ_j h[j]·z_j^n
    let vander = DMatrix::from_fn(m, p, |i, j| roots[j].powu(i as u32));
    if vander.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("pole powers overflow".into()));
    }
    let samples = DVector::from_column_slice(x);
    let vsvd = vander.svd(true, true);
    let vmax = vsvd.singular_values.max();
    let amps = vsvd
        .solve(&samples, vmax * m.max(p) as f64 * f64::EPSILON)
        .map_err(|e| Error::Numerical(e.to_string()))?;

    let fs = signal.sample_rate();
    let estimates: Vec<PoleEstimate> = roots
        .iter()
        .zip(amps.iter())
        .map(|(&z, &h)| PoleEstimate::from_pole(z, h, fs))
        .collect();
    Ok(order_by_amplitude(estimates))
}

/// Roots of `z^p + a[0]·z^(p−1) + … + a[p−1]`.
fn companion_roots(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let p = a.len();
    if p == 1 {
        return Ok(vec![-a[0]]);
    }
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            -a[j]
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let schur = Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITERATIONS)
        .ok_or_else(|| Error::Numerical("companion eigenvalues did not converge".into()))?;
    let values = schur
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("companion eigenvalues unavailable".into()))?;
    Ok(values.iter().copied().collect())
}

/// Largest amplitude first, each pole followed by its conjugate partner.
fn order_by_amplitude(mut estimates: Vec<PoleEstimate>) -> Vec<PoleEstimate> {
    estimates.sort_by(|a, b| {
        b.amplitude
            .norm()
            .total_cmp(&a.amplitude.norm())
            .then(b.frequency.total_cmp(&a.frequency))
    });
    let mut placed = vec![false; estimates.len()];
    let mut out = Vec::with_capacity(estimates.len());
    for i in 0..estimates.len() {
        if placed[i] {
            continue;
        }
        placed[i] = true;
        out.push(estimates[i]);
        let target = estimates[i].z.conj();
        if estimates[i].z.im == 0.0 {
            continue;
        }
        let partner = (0..estimates.len())
            .filter(|&j| !placed[j])
            .min_by(|&a, &b| {
                (estimates[a].z - target)
                    .norm()
                    .total_cmp(&(estimates[b].z - target).norm())
            });
        if let Some(j) = partner {
            if (estimates[j].z - target).norm() <= 1e-6 * target.norm().max(1e-300) {
                placed[j] = true;
                out.push(estimates[j]);
            }
        }
    }
    out
}

/// Largest-amplitude stable pole with frequency in `[lo, hi]`. Equal
/// amplitudes go to the lower frequency.
pub fn select_pole(estimates: &[PoleEstimate], band: (f64, f64)) -> Result<PoleEstimate> {
    if estimates.is_empty() {
        return Err(Error::NoMatch("no pole estimates".into()));
    }
    let (lo, hi) = band;
    estimates
        .iter()
        .filter(|e| e.is_stable() && e.frequency >= lo && e.frequency <= hi)
        .min_by(|a, b| {
            b.amplitude
                .norm()
                .total_cmp(&a.amplitude.norm())
                .then(a.frequency.total_cmp(&b.frequency))
        })
        .copied()
        .ok_or_else(|| Error::NoMatch(format!("no stable pole in [{lo}, {hi}] Hz")))
}
