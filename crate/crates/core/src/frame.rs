//! Enveloped sinusoid frames.
//!
//! Frame vectors are circular shifts of envelope-modulated DFT sinusoids,
//!
//! ```text
//! a[l,k,m][n] = e_l[(n - m) mod N] · exp(2πj·k·(n - m)/N)
//! ```
//!
//! for any set of nonzero envelopes `e_l`. The collection is a tight frame
//! with `α = N·Σ_l ‖e_l‖²`, and a Parseval frame once every envelope has norm
//! `(N·L)^(-1/2)`.
//!
//! Analysis and synthesis never form the `L·N² × N` matrix. For a fixed
//! `(l, k)` the coefficients over `m` are a circular cross-correlation of the
//! signal with the modulated envelope, so in the DFT domain
//!
//! ```text
//! DFT_m(c[l,k,·])[q] = W[q] · conj(E_l[(q - k) mod N])
//! ```
//!
//! where `W` and `E_l` are forward DFTs. Synthesis is the adjoint: each row
//! is transformed, multiplied by `E_l[(q - k) mod N]`, and all rows are
//! accumulated before a single inverse transform.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::coeffs::CoeffTensor;
use crate::envelopes::EnvelopeSet;
use crate::error::{Error, Result};
use crate::operator::{FrameOperator, RealHalf};
use crate::signal::Signal;

/// Rows of the coefficient tensor handled per synthesis work item. Fixed so
/// that the reduction order, and hence the result, does not depend on
/// scheduling.
const SYNTHESIS_ROWS_PER_TASK: usize = 32;

#[derive(Clone)]
pub struct EspFrame {
    envelopes: EnvelopeSet,
    n: usize,
    alpha: f64,
    sample_rate: f64,
    /// Forward DFT of every envelope.
    spectra: Vec<Vec<Complex64>>,
    real_envelopes: bool,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for EspFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EspFrame")
            .field("n", &self.n)
            .field("l_count", &self.l_count())
            .field("alpha", &self.alpha)
            .field("sample_rate", &self.sample_rate)
            .field("normalized", &self.envelopes.is_normalized())
            .finish()
    }
}

impl EspFrame {
    pub fn new(envelopes: EnvelopeSet, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let n = envelopes.n();
        let alpha = n as f64 * envelopes.total_energy();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let spectra = envelopes
            .envelopes()
            .iter()
            .map(|e| {
                let mut buf = e.values.clone();
                forward.process(&mut buf);
                buf
            })
            .collect();
        let real_envelopes = envelopes
            .envelopes()
            .iter()
            .all(|e| e.values.iter().all(|z| z.im == 0.0));
        Ok(EspFrame {
            envelopes,
            n,
            alpha,
            sample_rate,
            spectra,
            real_envelopes,
            forward,
            inverse,
        })
    }

    pub fn envelopes(&self) -> &EnvelopeSet {
        &self.envelopes
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_count(&self) -> usize {
        self.envelopes.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn is_normalized(&self) -> bool {
        self.envelopes.is_normalized()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.l_count(), self.n, self.n)
    }

    /// Signed display frequency of bin `k`, in Hz.
    pub fn frequency_of(&self, k: usize) -> f64 {
        let n = self.n as isize;
        let signed = (k as isize + n / 2).rem_euclid(n) - n / 2;
        signed as f64 * self.sample_rate / self.n as f64
    }

    /// Time of shift index `m`, in seconds.
    pub fn time_of(&self, m: usize) -> f64 {
        m as f64 / self.sample_rate
    }

    fn check_indices(&self, l: usize, k: usize, m: usize) -> Result<()> {
        if l >= self.l_count() || k >= self.n || m >= self.n {
            return Err(Error::IndexOutOfRange(format!(
                "(l={l}, k={k}, m={m}) outside L={}, N={}",
                self.l_count(),
                self.n
            )));
        }
        Ok(())
    }

    /// The frame vector `a[l,k,m]`.
    pub fn frame_vector(&self, l: usize, k: usize, m: usize) -> Result<Vec<Complex64>> {
        self.check_indices(l, k, m)?;
        let n = self.n;
        let e = &self.envelopes.envelopes()[l].values;
        let twiddles = twiddle_table(n);
        Ok((0..n)
            .map(|i| {
                let p = (i + n - m) % n;
                e[p] * twiddles[(k * p) % n]
            })
            .collect())
    }

    /// Fast analysis `c[l,k,m] = ⟨w, a[l,k,m]⟩`.
    pub fn analysis(&self, w: &Signal) -> Result<CoeffTensor> {
        self.analyze(w)
    }

    /// Literal `Σ_n w[n]·conj(a[l,k,m][n])`, `O(L·N³)`. Reference only.
    pub fn analysis_direct(&self, w: &Signal) -> Result<CoeffTensor> {
        let n = self.n;
        if w.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: w.len(),
            });
        }
        let twiddles = twiddle_table(n);
        let samples = w.samples();
        let mut out = CoeffTensor::zeros(self.shape());
        for (l, env) in self.envelopes.envelopes().iter().enumerate() {
            for k in 0..n {
                for m in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (i, &x) in samples.iter().enumerate() {
                        let p = (i + n - m) % n;
                        let a = env.values[p] * twiddles[(k * p) % n];
                        acc += x * a.conj();
                    }
                    out.set(l, k, m, acc);
                }
            }
        }
        Ok(out)
    }

    /// `(1/α)·Σ c[l,k,m]·a[l,k,m]`.
    pub fn synthesis(&self, c: &CoeffTensor) -> Result<Signal> {
        self.synthesize(c)
    }
}

impl FrameOperator for EspFrame {
    fn signal_len(&self) -> usize {
        self.n
    }

    fn coeff_shape(&self) -> (usize, usize, usize) {
        self.shape()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn analyze_into(&self, w: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(out.len(), self.l_count() * self.n * self.n);
        self.analyze_rows(w, out, self.n);
    }

    fn synthesize_into(&self, c: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(c.len(), self.l_count() * self.n * self.n);
        self.synthesize_rows(c, self.n, false, out);
    }

    fn real_half(&self) -> Option<&dyn RealHalf> {
        if self.real_envelopes {
            Some(self)
        } else {
            None
        }
    }
}

impl EspFrame {
    /// Rows `k = 0..rows` of every envelope block.
    fn analyze_rows(&self, w: &[Complex64], out: &mut [Complex64], rows: usize) {
        let n = self.n;
        assert_eq!(w.len(), n);
        let mut spectrum = w.to_vec();
        self.forward.process(&mut spectrum);
        let scale = 1.0 / n as f64;
        let scratch_len = self.inverse.get_inplace_scratch_len();
        out.par_chunks_mut(n).enumerate().for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, (row, buf)| {
                let (l, k) = (row / rows, row % rows);
                let e = &self.spectra[l];
                // q < k wraps to e[q + N - k]
                let (w_lo, w_hi) = spectrum.split_at(k);
                let (b_lo, b_hi) = buf.split_at_mut(k);
                for ((b, &x), &y) in b_lo.iter_mut().zip(w_lo).zip(&e[n - k..]) {
                    *b = x * y.conj() * scale;
                }
                for ((b, &x), &y) in b_hi.iter_mut().zip(w_hi).zip(&e[..n - k]) {
                    *b = x * y.conj() * scale;
                }
                self.inverse.process_with_scratch(buf, scratch);
            },
        );
    }

    /// With `half` set, rows hold `k = 0..=N/2` of a conjugate symmetric
    /// tensor and the missing rows are accounted for by taking twice the
    /// real part.
    fn synthesize_rows(&self, c: &[Complex64], rows: usize, half: bool, out: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(out.len(), n);
        let scratch_len = self.forward.get_inplace_scratch_len();
        let partials: Vec<Vec<Complex64>> = c
            .par_chunks(SYNTHESIS_ROWS_PER_TASK * n)
            .enumerate()
            .map(|(task, chunk)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); n];
                let mut buf = vec![Complex64::new(0.0, 0.0); n];
                let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
                for (offset, row) in chunk.chunks(n).enumerate() {
                    let row_idx = task * SYNTHESIS_ROWS_PER_TASK + offset;
                    let (l, k) = (row_idx / rows, row_idx % rows);
                    if row.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                        continue;
                    }
                    buf.copy_from_slice(row);
                    self.forward.process_with_scratch(&mut buf, &mut scratch);
                    if half && (k == 0 || 2 * k == n) {
                        buf.iter_mut().for_each(|z| *z *= 0.5);
                    }
                    let e = &self.spectra[l];
                    let (a_lo, a_hi) = acc.split_at_mut(k);
                    let (b_lo, b_hi) = buf.split_at(k);
                    for ((a, &x), &y) in a_lo.iter_mut().zip(b_lo).zip(&e[n - k..]) {
                        *a += x * y;
                    }
                    for ((a, &x), &y) in a_hi.iter_mut().zip(b_hi).zip(&e[..n - k]) {
                        *a += x * y;
                    }
                }
                acc
            })
            .collect();
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for partial in &partials {
            for (o, p) in out.iter_mut().zip(partial) {
                *o += p;
            }
        }
        self.inverse.process(out);
        let scale = 1.0 / (n as f64 * self.alpha);
        if half {
            out.iter_mut().for_each(|z| *z = Complex64::new(2.0 * z.re * scale, 0.0));
        } else {
            out.iter_mut().for_each(|z| *z *= scale);
        }
    }

    fn half_rows(&self) -> usize {
        self.n / 2 + 1
    }
}

impl RealHalf for EspFrame {
    fn half_shape(&self) -> (usize, usize, usize) {
        (self.l_count(), self.half_rows(), self.n)
    }

    fn row_multiplicity(&self, row: usize) -> f64 {
        let k = row % self.half_rows();
        if k == 0 || 2 * k == self.n {
            1.0
        } else {
            2.0
        }
    }

    fn analyze_half_into(&self, w: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(out.len(), self.l_count() * self.half_rows() * self.n);
        self.analyze_rows(w, out, self.half_rows());
    }

    fn synthesize_half_into(&self, c: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(c.len(), self.l_count() * self.half_rows() * self.n);
        self.synthesize_rows(c, self.half_rows(), true, out);
    }

    fn reduce_field(&self, field: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let half = self.half_rows();
        let mut reduced = Vec::with_capacity(self.l_count() * half * n);
        for block in field.chunks(n * n) {
            for k in 1..n {
                if block[k * n..(k + 1) * n] != block[(n - k) * n..(n - k + 1) * n] {
                    return None;
                }
            }
            reduced.extend_from_slice(&block[..half * n]);
        }
        Some(reduced)
    }

    fn expand(&self, half: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let rows = self.half_rows();
        let mut full = Vec::with_capacity(self.l_count() * n * n);
        for block in half.chunks(rows * n) {
            full.extend_from_slice(block);
            for k in rows..n {
                let mirror = &block[(n - k) * n..(n - k + 1) * n];
                full.extend(mirror.iter().map(|z| z.conj()));
            }
        }
        full
    }
}

/// `exp(2πj·i/N)` for `i = 0..N`.
fn twiddle_table(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / n as f64))
        .collect()
}
