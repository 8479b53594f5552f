//! Parseval short-time Fourier frame.
//!
//! A sine window `sin(π(i + ½)/W)` at hop `W/2` satisfies
//! `Σ_shifts window² = 1`, so after scaling by `1/√W` the windowed DFTs form a
//! Parseval frame. The signal is zero padded to a multiple of the hop and
//! treated cyclically, giving `frame_count = ⌈N/hop⌉` windows.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::coeffs::CoeffTensor;
use crate::error::{Error, Result};
use crate::operator::FrameOperator;
use crate::signal::Signal;

pub const DEFAULT_WINDOW_LENGTH: usize = 128;

#[derive(Clone)]
pub struct StftFrame {
    n: usize,
    padded: usize,
    window_length: usize,
    hop: usize,
    frame_count: usize,
    /// Sine window including the `1/√W` Parseval factor.
    window: Vec<f64>,
    sample_rate: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StftFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftFrame")
            .field("n", &self.n)
            .field("window_length", &self.window_length)
            .field("hop", &self.hop)
            .field("frame_count", &self.frame_count)
            .finish()
    }
}

impl StftFrame {
    pub fn new(n: usize, window_length: usize, sample_rate: f64) -> Result<Self> {
        if window_length < 2 || window_length % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "window length must be even and >= 2, got {window_length}"
            )));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let hop = window_length / 2;
        let frame_count = n.div_ceil(hop);
        let padded = frame_count * hop;
        if padded < window_length {
            return Err(Error::InvalidParameter(format!(
                "signal length {n} is shorter than the window ({window_length})"
            )));
        }
        let scale = 1.0 / (window_length as f64).sqrt();
        let window = (0..window_length)
            .map(|i| scale * (std::f64::consts::PI * (i as f64 + 0.5) / window_length as f64).sin())
            .collect();
        let mut planner = FftPlanner::new();
        Ok(StftFrame {
            n,
            padded,
            window_length,
            hop,
            frame_count,
            window,
            sample_rate,
            forward: planner.plan_fft_forward(window_length),
            inverse: planner.plan_fft_inverse(window_length),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    /// Length after zero padding to a multiple of the hop.
    pub fn padded_len(&self) -> usize {
        self.padded
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (1, self.frame_count, self.window_length)
    }

    pub fn analysis(&self, w: &Signal) -> Result<CoeffTensor> {
        self.analyze(w)
    }

    pub fn synthesis(&self, c: &CoeffTensor) -> Result<Signal> {
        self.synthesize(c)
    }

    fn sample(&self, w: &[Complex64], pos: usize) -> Complex64 {
        let p = pos % self.padded;
        if p < self.n {
            w[p]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

impl FrameOperator for StftFrame {
    fn signal_len(&self) -> usize {
        self.n
    }

    fn coeff_shape(&self) -> (usize, usize, usize) {
        self.shape()
    }

    fn alpha(&self) -> f64 {
        1.0
    }

    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn analyze_into(&self, w: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(w.len(), self.n);
        assert_eq!(out.len(), self.coeff_len());
        out.par_chunks_mut(self.window_length)
            .enumerate()
            .for_each(|(j, row)| {
                let start = j * self.hop;
                for (i, slot) in row.iter_mut().enumerate() {
                    *slot = self.sample(w, start + i) * self.window[i];
                }
                self.forward.process(row);
            });
    }

    fn synthesize_into(&self, c: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(c.len(), self.coeff_len());
        assert_eq!(out.len(), self.n);
        let segments: Vec<Vec<Complex64>> = c
            .par_chunks(self.window_length)
            .map(|row| {
                let mut buf = row.to_vec();
                self.inverse.process(&mut buf);
                for (v, &g) in buf.iter_mut().zip(&self.window) {
                    *v *= g;
                }
                buf
            })
            .collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); self.padded];
        for (j, seg) in segments.iter().enumerate() {
            let start = j * self.hop;
            for (i, v) in seg.iter().enumerate() {
                acc[(start + i) % self.padded] += v;
            }
        }
        out.copy_from_slice(&acc[..self.n]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Signal {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Signal::from_real(&v, 8000.0).unwrap()
    }

    #[test]
    fn window_overlap_is_constant() {
        let f = StftFrame::new(512, 128, 8000.0).unwrap();
        let w = f.window();
        for i in 0..f.hop() {
            let s = w[i] * w[i] + w[i + f.hop()] * w[i + f.hop()];
            assert!((s * 128.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_and_frame_count() {
        let f = StftFrame::new(1000, 128, 8000.0).unwrap();
        assert_eq!(f.padded_len(), 1024);
        assert_eq!(f.frame_count(), 16);
        assert_eq!(f.coeff_len(), 2048);
        assert!(StftFrame::new(50, 128, 8000.0).is_err());
        assert!(StftFrame::new(512, 127, 8000.0).is_err());
    }

    #[test]
    fn parseval_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [512, 1000, 1024] {
            let f = StftFrame::new(n, 128, 8000.0).unwrap();
            let w = random_signal(&mut rng, n);
            let c = f.analysis(&w).unwrap();
            let energy = c.norm().powi(2);
            let target = w.norm().powi(2);
            assert!((energy - target).abs() <= 1e-9 * target);
            let back = f.synthesis(&c).unwrap();
            let err = crate::signal::relative_error(&back, &w).unwrap();
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = StftFrame::new(1000, 128, 8000.0).unwrap();
        let w = random_signal(&mut rng, 1000);
        let data: Vec<Complex64> = (0..f.coeff_len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let c = CoeffTensor::new(data, f.shape()).unwrap();
        let lhs = crate::signal::inner(f.synthesis(&c).unwrap().samples(), w.samples());
        let rhs = c.inner(&f.analysis(&w).unwrap());
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(rhs.norm()));
    }

    #[test]
    fn bin_aligned_sinusoid_concentrates_in_one_column() {
        let n = 1024;
        let f = StftFrame::new(n, 128, 8000.0).unwrap();
        let bin = 8;
        // period divides the hop so every frame sees the same phase pattern
        let w = Signal::new(
            (0..n)
                .map(|t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (bin * t) as f64 / 128.0))
                .collect(),
            8000.0,
        )
        .unwrap();
        let c = f.analysis(&w).unwrap();
        let total = c.norm().powi(2);
        let mut near = 0.0;
        for j in 0..f.frame_count() {
            for q in bin - 1..=bin + 1 {
                near += c.get(0, j, q).norm_sqr();
            }
        }
        assert!(near / total > 0.99);
        for j in 0..f.frame_count() {
            let row: Vec<f64> = (0..128).map(|q| c.get(0, j, q).norm()).collect();
            let best = (0..128).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best, bin);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let f = StftFrame::new(512, 128, 8000.0).unwrap();
        let c = f.analysis(&Signal::zeros(512, 8000.0).unwrap()).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        let back = f.synthesis(&CoeffTensor::zeros(f.shape())).unwrap();
        assert_eq!(back.norm(), 0.0);
        assert!(f.synthesis(&CoeffTensor::zeros((1, 3, 128))).is_err());
    }
}
