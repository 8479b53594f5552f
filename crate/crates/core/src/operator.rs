//! The frame-operator contract shared by the ESP and STFT frames.

use num_complex::Complex64;

use crate::coeffs::CoeffTensor;
use crate::error::{Error, Result};
use crate::signal::Signal;

/// A tight frame on `ℂ^N` with frame constant `α`.
///
/// Implementations must satisfy `A*A = α·I`; the sparse solvers rely on it.
/// Coefficient space is laid out as a `(blocks, rows, cols)` tensor in
/// row-major order.
pub trait FrameOperator: Sync {
    fn signal_len(&self) -> usize;

    fn coeff_shape(&self) -> (usize, usize, usize);

    fn alpha(&self) -> f64;

    fn sample_rate(&self) -> f64;

    /// `out = A·w`, i.e. `out[i] = ⟨w, a_i⟩`.
    fn analyze_into(&self, w: &[Complex64], out: &mut [Complex64]);

    /// `out = (1/α)·A*·c`.
    fn synthesize_into(&self, c: &[Complex64], out: &mut [Complex64]);

    /// Reduced layout for real signals, when the frame has one.
    fn real_half(&self) -> Option<&dyn RealHalf> {
        None
    }

    fn coeff_len(&self) -> usize {
        let (a, b, c) = self.coeff_shape();
        a * b * c
    }

    fn analyze(&self, w: &Signal) -> Result<CoeffTensor> {
        if w.len() != self.signal_len() {
            return Err(Error::LengthMismatch {
                expected: self.signal_len(),
                actual: w.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeff_len()];
        self.analyze_into(w.samples(), &mut out);
        CoeffTensor::new(out, self.coeff_shape())
    }

    fn synthesize(&self, c: &CoeffTensor) -> Result<Signal> {
        if c.shape() != self.coeff_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.coeff_shape(),
                actual: c.shape(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.signal_len()];
        self.synthesize_into(c.data(), &mut out);
        Signal::new(out, self.sample_rate())
    }
}

/// Frames whose coefficients of real signals are conjugate symmetric,
/// `c[l, N−k, m] = conj(c[l, k, m])`, can work on rows `k = 0..=N/2` only.
///
/// Row `(l, k)` of the half layout stands for itself and, unless it is its
/// own mirror, for row `(l, N−k)` too.
pub trait RealHalf: Sync {
    fn half_shape(&self) -> (usize, usize, usize);

    /// 1 for self-mirrored rows, 2 otherwise. Rows are `(block, row)` pairs
    /// flattened as `block * rows + row`.
    fn row_multiplicity(&self, row: usize) -> f64;

    /// Half-layout analysis of a real signal.
    fn analyze_half_into(&self, w: &[Complex64], out: &mut [Complex64]);

    /// `(1/α)·A*` of the symmetric extension of `c`.
    fn synthesize_half_into(&self, c: &[Complex64], out: &mut [Complex64]);

    /// Restricts a full-layout weight field, or `None` when the field is not
    /// mirror symmetric.
    fn reduce_field(&self, field: &[f64]) -> Option<Vec<f64>>;

    /// Full tensor data from the half layout.
    fn expand(&self, half: &[Complex64]) -> Vec<Complex64>;
}
