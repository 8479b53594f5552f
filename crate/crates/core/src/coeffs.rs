use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex coefficients on a `(blocks, rows, cols)` grid, stored row-major.
///
/// For an ESP frame the axes are `[l, k, m]` (envelope, frequency, circular
/// time shift) and each `(l, k)` row of length `N` is contiguous. For the STFT
/// frame the shape is `(1, frame_count, window_length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTensor {
    data: Vec<Complex64>,
    shape: (usize, usize, usize),
}

impl CoeffTensor {
    pub fn new(data: Vec<Complex64>, shape: (usize, usize, usize)) -> Result<Self> {
        let expected = shape.0 * shape.1 * shape.2;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("coefficient tensor has non-finite entries".into()));
        }
        Ok(CoeffTensor { data, shape })
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        CoeffTensor {
            data: vec![Complex64::new(0.0, 0.0); shape.0 * shape.1 * shape.2],
            shape,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.shape.1 + b) * self.shape.2 + c
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> Complex64 {
        self.data[self.index(a, b, c)]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, value: Complex64) {
        let i = self.index(a, b, c);
        self.data[i] = value;
    }

    /// Unravels a flat index into `(a, b, c)`.
    pub fn unravel(&self, flat: usize) -> (usize, usize, usize) {
        let c = flat % self.shape.2;
        let rest = flat / self.shape.2;
        (rest / self.shape.1, rest % self.shape.1, c)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        crate::signal::norm(&self.data)
    }

    pub fn scaled(&self, factor: f64) -> CoeffTensor {
        CoeffTensor {
            data: self.data.iter().map(|z| z * factor).collect(),
            shape: self.shape,
        }
    }

    /// Tensor inner product `Σ a·conj(b)`.
    pub fn inner(&self, other: &CoeffTensor) -> Complex64 {
        crate::signal::inner(&self.data, &other.data)
    }
}
