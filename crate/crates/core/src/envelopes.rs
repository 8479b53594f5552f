//! Envelope sets that generate ESP frames.
//!
//! An envelope is any nonzero complex `N`-vector. Families provided here are
//! sampled on `t = i / f_s`, `i = 0..N`, without periodization; the circular
//! wrap happens in the frame's shift operator.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::norm;

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub values: Vec<Complex64>,
    /// Display label, e.g. `tau=3.000ms`. No numerical role.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSet {
    envelopes: Vec<Envelope>,
    n: usize,
    normalized: bool,
    /// Physical parameter (seconds) of each envelope when the set was built
    /// from a parametric family.
    parameters: Option<Vec<f64>>,
}

impl EnvelopeSet {
    /// Builds a set from raw envelopes, checking that every envelope has the
    /// same length and is not identically zero.
    pub fn new(envelopes: Vec<Envelope>) -> Result<Self> {
        let n = envelopes
            .first()
            .map(|e| e.values.len())
            .ok_or_else(|| Error::InvalidParameter("envelope set must be nonempty".into()))?;
        if n == 0 {
            return Err(Error::InvalidParameter("envelopes must have length >= 1".into()));
        }
        for (l, e) in envelopes.iter().enumerate() {
            if e.values.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: e.values.len(),
                });
            }
            if e.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("envelope {l} has non-finite values")));
            }
            if e.values.iter().all(|z| z.norm_sqr() == 0.0) {
                return Err(Error::ZeroEnvelope(l));
            }
        }
        Ok(EnvelopeSet {
            envelopes,
            n,
            normalized: false,
            parameters: None,
        })
    }

    pub fn from_values(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let envelopes = rows
            .into_iter()
            .enumerate()
            .map(|(l, values)| Envelope {
                values,
                label: format!("custom{l}"),
            })
            .collect();
        EnvelopeSet::new(envelopes)
    }

    pub fn envelopes(&self) -> &[Envelope] {
        &self.envelopes
    }

    pub fn len(&self) -> usize {
        self.envelopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelopes.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn parameters(&self) -> Option<&[f64]> {
        self.parameters.as_deref()
    }

    pub fn labels(&self) -> Vec<String> {
        self.envelopes.iter().map(|e| e.label.clone()).collect()
    }

    /// `Σ_l ‖e_l‖²`.
    pub fn total_energy(&self) -> f64 {
        self.envelopes.iter().map(|e| norm(&e.values).powi(2)).sum()
    }

    /// Returns a copy where every envelope has norm `(N·L)^(-1/2)`, which
    /// makes the generated frame Parseval.
    pub fn parseval_normalize(&self) -> Result<EnvelopeSet> {
        let target = 1.0 / ((self.n * self.len()) as f64).sqrt();
        let mut out = self.clone();
        for (l, e) in out.envelopes.iter_mut().enumerate() {
            let current = norm(&e.values);
            if current == 0.0 {
                return Err(Error::ZeroEnvelope(l));
            }
            let scale = target / current;
            e.values.iter_mut().for_each(|z| *z *= scale);
        }
        out.normalized = true;
        Ok(out)
    }

    /// Writes the set as CSV: one envelope per row, complex entries as
    /// `re` or `re±imj`.
    pub fn save_custom(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for e in &self.envelopes {
            let row: Vec<String> = e.values.iter().map(|&z| format_complex(z)).collect();
            writeln!(text, "{}", row.join(",")).expect("writing to a String");
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Gaussian envelopes `exp(-t²/(2σ²))` on `t = i/f_s`.
pub fn gaussian_set(n: usize, sample_rate: f64, sigmas: &[f64]) -> Result<EnvelopeSet> {
    parametric_set(n, sample_rate, sigmas, "sigma", |t, sigma| {
        (-t * t / (2.0 * sigma * sigma)).exp()
    })
}

/// Exponential envelopes `exp(-t/τ)` on `t = i/f_s`.
pub fn exponential_set(n: usize, sample_rate: f64, taus: &[f64]) -> Result<EnvelopeSet> {
    parametric_set(n, sample_rate, taus, "tau", |t, tau| (-t / tau).exp())
}

fn parametric_set(
    n: usize,
    sample_rate: f64,
    params: &[f64],
    name: &str,
    shape: impl Fn(f64, f64) -> f64,
) -> Result<EnvelopeSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("envelope length must be >= 1".into()));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("sample rate must be positive, got {sample_rate}")));
    }
    if params.is_empty() {
        return Err(Error::InvalidParameter(format!("need at least one {name}")));
    }
    if let Some(bad) = params.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {bad}")));
    }
    let envelopes = params
        .iter()
        .map(|&p| Envelope {
            values: (0..n)
                .map(|i| Complex64::new(shape(i as f64 / sample_rate, p), 0.0))
                .collect(),
            label: format!("{name}={:.4}ms", p * 1e3),
        })
        .collect();
    let mut set = EnvelopeSet::new(envelopes)?;
    set.parameters = Some(params.to_vec());
    Ok(set)
}

/// `10^(step·l + offset)` for `l = 0..count`, the log-spaced parameter
/// grids used for envelope families.
pub fn log_grid(step: f64, offset: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|l| 10f64.powf(step * l as f64 + offset))
        .collect()
}

/// Reads an envelope CSV with `L` rows of `n` complex values each.
pub fn load_custom(path: &Path, n: usize) -> Result<EnvelopeSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                parse_complex(field).ok_or_else(|| {
                    Error::parse(path, format!("line {}: bad complex value {field:?}", line_no + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n {
            return Err(Error::parse(
                path,
                format!("line {}: expected {n} values, found {}", line_no + 1, row.len()),
            ));
        }
        rows.push(row);
    }
    EnvelopeSet::from_values(rows)
}

pub(crate) fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 && z.im.is_sign_positive() {
        format!("{}", z.re)
    } else if z.im.is_sign_negative() {
        format!("{}-{}j", z.re, -z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

/// Parses `re`, `imj`, or `re±imj`.
pub(crate) fn parse_complex(field: &str) -> Option<Complex64> {
    let s = field.trim();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix(['j', 'i']) else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    // split at the last sign that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().ok()?;
            let im = match &body[i..] {
                "+" => 1.0,
                "-" => -1.0,
                t => t.parse::<f64>().ok()?,
            };
            Some(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                t => t.parse::<f64>().ok()?,
            };
            Some(Complex64::new(0.0, im))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_grid_of_the_morlet_like_example() {
        let sigmas = log_grid(0.5, -4.0, 5);
        assert!((sigmas[0] - 1e-4).abs() < 1e-18);
        assert!((sigmas[4] - 1e-2).abs() < 1e-15);
        let set = gaussian_set(500, 100e3, &sigmas).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(set.n() * set.n() * set.len(), 1_250_000);
        for e in set.envelopes() {
            assert_eq!(e.values[0], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn wide_gaussian_is_flat() {
        let set = gaussian_set(64, 1000.0, &[1e6]).unwrap();
        assert!(set.envelopes()[0].values.iter().all(|z| (z.re - 1.0).abs() < 1e-9));
    }

    #[test]
    fn exponential_grid_and_time_constant() {
        let taus = log_grid(0.2, -4.0, 9);
        let set = exponential_set(1000, 100e3, &taus).unwrap();
        assert_eq!(set.len(), 9);
        assert_eq!(set.parameters().unwrap(), taus.as_slice());
        for (e, &tau) in set.envelopes().iter().zip(&taus) {
            assert_eq!(e.values[0].re, 1.0);
            let idx = (tau * 100e3).round() as usize;
            let t = idx as f64 / 100e3;
            assert!((e.values[idx].re - (-t / tau).exp()).abs() < 1e-15);
        }
        // τ = 1 ms lands exactly on sample 100
        let one = exponential_set(200, 100e3, &[1e-3]).unwrap();
        assert!((one.envelopes()[0].values[100].re - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(gaussian_set(8, 1.0, &[0.0]).is_err());
        assert!(exponential_set(8, 1.0, &[-1.0]).is_err());
        assert!(exponential_set(0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn normalization_examples() {
        let set = EnvelopeSet::from_values(vec![vec![Complex64::new(1.0, 0.0); 4]]).unwrap();
        let norm_set = set.parseval_normalize().unwrap();
        assert!(norm_set.is_normalized());
        for z in &norm_set.envelopes()[0].values {
            assert!((z.re - 0.25).abs() < 1e-15);
        }
        let again = norm_set.parseval_normalize().unwrap();
        for (a, b) in again.envelopes()[0].values.iter().zip(&norm_set.envelopes()[0].values) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_envelope_rejected() {
        let rows = vec![vec![Complex64::new(1.0, 0.0); 3], vec![Complex64::new(0.0, 0.0); 3]];
        assert!(matches!(EnvelopeSet::from_values(rows), Err(Error::ZeroEnvelope(1))));
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("1.5"), Some(Complex64::new(1.5, 0.0)));
        assert_eq!(parse_complex("1.5+2j"), Some(Complex64::new(1.5, 2.0)));
        assert_eq!(parse_complex("-1e-3-4.5e+2j"), Some(Complex64::new(-1e-3, -450.0)));
        assert_eq!(parse_complex("2j"), Some(Complex64::new(0.0, 2.0)));
        assert_eq!(parse_complex("-j"), Some(Complex64::new(0.0, -1.0)));
        assert_eq!(parse_complex("abc"), None);
        for z in [Complex64::new(0.1, -0.2), Complex64::new(-3.0, 1e-300), Complex64::new(2.0, 0.0)] {
            assert_eq!(parse_complex(&format_complex(z)), Some(z));
        }
    }

    #[test]
    fn custom_file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("env.csv");
        std::fs::write(&path, "1,1,1,1,1,1,1,1\n").unwrap();
        let set = load_custom(&path, 8).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.envelopes()[0].values.iter().all(|z| *z == Complex64::new(1.0, 0.0)));

        std::fs::write(&path, "1,2\n0,0\n").unwrap();
        assert!(matches!(load_custom(&path, 2), Err(Error::ZeroEnvelope(1))));
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(load_custom(&path, 2).is_err());
        std::fs::write(&path, "1,x\n").unwrap();
        assert!(load_custom(&path, 2).is_err());

        let rows = vec![
            vec![Complex64::new(0.25, -1.0 / 3.0), Complex64::new(1e-12, 0.0)],
            vec![Complex64::new(-2.0, 7.5), Complex64::new(0.0, 1.0)],
        ];
        let set = EnvelopeSet::from_values(rows.clone()).unwrap();
        set.save_custom(&path).unwrap();
        let back = load_custom(&path, 2).unwrap();
        for (e, row) in back.envelopes().iter().zip(&rows) {
            assert_eq!(&e.values, row);
        }
    }
}
