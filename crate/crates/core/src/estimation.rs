//! Resonance parameters from ESP coefficient peaks.

use std::fmt;

use crate::coeffs::CoeffTensor;
use crate::error::{Error, Result};
use crate::frame::EspFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateSource {
    Unregularized,
    Bp,
    Bpd,
    WeightedBpd,
    Prony,
}

impl fmt::Display for EstimateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimateSource::Unregularized => "unregularized",
            EstimateSource::Bp => "bp",
            EstimateSource::Bpd => "bpd",
            EstimateSource::WeightedBpd => "weighted-bpd",
            EstimateSource::Prony => "prony",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub l: usize,
    pub k: usize,
    pub m: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceEstimate {
    pub frequency: f64,
    pub time_constant: f64,
    pub shift_index: usize,
    pub peak_magnitude: f64,
    pub source: EstimateSource,
}

/// Largest `|c[l,k,m]|` among bins whose display frequency lies in
/// `[lo, hi]`. Ties go to the lexicographically smallest `(l, k, m)`.
pub fn find_resonance_peak(c: &CoeffTensor, band: (f64, f64), frame: &EspFrame) -> Result<Peak> {
    if c.shape() != frame.shape() {
        return Err(Error::ShapeMismatch {
            expected: frame.shape(),
            actual: c.shape(),
        });
    }
    let (lo, hi) = band;
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!("empty band [{lo}, {hi}]")));
    }
    let (l_count, n, _) = c.shape();
    let bins: Vec<usize> = (0..n)
        .filter(|&k| {
            let f = frame.frequency_of(k);
            f >= lo && f <= hi
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::NoMatch(format!("no frequency bin in [{lo}, {hi}] Hz")));
    }
    let mut best: Option<Peak> = None;
    for l in 0..l_count {
        for &k in &bins {
            let start = c.index(l, k, 0);
            for (m, z) in c.data()[start..start + n].iter().enumerate() {
                let mag = z.norm();
                if best.map_or(true, |b| mag > b.magnitude) {
                    best = Some(Peak { l, k, m, magnitude: mag });
                }
            }
        }
    }
    match best {
        Some(p) if p.magnitude > 0.0 => Ok(p),
        _ => Err(Error::ZeroPower("no nonzero coefficient in band")),
    }
}

/// Weighted geometric mean of `τ[l−1], τ[l], τ[l+1]` with weights
/// `|c[·,k,m]|`. A neighbour past either end of the grid is left out.
pub fn estimate_time_constant(c: &CoeffTensor, peak: (usize, usize, usize), taus: &[f64]) -> Result<f64> {
    let (l_count, rows, cols) = c.shape();
    let (l, k, m) = peak;
    if taus.len() != l_count {
        return Err(Error::LengthMismatch {
            expected: l_count,
            actual: taus.len(),
        });
    }
    if l >= l_count || k >= rows || m >= cols {
        return Err(Error::IndexOutOfRange(format!("peak ({l}, {k}, {m}) outside tensor")));
    }
    if taus.iter().any(|&t| !(t > 0.0)) || taus.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "time constants must be positive and ascending".into(),
        ));
    }
    let lo = l.saturating_sub(1);
    let hi = (l + 1).min(l_count - 1);
    let (mut weight, mut log_sum) = (0.0, 0.0);
    for j in lo..=hi {
        let w = c.get(j, k, m).norm();
        weight += w;
        if w > 0.0 {
            log_sum += w * (taus[j] / taus[l]).ln();
        }
    }
    if weight == 0.0 {
        return Err(Error::ZeroPower("zero weight around the peak"));
    }
    Ok(taus[l] * (log_sum / weight).exp())
}

/// Peak search followed by time-constant interpolation. `taus` defaults to
/// the frame's envelope parameters.
pub fn estimate_resonance(
    c: &CoeffTensor,
    band: (f64, f64),
    frame: &EspFrame,
    taus: Option<&[f64]>,
    source: EstimateSource,
) -> Result<ResonanceEstimate> {
    let taus = match taus {
        Some(t) => t,
        None => frame.envelopes().parameters().ok_or_else(|| {
            Error::InvalidParameter("envelopes carry no time constants".into())
        })?,
    };
    let peak = find_resonance_peak(c, band, frame)?;
    let tau = estimate_time_constant(c, (peak.l, peak.k, peak.m), taus)?;
    Ok(ResonanceEstimate {
        frequency: frame.frequency_of(peak.k),
        time_constant: tau,
        shift_index: peak.m,
        peak_magnitude: peak.magnitude,
        source,
    })
}
