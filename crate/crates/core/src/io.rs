//! File formats: signals (CSV, WAV), coefficient tensors, and reports.
//!
//! Coefficient files start with a 4-byte magic (`ESPC` for ESP tensors,
//! `STFC` for STFT matrices), a little-endian `u32` version, then the shape:
//! `L, N` for ESP (data is `L·N·N`) and `1, frames, window` for STFT. Each
//! coefficient follows as a pair of little-endian `f32` (real, imaginary).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::coeffs::CoeffTensor;
use crate::error::{Error, Result};
use crate::estimation::ResonanceEstimate;
use crate::prony::PoleEstimate;
use crate::signal::{QualityReport, Signal};
use crate::solver::SolveResult;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffKind {
    Esp,
    Stft,
}

impl CoeffKind {
    fn magic(self) -> &'static [u8; 4] {
        match self {
            CoeffKind::Esp => b"ESPC",
            CoeffKind::Stft => b"STFC",
        }
    }
}

/// One sample per line; an optional second column holds the imaginary part.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_signal_csv(path: &Path, sample_rate: f64) -> Result<Signal> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let bad = |what: &str| Error::parse(path, format!("line {}: bad {what}", lineno + 1));
        let re: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad("real part"))?;
        let im: f64 = match fields.next() {
            Some(f) => f.parse().map_err(|_| bad("imaginary part"))?,
            None => 0.0,
        };
        if fields.next().is_some() {
            return Err(bad("column count"));
        }
        samples.push(Complex64::new(re, im));
    }
    if samples.is_empty() {
        return Err(Error::parse(path, "no samples"));
    }
    Signal::new(samples, sample_rate)
}

/// Real signals are written as one column, complex ones as two.
pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let real = signal.is_real();
    for z in signal.samples() {
        if real {
            writeln!(w, "{}", z.re)
        } else {
            writeln!(w, "{},{}", z.re, z.im)
        }
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mono PCM16 or float32 WAV. PCM values are scaled to `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<Signal> {
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::parse(path, format!("expected mono, found {} channels", spec.channels)));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        (format, bits) => {
            return Err(Error::parse(path, format!("unsupported WAV format {format:?}/{bits} bits")))
        }
    };
    if samples.is_empty() {
        return Err(Error::parse(path, "no samples"));
    }
    Signal::from_real(&samples, spec.sample_rate as f64)
}

/// Float32 mono WAV of the real part. The sample rate is rounded to whole Hz.
pub fn write_wav(path: &Path, signal: &Signal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate().round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for z in signal.samples() {
        writer.write_sample(z.re as f32).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::parse(path, other.to_string()),
    }
}

/// Reads a signal by extension: `.wav` or anything else as CSV.
pub fn read_signal(path: &Path, sample_rate: f64) -> Result<Signal> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("wav") => read_wav(path),
        _ => read_signal_csv(path, sample_rate),
    }
}

pub fn write_coeffs(path: &Path, coeffs: &CoeffTensor, kind: CoeffKind) -> Result<()> {
    let (a, b, c) = coeffs.shape();
    let header: Vec<u32> = match kind {
        CoeffKind::Esp => {
            if b != c {
                return Err(Error::InvalidParameter(format!(
                    "ESP tensors are L×N×N, got {:?}",
                    coeffs.shape()
                )));
            }
            vec![FORMAT_VERSION, a as u32, b as u32]
        }
        CoeffKind::Stft => {
            if a != 1 {
                return Err(Error::InvalidParameter("STFT matrices have one block".into()));
            }
            vec![FORMAT_VERSION, 1, b as u32, c as u32]
        }
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(kind.magic()).map_err(io)?;
    for v in header {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for z in coeffs.data() {
        w.write_all(&(z.re as f32).to_le_bytes()).map_err(io)?;
        w.write_all(&(z.im as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_coeffs(path: &Path) -> Result<(CoeffKind, CoeffTensor)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    let kind = match &magic {
        b"ESPC" => CoeffKind::Esp,
        b"STFC" => CoeffKind::Stft,
        _ => return Err(Error::parse(path, "unknown coefficient file magic")),
    };
    let mut read_u32 = || -> Result<u32> {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        Ok(u32::from_le_bytes(buf))
    };
    let version = read_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(path, format!("unsupported version {version}")));
    }
    let shape = match kind {
        CoeffKind::Esp => {
            let (l, n) = (read_u32()? as usize, read_u32()? as usize);
            (l, n, n)
        }
        CoeffKind::Stft => {
            let one = read_u32()? as usize;
            if one != 1 {
                return Err(Error::parse(path, "STFT matrices have one block"));
            }
            (1, read_u32()? as usize, read_u32()? as usize)
        }
    };
    let count = shape.0 * shape.1 * shape.2;
    let mut bytes = Vec::with_capacity(count * 8);
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != count * 8 {
        return Err(Error::parse(
            path,
            format!("expected {} data bytes, found {}", count * 8, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok((kind, CoeffTensor::new(data, shape)?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))
}

pub(crate) fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| Error::io(path, e.into()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `iteration,residual,objective`, iterations counted from 1.
pub fn write_history_csv(path: &Path, result: &SolveResult) -> Result<()> {
    write_rows(
        path,
        &["iteration", "residual", "objective"],
        result
            .residual_history
            .iter()
            .zip(&result.objective_history)
            .enumerate()
            .map(|(i, (r, o))| vec![(i + 1).to_string(), r.to_string(), o.to_string()]),
    )
}

pub fn write_prony_csv(path: &Path, estimates: &[PoleEstimate]) -> Result<()> {
    write_rows(
        path,
        &["frequency_hz", "tau_s", "amplitude_re", "amplitude_im", "stable_flag"],
        estimates.iter().map(|e| {
            vec![
                e.frequency.to_string(),
                e.time_constant.to_string(),
                e.amplitude.re.to_string(),
                e.amplitude.im.to_string(),
                u8::from(e.is_stable()).to_string(),
            ]
        }),
    )
}

pub fn write_estimates_csv(path: &Path, rows: &[(ResonanceEstimate, (f64, f64))]) -> Result<()> {
    write_rows(
        path,
        &["source", "band_lo", "band_hi", "freq_hz", "tau_s", "shift_m", "peak_db"],
        rows.iter().map(|(e, (lo, hi))| {
            vec![
                e.source.to_string(),
                lo.to_string(),
                hi.to_string(),
                e.frequency.to_string(),
                e.time_constant.to_string(),
                e.shift_index.to_string(),
                format_db(20.0 * e.peak_magnitude.log10()),
            ]
        }),
    )
}

pub fn write_quality_csv(path: &Path, rows: &[(String, QualityReport)]) -> Result<()> {
    write_rows(
        path,
        &["case", "relative_error", "reconstructed_snr_db", "sparsity_percent", "nonzero_count"],
        rows.iter().map(|(case, q)| {
            vec![
                case.clone(),
                q.relative_error.to_string(),
                format_db(q.reconstructed_snr_db),
                format!("{:.4}", q.sparsity_percent),
                q.nonzero_count.to_string(),
            ]
        }),
    )
}

/// Four decimals, with `inf`/`-inf` for unbounded values.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.4}")
    }
}

/// Reads a CSV written by this module back as header plus string rows.
pub fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let header = r
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
