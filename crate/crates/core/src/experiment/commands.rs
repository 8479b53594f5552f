use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{BuiltFrame, ExperimentConfig, FrameKind, Method};
use crate::coeffs::CoeffTensor;
use crate::error::{Error, Result};
use crate::estimation::{estimate_resonance, EstimateSource, ResonanceEstimate};
use crate::io::{
    format_db, write_coeffs, write_history_csv, write_prony_csv, write_quality_csv, write_rows,
    write_signal_csv, write_wav, CoeffKind,
};
use crate::mip::{frame_mip, mip, CollapseAxis, DEFAULT_FLOOR_DB};
use crate::operator::FrameOperator;
use crate::prony::{prony_estimate, select_pole, PoleEstimate};
use crate::signal::{add_white_noise, QualityReport, Signal};
use crate::solver::{lambda_max, solve, SolveResult};

const MIP_ROW_HEIGHT: usize = 8;

/// The clean signal with noise at `snr_db` (returned unchanged when infinite).
pub fn noisy_input(clean: &Signal, snr_db: f64, seed: u64) -> Result<Signal> {
    if snr_db.is_infinite() {
        Ok(clean.clone())
    } else {
        add_white_noise(clean, snr_db, seed)
    }
}

pub fn case_label(snr_db: f64, seed: u64) -> String {
    if snr_db.is_infinite() {
        "clean".into()
    } else {
        format!("snr{snr_db}_seed{seed}")
    }
}

fn output_dir(config: &ExperimentConfig) -> Result<PathBuf> {
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn coeff_kind(frame: &BuiltFrame) -> CoeffKind {
    match frame.kind() {
        FrameKind::Esp => CoeffKind::Esp,
        FrameKind::Stft => CoeffKind::Stft,
    }
}

/// `solver.lambda`, or `solver.lambda_fraction · λ_max(input)`.
pub fn resolve_lambda(config: &ExperimentConfig, frame: &dyn FrameOperator, input: &Signal) -> Result<f64> {
    match config.solver.lambda {
        Some(l) => Ok(l),
        None => Ok(config.lambda_fraction() * lambda_max(frame, input)?),
    }
}

fn solve_with(
    config: &ExperimentConfig,
    frame: &dyn FrameOperator,
    input: &Signal,
    lambda: f64,
    weighted: bool,
) -> Result<SolveResult> {
    let shape = weighted.then(|| frame.coeff_shape());
    solve(frame, input, &config.solve_config(lambda, shape)?)
}

/// Writes the clean signal and every noisy input as CSV and WAV.
pub fn cmd_gen(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = output_dir(config)?;
    let clean = config.build_signal()?;
    let mut written = Vec::new();
    let mut cases = vec![(f64::INFINITY, 0)];
    cases.extend(config.noise_cases().into_iter().filter(|c| c.0.is_finite()));
    for (snr, seed) in cases {
        let s = noisy_input(&clean, snr, seed)?;
        let stem = if snr.is_infinite() {
            "signal".to_string()
        } else {
            format!("signal_{}", case_label(snr, seed))
        };
        for ext in ["csv", "wav"] {
            let path = dir.join(format!("{stem}.{ext}"));
            if ext == "csv" {
                write_signal_csv(&path, &s)?;
            } else {
                write_wav(&path, &s)?;
            }
            written.push(path);
        }
    }
    Ok(written)
}

/// Human-readable frame summary.
pub fn cmd_frame_info(config: &ExperimentConfig) -> Result<String> {
    let clean = config.build_signal()?;
    let frame = config.build_frame(config.frame.kind, clean.len(), clean.sample_rate())?;
    let op = frame.operator();
    let (a, b, c) = op.coeff_shape();
    let mut out = String::new();
    let _ = writeln!(out, "kind: {}", frame.kind().name());
    let _ = writeln!(out, "signal length: {}", op.signal_len());
    let _ = writeln!(out, "sample rate: {} Hz", op.sample_rate());
    let _ = writeln!(out, "coefficient shape: {a} x {b} x {c} ({} total)", op.coeff_len());
    let _ = writeln!(out, "redundancy: {:.3}", op.coeff_len() as f64 / op.signal_len() as f64);
    let _ = writeln!(out, "alpha: {:.12}", op.alpha());
    match &frame {
        BuiltFrame::Esp(f) => {
            let _ = writeln!(out, "normalized: {}", f.is_normalized());
            for (label, e) in f.envelopes().labels().iter().zip(f.envelopes().envelopes()) {
                let energy: f64 = e.values.iter().map(|z| z.norm_sqr()).sum();
                let _ = writeln!(out, "  {label}  energy {energy:.6e}");
            }
        }
        BuiltFrame::Stft(f) => {
            let _ = writeln!(out, "window: {} samples, hop {}", f.window_length(), f.hop());
            let _ = writeln!(out, "padded length: {}", f.padded_len());
        }
    }
    Ok(out)
}

/// The signal a single-shot command works on: the first noise case.
fn first_input(config: &ExperimentConfig, clean: &Signal) -> Result<(Signal, String)> {
    let (snr, seed) = config.noise_cases()[0];
    Ok((noisy_input(clean, snr, seed)?, case_label(snr, seed)))
}

fn write_mips(c: &CoeffTensor, frame: &BuiltFrame, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for axis in [CollapseAxis::Frequency, CollapseAxis::TimeShift] {
        let image = match frame {
            BuiltFrame::Esp(f) => frame_mip(c, f, axis, DEFAULT_FLOOR_DB)?,
            BuiltFrame::Stft(_) => mip(c, axis, DEFAULT_FLOOR_DB)?,
        };
        let base = dir.join(format!("{stem}_mip_{}", axis.name()));
        let png = base.with_extension("png");
        let csv = base.with_extension("csv");
        image.write_png(&png, MIP_ROW_HEIGHT)?;
        image.write_csv(&csv)?;
        written.extend([png, csv]);
    }
    Ok(written)
}

/// Analysis coefficients of the input, plus both projections.
pub fn cmd_analyze(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = output_dir(config)?;
    let clean = config.build_signal()?;
    let (input, label) = first_input(config, &clean)?;
    let frame = config.build_frame(config.frame.kind, input.len(), input.sample_rate())?;
    let c = frame.operator().analyze(&input)?;
    let stem = format!("{}_{label}_analysis", frame.kind().name());
    let path = dir.join(format!("{stem}.bin"));
    write_coeffs(&path, &c, coeff_kind(&frame))?;
    let mut written = vec![path];
    written.extend(write_mips(&c, &frame, &dir, &stem)?);
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct DenoiseCase {
    pub label: String,
    pub snr_db: f64,
    pub seed: u64,
    pub lambda: f64,
    pub report: QualityReport,
    /// Reconstructed SNR minus input SNR; NaN for clean inputs.
    pub gain_db: f64,
    pub iterations_run: usize,
}

fn run_case(
    config: &ExperimentConfig,
    frame: &BuiltFrame,
    clean: &Signal,
    snr: f64,
    seed: u64,
    dir: &Path,
    exports: bool,
) -> Result<DenoiseCase> {
    let op = frame.operator();
    let input = noisy_input(clean, snr, seed)?;
    let lambda = resolve_lambda(config, op, &input)?;
    let result = solve_with(config, op, &input, lambda, false)?;
    let recon = op.synthesize(&result.coefficients)?;
    let report = QualityReport::evaluate(&recon, clean, result.coefficients.data())?;
    let label = case_label(snr, seed);
    let stem = dir.join(format!("{}_{label}", frame.kind().name()));
    let name = |suffix: &str| PathBuf::from(format!("{}{suffix}", stem.display()));
    write_signal_csv(&name("_recon.csv"), &recon)?;
    write_wav(&name("_recon.wav"), &recon)?;
    write_history_csv(&name("_history.csv"), &result)?;
    if exports {
        write_coeffs(&name("_coeffs.bin"), &result.coefficients, coeff_kind(frame))?;
    }
    if frame.kind() == FrameKind::Esp {
        let base = stem.file_name().and_then(|s| s.to_str()).unwrap_or("esp").to_string();
        write_mips(&result.coefficients, frame, dir, &base)?;
    }
    Ok(DenoiseCase {
        gain_db: if snr.is_finite() { report.reconstructed_snr_db - snr } else { f64::NAN },
        label,
        snr_db: snr,
        seed,
        lambda,
        report,
        iterations_run: result.iterations_run,
    })
}

/// One solve on the first noise case, exporting coefficients as well.
pub fn cmd_solve(config: &ExperimentConfig) -> Result<DenoiseCase> {
    let dir = output_dir(config)?;
    let clean = config.build_signal()?;
    let frame = config.build_frame(config.frame.kind, clean.len(), clean.sample_rate())?;
    let (snr, seed) = config.noise_cases()[0];
    let case = run_case(config, &frame, &clean, snr, seed, &dir, true)?;
    write_quality_csv(
        &dir.join(format!("{}_quality.csv", frame.kind().name())),
        &[(case.label.clone(), case.report)],
    )?;
    Ok(case)
}

/// Solves every `(snr, seed)` case and writes reconstructions, histories,
/// projections (ESP) and `<frame>_quality.csv`.
pub fn cmd_denoise(config: &ExperimentConfig) -> Result<Vec<DenoiseCase>> {
    let dir = output_dir(config)?;
    let clean = config.build_signal()?;
    let frame = config.build_frame(config.frame.kind, clean.len(), clean.sample_rate())?;
    let mut cases: Vec<DenoiseCase> = config
        .noise_cases()
        .par_iter()
        .map(|&(snr, seed)| run_case(config, &frame, &clean, snr, seed, &dir, false))
        .collect::<Result<_>>()?;
    cases.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db).then(a.seed.cmp(&b.seed)));
    let rows: Vec<(String, QualityReport)> = cases.iter().map(|c| (c.label.clone(), c.report)).collect();
    write_quality_csv(&dir.join(format!("{}_quality.csv", frame.kind().name())), &rows)?;
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub frame: FrameKind,
    pub snr_db: f64,
    pub seed: u64,
    pub lambda_fraction: f64,
    pub nonzero_pct: f64,
    pub reconstructed_snr_db: f64,
    pub gain_db: f64,
}

/// Best λ for one `(frame, snr)`: the fraction whose seed-averaged gain is
/// largest, with the averages at that fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    pub frame: FrameKind,
    pub snr_db: f64,
    pub lambda_fraction: f64,
    pub nonzero_pct: f64,
    pub reconstructed_snr_db: f64,
    pub gain_db: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub summaries: Vec<SweepSummary>,
    pub path: PathBuf,
}

impl SweepReport {
    pub fn summary(&self, frame: FrameKind, snr_db: f64) -> Option<&SweepSummary> {
        self.summaries.iter().find(|s| s.frame == frame && s.snr_db == snr_db)
    }
}

fn sweep_cell(
    config: &ExperimentConfig,
    frame: &BuiltFrame,
    clean: &Signal,
    snr: f64,
    seed: u64,
    fraction: f64,
) -> Result<SweepCell> {
    let op = frame.operator();
    let input = noisy_input(clean, snr, seed)?;
    let lambda = fraction * lambda_max(op, &input)?;
    let result = solve_with(config, op, &input, lambda, false)?;
    let recon = op.synthesize(&result.coefficients)?;
    let report = QualityReport::evaluate(&recon, clean, result.coefficients.data())?;
    Ok(SweepCell {
        frame: frame.kind(),
        snr_db: snr,
        seed,
        lambda_fraction: fraction,
        nonzero_pct: 100.0 - report.sparsity_percent,
        reconstructed_snr_db: report.reconstructed_snr_db,
        gain_db: report.reconstructed_snr_db - snr,
    })
}

fn summarize(cells: &[SweepCell]) -> Vec<SweepSummary> {
    let mut groups: BTreeMap<(FrameKind, u64, u64), Vec<&SweepCell>> = BTreeMap::new();
    for c in cells {
        groups
            .entry((c.frame, ordered(c.snr_db), ordered(c.lambda_fraction)))
            .or_default()
            .push(c);
    }
    let mut best: BTreeMap<(FrameKind, u64), SweepSummary> = BTreeMap::new();
    for ((frame, snr_key, _), group) in groups {
        let n = group.len() as f64;
        let mean = |f: fn(&SweepCell) -> f64| group.iter().map(|c| f(c)).sum::<f64>() / n;
        let s = SweepSummary {
            frame,
            snr_db: group[0].snr_db,
            lambda_fraction: group[0].lambda_fraction,
            nonzero_pct: mean(|c| c.nonzero_pct),
            reconstructed_snr_db: mean(|c| c.reconstructed_snr_db),
            gain_db: mean(|c| c.gain_db),
        };
        let slot = best.entry((frame, snr_key)).or_insert(s);
        if s.gain_db > slot.gain_db {
            *slot = s;
        }
    }
    best.into_values().collect()
}

/// Order-preserving key for finite floats.
fn ordered(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Reconstruction-quality tradeoff over λ fractions, frames and noise cases.
/// Writes `sweep.csv`: data rows sorted by frame, SNR, seed and fraction,
/// followed by one summary row per `(frame, snr)`.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    if config.noise.snr_db.is_empty() || config.noise.snr_db.iter().any(|s| s.is_infinite()) {
        return Err(Error::Config("sweep needs finite noise.snr_db values".into()));
    }
    let dir = output_dir(config)?;
    let clean = config.build_signal()?;
    let frames: Vec<BuiltFrame> = config
        .sweep_frames()
        .into_iter()
        .map(|k| config.build_frame(k, clean.len(), clean.sample_rate()))
        .collect::<Result<_>>()?;
    let fractions = config.lambda_fractions();
    let mut jobs = Vec::new();
    for (fi, _) in frames.iter().enumerate() {
        for (snr, seed) in config.noise_cases() {
            for &fr in &fractions {
                jobs.push((fi, snr, seed, fr));
            }
        }
    }
    let mut cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(fi, snr, seed, fr)| sweep_cell(config, &frames[fi], &clean, snr, seed, fr))
        .collect::<Result<_>>()?;
    cells.sort_by(|a, b| {
        a.frame
            .cmp(&b.frame)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.seed.cmp(&b.seed))
            .then(a.lambda_fraction.total_cmp(&b.lambda_fraction))
    });
    cells.dedup_by(|a, b| a == b);
    let summaries = summarize(&cells);

    let path = dir.join("sweep.csv");
    let data = cells.iter().map(|c| {
        vec![
            "cell".into(),
            c.frame.name().into(),
            format_db(c.snr_db),
            c.seed.to_string(),
            format!("{:.6e}", c.lambda_fraction),
            format!("{:.4}", c.nonzero_pct),
            format_db(c.reconstructed_snr_db),
            format_db(c.gain_db),
        ]
    });
    let summary = summaries.iter().map(|s| {
        vec![
            "summary".into(),
            s.frame.name().into(),
            format_db(s.snr_db),
            "all".into(),
            format!("{:.6e}", s.lambda_fraction),
            format!("{:.4}", s.nonzero_pct),
            format_db(s.reconstructed_snr_db),
            format_db(s.gain_db),
        ]
    });
    write_rows(
        &path,
        &[
            "kind",
            "frame",
            "snr_db",
            "seed",
            "lambda_fraction",
            "nonzero_pct",
            "reconstructed_snr_db",
            "gain_db",
        ],
        data.chain(summary),
    )?;
    Ok(SweepReport { cells, summaries, path })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub method: Method,
    pub snr_db: f64,
    pub seed: u64,
    pub band: (f64, f64),
    /// `None` when nothing was found in the band.
    pub estimate: Option<ResonanceEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub method: Method,
    pub snr_db: f64,
    pub band: (f64, f64),
    pub count: usize,
    pub frequency_mean: f64,
    pub frequency_std: f64,
    pub tau_mean: f64,
    pub tau_std: f64,
}

/// Mean and sample standard deviation (`n − 1`); the deviation is 0 for a
/// single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn soft_miss<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoMatch(_)) | Err(Error::ZeroPower(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn estimate_case(
    config: &ExperimentConfig,
    frame: Option<&BuiltFrame>,
    clean: &Signal,
    method: Method,
    snr: f64,
    seed: u64,
) -> Result<Vec<EstimateRow>> {
    let input = noisy_input(clean, snr, seed)?;
    let bands: Vec<(f64, f64)> = config.estimate.bands.iter().map(|b| (b[0], b[1])).collect();
    let row = |band, estimate| EstimateRow {
        method,
        snr_db: snr,
        seed,
        band,
        estimate,
    };
    if method == Method::Prony {
        let poles = prony_estimate(&input, &config.estimate.prony.to_config())?;
        return bands
            .into_iter()
            .map(|band| {
                let pole = soft_miss(select_pole(&poles, band))?;
                Ok(row(
                    band,
                    pole.map(|p| ResonanceEstimate {
                        frequency: p.frequency,
                        time_constant: p.time_constant,
                        shift_index: config.estimate.prony.shift,
                        peak_magnitude: p.amplitude.norm(),
                        source: EstimateSource::Prony,
                    }),
                ))
            })
            .collect();
    }
    let frame = frame.ok_or_else(|| Error::Config("ESP estimators need an ESP frame".into()))?;
    let esp = frame.esp().ok_or_else(|| Error::Config("ESP estimators need an ESP frame".into()))?;
    let (coeffs, source) = match method {
        Method::EspUnreg => (esp.analysis(&input)?, EstimateSource::Unregularized),
        Method::EspBpd | Method::EspWeightedBpd => {
            let weighted = method == Method::EspWeightedBpd;
            let lambda = resolve_lambda(config, esp, &input)?;
            let result = solve_with(config, esp, &input, lambda, weighted)?;
            let source = if weighted { EstimateSource::WeightedBpd } else { EstimateSource::Bpd };
            (result.coefficients, source)
        }
        Method::Prony => unreachable!(),
    };
    let taus = config.estimate.taus.as_deref();
    bands
        .into_iter()
        .map(|band| {
            let e = soft_miss(estimate_resonance(&coeffs, band, esp, taus, source))?;
            Ok(row(band, e))
        })
        .collect()
}

/// Per-case estimates and per-`(method, snr, band)` statistics, written to
/// `estimates.csv` and `estimates_summary.csv`.
pub fn cmd_estimate(config: &ExperimentConfig) -> Result<(Vec<EstimateRow>, Vec<EstimateSummary>)> {
    let dir = output_dir(config)?;
    let clean = config.build_signal()?;
    let needs_esp = config.estimate.methods.iter().any(|m| *m != Method::Prony);
    let frame = if needs_esp {
        Some(config.build_frame(FrameKind::Esp, clean.len(), clean.sample_rate())?)
    } else {
        None
    };
    let mut methods = config.estimate.methods.clone();
    methods.sort();
    methods.dedup();
    let jobs: Vec<(Method, f64, u64)> = methods
        .iter()
        .flat_map(|&m| config.noise_cases().into_iter().map(move |(s, seed)| (m, s, seed)))
        .collect();
    let mut rows: Vec<EstimateRow> = jobs
        .par_iter()
        .map(|&(m, snr, seed)| estimate_case(config, frame.as_ref(), &clean, m, snr, seed))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.band.0.total_cmp(&b.band.0))
            .then(a.band.1.total_cmp(&b.band.1))
            .then(a.seed.cmp(&b.seed))
    });

    let mut groups: Vec<(Method, f64, (f64, f64), Vec<&ResonanceEstimate>)> = Vec::new();
    for r in &rows {
        match groups.last_mut() {
            Some(g) if g.0 == r.method && g.1 == r.snr_db && g.2 == r.band => g.3.extend(r.estimate.as_ref()),
            _ => groups.push((r.method, r.snr_db, r.band, r.estimate.iter().collect())),
        }
    }
    let summaries: Vec<EstimateSummary> = groups
        .into_iter()
        .map(|(method, snr_db, band, ests)| {
            let (frequency_mean, frequency_std) = mean_std(&ests.iter().map(|e| e.frequency).collect::<Vec<_>>());
            let (tau_mean, tau_std) = mean_std(&ests.iter().map(|e| e.time_constant).collect::<Vec<_>>());
            EstimateSummary {
                method,
                snr_db,
                band,
                count: ests.len(),
                frequency_mean,
                frequency_std,
                tau_mean,
                tau_std,
            }
        })
        .collect();

    let num = |v: f64| if v.is_nan() { "nan".to_string() } else { v.to_string() };
    write_rows(
        &dir.join("estimates.csv"),
        &["method", "snr_db", "seed", "band_lo", "band_hi", "freq_hz", "tau_s", "shift_m", "peak_db"],
        rows.iter().map(|r| {
            let (f, t, m, p) = match &r.estimate {
                Some(e) => (
                    e.frequency.to_string(),
                    e.time_constant.to_string(),
                    e.shift_index.to_string(),
                    format_db(20.0 * e.peak_magnitude.log10()),
                ),
                None => ("nan".into(), "nan".into(), String::new(), "nan".into()),
            };
            vec![
                r.method.name().into(),
                format_db(r.snr_db),
                r.seed.to_string(),
                r.band.0.to_string(),
                r.band.1.to_string(),
                f,
                t,
                m,
                p,
            ]
        }),
    )?;
    write_rows(
        &dir.join("estimates_summary.csv"),
        &[
            "method", "snr_db", "band_lo", "band_hi", "count", "freq_mean", "freq_std", "tau_mean", "tau_std",
        ],
        summaries.iter().map(|s| {
            vec![
                s.method.name().into(),
                format_db(s.snr_db),
                s.band.0.to_string(),
                s.band.1.to_string(),
                s.count.to_string(),
                num(s.frequency_mean),
                num(s.frequency_std),
                num(s.tau_mean),
                num(s.tau_std),
            ]
        }),
    )?;
    Ok((rows, summaries))
}

/// Prony fit of the first noise case, written to `prony.csv`.
pub fn cmd_prony(config: &ExperimentConfig) -> Result<Vec<PoleEstimate>> {
    let dir = output_dir(config)?;
    let clean = config.build_signal()?;
    let (input, _) = first_input(config, &clean)?;
    let poles = prony_estimate(&input, &config.estimate.prony.to_config())?;
    write_prony_csv(&dir.join("prony.csv"), &poles)?;
    Ok(poles)
}
