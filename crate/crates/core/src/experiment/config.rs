use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelopes::{exponential_set, gaussian_set, load_custom, log_grid, EnvelopeSet};
use crate::error::{Error, Result};
use crate::frame::EspFrame;
use crate::io::read_signal;
use crate::operator::FrameOperator;
use crate::prony::PronyConfig;
use crate::signal::Signal;
use crate::solver::{time_shift_weights, Lambda, Mu, SolveConfig};
use crate::stft::{StftFrame, DEFAULT_WINDOW_LENGTH};
use crate::synth::{
    resonant_impulse_response, ResidueMode, ResonanceSpec, REFERENCE_IMPULSE, REFERENCE_LEN,
    REFERENCE_SAMPLE_RATE,
};

/// Default number of noise realizations when no explicit seed list is given.
pub const DEFAULT_REALIZATIONS: usize = 20;

/// A complete experiment description, usually read from TOML.
///
/// Every section has defaults, so an empty document describes the reference
/// two-resonance signal analysed with the nine-envelope exponential frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: SignalConfig,
    pub frame: FrameConfig,
    pub solver: SolverConfig,
    pub noise: NoiseConfig,
    pub sweep: SweepConfig,
    pub estimate: EstimateConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalSource {
    Synthetic,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Residues {
    Direct,
    Transfer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub source: SignalSource,
    /// CSV or WAV input for `source = "file"`.
    pub path: Option<PathBuf>,
    /// Used for synthetic signals and for CSV input (WAV files carry their own).
    pub sample_rate: f64,
    pub n: usize,
    pub impulse_index: usize,
    pub residues: Residues,
    pub resonances: Vec<ResonanceEntry>,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            source: SignalSource::Synthetic,
            path: None,
            sample_rate: REFERENCE_SAMPLE_RATE,
            n: REFERENCE_LEN,
            impulse_index: REFERENCE_IMPULSE,
            residues: Residues::Transfer,
            resonances: vec![ResonanceEntry::new(5_000.0, 3e-3), ResonanceEntry::new(13_000.0, 0.8e-3)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceEntry {
    pub frequency: f64,
    pub tau: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

impl ResonanceEntry {
    pub fn new(frequency: f64, tau: f64) -> Self {
        ResonanceEntry {
            frequency,
            tau,
            amplitude: 1.0,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    Esp,
    Stft,
}

impl FrameKind {
    pub fn name(&self) -> &'static str {
        match self {
            FrameKind::Esp => "esp",
            FrameKind::Stft => "stft",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeFamily {
    Gaussian,
    Exponential,
    Custom,
}

/// `10^(step·l + offset)` for `l = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub step: f64,
    pub offset: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub kind: FrameKind,
    pub envelope: EnvelopeFamily,
    /// σ or τ in seconds; takes precedence over `grid`.
    pub parameters: Option<Vec<f64>>,
    pub grid: GridConfig,
    /// Envelope CSV for `envelope = "custom"`.
    pub path: Option<PathBuf>,
    pub normalize: bool,
    pub window_length: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            kind: FrameKind::Esp,
            envelope: EnvelopeFamily::Exponential,
            parameters: None,
            grid: GridConfig {
                step: 0.2,
                offset: -4.0,
                count: 9,
            },
            path: None,
            normalize: true,
            window_length: DEFAULT_WINDOW_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Bp,
    Bpd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReweightConfig {
    pub epsilon: f64,
    #[serde(default = "one_usize")]
    pub period: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub cutoff_m: usize,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: ModeName,
    /// Absolute penalty. Mutually exclusive with `lambda_fraction`.
    pub lambda: Option<f64>,
    /// Penalty as a fraction of `λ_max` of the solved signal (default 0.1).
    pub lambda_fraction: Option<f64>,
    /// Fixed μ; automatic when absent.
    pub mu: Option<f64>,
    pub max_iterations: usize,
    pub reweight: Option<ReweightConfig>,
    pub convergence_tol: Option<f64>,
    /// Time-shift prior used by the weighted estimator.
    pub weights: Option<WeightsConfig>,
    pub use_symmetry: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: ModeName::Bpd,
            lambda: None,
            lambda_fraction: None,
            mu: None,
            max_iterations: 1000,
            reweight: None,
            convergence_tol: None,
            weights: None,
            use_symmetry: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Input SNRs in dB; `inf` means a clean run. Empty means one clean run.
    pub snr_db: Vec<f64>,
    /// Explicit seeds. When absent, `base_seed + i` for `i < realizations`.
    pub seeds: Option<Vec<u64>>,
    pub base_seed: u64,
    pub realizations: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            snr_db: Vec::new(),
            seeds: None,
            base_seed: 0,
            realizations: DEFAULT_REALIZATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda_fractions: Option<Vec<f64>>,
    /// Log-spaced fractions, used when no explicit list is given.
    pub range: LogRange,
    /// Frames to compare; defaults to `[frame].kind`.
    pub frames: Option<Vec<FrameKind>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambda_fractions: None,
            range: LogRange {
                min: 1e-5,
                max: 1.0,
                points: 8,
            },
            frames: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    EspUnreg,
    EspBpd,
    EspWeightedBpd,
    Prony,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::EspUnreg => "esp-unreg",
            Method::EspBpd => "esp-bpd",
            Method::EspWeightedBpd => "esp-weighted-bpd",
            Method::Prony => "prony",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PronyEntry {
    pub num_poles: usize,
    pub svd_keep: Option<usize>,
    pub shift: usize,
}

impl Default for PronyEntry {
    fn default() -> Self {
        PronyEntry {
            num_poles: 4,
            svd_keep: None,
            shift: 0,
        }
    }
}

impl PronyEntry {
    pub fn to_config(&self) -> PronyConfig {
        PronyConfig {
            num_poles: self.num_poles,
            svd_keep: self.svd_keep,
            shift_samples: self.shift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub methods: Vec<Method>,
    /// `[lo, hi]` in Hz.
    pub bands: Vec<[f64; 2]>,
    pub prony: PronyEntry,
    /// Time constants used for interpolation; the envelope parameters when absent.
    pub taus: Option<Vec<f64>>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            methods: vec![Method::EspUnreg],
            bands: vec![[4_000.0, 6_000.0], [12_000.0, 14_000.0]],
            prony: PronyEntry::default(),
            taus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

/// A constructed frame of either family.
pub enum BuiltFrame {
    Esp(EspFrame),
    Stft(StftFrame),
}

impl BuiltFrame {
    pub fn kind(&self) -> FrameKind {
        match self {
            BuiltFrame::Esp(_) => FrameKind::Esp,
            BuiltFrame::Stft(_) => FrameKind::Stft,
        }
    }

    pub fn operator(&self) -> &dyn FrameOperator {
        match self {
            BuiltFrame::Esp(f) => f,
            BuiltFrame::Stft(f) => f,
        }
    }

    pub fn esp(&self) -> Option<&EspFrame> {
        match self {
            BuiltFrame::Esp(f) => Some(f),
            BuiltFrame::Stft(_) => None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a TOML file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.signal.path, &mut config.frame.path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks parameter domains and referenced files without doing any
    /// signal processing.
    pub fn validate(&self) -> Result<()> {
        let s = &self.signal;
        positive("signal.sample_rate", s.sample_rate)?;
        match s.source {
            SignalSource::File => match &s.path {
                None => return Err(config_err("signal.path is required for source = \"file\"")),
                Some(p) if !p.is_file() => {
                    return Err(config_err(format!("signal file {} does not exist", p.display())))
                }
                _ => {}
            },
            SignalSource::Synthetic => {
                if s.n == 0 {
                    return Err(config_err("signal.n must be >= 1"));
                }
                if s.impulse_index >= s.n {
                    return Err(config_err(format!(
                        "signal.impulse_index {} must be below n = {}",
                        s.impulse_index, s.n
                    )));
                }
                if s.resonances.is_empty() {
                    return Err(config_err("signal.resonances must not be empty"));
                }
                for r in &s.resonances {
                    positive("resonance tau", r.tau)?;
                    if !(r.frequency.abs() < s.sample_rate / 2.0) {
                        return Err(config_err(format!(
                            "resonance frequency {} Hz is not below Nyquist",
                            r.frequency
                        )));
                    }
                    if !r.amplitude.is_finite() || !r.phase.is_finite() {
                        return Err(config_err("resonance amplitude and phase must be finite"));
                    }
                }
            }
        }

        let f = &self.frame;
        match f.envelope {
            EnvelopeFamily::Custom => match &f.path {
                None => return Err(config_err("frame.path is required for envelope = \"custom\"")),
                Some(p) if !p.is_file() => {
                    return Err(config_err(format!("envelope file {} does not exist", p.display())))
                }
                _ => {}
            },
            _ => match &f.parameters {
                Some(ps) if ps.is_empty() => return Err(config_err("frame.parameters must not be empty")),
                Some(ps) => {
                    for &p in ps {
                        positive("envelope parameter", p)?;
                    }
                }
                None => {
                    if f.grid.count == 0 || !f.grid.step.is_finite() || !f.grid.offset.is_finite() {
                        return Err(config_err("frame.grid needs count >= 1 and finite step/offset"));
                    }
                }
            },
        }
        if f.window_length < 2 || f.window_length % 2 != 0 {
            return Err(config_err(format!(
                "frame.window_length must be even and >= 2, got {}",
                f.window_length
            )));
        }

        let v = &self.solver;
        if v.lambda.is_some() && v.lambda_fraction.is_some() {
            return Err(config_err("set only one of solver.lambda and solver.lambda_fraction"));
        }
        if let Some(l) = v.lambda {
            positive("solver.lambda", l)?;
        }
        if let Some(l) = v.lambda_fraction {
            positive("solver.lambda_fraction", l)?;
        }
        if let Some(mu) = v.mu {
            positive("solver.mu", mu)?;
        }
        if v.max_iterations == 0 {
            return Err(config_err("solver.max_iterations must be >= 1"));
        }
        if let Some(rw) = v.reweight {
            positive("solver.reweight.epsilon", rw.epsilon)?;
            if rw.period == 0 {
                return Err(config_err("solver.reweight.period must be >= 1"));
            }
        }
        if let Some(tol) = v.convergence_tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(config_err("solver.convergence_tol must be >= 0"));
            }
        }
        if let Some(w) = v.weights {
            positive("solver.weights.low", w.low)?;
            positive("solver.weights.high", w.high)?;
            if w.low > w.high {
                return Err(config_err("solver.weights needs low <= high"));
            }
        }

        let n = &self.noise;
        if n.snr_db.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(config_err("noise.snr_db entries must be numbers or inf"));
        }
        match &n.seeds {
            Some(seeds) if seeds.is_empty() => return Err(config_err("noise.seeds must not be empty")),
            None if n.realizations == 0 => return Err(config_err("noise.realizations must be >= 1")),
            _ => {}
        }

        let w = &self.sweep;
        match &w.lambda_fractions {
            Some(l) if l.is_empty() => return Err(config_err("sweep.lambda_fractions must not be empty")),
            Some(l) => {
                for &v in l {
                    positive("sweep lambda fraction", v)?;
                }
            }
            None => {
                positive("sweep.range.min", w.range.min)?;
                positive("sweep.range.max", w.range.max)?;
                if w.range.points == 0 || w.range.min > w.range.max {
                    return Err(config_err("sweep.range needs points >= 1 and min <= max"));
                }
            }
        }
        if let Some(frames) = &w.frames {
            if frames.is_empty() {
                return Err(config_err("sweep.frames must not be empty"));
            }
        }

        let e = &self.estimate;
        if e.methods.is_empty() {
            return Err(config_err("estimate.methods must not be empty"));
        }
        for b in &e.bands {
            if !(b[0] <= b[1]) {
                return Err(config_err(format!("estimate band [{}, {}] is empty", b[0], b[1])));
            }
        }
        if e.methods.contains(&Method::EspWeightedBpd) && v.weights.is_none() {
            return Err(config_err("esp-weighted-bpd needs solver.weights"));
        }
        if e.prony.num_poles == 0 {
            return Err(config_err("estimate.prony.num_poles must be >= 1"));
        }
        if let Some(r) = e.prony.svd_keep {
            if r == 0 || r > e.prony.num_poles {
                return Err(config_err("estimate.prony.svd_keep must be in 1..=num_poles"));
            }
        }
        if let Some(t) = &e.taus {
            for &v in t {
                positive("estimate.taus entry", v)?;
            }
        }
        Ok(())
    }

    /// The clean signal: synthetic, or read from file.
    pub fn build_signal(&self) -> Result<Signal> {
        let s = &self.signal;
        match s.source {
            SignalSource::File => {
                let path = s.path.as_ref().ok_or_else(|| config_err("signal.path is missing"))?;
                read_signal(path, s.sample_rate)
            }
            SignalSource::Synthetic => {
                let specs: Vec<ResonanceSpec> = s
                    .resonances
                    .iter()
                    .map(|r| ResonanceSpec {
                        start_time: s.impulse_index as f64 / s.sample_rate,
                        amplitude: Complex64::from_polar(r.amplitude, r.phase),
                        ..ResonanceSpec::new(r.frequency, r.tau)
                    })
                    .collect();
                let mode = match s.residues {
                    Residues::Direct => ResidueMode::Direct,
                    Residues::Transfer => ResidueMode::TransferFunction,
                };
                resonant_impulse_response(&specs, s.n, s.sample_rate, s.impulse_index, mode)
            }
        }
    }

    pub fn envelope_parameters(&self) -> Vec<f64> {
        let f = &self.frame;
        f.parameters
            .clone()
            .unwrap_or_else(|| log_grid(f.grid.step, f.grid.offset, f.grid.count))
    }

    pub fn build_envelopes(&self, n: usize, sample_rate: f64) -> Result<EnvelopeSet> {
        let f = &self.frame;
        let set = match f.envelope {
            EnvelopeFamily::Gaussian => gaussian_set(n, sample_rate, &self.envelope_parameters())?,
            EnvelopeFamily::Exponential => exponential_set(n, sample_rate, &self.envelope_parameters())?,
            EnvelopeFamily::Custom => {
                let path = f.path.as_ref().ok_or_else(|| config_err("frame.path is missing"))?;
                load_custom(path, n)?
            }
        };
        if f.normalize {
            set.parseval_normalize()
        } else {
            Ok(set)
        }
    }

    pub fn build_frame(&self, kind: FrameKind, n: usize, sample_rate: f64) -> Result<BuiltFrame> {
        Ok(match kind {
            FrameKind::Esp => BuiltFrame::Esp(EspFrame::new(self.build_envelopes(n, sample_rate)?, sample_rate)?),
            FrameKind::Stft => BuiltFrame::Stft(StftFrame::new(n, self.frame.window_length, sample_rate)?),
        })
    }

    /// Seeds in run order.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.noise.seeds {
            Some(s) => s.clone(),
            None => (0..self.noise.realizations as u64)
                .map(|i| self.noise.base_seed + i)
                .collect(),
        }
    }

    /// `(snr_db, seed)` cases; a single clean case when no SNR is listed.
    /// Clean SNRs get one case regardless of the seed count.
    pub fn noise_cases(&self) -> Vec<(f64, u64)> {
        if self.noise.snr_db.is_empty() {
            return vec![(f64::INFINITY, 0)];
        }
        let seeds = self.seeds();
        let mut cases = Vec::new();
        for &snr in &self.noise.snr_db {
            if snr.is_infinite() {
                cases.push((snr, 0));
            } else {
                cases.extend(seeds.iter().map(|&s| (snr, s)));
            }
        }
        cases
    }

    pub fn lambda_fractions(&self) -> Vec<f64> {
        if let Some(l) = &self.sweep.lambda_fractions {
            return l.clone();
        }
        let r = self.sweep.range;
        if r.points == 1 {
            return vec![r.max];
        }
        let (a, b) = (r.min.log10(), r.max.log10());
        (0..r.points)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / (r.points - 1) as f64))
            .collect()
    }

    pub fn sweep_frames(&self) -> Vec<FrameKind> {
        self.sweep.frames.clone().unwrap_or_else(|| vec![self.frame.kind])
    }

    /// Solver settings for penalty `lambda`, optionally shaped by the
    /// time-shift prior for a coefficient tensor of `shape`.
    pub fn solve_config(&self, lambda: f64, weighted_shape: Option<(usize, usize, usize)>) -> Result<SolveConfig> {
        let v = &self.solver;
        let lambda = match weighted_shape {
            Some(shape) => {
                let w = v.weights.ok_or_else(|| config_err("solver.weights is not set"))?;
                let field = time_shift_weights(shape, w.cutoff_m, w.low, w.high)?;
                Lambda::Field(field.into_iter().map(|x| x * lambda).collect())
            }
            None => Lambda::Scalar(lambda),
        };
        let mut config = match v.mode {
            ModeName::Bp => SolveConfig::bp(lambda, v.max_iterations),
            ModeName::Bpd => SolveConfig::bpd(lambda, v.max_iterations),
        };
        if let Some(mu) = v.mu {
            config = config.with_mu(Mu::Fixed(mu));
        }
        if let Some(rw) = v.reweight {
            config = config.with_reweight(rw.epsilon, rw.period);
        }
        if let Some(tol) = v.convergence_tol {
            config = config.with_convergence_tol(tol);
        }
        Ok(config.with_symmetry(v.use_symmetry))
    }

    pub fn lambda_fraction(&self) -> f64 {
        self.solver.lambda_fraction.unwrap_or(0.1)
    }
}
