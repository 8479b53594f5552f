//! L1-regularized coefficient inference with SALSA.
//!
//! Both problems are posed over any tight frame `A` with constant `α`:
//!
//! * basis pursuit (BP): `min ‖D(λ)c‖₁` subject to `(1/α)A*c = w`
//! * basis pursuit denoising (BPD): `min ‖D(λ)c‖₁ + ½‖(1/α)A*c − w‖²`
//!
//! One iteration is
//!
//! ```text
//! u = soft(x + d, λ/μ)
//! v = u − d
//! x = v + γ·A(w − (1/α)A*v)      γ = 1 (BP), (1 + μ/α)⁻¹ (BPD)
//! d = x − v
//! ```
//!
//! started from `x = A·w`, `d = 0`. The returned coefficients are the last
//! `u`. Because `d = γ·A(r)` for the residual `r` of the previous step and
//! `(1/α)A*A = I`, the synthesis of `d` is `γ·r` and only one analysis and
//! one synthesis are needed per iteration.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coeffs::CoeffTensor;
use crate::error::{Error, Result};
use crate::operator::{FrameOperator, RealHalf};
use crate::signal::Signal;

/// Divergence guard: abort once an iterate grows past this multiple of `‖A·w‖`.
const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bp,
    Bpd,
}

/// Penalty weights: a constant or one positive weight per coefficient.
#[derive(Debug, Clone, PartialEq)]
pub enum Lambda {
    Scalar(f64),
    Field(Vec<f64>),
}

impl Lambda {
    pub fn mean(&self) -> f64 {
        match self {
            Lambda::Scalar(v) => *v,
            Lambda::Field(f) => f.iter().sum::<f64>() / f.len() as f64,
        }
    }

    fn validate(&self, coeff_len: usize) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match self {
            Lambda::Scalar(v) if !ok(*v) => Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {v}"
            ))),
            Lambda::Field(f) if f.len() != coeff_len => Err(Error::LengthMismatch {
                expected: coeff_len,
                actual: f.len(),
            }),
            Lambda::Field(f) if !f.iter().all(|&v| ok(v)) => Err(Error::InvalidParameter(
                "lambda field must be positive everywhere".into(),
            )),
            _ => Ok(()),
        }
    }

    fn at(&self, i: usize) -> f64 {
        match self {
            Lambda::Scalar(v) => *v,
            Lambda::Field(f) => f[i],
        }
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Lambda {
        match self {
            Lambda::Scalar(v) => Lambda::Scalar(v * factor),
            Lambda::Field(f) => Lambda::Field(f.iter().map(|v| v * factor).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mu {
    /// `mean(λ)/p` with `p` the 99th percentile of `|A·w|`.
    Auto,
    Fixed(f64),
}

/// Iterative reweighting `λ[i] = 1/(|u[i]| + ε)`, refreshed every `period`
/// iterations. The first weights come from `A·w` and replace the configured
/// `λ`, so `Mu::Auto` is computed from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reweight {
    pub epsilon: f64,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub mode: Mode,
    pub lambda: Lambda,
    pub mu: Mu,
    pub max_iterations: usize,
    pub reweight: Option<Reweight>,
    /// Stop early once `‖u_n − u_{n−1}‖ ≤ tol·‖u_n‖`.
    pub convergence_tol: Option<f64>,
    /// Work on the nonredundant half of the coefficients when the signal is
    /// real and the frame supports it. The result is the same up to rounding.
    pub use_symmetry: bool,
}

impl SolveConfig {
    pub fn bp(lambda: Lambda, max_iterations: usize) -> Self {
        SolveConfig {
            mode: Mode::Bp,
            lambda,
            mu: Mu::Auto,
            max_iterations,
            reweight: None,
            convergence_tol: None,
            use_symmetry: true,
        }
    }

    pub fn bpd(lambda: Lambda, max_iterations: usize) -> Self {
        SolveConfig {
            mode: Mode::Bpd,
            ..SolveConfig::bp(lambda, max_iterations)
        }
    }

    pub fn with_reweight(mut self, epsilon: f64, period: usize) -> Self {
        self.reweight = Some(Reweight { epsilon, period });
        self
    }

    pub fn with_mu(mut self, mu: Mu) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_convergence_tol(mut self, tol: f64) -> Self {
        self.convergence_tol = Some(tol);
        self
    }

    pub fn with_symmetry(mut self, use_symmetry: bool) -> Self {
        self.use_symmetry = use_symmetry;
        self
    }

    fn validate(&self, coeff_len: usize) -> Result<()> {
        self.lambda.validate(coeff_len)?;
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if let Mu::Fixed(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
            }
        }
        if let Some(rw) = self.reweight {
            if !(rw.epsilon > 0.0 && rw.epsilon.is_finite()) {
                return Err(Error::InvalidParameter("reweight epsilon must be positive".into()));
            }
            if rw.period == 0 {
                return Err(Error::InvalidParameter("reweight period must be >= 1".into()));
            }
        }
        if let Some(tol) = self.convergence_tol {
            if !(tol >= 0.0) {
                return Err(Error::InvalidParameter("convergence_tol must be >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub coefficients: CoeffTensor,
    pub iterations_run: usize,
    /// `‖(1/α)A*u_n − w‖` per iteration.
    pub residual_history: Vec<f64>,
    /// `‖D(λ_n)u_n‖₁`, plus `½‖(1/α)A*u_n − w‖²` for BPD.
    pub objective_history: Vec<f64>,
    pub mu: f64,
}

/// Read-only view of the iterates, handed to an observer after each step.
///
/// The slices are in the solver's working layout, which is the half layout
/// of [`RealHalf`] when `half_layout` is set.
pub struct IterationState<'a> {
    pub iteration: usize,
    pub u: &'a [Complex64],
    /// `x_n + d_n`, the input of the next threshold.
    pub x_plus_d: &'a [Complex64],
    pub d: &'a [Complex64],
    pub half_layout: bool,
    space: &'a Space<'a>,
}

impl IterationState<'_> {
    /// Reconstructs `x_n = (x_n + d_n) − d_n`.
    pub fn x(&self) -> Vec<Complex64> {
        self.x_plus_d.iter().zip(self.d).map(|(s, d)| s - d).collect()
    }

    /// `(1/α)·A*` applied to working-layout coefficients.
    pub fn synthesize(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.space.signal_len];
        (self.space.synthesize)(c, &mut out);
        out
    }
}

/// `x·(|x| − t)/|x|` when `|x| > t`, else 0.
pub fn soft_threshold(x: Complex64, t: f64) -> Complex64 {
    let mag2 = x.norm_sqr();
    if mag2 > t * t {
        x * (1.0 - t / mag2.sqrt())
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Smallest scalar λ for which the BPD solution is identically zero:
/// `‖A·w‖∞`.
pub fn lambda_max<F: FrameOperator + ?Sized>(frame: &F, w: &Signal) -> Result<f64> {
    Ok(frame.analyze(w)?.max_abs())
}

/// Nearest-rank percentile (`0 < q ≤ 100`) of the magnitudes.
pub fn percentile_magnitude(coeffs: &[Complex64], q: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let mut mags: Vec<f64> = coeffs.iter().map(|z| z.norm()).collect();
    let rank = ((q / 100.0) * mags.len() as f64).ceil().max(1.0) as usize;
    let idx = rank.min(mags.len()) - 1;
    let (_, value, _) = mags.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *value
}

/// Nearest-rank percentile where entry `i` counts `weights[i / row_len]`
/// times.
fn weighted_percentile(coeffs: &[Complex64], row_len: usize, weights: &[f64], q: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = coeffs
        .iter()
        .enumerate()
        .map(|(i, z)| (z.norm(), weights[i / row_len]))
        .filter(|&(m, _)| m > 0.0)
        .collect();
    let total: f64 = coeffs
        .chunks(row_len)
        .zip(weights)
        .map(|(row, w)| row.len() as f64 * w)
        .sum();
    let zeros = total - pairs.iter().map(|p| p.1).sum::<f64>();
    let rank = ((q / 100.0) * total).ceil().max(1.0);
    if rank <= zeros {
        return 0.0;
    }
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut seen = zeros;
    for (m, w) in pairs {
        seen += w;
        if seen >= rank {
            return m;
        }
    }
    0.0
}

/// `μ = mean(λ)/p`, `p` the nearest-rank 99th percentile of `|c|`.
///
/// When more than 99% of the entries are zero the percentile is taken over
/// the nonzero magnitudes instead.
pub fn mu_auto(initial_coeffs: &[Complex64], lambda: &Lambda) -> Result<f64> {
    let len = initial_coeffs.len().max(1);
    Ok(lambda.mean() / percentile_for_mu(initial_coeffs, len, &[1.0])?)
}

fn percentile_for_mu(coeffs: &[Complex64], row_len: usize, weights: &[f64]) -> Result<f64> {
    let uniform = weights.iter().all(|&w| w == weights[0]);
    let mut p = if uniform {
        percentile_magnitude(coeffs, 99.0)
    } else {
        weighted_percentile(coeffs, row_len, weights, 99.0)
    };
    if p == 0.0 {
        let nonzero: Vec<(Complex64, f64)> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(i, z)| (*z, weights[i / row_len]))
            .collect();
        if nonzero.is_empty() {
            return Err(Error::ZeroPower("mu_auto needs a nonzero coefficient tensor"));
        }
        let values: Vec<Complex64> = nonzero.iter().map(|p| p.0).collect();
        let w: Vec<f64> = nonzero.iter().map(|p| p.1).collect();
        p = if uniform {
            percentile_magnitude(&values, 99.0)
        } else {
            weighted_percentile(&values, 1, &w, 99.0)
        };
    }
    Ok(p)
}

/// Weight field `low` for time shifts `m < cutoff_m`, `high` otherwise. The
/// shift index is the last tensor axis.
pub fn time_shift_weights(
    shape: (usize, usize, usize),
    cutoff_m: usize,
    low: f64,
    high: f64,
) -> Result<Vec<f64>> {
    if !(low > 0.0 && low <= high && high.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < low <= high, got low={low}, high={high}"
        )));
    }
    if cutoff_m > shape.2 {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff_m} exceeds shift axis length {}",
            shape.2
        )));
    }
    let row: Vec<f64> = (0..shape.2)
        .map(|m| if m < cutoff_m { low } else { high })
        .collect();
    Ok(row
        .iter()
        .copied()
        .cycle()
        .take(shape.0 * shape.1 * shape.2)
        .collect())
}

pub fn solve_bp<F: FrameOperator + ?Sized>(
    frame: &F,
    w: &Signal,
    config: &SolveConfig,
) -> Result<SolveResult> {
    if config.mode != Mode::Bp {
        return Err(Error::InvalidParameter("solve_bp requires mode = BP".into()));
    }
    solve(frame, w, config)
}

pub fn solve_bpd<F: FrameOperator + ?Sized>(
    frame: &F,
    w: &Signal,
    config: &SolveConfig,
) -> Result<SolveResult> {
    if config.mode != Mode::Bpd {
        return Err(Error::InvalidParameter("solve_bpd requires mode = BPD".into()));
    }
    solve(frame, w, config)
}

/// Runs BP or BPD according to `config.mode`.
pub fn solve<F: FrameOperator + ?Sized>(
    frame: &F,
    w: &Signal,
    config: &SolveConfig,
) -> Result<SolveResult> {
    solve_observed(frame, w, config, |_| {})
}

/// Analysis and synthesis in the solver's working layout.
struct Space<'a> {
    analyze: Box<dyn Fn(&[Complex64], &mut [Complex64]) + Sync + 'a>,
    synthesize: Box<dyn Fn(&[Complex64], &mut [Complex64]) + Sync + 'a>,
    signal_len: usize,
    len: usize,
    row_len: usize,
    /// How many full-layout rows each working row stands for.
    row_weights: Vec<f64>,
    half: Option<&'a dyn RealHalf>,
}

impl<'a> Space<'a> {
    fn full<F: FrameOperator + ?Sized>(frame: &'a F) -> Self {
        let (a, b, c) = frame.coeff_shape();
        Space {
            analyze: Box::new(move |w, out| frame.analyze_into(w, out)),
            synthesize: Box::new(move |c, out| frame.synthesize_into(c, out)),
            signal_len: frame.signal_len(),
            len: a * b * c,
            row_len: c,
            row_weights: vec![1.0; a * b],
            half: None,
        }
    }

    fn half(half: &'a dyn RealHalf, signal_len: usize) -> Self {
        let (a, b, c) = half.half_shape();
        Space {
            analyze: Box::new(move |w, out| half.analyze_half_into(w, out)),
            synthesize: Box::new(move |c, out| half.synthesize_half_into(c, out)),
            signal_len,
            len: a * b * c,
            row_len: c,
            row_weights: (0..a * b).map(|r| half.row_multiplicity(r)).collect(),
            half: Some(half),
        }
    }
}

/// [`solve`] with a callback invoked after every iteration.
pub fn solve_observed<F, O>(
    frame: &F,
    w: &Signal,
    config: &SolveConfig,
    mut observer: O,
) -> Result<SolveResult>
where
    F: FrameOperator + ?Sized,
    O: FnMut(&IterationState<'_>),
{
    let n = frame.signal_len();
    if w.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: w.len(),
        });
    }
    config.validate(frame.coeff_len())?;

    let mut space = Space::full(frame);
    let mut lambda = config.lambda.clone();
    if config.use_symmetry && w.is_real() {
        if let Some(half) = frame.real_half() {
            let reduced = match &config.lambda {
                Lambda::Scalar(v) => Some(Lambda::Scalar(*v)),
                Lambda::Field(f) => half.reduce_field(f).map(Lambda::Field),
            };
            if let Some(reduced) = reduced {
                space = Space::half(half, n);
                lambda = reduced;
            }
        }
    }

    let alpha = frame.alpha();
    let target = w.samples();
    let zero = Complex64::new(0.0, 0.0);
    let len = space.len;
    let row_len = space.row_len;

    // x_0 + d_0 = A·w
    let mut z = vec![zero; len];
    (space.analyze)(target, &mut z);
    let start_norm = weighted_norm2(&z, row_len, &space.row_weights).sqrt();
    // with reweighting the first threshold already uses weights from A·w
    if let Some(rw) = config.reweight {
        lambda = reweighted(&z, rw.epsilon);
    }
    let lambda_mean = space_mean(&lambda, row_len, &space.row_weights);
    let mu = match config.mu {
        Mu::Fixed(mu) => mu,
        Mu::Auto if start_norm == 0.0 => lambda_mean,
        Mu::Auto => lambda_mean / percentile_for_mu(&z, row_len, &space.row_weights)?,
    };
    let gamma = match config.mode {
        Mode::Bp => 1.0,
        Mode::Bpd => 1.0 / (1.0 + mu / alpha),
    };
    let limit = DIVERGENCE_FACTOR * start_norm;

    let mut u = vec![zero; len];
    let mut d = vec![zero; len];
    let mut t = vec![zero; len];
    let mut synth_u = vec![zero; n];
    // (1/α)A*d, kept in signal space
    let mut synth_d = vec![zero; n];
    let mut residual = vec![zero; n];

    let mut residual_history = Vec::with_capacity(config.max_iterations);
    let mut objective_history = Vec::with_capacity(config.max_iterations);
    let mut iterations_run = 0;

    for iteration in 1..=config.max_iterations {
        let pass = threshold_pass(&z, &mut u, &lambda, mu, row_len, &space.row_weights);
        if !pass.u_norm2.is_finite() || pass.u_norm2.sqrt() > limit {
            return Err(Error::Diverged { iteration });
        }

        (space.synthesize)(&u, &mut synth_u);
        let fit2: f64 = synth_u
            .iter()
            .zip(target)
            .map(|(s, w)| (s - w).norm_sqr())
            .sum();
        residual_history.push(fit2.sqrt());
        objective_history.push(match config.mode {
            Mode::Bp => pass.weighted_l1,
            Mode::Bpd => pass.weighted_l1 + 0.5 * fit2,
        });

        // r = w − (1/α)A*v with (1/α)A*v = (1/α)A*u − (1/α)A*d
        for ((r, (&w, &su)), &sd) in residual
            .iter_mut()
            .zip(target.iter().zip(&synth_u))
            .zip(&synth_d)
        {
            *r = w - (su - sd);
        }
        (space.analyze)(&residual, &mut t);
        let z_norm2 = update_pass(&u, &mut d, &t, &mut z, gamma, row_len, &space.row_weights);
        if !z_norm2.is_finite() || z_norm2.sqrt() > limit {
            return Err(Error::Diverged { iteration });
        }
        for (sd, &r) in synth_d.iter_mut().zip(&residual) {
            *sd = r * gamma;
        }

        if let Some(rw) = config.reweight {
            if iteration % rw.period == 0 {
                lambda = reweighted(&u, rw.epsilon);
            }
        }

        iterations_run = iteration;
        observer(&IterationState {
            iteration,
            u: &u,
            x_plus_d: &z,
            d: &d,
            half_layout: space.half.is_some(),
            space: &space,
        });

        if let Some(tol) = config.convergence_tol {
            if pass.change2.sqrt() <= tol * pass.u_norm2.sqrt() {
                break;
            }
        }
    }

    let data = match space.half {
        Some(half) => half.expand(&u),
        None => u,
    };
    Ok(SolveResult {
        coefficients: CoeffTensor::new(data, frame.coeff_shape())?,
        iterations_run,
        residual_history,
        objective_history,
        mu,
    })
}

/// `‖D(λ)c‖₁ + ½‖(1/α)A*c − w‖²` (the second term only for BPD).
pub fn objective<F: FrameOperator + ?Sized>(
    frame: &F,
    w: &Signal,
    coeffs: &CoeffTensor,
    lambda: &Lambda,
    mode: Mode,
) -> Result<f64> {
    let l1: f64 = coeffs
        .data()
        .iter()
        .enumerate()
        .map(|(i, c)| lambda.at(i) * c.norm())
        .sum();
    Ok(match mode {
        Mode::Bp => l1,
        Mode::Bpd => {
            let back = frame.synthesize(coeffs)?;
            let fit2: f64 = back
                .samples()
                .iter()
                .zip(w.samples())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            l1 + 0.5 * fit2
        }
    })
}

#[derive(Default, Clone, Copy)]
struct ThresholdSums {
    weighted_l1: f64,
    u_norm2: f64,
    change2: f64,
}

fn weighted_norm2(v: &[Complex64], row_len: usize, row_weights: &[f64]) -> f64 {
    let partials: Vec<f64> = v
        .par_chunks(row_len)
        .zip(row_weights.par_iter())
        .map(|(row, &m)| m * crate::signal::norm_sqr(row))
        .collect();
    partials.iter().sum()
}

/// `u = soft(z, λ/μ)` in place, with the sums needed for the histories.
fn threshold_pass(
    z: &[Complex64],
    u: &mut [Complex64],
    lambda: &Lambda,
    mu: f64,
    row_len: usize,
    row_weights: &[f64],
) -> ThresholdSums {
    let partials: Vec<ThresholdSums> = u
        .par_chunks_mut(row_len)
        .zip(z.par_chunks(row_len))
        .zip(row_weights.par_iter())
        .enumerate()
        .map(|(row, ((u, z), &m))| {
            let base = row * row_len;
            let mut sums = ThresholdSums::default();
            for (i, (u, &z)) in u.iter_mut().zip(z).enumerate() {
                let lam = lambda.at(base + i);
                let next = soft_threshold(z, lam / mu);
                let mag2 = next.norm_sqr();
                if mag2 > 0.0 {
                    let mag = mag2.sqrt();
                    sums.weighted_l1 += lam * mag;
                    sums.u_norm2 += mag2;
                }
                sums.change2 += (next - *u).norm_sqr();
                *u = next;
            }
            ThresholdSums {
                weighted_l1: m * sums.weighted_l1,
                u_norm2: m * sums.u_norm2,
                change2: m * sums.change2,
            }
        })
        .collect();
    partials.iter().fold(ThresholdSums::default(), |acc, p| ThresholdSums {
        weighted_l1: acc.weighted_l1 + p.weighted_l1,
        u_norm2: acc.u_norm2 + p.u_norm2,
        change2: acc.change2 + p.change2,
    })
}

/// `x = v + γt`, `d = γt`, and `z = x + d`, where `v = u − d_old`.
/// Returns `‖z‖²`.
fn update_pass(
    u: &[Complex64],
    d: &mut [Complex64],
    t: &[Complex64],
    z: &mut [Complex64],
    gamma: f64,
    row_len: usize,
    row_weights: &[f64],
) -> f64 {
    let partials: Vec<f64> = z
        .par_chunks_mut(row_len)
        .zip(d.par_chunks_mut(row_len))
        .zip(u.par_chunks(row_len).zip(t.par_chunks(row_len)))
        .zip(row_weights.par_iter())
        .map(|(((z, d), (u, t)), &m)| {
            let mut norm2 = 0.0;
            for ((z, d), (&u, &t)) in z.iter_mut().zip(d.iter_mut()).zip(u.iter().zip(t)) {
                let step = t * gamma;
                let x = u - *d + step;
                *d = step;
                *z = x + step;
                norm2 += z.norm_sqr();
            }
            m * norm2
        })
        .collect();
    partials.iter().sum()
}

/// Mean of `λ` over the full tensor, counting each stored row by its
/// multiplicity.
fn space_mean(lambda: &Lambda, row_len: usize, row_weights: &[f64]) -> f64 {
    match lambda {
        Lambda::Scalar(v) => *v,
        Lambda::Field(f) => {
            let (sum, count) = f
                .chunks(row_len)
                .zip(row_weights)
                .fold((0.0, 0.0), |(s, c), (row, &w)| {
                    (s + w * row.iter().sum::<f64>(), c + w * row.len() as f64)
                });
            sum / count
        }
    }
}

fn reweighted(u: &[Complex64], epsilon: f64) -> Lambda {
    Lambda::Field(
        u.par_iter()
            .map(|z| 1.0 / (z.norm() + epsilon))
            .collect(),
    )
}
