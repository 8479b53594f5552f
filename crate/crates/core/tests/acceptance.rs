//! Acceptance criteria. Each prints one PASS/FAIL line; the process fails if
//! any criterion fails. Arguments select criteria by number.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use espframe::coeffs::CoeffTensor;
use espframe::envelopes::{exponential_set, gaussian_set, log_grid, EnvelopeSet};
use espframe::estimation::{estimate_resonance, EstimateSource};
use espframe::experiment::{cmd_sweep, ExperimentConfig, FrameKind};
use espframe::frame::EspFrame;
use espframe::prony::{prony_estimate, select_pole, PronyConfig};
use espframe::signal::{add_white_noise, QualityReport, Signal};
use espframe::solver::{lambda_max, objective, solve, solve_observed, time_shift_weights, Lambda, Mode, SolveConfig};
use espframe::synth::{
    reference_signal, resonant_impulse_response, single_atom_signal, ResidueMode, ResonanceSpec,
    REFERENCE_IMPULSE, REFERENCE_SAMPLE_RATE,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

const FS: f64 = REFERENCE_SAMPLE_RATE;
/// Sample rate of the 1024-sample, 70.25 ms tap recordings.
const TAP_FS: f64 = 1024.0 / 70.25e-3;

fn gaussian_grid() -> Vec<f64> {
    log_grid(0.5, -4.0, 5)
}

fn exponential_grid() -> Vec<f64> {
    log_grid(0.2, -4.0, 9)
}

fn tap_grid() -> Vec<f64> {
    log_grid(0.25, -3.0, 11)
}

fn exponential_frame(n: usize) -> EspFrame {
    EspFrame::new(exponential_set(n, FS, &exponential_grid()).unwrap().parseval_normalize().unwrap(), FS).unwrap()
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn c1_tight_frame_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let n = [16, 64, 128][trial % 3];
        let l = [1, 3, 5][(trial / 3) % 3];
        let envs: Vec<Vec<Complex64>> = (0..l).map(|_| random_complex(&mut rng, n)).collect();
        let alpha = n as f64 * envs.iter().map(|e| norm(e).powi(2)).sum::<f64>();
        let frame = EspFrame::new(EnvelopeSet::from_values(envs).unwrap(), 1.0).unwrap();
        let w = Signal::new(random_complex(&mut rng, n), 1.0).unwrap();
        let c = frame.analysis_direct(&w).unwrap();
        let energy = norm(c.data()).powi(2);
        let target = alpha * w.norm().powi(2);
        worst = worst.max((energy - target).abs() / target);
    }
    (worst <= 1e-9, format!("max relative deviation {worst:.2e} (tol 1e-9) over 50 trials"))
}

fn c2_parseval_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_alpha: f64 = 0.0;
    let mut worst_err: f64 = 0.0;
    for n in [500, 1000, 1024] {
        let sets = [
            gaussian_set(n, FS, &gaussian_grid()).unwrap(),
            exponential_set(n, FS, &exponential_grid()).unwrap(),
            exponential_set(n, TAP_FS, &tap_grid()).unwrap(),
        ];
        for (set, fs) in sets.into_iter().zip([FS, FS, TAP_FS]) {
            let frame = EspFrame::new(set.parseval_normalize().unwrap(), fs).unwrap();
            worst_alpha = worst_alpha.max((frame.alpha() - 1.0).abs());
            let w = Signal::new(random_complex(&mut rng, n), fs).unwrap();
            let back = frame.synthesis(&frame.analysis(&w).unwrap()).unwrap();
            worst_err = worst_err.max(dist(back.samples(), w.samples()) / w.norm());
        }
    }
    (
        worst_alpha <= 1e-10 && worst_err <= 1e-9,
        format!("max |alpha - 1| {worst_alpha:.2e} (tol 1e-10), max reconstruction error {worst_err:.2e} (tol 1e-9)"),
    )
}

fn c3_fft_matches_direct() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(2..=128);
        let l = rng.gen_range(1..=4);
        let envs: Vec<Vec<Complex64>> = (0..l).map(|_| random_complex(&mut rng, n)).collect();
        let frame = EspFrame::new(EnvelopeSet::from_values(envs).unwrap(), 1.0).unwrap();
        let w = Signal::new(random_complex(&mut rng, n), 1.0).unwrap();
        let fast = frame.analysis(&w).unwrap();
        let direct = frame.analysis_direct(&w).unwrap();
        let d = fast
            .data()
            .iter()
            .zip(direct.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(d / w.norm());
    }
    (worst <= 1e-9, format!("max |fft - direct| / |w| = {worst:.2e} (tol 1e-9) over 20 trials"))
}

fn percentile_999(c: &CoeffTensor) -> f64 {
    let mut mags: Vec<f64> = c.data().iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let rank = (0.999 * mags.len() as f64).ceil() as usize;
    mags[rank - 1]
}

fn c4_single_atom_recovery() -> Outcome {
    let frame = EspFrame::new(gaussian_set(500, FS, &gaussian_grid()).unwrap().parseval_normalize().unwrap(), FS).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    // 15 kHz, sigma 10 ms, 0.5 ms shift and 20 kHz, sigma 1 ms, 1 ms shift
    for atom in [(4, 75, 50), (2, 100, 100)] {
        let w = single_atom_signal(&frame, atom.0, atom.1, atom.2).unwrap();
        let r = solve(&frame, &w, &SolveConfig::bp(Lambda::Scalar(1.0), 1000).with_reweight(50.0, 1)).unwrap();
        let c = &r.coefficients;
        let (i, peak) = c
            .data()
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, z)| if z.norm() > b.1 { (i, z.norm()) } else { b });
        let background = percentile_999(c);
        let db = if background > 0.0 { 20.0 * (peak / background).log10() } else { f64::INFINITY };
        let at = c.unravel(i);
        ok &= at == atom && db >= 80.0;
        details.push(format!("{atom:?} -> peak {at:?}, {db:.1} dB over 99.9th pct"));
    }
    (ok, format!("{} (need exact index, >= 80 dB)", details.join("; ")))
}

fn c5_lambda_max_nullity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let esp = exponential_frame(1000);
    let gauss = EspFrame::new(gaussian_set(500, FS, &gaussian_grid()).unwrap().parseval_normalize().unwrap(), FS).unwrap();
    let random_real: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cases: Vec<(&str, &EspFrame, Signal)> = vec![
        ("synthetic", &esp, reference_signal()),
        ("noisy synthetic", &esp, add_white_noise(&reference_signal(), 10.0, 5).unwrap()),
        ("random real", &esp, Signal::from_real(&random_real, FS).unwrap()),
        ("random complex", &gauss, Signal::new(random_complex(&mut rng, 500), FS).unwrap()),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, frame, w) in cases {
        let lm = lambda_max(frame, &w).unwrap();
        let tol = 1e-6 * lm;
        let mut reached = None;
        let r = solve_observed(frame, &w, &SolveConfig::bpd(Lambda::Scalar(lm), 500), |s| {
            let sup = s.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if reached.is_none() && sup <= tol {
                reached = Some(s.iteration);
            }
        })
        .unwrap();
        let final_sup = r.coefficients.max_abs() / lm;
        ok &= reached.is_some() && final_sup <= 1e-6;
        let lambda = Lambda::Scalar(lm);
        let f_end = objective(frame, &w, &r.coefficients, &lambda, Mode::Bpd).unwrap();
        let f_zero = objective(frame, &w, &CoeffTensor::zeros(frame.shape()), &lambda, Mode::Bpd).unwrap();
        details.push(format!(
            "{name}: zero from iteration {}, final sup {final_sup:.1e} of lambda_max, objective {:+.1e} relative to zero",
            reached.map_or("never".to_string(), |i| i.to_string()),
            (f_end - f_zero) / f_zero
        ));
    }
    (ok, format!("{} (tol 1e-6 |Aw|inf, 500 iterations)", details.join("; ")))
}

fn c6_synthetic_denoising() -> Outcome {
    let h = reference_signal();
    let frame = exponential_frame(h.len());
    let mut gains = Vec::new();
    let mut sparsities = Vec::new();
    for seed in 1..=5u64 {
        let noisy = add_white_noise(&h, 10.0, seed).unwrap();
        let lambda = 0.1 * lambda_max(&frame, &noisy).unwrap();
        let r = solve(&frame, &noisy, &SolveConfig::bpd(Lambda::Scalar(lambda), 1000)).unwrap();
        let recon = frame.synthesis(&r.coefficients).unwrap();
        let q = QualityReport::evaluate(&recon, &h, r.coefficients.data()).unwrap();
        gains.push(q.reconstructed_snr_db - 10.0);
        sparsities.push(q.sparsity_percent);
    }
    let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
    let min_sparsity = sparsities.iter().copied().fold(f64::INFINITY, f64::min);
    (
        mean_gain >= 3.0 && min_sparsity >= 99.9,
        format!(
            "mean gain {mean_gain:.2} dB (need >= 3), gains {:?}, min sparsity {min_sparsity:.3}% (need >= 99.9)",
            gains.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>()
        ),
    )
}

/// ESP solves per sweep cell. Enough iterations for the solution at small
/// λ to settle (early iterates are over-shrunk by the μ heuristic), within
/// the time budget for 120 ESP cells.
const SWEEP_ITERATIONS: usize = 200;

fn c7_esp_beats_stft() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
        [solver]
        max_iterations = {SWEEP_ITERATIONS}
        [noise]
        snr_db = [0.0, 15.0, 30.0]
        base_seed = 1
        realizations = 5
        [sweep]
        range = {{ min = 1e-5, max = 1.0, points = 8 }}
        frames = ["esp", "stft"]
        [output]
        dir = "{}"
        "#,
        dir.path().display()
    );
    let report = cmd_sweep(&ExperimentConfig::from_toml_str(&text).unwrap()).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for snr in [0.0, 15.0, 30.0] {
        let esp = report.summary(FrameKind::Esp, snr).unwrap().gain_db;
        let stft = report.summary(FrameKind::Stft, snr).unwrap().gain_db;
        ok &= esp >= stft;
        details.push(format!("{snr} dB: ESP {esp:.2} vs STFT {stft:.2}"));
    }
    (ok, format!("max-over-lambda mean gain, 5 seeds, 8 fractions: {}", details.join("; ")))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c8_prony() -> Outcome {
    let h = reference_signal();
    let bands = [(4_000.0, 6_000.0), (12_000.0, 14_000.0)];
    let truth = [(5_000.0, 3e-3), (13_000.0, 0.8e-3)];
    let paper_biased = [(5_030.0, 4.46e-3), (12_860.0, 1.21e-3)];

    let shifted = prony_estimate(&h, &PronyConfig::new(4).with_shift(REFERENCE_IMPULSE)).unwrap();
    let mut exact = true;
    let mut shifted_text = Vec::new();
    for (band, (f, tau)) in bands.iter().zip(truth) {
        let p = select_pole(&shifted, *band).unwrap();
        exact &= rel(p.frequency, f) <= 1e-6 && rel(p.time_constant, tau) <= 1e-6;
        shifted_text.push(format!("{:.2} Hz/{:.4} ms", p.frequency, p.time_constant * 1e3));
    }

    let unshifted = prony_estimate(&h, &PronyConfig::new(4)).unwrap();
    let mut biased = true;
    let mut unshifted_text = Vec::new();
    for (band, (f, tau)) in bands.iter().zip(paper_biased) {
        match select_pole(&unshifted, *band) {
            Ok(p) => {
                biased &= rel(p.frequency, f) <= 0.01 && rel(p.time_constant, tau) <= 0.10;
                unshifted_text.push(format!("{:.2} Hz/{:.4} ms", p.frequency, p.time_constant * 1e3));
            }
            Err(_) => {
                biased = false;
                unshifted_text.push("none in band".into());
            }
        }
    }
    (
        exact && biased,
        format!(
            "shifted {} (exact to 1e-6: {exact}); unshifted {} vs expected 5030 Hz/4.46 ms, 12860 Hz/1.21 ms within 1%/10%: {biased}",
            shifted_text.join(", "),
            unshifted_text.join(", ")
        ),
    )
}

fn c9_esp_estimation() -> Outcome {
    let h = reference_signal();
    let frame = exponential_frame(h.len());
    let c = frame.analysis(&h).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for (band, f, tau) in [((4_000.0, 6_000.0), 5_000.0, 2.52e-3), ((12_000.0, 14_000.0), 13_000.0, 0.633e-3)] {
        let e = estimate_resonance(&c, band, &frame, None, EstimateSource::Unregularized).unwrap();
        ok &= e.frequency == f && rel(e.time_constant, tau) <= 0.15;
        details.push(format!("{:.1} Hz / {:.4} ms (ref {:.3} ms)", e.frequency, e.time_constant * 1e3, tau * 1e3));
    }
    (ok, format!("{} (frequency exact, tau within 15%)", details.join("; ")))
}

fn c10_interpolation_beats_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let n = 1000;
    let taus = exponential_grid();
    let frame = exponential_frame(n);
    let mut wins = 0;
    let mut misses = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for _ in 0..20 {
        // strictly inside a grid cell, away from the outermost envelopes
        let cell = rng.gen_range(1..taus.len() - 2);
        let t: f64 = rng.gen_range(0.1..0.9);
        let tau = 10f64.powf(taus[cell].log10() * (1.0 - t) + taus[cell + 1].log10() * t);
        let f = rng.gen_range(2_000.0..40_000.0);
        let h = resonant_impulse_response(&[ResonanceSpec::new(f, tau)], n, FS, 0, ResidueMode::Direct).unwrap();
        let c = frame.analysis(&h).unwrap();
        let band = (f - 200.0, f + 200.0);
        let e = estimate_resonance(&c, band, &frame, None, EstimateSource::Unregularized).unwrap();
        let interp = (e.time_constant / tau).ln().abs();
        let grid = taus.iter().map(|g| (g / tau).ln().abs()).fold(f64::INFINITY, f64::min);
        if interp <= grid {
            wins += 1;
        } else {
            misses.push(format!("tau {:.3} ms f {f:.0} Hz -> {:.3} ms", tau * 1e3, e.time_constant * 1e3));
        }
        worst_margin = worst_margin.min(grid - interp);
    }
    (
        wins == 20,
        format!(
            "interpolated log-tau error within nearest-grid error in {wins}/20 (smallest margin {worst_margin:.3}){}",
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join(", ")) }
        ),
    )
}

fn early_fraction(c: &CoeffTensor, cutoff: usize) -> f64 {
    let cols = c.shape().2;
    let total: f64 = c.data().iter().map(|z| z.norm_sqr()).sum();
    let early: f64 = c
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % cols < cutoff)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    early / total
}

fn nonzero(c: &CoeffTensor) -> usize {
    c.data().iter().filter(|z| z.norm() > 0.0).count()
}

fn c11_weighted_prior() -> Outcome {
    let (n, fs, iterations) = (512, 16_000.0, 400);
    let frame = EspFrame::new(exponential_set(n, fs, &tap_grid()).unwrap().parseval_normalize().unwrap(), fs).unwrap();
    let h = resonant_impulse_response(&[ResonanceSpec::new(4_800.0, 10e-3)], n, fs, 0, ResidueMode::Direct).unwrap();
    let noisy = add_white_noise(&h, 10.0, 11).unwrap();
    let lm = lambda_max(&frame, &noisy).unwrap();

    let weights = time_shift_weights(frame.shape(), 10, 0.1, 0.2).unwrap();
    let field = Lambda::Field(weights.iter().map(|w| w * lm).collect());
    let weighted = solve(&frame, &noisy, &SolveConfig::bpd(field, iterations)).unwrap();
    let target = nonzero(&weighted.coefficients);
    let weighted_early = early_fraction(&weighted.coefficients, 10);

    // scalar penalty with the same number of nonzero coefficients
    let (mut lo, mut hi) = (1e-4 * lm, lm);
    let mut best: Option<(usize, CoeffTensor)> = None;
    for _ in 0..14 {
        let mid = (lo * hi).sqrt();
        let r = solve(&frame, &noisy, &SolveConfig::bpd(Lambda::Scalar(mid), iterations)).unwrap();
        let count = nonzero(&r.coefficients);
        let better = best.as_ref().map_or(true, |(c, _)| count.abs_diff(target) < c.abs_diff(target));
        if count > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if better {
            best = Some((count, r.coefficients));
        }
        if count == target {
            break;
        }
    }
    let (count, plain) = best.unwrap();
    let plain_early = early_fraction(&plain, 10);
    (
        weighted_early >= 0.9 && plain_early < 0.9,
        format!(
            "energy at m < 10: weighted {:.1}% ({target} nonzero), unweighted {:.1}% ({count} nonzero); need >= 90% vs < 90%",
            100.0 * weighted_early,
            100.0 * plain_early
        ),
    )
}

fn c12_sweep_determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let outputs: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| {
            let text = format!(
                r#"
                [solver]
                max_iterations = 15
                [noise]
                snr_db = [10.0, 0.0]
                seeds = [3, 1]
                [sweep]
                lambda_fractions = [0.3, 0.05]
                frames = ["stft", "esp"]
                [output]
                dir = "{}"
                "#,
                d.path().display()
            );
            let config = ExperimentConfig::from_toml_str(&text).unwrap();
            std::fs::read(cmd_sweep(&config).unwrap().path).unwrap()
        })
        .collect();
    let same = outputs[0] == outputs[1];
    (same && !outputs[0].is_empty(), format!("two runs, {} bytes each, identical: {same}", outputs[0].len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "tight-frame identity", c1_tight_frame_identity),
        (2, "Parseval and perfect reconstruction", c2_parseval_reconstruction),
        (3, "FFT analysis equals direct analysis", c3_fft_matches_direct),
        (4, "single-atom sparse recovery", c4_single_atom_recovery),
        (5, "lambda_max gives the zero solution", c5_lambda_max_nullity),
        (6, "synthetic denoising", c6_synthetic_denoising),
        (7, "ESP gain >= STFT gain", c7_esp_beats_stft),
        (8, "Prony shifted/unshifted", c8_prony),
        (9, "ESP peak estimation", c9_esp_estimation),
        (10, "tau interpolation beats the grid", c10_interpolation_beats_grid),
        (11, "weighted BPD time prior", c11_weighted_prior),
        (12, "sweep determinism", c12_sweep_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let filtered = std::env::args().skip(1).any(|a| !a.starts_with('-'));
    let mut failures = 0;
    for (id, name, run) in criteria {
        if filtered && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
