//! End-to-end acceptance checks. Each prints one PASS/FAIL line; the process
//! fails if any check fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use massroot::density::{default_k, log_density_at, DensityParams};
use massroot::estimator::RatioAccumulator;
use massroot::field::{builtin, FnField, ScalarField, TestProblem};
use massroot::geometry::Domain;
use massroot::harness::{eta_floor, fit_rate, median, run_experiment, sigma_coverage, ConvergenceTrace, RateModel};
use massroot::multiroot::{find_all, MultiRootConfig};
use massroot::samplers::{AdaptiveState, SampleStream};
use massroot::solver::{solve, SolverConfig};

type Check = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn adaptive_cfg(p: &TestProblem, window: usize, budget: usize) -> SolverConfig {
    let mut cfg = SolverConfig::adaptive(p.dim());
    cfg.density = DensityParams::new(p.k(), 1e-8).unwrap();
    cfg.adaptive.update_every = 5;
    cfg.adaptive.window = Some(window);
    cfg.budget = budget;
    cfg
}

fn uniform_rate() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["abs_1d", "sphere_2d", "sphere_3d"] {
        let p = builtin(name).unwrap();
        let n = p.dim();
        let mut cfg = SolverConfig::uniform(n);
        cfg.density = DensityParams::new(default_k(n, 1), 0.0).unwrap();
        cfg.budget = 1_000_000;
        let t = Instant::now();
        let exp = run_experiment(&p, &cfg, &seeds(10)).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let fit = fit_rate(&exp.traces, RateModel::Power).unwrap();
        let target = -1.0 / n as f64;
        let ok = exp.failures.is_empty() && (fit.slope - target).abs() <= 0.3 && secs <= 60.0;
        pass &= ok;
        parts.push(format!("{name} slope {:.3} (target {target:.3}) in {secs:.1}s", fit.slope));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn adaptive_exponential() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["abs_1d", "osc_1d", "kink_1d"] {
        let p = builtin(name).unwrap();
        let exp = run_experiment(&p, &adaptive_cfg(&p, 10, 10_000), &seeds(20)).unwrap();
        let fit = fit_rate(&exp.traces, RateModel::Exponential).unwrap();
        let errors = exp.final_errors();
        let hits = errors.iter().filter(|e| **e <= 1e-4).count();
        let med = median(errors.clone()).unwrap();
        let mut ok = exp.failures.is_empty() && fit.r_squared >= 0.8 && hits * 10 >= 9 * 20;
        if name == "abs_1d" {
            ok &= med <= 1e-6;
        }
        pass &= ok;
        parts.push(format!("{name} r2 {:.3} median {med:.1e} within 1e-4 {hits}/20", fit.r_squared));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn eta_floor_check() -> Verdict {
    let p = builtin("abs_1d").unwrap();
    let cfg = adaptive_cfg(&p, 10, 10_000);
    let floors = eta_floor(&p, &[1e-2, 1e-4, 1e-8], &cfg, &seeds(10)).unwrap();
    let pass = floors.windows(2).all(|w| w[1].1 < w[0].1);
    let detail = floors.iter().map(|(e, f)| format!("eta {e:.0e}: {f:.2e}")).collect::<Vec<_>>().join(", ");
    Verdict { pass, detail }
}

fn five_dimensional() -> Verdict {
    let p = builtin("sphere_5d").unwrap();
    let exp = run_experiment(&p, &adaptive_cfg(&p, 50, 100_000), &seeds(10)).unwrap();
    let med = exp.median_final_error().unwrap();
    let fit = fit_rate(&exp.traces, RateModel::Exponential).unwrap();
    let pass = exp.failures.is_empty() && med <= 1e-3 && fit.r_squared >= 0.7;
    Verdict { pass, detail: format!("median error {med:.2e}, r2 {:.3}", fit.r_squared) }
}

/// A fixed stream of 1000 adaptive-proposal draws on abs_1d with their log-weights.
fn fixed_stream(k: u32) -> Vec<(Vec<f64>, f64)> {
    let p = builtin("abs_1d").unwrap();
    let params = DensityParams::new(k, 1e-8).unwrap();
    let state = AdaptiveState::new(vec![0.58], vec![0.05], vec![1e-12], 10, 5).unwrap();
    let stream = SampleStream::new(123);
    (0..1000)
        .map(|i| {
            let d = state.gaussian_next(&p.domain, &mut stream.rng(i)).unwrap();
            let lw = log_density_at(p.field.as_ref(), &p.domain, &d.point, params).unwrap() - d.log_density;
            (d.point, lw)
        })
        .collect()
}

fn streaming_estimate(samples: &[(Vec<f64>, f64)], shift: f64) -> f64 {
    let mut acc = RatioAccumulator::new(1);
    for (x, lw) in samples {
        acc.consume(x, lw + shift).unwrap();
    }
    acc.estimate().unwrap()[0]
}

fn normalization() -> Verdict {
    let mut worst: f64 = 0.0;
    for k in [1, 5] {
        let s = fixed_stream(k);
        let a = streaming_estimate(&s, 0.0);
        let b = streaming_estimate(&s, 7f64.ln());
        worst = worst.max((a - b).abs() / a.abs());
    }
    Verdict { pass: worst <= 1e-12, detail: format!("max relative change {worst:.1e}") }
}

fn translation() -> Verdict {
    let mut worst: f64 = 0.0;
    for name in ["abs_1d", "sphere_2d", "sphere_3d"] {
        let p = builtin(name).unwrap();
        let n = p.dim();
        for offset in [0.5, -2.0, 10.0] {
            let moved = Domain::new(
                p.domain.lower().iter().map(|l| l + offset).collect(),
                p.domain.upper().iter().map(|u| u + offset).collect(),
            )
            .unwrap();
            let f = p.field.clone();
            let g = FnField::new(n, move |x: &[f64]| f.value(&x.iter().map(|v| v - offset).collect::<Vec<_>>()));
            let mut uni = SolverConfig::uniform(n);
            uni.budget = 20_000;
            for cfg in [adaptive_cfg(&p, 10 * n, 20_000), uni] {
                for seed in 0..3 {
                    let a = solve(p.field.as_ref(), &p.domain, &cfg, seed).unwrap();
                    let b = solve(&g, &moved, &cfg, seed).unwrap();
                    for j in 0..n {
                        worst = worst.max((b.estimate[j] - a.estimate[j] - offset).abs());
                    }
                }
            }
        }
    }
    Verdict { pass: worst <= 1e-12, detail: format!("max deviation from the shift {worst:.1e}") }
}

fn sigma_conservatism() -> Verdict {
    let mut traces: Vec<ConvergenceTrace> = Vec::new();
    for name in ["abs_1d", "osc_1d", "kink_1d"] {
        let p = builtin(name).unwrap();
        traces.extend(run_experiment(&p, &adaptive_cfg(&p, 10, 10_000), &seeds(20)).unwrap().traces);
    }
    let (hits, total) = sigma_coverage(&traces, 0.2);
    let frac = hits as f64 / total as f64;
    Verdict { pass: frac >= 0.8, detail: format!("{hits}/{total} rows with |sigma| >= error ({:.1}%)", 100.0 * frac) }
}

fn multi_root() -> Verdict {
    let p = builtin("two_roots_1d").unwrap();
    let params = DensityParams::new(p.k(), 1e-8).unwrap();
    let cfg = MultiRootConfig { exclusion_radius: Some(0.1), ..Default::default() };
    let found = seeds(20)
        .into_iter()
        .filter(|&s| {
            let out = find_all(p.field.as_ref(), &p.domain, params, &cfg, s).unwrap();
            [0.3, 0.8].iter().all(|r| out.roots.iter().any(|x| (x.location[0] - r).abs() <= 1e-3))
        })
        .count();
    let one = FnField::new(1, |_: &[f64]| 1.0);
    let none = find_all(&one, &Domain::unit(1).unwrap(), DensityParams::new(1, 1e-8).unwrap(), &cfg, 0).unwrap();
    Verdict {
        pass: found * 10 >= 9 * 20 && none.roots.is_empty(),
        detail: format!("both roots in {found}/20 runs; constant function gave {} roots", none.roots.len()),
    }
}

/// `exp(lw)` as an exact rational: `2^q * exp(r)` with `lw = q ln 2 + r`.
fn exact_weight(lw: f64) -> BigRational {
    let q = (lw / std::f64::consts::LN_2).floor();
    let r = lw - q * std::f64::consts::LN_2;
    let mantissa = BigRational::from_float(r.exp()).unwrap();
    let two = BigRational::from_integer(BigInt::from(2));
    let mut scale = BigRational::one();
    for _ in 0..(q.abs() as u32) {
        scale *= &two;
    }
    if q < 0.0 {
        scale = scale.recip();
    }
    mantissa * scale
}

fn oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    // k = 40 puts weights near exp(1470), far past the f64 range
    for k in [1, 5, 40] {
        let s = fixed_stream(k);
        let mut num = BigRational::zero();
        let mut den = BigRational::zero();
        for (x, lw) in &s {
            let w = exact_weight(*lw);
            num += BigRational::from_float(x[0]).unwrap() * &w;
            den += w;
        }
        let exact = (num / den).to_f64().unwrap();
        let streamed = streaming_estimate(&s, 0.0);
        worst = worst.max((streamed - exact).abs() / exact.abs());
    }
    Verdict { pass: worst <= 1e-10, detail: format!("max relative difference {worst:.1e} over k = 1, 5, 40") }
}

fn determinism() -> Verdict {
    let mut identical = true;
    let mut worst: f64 = 0.0;
    for name in ["osc_1d", "sphere_3d"] {
        let p = builtin(name).unwrap();
        let n = p.dim();
        let mut uni = SolverConfig::uniform(n);
        uni.budget = 50_000;
        for cfg in [adaptive_cfg(&p, 10 * n, 50_000), uni] {
            let csv = |c: &SolverConfig| {
                let run = solve(p.field.as_ref(), &p.domain, c, 77).unwrap();
                (ConvergenceTrace::from_run(&run, Some(&p)).to_csv_string().unwrap(), run)
            };
            let (a, run1) = csv(&cfg);
            let (b, _) = csv(&cfg);
            identical &= a == b;
            let mut multi = cfg.clone();
            multi.workers = 4;
            let run4 = solve(p.field.as_ref(), &p.domain, &multi, 77).unwrap();
            for (x, y) in run1.estimate.iter().zip(&run4.estimate) {
                worst = worst.max((x - y).abs() / x.abs());
            }
        }
    }
    Verdict {
        pass: identical && worst <= 1e-12,
        detail: format!("csv identical: {identical}; 4 workers vs 1: {worst:.1e} relative"),
    }
}

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("uniform sampling rate", uniform_rate),
        ("adaptive exponential convergence", adaptive_exponential),
        ("eta floor", eta_floor_check),
        ("5-D convergence", five_dimensional),
        ("normalization independence", normalization),
        ("translation equivariance", translation),
        ("sigma conservatism", sigma_conservatism),
        ("multi-root discovery", multi_root),
        ("estimator oracle equivalence", oracle),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name}: {} ({:.1}s)", i + 1, v.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
