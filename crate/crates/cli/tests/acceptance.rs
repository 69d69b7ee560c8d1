//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! Run a subset by passing criterion numbers:
//! `cargo test -p latspec-cli --test acceptance -- 7 8`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use latspec::antialias::build;
use latspec::diagnostics::{circulant_check, commutator_sweep, shifted_antialiasing_set, PowerIteration};
use latspec::experiments::run_convergence_in;
use latspec::operators::{make_gaussian, make_potential};
use latspec::oracle;
use latspec::spectral::{aliasing_oracle, evaluate_series, forward, inverse};
use latspec::splitting::SCHEME_NAMES;
use latspec::{
    cbc_construct, scheme, ConvergenceReport, ExperimentConfig, KineticTable, NodalValues, PotentialKind, Propagator,
    Rank1Lattice, SpectralState,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn describe(report: &ConvergenceReport) -> String {
    let errs: Vec<String> = report.rows.iter().map(|r| format!("{}:{:.2e}", r.m, r.err)).collect();
    let order = report.order.map_or("not fitted".to_string(), |p| format!("{p:.3}"));
    format!("order {order} on {} rows [{}]", report.fitted_rows(), errs.join(" "))
}

fn order_in(report: &ConvergenceReport, lo: f64, hi: f64) -> Outcome {
    let ok = report.order.is_some_and(|p| (lo..=hi).contains(&p));
    check(ok, format!("{} want [{lo}, {hi}]", describe(report)))
}

fn d2_config(scheme: &str) -> ExperimentConfig {
    ExperimentConfig {
        preset: Some("paper-d2".into()),
        potential: PotentialKind::HarmonicV2,
        scheme: scheme.into(),
        epsilon: 1.0,
        final_time: 1.0,
        reference_steps: 4096,
        sweep_steps: vec![8, 16, 32, 64, 128, 256],
        ..ExperimentConfig::default()
    }
}

fn sixth_order_d2(cache: &Path) -> Outcome {
    let report = run_convergence_in(&d2_config("s9odr6a"), Some(cache)).map_err(fail)?;
    order_in(&report, 5.5, 6.5)
}

fn eighth_order_d2(cache: &Path) -> Outcome {
    let mut config = d2_config("s17odr8a");
    let mut report = run_convergence_in(&config, Some(cache)).map_err(fail)?;
    if report.fitted_rows() < 3 {
        config.sweep_steps.splice(0..0, [2, 4]);
        report = run_convergence_in(&config, Some(cache)).map_err(fail)?;
    }
    if report.fitted_rows() < 3 {
        return Err(format!("only {} rows above the floor", report.fitted_rows()));
    }
    order_in(&report, 7.2, 8.8)
}

fn strang_d2(cache: &Path) -> Outcome {
    let report = run_convergence_in(&d2_config("strang"), Some(cache)).map_err(fail)?;
    order_in(&report, 1.7, 2.3)
}

fn sixth_order_d4(cache: &Path) -> Outcome {
    let config = ExperimentConfig {
        preset: Some("paper-d4".into()),
        potential: PotentialKind::SmoothV1,
        scheme: "s9odr6a".into(),
        reference_steps: 1024,
        sweep_steps: vec![8, 16, 32, 64],
        ..ExperimentConfig::default()
    };
    let report = run_convergence_in(&config, Some(cache)).map_err(fail)?;
    order_in(&report, 5.3, 6.7)
}

fn unitarity(_: &Path) -> Outcome {
    let lattice = Rank1Lattice::preset("paper-d2").map_err(fail)?;
    let aa = Arc::new(build(&lattice).map_err(fail)?);
    let kt = KineticTable::new(&aa, 1.0).map_err(fail)?;
    let pf = make_potential(PotentialKind::HarmonicV2, &lattice).map_err(fail)?;
    let mut u = make_gaussian(&aa, 1.0).map_err(fail)?;
    let before = u.l2_norm();
    let s = scheme("s9odr6a").map_err(fail)?;
    Propagator::new(&s, &kt, &pf, 1.0, 1e-3)
        .map_err(fail)?
        .evolve(&mut u, 1000)
        .map_err(fail)?;
    let drift = (u.l2_norm() - before).abs();
    check(drift < 1e-11, format!("norm drift {drift:.2e} after 1000 steps"))
}

fn table_sums(_: &Path) -> Outcome {
    let mut worst = 0.0f64;
    for name in SCHEME_NAMES {
        let s = scheme(name).map_err(fail)?;
        let sa: f64 = s.a().iter().sum();
        let sb: f64 = s.b().iter().sum();
        worst = worst.max((sa - 1.0).abs()).max((sb - 1.0).abs());
    }
    check(worst <= 1e-12, format!("max |sum - 1| = {worst:.2e}"))
}

fn max_rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn transform_oracle(_: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let small = Arc::new(build(&Rank1Lattice::new(vec![1, 45], 256).map_err(fail)?).map_err(fail)?);
    let mut worst_dft = 0.0f64;
    for _ in 0..10 {
        let values = oracle::random_complex(&mut rng, 256);
        let fast = forward(&NodalValues::new(small.clone(), values.clone()).map_err(fail)?);
        worst_dft = worst_dft.max(max_rel_diff(&fast.coeffs, &oracle::direct_dft(&values)));
    }
    let large = Arc::new(build(&cbc_construct(2, 1 << 12).map_err(fail)?).map_err(fail)?);
    let coeffs = oracle::random_complex(&mut rng, 1 << 12);
    let state = SpectralState::new(large, coeffs.clone(), 0.0).map_err(fail)?;
    let round = max_rel_diff(&forward(&inverse(&state)).coeffs, &coeffs);
    check(
        worst_dft <= 1e-12 && round <= 1e-12,
        format!("dft rel err {worst_dft:.2e}, round trip {round:.2e}"),
    )
}

fn random_lattice(rng: &mut ChaCha8Rng, d: usize, n: u64) -> Rank1Lattice {
    let mut z = vec![1];
    z.extend((1..d).map(|_| 2 * rng.gen_range(0..n / 2) + 1));
    Rank1Lattice::new(z, n).unwrap()
}

fn aliasing_identity(_: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lattices = [Rank1Lattice::new(vec![1, 3], 5).map_err(fail)?, random_lattice(&mut rng, 3, 1 << 7)];
    let mut worst = 0.0f64;
    for lattice in &lattices {
        let aa = Arc::new(build(lattice).map_err(fail)?);
        for _ in 0..100 {
            let terms = rng.gen_range(1..=16);
            let series = oracle::random_sparse_series(&mut rng, lattice.dim(), 8, terms);
            let sampled = forward(&NodalValues::sample(aa.clone(), |x| evaluate_series(&series, x)));
            let expected = aliasing_oracle(&series, &aa).map_err(fail)?;
            let diff = sampled
                .coeffs
                .iter()
                .zip(&expected.coeffs)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            worst = worst.max(diff);
        }
    }
    check(
        worst <= 1e-12,
        format!("max deviation {worst:.2e} over 200 polynomials (z3 = {:?})", lattices[1].generator()),
    )
}

fn minimality(_: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let lattices = [
        cbc_construct(2, 1 << 10).map_err(fail)?,
        random_lattice(&mut rng, 2, 1 << 9),
        cbc_construct(3, 1 << 10).map_err(fail)?,
        random_lattice(&mut rng, 3, 1 << 10),
    ];
    for lattice in &lattices {
        let aa = build(lattice).map_err(fail)?;
        let brute = oracle::brute_force_min_norm2(lattice, aa.max_norm2());
        if brute != aa.norms2() {
            return Err(format!("mismatch on z = {:?}, n = {}", lattice.generator(), lattice.n()));
        }
    }
    Ok(format!("{} lattices, every residue minimal", lattices.len()))
}

fn circulant(_: &Path) -> Outcome {
    let mut worst = 0.0f64;
    for (z, n) in [(vec![1u64], 8u64), (vec![1, 3], 5)] {
        let lattice = Rank1Lattice::new(z, n).map_err(fail)?;
        let aa = build(&lattice).map_err(fail)?;
        let pf = make_potential(PotentialKind::SmoothV1, &lattice).map_err(fail)?;
        worst = worst.max(circulant_check(&aa, &pf).map_err(fail)?);
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn commutator_trend(_: &Path) -> Outcome {
    let mut minimal = Vec::new();
    let mut contrast = Vec::new();
    for n in [1u64 << 6, 1 << 8, 1 << 10] {
        let lattice = cbc_construct(2, n).map_err(fail)?;
        let aa = build(&lattice).map_err(fail)?;
        let pf = make_potential(PotentialKind::SmoothV1, &lattice).map_err(fail)?;
        contrast.push((shifted_antialiasing_set(&aa).map_err(fail)?, pf.clone()));
        minimal.push((aa, pf));
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [1, 2] {
        let m = commutator_sweep(&minimal, p, 1.0, PowerIteration::default()).map_err(fail)?;
        let c = commutator_sweep(&contrast, p, 1.0, PowerIteration::default()).map_err(fail)?;
        ok &= m.growth() < 2.0 && c.growth() > 4.0;
        detail.push(format!("p={p}: minimal {:.3}, contrast {:.3e}", m.growth(), c.growth()));
    }
    check(ok, detail.join("; "))
}

fn determinism(cache: &Path) -> Outcome {
    let config = ExperimentConfig {
        scheme: "strang".into(),
        reference_steps: 512,
        sweep_steps: vec![8, 16, 32, 64],
        ..ExperimentConfig::default()
    };
    let config_path = cache.join("determinism.json");
    std::fs::write(&config_path, config.to_json()).map_err(fail)?;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let run = Command::new(env!("CARGO_BIN_EXE_latspec"))
            .args(["converge", "--config"])
            .arg(&config_path)
            .env_remove("LATSPEC_CACHE_DIR")
            .output()
            .map_err(fail)?;
        if !run.status.success() {
            return Err(String::from_utf8_lossy(&run.stderr).into_owned());
        }
        outputs.push(run.stdout);
    }
    check(
        outputs[0] == outputs[1],
        format!("two runs, {} bytes each, identical = {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

type Criterion = fn(&Path) -> Outcome;

const CRITERIA: &[(u32, &str, Criterion)] = &[
    (1, "sixth-order convergence, d=2, v2", sixth_order_d2),
    (2, "eighth-order convergence, d=2, v2", eighth_order_d2),
    (3, "Strang convergence, d=2, v2", strang_d2),
    (4, "sixth-order convergence, d=4, v1", sixth_order_d4),
    (5, "unitarity over 1000 steps", unitarity),
    (6, "splitting coefficient sums", table_sums),
    (7, "transform against direct DFT", transform_oracle),
    (8, "aliasing identity", aliasing_identity),
    (9, "anti-aliasing minimality", minimality),
    (10, "circulant equivalence", circulant),
    (11, "commutator boundedness trend", commutator_trend),
    (12, "deterministic converge output", determinism),
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let cache = tempfile::tempdir().expect("temp dir");
    let mut failed = Vec::new();
    for &(id, title, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run(cache.path());
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {id:>2} {tag} ({secs:.1}s) {title}: {detail}");
        if outcome.is_err() {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
