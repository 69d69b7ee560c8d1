//! Desk-scale invariant checks, runnable from the CLI on a fresh install.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::antialias::build;
use crate::diagnostics::{circulant_check, commutator_sweep, PowerIteration};
use crate::lattice::{cbc_construct, Rank1Lattice};
use crate::operators::{make_gaussian, make_potential, KineticTable, PotentialField, PotentialKind};
use crate::oracle;
use crate::spectral::{aliasing_oracle, forward, inverse, NodalValues, SpectralState};
use crate::splitting::{scheme, Propagator, SCHEME_NAMES};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("lattice-axes-distinct", axes_distinct),
    ("aaset-minimal", aaset_minimal),
    ("forward-matches-dft", forward_matches_dft),
    ("round-trip", round_trip),
    ("aliasing-identity", aliasing_identity),
    ("circulant-structure", circulant_structure),
    ("scheme-consistency", scheme_consistency),
    ("unitarity", unitarity),
    ("strang-reversible", strang_reversible),
    ("commutator-bounded", commutator_bounded),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check, or only those whose name contains `filter`.
pub fn run(filter: Option<&str>) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .filter(|(name, _)| filter.is_none() || filter.is_some_and(|f| name.contains(f)))
        .map(|&(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn axes_distinct() -> Result<String, String> {
    let lattice = cbc_construct(3, 1024).map_err(err)?;
    for j in 0..3 {
        let mut seen: Vec<u64> = lattice.all_points().map(|p| p.numerators[j]).collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != 1024 {
            return Err(format!("axis {j} has {} distinct values", seen.len()));
        }
    }
    Ok(format!("z = {:?}", lattice.generator()))
}

fn aaset_minimal() -> Result<String, String> {
    for (z, n) in [(vec![1u64, 3], 5u64), (vec![1, 181], 1024), (vec![1, 35, 149], 512)] {
        let lattice = Rank1Lattice::new(z, n).map_err(err)?;
        let aa = build(&lattice).map_err(err)?;
        aa.verify()?;
        let brute = oracle::brute_force_min_norm2(&lattice, aa.max_norm2());
        if brute != aa.norms2() {
            return Err(format!("norms differ from brute force on n = {n}"));
        }
    }
    Ok("matches brute force on three lattices".into())
}

fn forward_matches_dft() -> Result<String, String> {
    let lattice = Rank1Lattice::new(vec![1, 37], 256).map_err(err)?;
    let aa = Arc::new(build(&lattice).map_err(err)?);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values = oracle::random_complex(&mut rng, 256);
    let fast = forward(&NodalValues::new(aa, values.clone()).map_err(err)?);
    let slow = oracle::direct_dft(&values);
    let e = max_diff(&fast.coeffs, &slow);
    ensure(e < 1e-12, format!("max deviation {e:.2e}"))
}

fn round_trip() -> Result<String, String> {
    let lattice = cbc_construct(2, 1 << 12).map_err(err)?;
    let aa = Arc::new(build(&lattice).map_err(err)?);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let coeffs = oracle::random_complex(&mut rng, 1 << 12);
    let state = SpectralState::new(aa, coeffs.clone(), 0.0).map_err(err)?;
    let back = forward(&inverse(&state));
    let e = max_diff(&back.coeffs, &coeffs);
    ensure(e < 1e-13, format!("max deviation {e:.2e}"))
}

fn aliasing_identity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for (z, n) in [(vec![1u64, 3], 5u64), (vec![1, 35, 149], 128)] {
        let lattice = Rank1Lattice::new(z, n).map_err(err)?;
        let aa = Arc::new(build(&lattice).map_err(err)?);
        for _ in 0..20 {
            let series = oracle::random_sparse_series(&mut rng, lattice.dim(), 6, 12);
            let sampled = NodalValues::sample(aa.clone(), |x| crate::spectral::evaluate_series(&series, x));
            let fast = forward(&sampled);
            let expected = aliasing_oracle(&series, &aa).map_err(err)?;
            worst = worst.max(max_diff(&fast.coeffs, &expected.coeffs));
        }
    }
    ensure(worst < 1e-12, format!("max deviation {worst:.2e}"))
}

fn circulant_structure() -> Result<String, String> {
    let mut worst = 0.0f64;
    for (z, n) in [(vec![1u64], 8u64), (vec![1, 3], 5), (vec![1, 37], 64)] {
        let lattice = Rank1Lattice::new(z, n).map_err(err)?;
        let aa = build(&lattice).map_err(err)?;
        let pf = make_potential(PotentialKind::SmoothV1, &lattice).map_err(err)?;
        worst = worst.max(circulant_check(&aa, &pf).map_err(err)?);
    }
    ensure(worst < 1e-12, format!("max deviation {worst:.2e}"))
}

fn scheme_consistency() -> Result<String, String> {
    for name in SCHEME_NAMES {
        let s = scheme(name).map_err(err)?;
        let sa: f64 = s.a().iter().sum();
        let sb: f64 = s.b().iter().sum();
        if (sa - 1.0).abs() > 1e-12 || (sb - 1.0).abs() > 1e-12 {
            return Err(format!("{name}: sums {sa}, {sb}"));
        }
    }
    Ok(format!("{} schemes", SCHEME_NAMES.len()))
}

fn desk_problem() -> Result<(Arc<crate::AntiAliasingSet>, KineticTable, PotentialField, SpectralState), String> {
    let lattice = cbc_construct(2, 1 << 10).map_err(err)?;
    let aa = Arc::new(build(&lattice).map_err(err)?);
    let kt = KineticTable::new(&aa, 0.5).map_err(err)?;
    let pf = make_potential(PotentialKind::HarmonicV2, &lattice).map_err(err)?;
    let u0 = make_gaussian(&aa, 0.5).map_err(err)?;
    Ok((aa, kt, pf, u0))
}

fn unitarity() -> Result<String, String> {
    let (_, kt, pf, u0) = desk_problem()?;
    let mut worst = 0.0f64;
    for name in SCHEME_NAMES {
        let s = scheme(name).map_err(err)?;
        let mut u = u0.clone();
        Propagator::new(&s, &kt, &pf, 0.5, 1e-2)
            .map_err(err)?
            .evolve(&mut u, 100)
            .map_err(err)?;
        worst = worst.max((u.l2_norm() - u0.l2_norm()).abs());
    }
    ensure(worst < 1e-11, format!("max norm drift {worst:.2e}"))
}

fn strang_reversible() -> Result<String, String> {
    let (_, kt, pf, u0) = desk_problem()?;
    let s = scheme("strang").map_err(err)?;
    let mut u = u0.clone();
    Propagator::new(&s, &kt, &pf, 0.5, 0.01).map_err(err)?.step(&mut u).map_err(err)?;
    Propagator::new(&s, &kt, &pf, 0.5, -0.01).map_err(err)?.step(&mut u).map_err(err)?;
    let e = max_diff(&u.coeffs, &u0.coeffs);
    ensure(e < 1e-12, format!("max deviation {e:.2e}"))
}

fn commutator_bounded() -> Result<String, String> {
    let cases = [64u64, 256]
        .iter()
        .map(|&n| {
            let lattice = cbc_construct(2, n)?;
            let aa = build(&lattice)?;
            let pf = make_potential(PotentialKind::SmoothV1, &lattice)?;
            Ok((aa, pf))
        })
        .collect::<crate::Result<Vec<_>>>()
        .map_err(err)?;
    let report = commutator_sweep(&cases, 1, 1.0, PowerIteration::default()).map_err(err)?;
    ensure(report.bounded, format!("growth {:.3}", report.growth()))
}
