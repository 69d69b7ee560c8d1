//! Exponential operator splitting for the semi-discrete equation.
//!
//! A scheme with stages `(a_j, b_j)`, `j = 1..s`, advances one step by
//!
//! ```text
//! u <- e^{b_1 B dt} e^{a_1 A dt} ... e^{b_s B dt} e^{a_s A dt} u
//! ```
//!
//! where `A` is the kinetic and `B` the potential part. The rightmost factor
//! is applied first.

use std::collections::HashMap;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{KineticTable, PotentialField};
use crate::spectral::{SpectralState, Transform};

/// Errors below this are treated as roundoff and excluded from order fits.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

const CONSISTENCY_TOL: f64 = 1e-12;

/// Precomputed stage factors are skipped above this many bytes.
const FACTOR_CACHE_BYTES: usize = 1 << 30;

const S9ODR6A_A: [f64; 5] = [
    0.392161444007314,
    0.332599136789359,
    -0.706246172557639,
    0.0822135962935508,
    0.798543990934830,
];
const S9ODR6A_B: [f64; 5] = [
    0.196080722003657,
    0.362380290398337,
    -0.186823517884140,
    -0.312016288132044,
    0.440378793614190,
];

const S17ODR8A_A: [f64; 9] = [
    0.130202483088890,
    0.561162981775108,
    -0.389474962644847,
    0.158841906555156,
    -0.395903894133238,
    0.184539640978316,
    0.258374387686322,
    0.295011723609310,
    -0.605508533830035,
];
const S17ODR8A_B: [f64; 9] = [
    0.0651012415444450,
    0.345682732431999,
    0.0858440095651306,
    -0.115316528044846,
    -0.118530993789041,
    -0.105682126577461,
    0.221457014332319,
    0.276693055647816,
    -0.155248405110362,
];

pub const SCHEME_NAMES: &[&str] = &["strang", "s9odr6a", "s17odr8a"];

/// Ordered stage coefficients of a splitting method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemeDocument", into = "SchemeDocument")]
pub struct SplittingScheme {
    name: String,
    order: u32,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// JSON form `{name, order, a: [...], b: [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeDocument {
    pub name: String,
    pub order: u32,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TryFrom<SchemeDocument> for SplittingScheme {
    type Error = Error;

    fn try_from(doc: SchemeDocument) -> Result<Self> {
        SplittingScheme::new(doc.name, doc.order, doc.a, doc.b)
    }
}

impl From<SplittingScheme> for SchemeDocument {
    fn from(s: SplittingScheme) -> Self {
        Self {
            name: s.name,
            order: s.order,
            a: s.a,
            b: s.b,
        }
    }
}

/// Mirrors the first half of a palindromic table: `[x1..xk]` becomes
/// `[x1..xk, x(k-1)..x1]` when `odd`, `[x1..xk, xk..x1]` otherwise.
fn palindrome(half: &[f64], odd: bool) -> Vec<f64> {
    let mut out = half.to_vec();
    let tail = if odd { &half[..half.len() - 1] } else { half };
    out.extend(tail.iter().rev());
    out
}

impl SplittingScheme {
    pub fn new(name: impl Into<String>, order: u32, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidScheme {
            name: name.clone(),
            reason,
        };
        if a.is_empty() || a.len() != b.len() {
            return Err(invalid(format!(
                "need equal, non-zero stage counts (a: {}, b: {})",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|c| !c.is_finite()) {
            return Err(invalid("non-finite coefficient".into()));
        }
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        if (sa - 1.0).abs() > CONSISTENCY_TOL || (sb - 1.0).abs() > CONSISTENCY_TOL {
            return Err(invalid(format!("coefficients sum to a = {sa}, b = {sb}")));
        }
        if order == 0 {
            return Err(invalid("order must be positive".into()));
        }
        Ok(Self { name, order, a, b })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scheme serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn stages(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

/// Looks up a built-in scheme: `strang`, `s9odr6a` (6th order) or
/// `s17odr8a` (8th order).
pub fn scheme(name: &str) -> Result<SplittingScheme> {
    let (order, a, b) = match name {
        "strang" => (2, vec![1.0, 0.0], vec![0.5, 0.5]),
        "s9odr6a" => {
            let mut a = palindrome(&S9ODR6A_A, true);
            a.push(0.0);
            (6, a, palindrome(&S9ODR6A_B, false))
        }
        "s17odr8a" => {
            let mut a = palindrome(&S17ODR8A_A, true);
            a.push(0.0);
            (8, a, palindrome(&S17ODR8A_B, false))
        }
        other => return Err(Error::UnknownScheme(other.to_string())),
    };
    SplittingScheme::new(name, order, a, b)
}

/// Bookkeeping for one `evolve` call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub steps_taken: u64,
    pub dt: f64,
    pub wall_time: f64,
    pub final_norm: f64,
}

enum Factor {
    Table(Vec<Complex64>),
    Kinetic(f64),
    Potential(f64),
}

/// A fixed-step propagator. Stage factors for the given `dt` are tabulated
/// once, unless they would exceed the memory cap.
pub struct Propagator<'a> {
    kinetic: &'a KineticTable,
    potential: &'a PotentialField,
    epsilon: f64,
    dt: f64,
    transform: Transform,
    scratch: Vec<Complex64>,
    factors: Vec<Factor>,
    /// `(is_kinetic, factor index)` in application order.
    plan: Vec<(bool, usize)>,
}

impl<'a> Propagator<'a> {
    pub fn new(
        scheme: &SplittingScheme,
        kinetic: &'a KineticTable,
        potential: &'a PotentialField,
        epsilon: f64,
        dt: f64,
    ) -> Result<Self> {
        let n = potential.len();
        if kinetic.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: kinetic.len(),
            });
        }
        if !dt.is_finite() {
            return Err(Error::Config(format!("time step must be finite, got {dt}")));
        }
        let mut plan = Vec::new();
        let mut distinct: Vec<(bool, f64)> = Vec::new();
        let mut index: HashMap<(bool, u64), usize> = HashMap::new();
        let mut push = |is_kinetic: bool, c: f64| {
            if c == 0.0 {
                return;
            }
            let idx = *index.entry((is_kinetic, c.to_bits())).or_insert_with(|| {
                distinct.push((is_kinetic, c));
                distinct.len() - 1
            });
            plan.push((is_kinetic, idx));
        };
        for j in (0..scheme.stages()).rev() {
            push(true, scheme.a[j]);
            push(false, scheme.b[j]);
        }

        let tabulate = distinct.len() * n * std::mem::size_of::<Complex64>() <= FACTOR_CACHE_BYTES;
        let scale = 1.0 / n as f64;
        let factors = distinct
            .iter()
            .map(|&(is_kinetic, c)| match (tabulate, is_kinetic) {
                (true, true) => Factor::Table(kinetic.factors(c, dt)),
                (true, false) => Factor::Table(potential.factors(c, dt, epsilon, scale)),
                (false, true) => Factor::Kinetic(c),
                (false, false) => Factor::Potential(c),
            })
            .collect();

        let transform = Transform::new(n);
        let scratch = vec![Complex64::default(); transform.scratch_len()];
        Ok(Self {
            kinetic,
            potential,
            epsilon,
            dt,
            transform,
            scratch,
            factors,
            plan,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of FFT pairs executed per step.
    pub fn potential_stages(&self) -> usize {
        self.plan.iter().filter(|(k, _)| !k).count()
    }

    fn check(&self, state: &SpectralState) -> Result<()> {
        if state.aaset().lattice() != self.potential.lattice() {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    fn step_unchecked(&mut self, state: &mut SpectralState) {
        let data = state.coeffs.as_mut_slice();
        for &(is_kinetic, idx) in &self.plan {
            match &self.factors[idx] {
                Factor::Table(f) if is_kinetic => {
                    data.iter_mut().zip(f).for_each(|(u, m)| *u *= m);
                }
                Factor::Table(f) => {
                    self.transform.inverse_in_place(data, &mut self.scratch);
                    data.iter_mut().zip(f).for_each(|(u, m)| *u *= m);
                    self.transform.forward_unscaled(data, &mut self.scratch);
                }
                Factor::Kinetic(a) => {
                    let s = -a * self.dt;
                    for (u, &p) in data.iter_mut().zip(self.kinetic.phases_base()) {
                        *u *= Complex64::from_polar(1.0, s * p);
                    }
                }
                Factor::Potential(b) => {
                    let s = -b * self.dt / self.epsilon;
                    let scale = 1.0 / data.len() as f64;
                    self.transform.inverse_in_place(data, &mut self.scratch);
                    for (u, &v) in data.iter_mut().zip(self.potential.values()) {
                        *u *= Complex64::from_polar(scale, s * v);
                    }
                    self.transform.forward_unscaled(data, &mut self.scratch);
                }
            }
        }
        state.time += self.dt;
    }

    pub fn step(&mut self, state: &mut SpectralState) -> Result<()> {
        self.check(state)?;
        self.step_unchecked(state);
        Ok(())
    }

    /// Takes `m` steps, aborting if the state stops being finite.
    pub fn evolve(&mut self, state: &mut SpectralState, m: u64) -> Result<EvolutionRecord> {
        self.check(state)?;
        let start = Instant::now();
        let t0 = state.time;
        let mut norm2 = 0.0;
        for k in 0..m {
            self.step_unchecked(state);
            state.time = t0 + (k + 1) as f64 * self.dt;
            norm2 = state.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
            if !norm2.is_finite() {
                return Err(Error::NonFinite { step: k + 1, total: m });
            }
        }
        if m == 0 {
            norm2 = state.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        Ok(EvolutionRecord {
            steps_taken: m,
            dt: self.dt,
            wall_time: start.elapsed().as_secs_f64(),
            final_norm: norm2.sqrt(),
        })
    }
}

/// One splitting step of size `dt`.
pub fn step(
    state: &mut SpectralState,
    scheme: &SplittingScheme,
    kt: &KineticTable,
    pf: &PotentialField,
    dt: f64,
    epsilon: f64,
) -> Result<()> {
    Propagator::new(scheme, kt, pf, epsilon, dt)?.step(state)
}

/// `m` splitting steps of size `dt`.
pub fn evolve(
    state: &mut SpectralState,
    scheme: &SplittingScheme,
    kt: &KineticTable,
    pf: &PotentialField,
    m: u64,
    dt: f64,
    epsilon: f64,
) -> Result<EvolutionRecord> {
    if m == 0 {
        return Err(Error::Config("step count must be at least 1".into()));
    }
    Propagator::new(scheme, kt, pf, epsilon, dt)?.evolve(state, m)
}

/// Least-squares slope of `log err` against `log dt`, ignoring points at or
/// below [`ROUNDOFF_FLOOR`].
pub fn empirical_order(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(dt, err)| *dt > 0.0 && err.is_finite() && *err > ROUNDOFF_FLOOR)
        .map(|&(dt, err)| (dt.ln(), err.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
