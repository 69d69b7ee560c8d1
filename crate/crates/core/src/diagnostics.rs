//! Dense desk-scale checks of the multiplication operator `W_n`.
//!
//! `W_n = F_n V_n F_n^{-1}` is circulant in residue space, and for a
//! norm-minimal anti-aliasing set the scaled commutators
//! `ad_D^p(W) (D + I)^{-p}` stay bounded as `n` grows.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::antialias::AntiAliasingSet;
use crate::error::{Error, Result};
use crate::operators::{KineticTable, PotentialField};
use crate::oracle::{circulant_column_from_series, dense_fourier_conjugate};
use crate::spectral::Transform;

pub const COMMUTATOR_MAX_N: u64 = 1 << 12;
pub const CIRCULANT_MAX_N: u64 = 1 << 10;

/// Growth across the sweep below this factor counts as bounded.
pub const BOUNDED_GROWTH: f64 = 2.0;

/// Square row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::default(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// The circulant matrix with entries `column[(i - j) mod n]`.
    pub fn circulant(column: &[Complex64]) -> Self {
        let n = column.len();
        Self::from_fn(n, |i, j| column[(i + n - j) % n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|c| *c *= s);
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::default() {
                    continue;
                }
                for (o, b) in row.iter_mut().zip(&other.data[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self^* x`.
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.n];
        for (row, &xi) in self.data.chunks_exact(self.n).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    /// Replaces `X` by the commutator `[diag(d), X] = diag(d) X - X diag(d)`.
    pub fn commute_with_diagonal(&mut self, d: &[f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] *= d[i] - d[j];
            }
        }
    }

    /// Right-multiplies by `diag(d)`.
    pub fn scale_columns(&mut self, d: &[f64]) {
        for row in self.data.chunks_exact_mut(self.n) {
            row.iter_mut().zip(d).for_each(|(a, &s)| *a *= s);
        }
    }
}

/// Power iteration settings for spectral-norm estimates.
#[derive(Clone, Copy, Debug)]
pub struct PowerIteration {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            max_iter: 50,
            rel_tol: 1e-8,
        }
    }
}

/// Estimates `||M||_2` as the square root of the dominant eigenvalue of
/// `M^* M`, from a fixed pseudo-random start vector.
pub fn spectral_norm(m: &DenseMatrix, opts: PowerIteration) -> f64 {
    let n = m.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut lambda = 0.0;
    for _ in 0..opts.max_iter {
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|c| *c /= norm);
        let w = m.adjoint_matvec(&m.matvec(&v));
        let next = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let done = (next - lambda).abs() <= opts.rel_tol * next;
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    lambda.sqrt()
}

/// Dense `W = (1/eps) F_n V_n F_n^{-1}`, assembled column-by-column from the
/// FFT of the nodal potential.
pub fn dense_potential_operator(pf: &PotentialField, epsilon: f64) -> DenseMatrix {
    let n = pf.len();
    let t = Transform::new(n);
    let mut scratch = vec![Complex64::default(); t.scratch_len()];
    let mut column: Vec<Complex64> = pf.values().iter().map(|&v| Complex64::new(v / epsilon, 0.0)).collect();
    t.forward_in_place(&mut column, &mut scratch);
    DenseMatrix::circulant(&column)
}

/// The matrix `M = ad_D^p(W) (D + I)^{-p}` with `D = (eps/2) D_n`.
pub fn commutator_matrix(aa: &AntiAliasingSet, pf: &PotentialField, p: u32, epsilon: f64) -> Result<DenseMatrix> {
    if aa.lattice() != pf.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let n = aa.lattice().n();
    if n > COMMUTATOR_MAX_N {
        return Err(Error::TooLargeForDense {
            n,
            limit: COMMUTATOR_MAX_N,
        });
    }
    let diag = KineticTable::new(aa, epsilon)?.phases_base().to_vec();
    let mut m = dense_potential_operator(pf, epsilon);
    for _ in 0..p {
        m.commute_with_diagonal(&diag);
    }
    let inv: Vec<f64> = diag.iter().map(|&dk| (dk + 1.0).powi(-(p as i32))).collect();
    m.scale_columns(&inv);
    Ok(m)
}

/// Estimated `||ad_D^p(W) (D + I)^{-p}||_2`.
pub fn commutator_norm(aa: &AntiAliasingSet, pf: &PotentialField, p: u32, epsilon: f64) -> Result<f64> {
    commutator_norm_with(aa, pf, p, epsilon, PowerIteration::default())
}

pub fn commutator_norm_with(
    aa: &AntiAliasingSet,
    pf: &PotentialField,
    p: u32,
    epsilon: f64,
    opts: PowerIteration,
) -> Result<f64> {
    let m = commutator_matrix(aa, pf, p, epsilon)?;
    Ok(spectral_norm(&m, opts))
}

/// Largest elementwise gap between `F_n V_n F_n^{-1}` built by explicit
/// matrix products and the circulant built from the exact Fourier
/// coefficients of the potential.
pub fn circulant_check(aa: &AntiAliasingSet, pf: &PotentialField) -> Result<f64> {
    let series = pf.series().ok_or(Error::NonPolynomialPotential)?;
    let lattice = aa.lattice();
    if lattice != pf.lattice() {
        return Err(Error::LatticeMismatch);
    }
    if lattice.n() > CIRCULANT_MAX_N {
        return Err(Error::TooLargeForDense {
            n: lattice.n(),
            limit: CIRCULANT_MAX_N,
        });
    }
    let dense = dense_fourier_conjugate(pf.values());
    let analytic = DenseMatrix::circulant(&circulant_column_from_series(lattice, series));
    Ok(dense.max_abs_diff(&analytic))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorEntry {
    pub n: u64,
    pub norm: f64,
}

/// Commutator norms over a sweep of lattice sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct CommutatorReport {
    pub p: u32,
    pub n_values: Vec<u64>,
    pub norms: Vec<f64>,
    pub bounded: bool,
}

#[derive(Serialize, Deserialize)]
struct CommutatorJson {
    p: u32,
    entries: Vec<CommutatorEntry>,
    verdict: String,
}

impl CommutatorReport {
    pub fn new(p: u32, n_values: Vec<u64>, norms: Vec<f64>) -> Self {
        let bounded = growth_factor(&norms) < BOUNDED_GROWTH;
        Self {
            p,
            n_values,
            norms,
            bounded,
        }
    }

    /// `max(norms) / norms[0]`.
    pub fn growth(&self) -> f64 {
        growth_factor(&self.norms)
    }

    pub fn to_json(&self) -> String {
        let doc = CommutatorJson {
            p: self.p,
            entries: self
                .n_values
                .iter()
                .zip(&self.norms)
                .map(|(&n, &norm)| CommutatorEntry { n, norm })
                .collect(),
            verdict: if self.bounded { "bounded" } else { "growing" }.into(),
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CommutatorJson = serde_json::from_str(text)?;
        let bounded = match doc.verdict.as_str() {
            "bounded" => true,
            "growing" => false,
            other => return Err(Error::Report(format!("unknown verdict `{other}`"))),
        };
        Ok(Self {
            p: doc.p,
            n_values: doc.entries.iter().map(|e| e.n).collect(),
            norms: doc.entries.iter().map(|e| e.norm).collect(),
            bounded,
        })
    }
}

fn growth_factor(norms: &[f64]) -> f64 {
    match norms.first() {
        Some(&first) if first > 0.0 => norms.iter().fold(0.0, |m: f64, &x| m.max(x)) / first,
        Some(_) if norms.iter().all(|&x| x == 0.0) => 1.0,
        Some(_) => f64::INFINITY,
        None => 1.0,
    }
}

/// Runs `commutator_norm` on each `(set, potential)` pair.
pub fn commutator_sweep(
    cases: &[(AntiAliasingSet, PotentialField)],
    p: u32,
    epsilon: f64,
    opts: PowerIteration,
) -> Result<CommutatorReport> {
    let mut n_values = Vec::new();
    let mut norms = Vec::new();
    for (aa, pf) in cases {
        n_values.push(aa.lattice().n());
        norms.push(commutator_norm_with(aa, pf, p, epsilon, opts)?);
    }
    Ok(CommutatorReport::new(p, n_values, norms))
}

/// A full-cardinality set that is deliberately not norm-minimal: every odd
/// residue's representative is shifted by `n e_1`, which stays in the same
/// residue class.
pub fn shifted_antialiasing_set(aa: &AntiAliasingSet) -> Result<AntiAliasingSet> {
    let lattice = aa.lattice();
    let n = i32::try_from(lattice.n()).map_err(|_| Error::InvalidLattice("n too large".into()))?;
    let mut freq = Vec::with_capacity(aa.len() * aa.dim());
    for (xi, h) in aa.frequencies().enumerate() {
        let mut h = h.to_vec();
        if xi % 2 == 1 {
            h[0] += n;
        }
        freq.extend(h);
    }
    AntiAliasingSet::from_frequencies(lattice, freq)
}
