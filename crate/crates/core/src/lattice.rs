//! Rank-1 lattice point sets `{ z k / n mod 1 : k = 0..n-1 }`.
//!
//! Coordinates are kept as integer numerators over `n`; they are converted to
//! floating point only when a function is evaluated at a point.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named generating vectors shipped with the crate, as `(name, n, z)`.
///
/// These are the CBC vectors for the unweighted Korobov space with `alpha = 1`
/// used in the published 2-, 4-, 6- and 8-dimensional convergence runs.
pub const PRESETS: &[(&str, u64, &[u64])] = &[
    ("paper-d2", 1 << 16, &[1, 100135]),
    ("paper-d4", 1 << 20, &[1, 443165, 95693, 34519]),
    (
        "paper-d6",
        1 << 24,
        &[1, 6422017, 7370323, 2765761, 8055041, 2959639],
    ),
    (
        "paper-d8",
        1 << 24,
        &[1, 6422017, 7370323, 2765761, 8055041, 2959639, 7161203, 4074015],
    ),
];

/// A rank-1 lattice with generating vector `z` and modulus `n`.
///
/// Components of `z` are stored reduced modulo `n` and are coprime to `n`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LatticeDescription", into = "LatticeDescription")]
pub struct Rank1Lattice {
    z: Vec<u64>,
    n: u64,
}

/// JSON form of a lattice, `{d, n, z}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeDescription {
    pub d: usize,
    pub n: u64,
    pub z: Vec<u64>,
}

impl TryFrom<LatticeDescription> for Rank1Lattice {
    type Error = Error;

    fn try_from(desc: LatticeDescription) -> Result<Self> {
        if desc.z.len() != desc.d {
            return Err(Error::DimensionMismatch {
                expected: desc.d,
                got: desc.z.len(),
            });
        }
        Rank1Lattice::new(desc.z, desc.n)
    }
}

impl From<Rank1Lattice> for LatticeDescription {
    fn from(lattice: Rank1Lattice) -> Self {
        LatticeDescription {
            d: lattice.dim(),
            n: lattice.n,
            z: lattice.z,
        }
    }
}

impl fmt::Debug for Rank1Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rank1Lattice(n={}, z={:?})", self.n, self.z)
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rank1Lattice {
    /// Builds a lattice, reducing every component of `z` modulo `n`.
    pub fn new(z: Vec<u64>, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidLattice("modulus must be positive".into()));
        }
        if z.is_empty() {
            return Err(Error::InvalidLattice("dimension must be positive".into()));
        }
        if n > i32::MAX as u64 {
            return Err(Error::InvalidLattice(format!("modulus {n} is too large")));
        }
        let z: Vec<u64> = z.into_iter().map(|c| c % n).collect();
        if let Some((j, c)) = z.iter().enumerate().find(|(_, &c)| gcd(c, n) != 1) {
            return Err(Error::InvalidLattice(format!(
                "component z[{j}] = {c} is not coprime to n = {n}"
            )));
        }
        Ok(Self { z, n })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, n, z) = PRESETS
            .iter()
            .find(|(p, _, _)| *p == name)
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
        Self::new(z.to_vec(), *n)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("lattice serializes")
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of points as a `usize`, for sizing buffers.
    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generator(&self) -> &[u64] {
        &self.z
    }

    pub fn point(&self, k: u64) -> Result<LatticePoint> {
        if k >= self.n {
            return Err(Error::IndexOutOfRange { k, n: self.n });
        }
        Ok(self.point_unchecked(k))
    }

    fn point_unchecked(&self, k: u64) -> LatticePoint {
        LatticePoint {
            k,
            numerators: self.z.iter().map(|&zj| zj * k % self.n).collect(),
            n: self.n,
        }
    }

    /// All `n` points in index order.
    pub fn all_points(&self) -> impl ExactSizeIterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |k| self.point_unchecked(k as u64))
    }

    /// Writes the floating-point coordinates of point `k` into `out`.
    ///
    /// `k` must be below `n`; `out` must have length `d`.
    pub fn coords_into(&self, k: u64, out: &mut [f64]) {
        debug_assert!(k < self.n);
        let inv_n = 1.0 / self.n as f64;
        for (x, &zj) in out.iter_mut().zip(&self.z) {
            *x = (zj * k % self.n) as f64 * inv_n;
        }
    }

    /// Evaluates `f` at every lattice point, in index order.
    pub fn sample<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        (0..self.n)
            .into_par_iter()
            .map_init(
                || vec![0.0; self.dim()],
                |buf, k| {
                    self.coords_into(k, buf);
                    f(buf)
                },
            )
            .collect()
    }

    /// The residue class `h . z mod n` of an integer frequency vector.
    pub fn residue(&self, h: &[i64]) -> Result<u64> {
        if h.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: h.len(),
            });
        }
        Ok(self.residue_unchecked(h.iter().copied()))
    }

    pub(crate) fn residue_unchecked(&self, h: impl Iterator<Item = i64>) -> u64 {
        let n = self.n as i128;
        let dot: i128 = h
            .zip(&self.z)
            .map(|(hj, &zj)| hj as i128 * zj as i128)
            .sum();
        dot.rem_euclid(n) as u64
    }

    /// Whether `h` lies in the dual lattice, i.e. `h . z = 0 (mod n)`.
    pub fn in_dual(&self, h: &[i64]) -> Result<bool> {
        Ok(self.residue(h)? == 0)
    }

    /// A stable 64-bit fingerprint of `(n, z)`, used to key cache files.
    pub fn fingerprint(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.n.to_le_bytes());
        for &c in &self.z {
            hasher.update(c.to_le_bytes());
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// A single lattice point `p_k`, stored as numerators over `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePoint {
    pub k: u64,
    pub numerators: Vec<u64>,
    pub n: u64,
}

impl LatticePoint {
    pub fn coords(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|&p| p as f64 / self.n as f64)
            .collect()
    }
}

/// `1 + 2 pi^2 B_2(x)` with `B_2(x) = x^2 - x + 1/6`: the one-dimensional
/// Korobov kernel for `alpha = 1`.
fn korobov_kernel(x: f64) -> f64 {
    1.0 + 2.0 * PI * PI * (x * x - x + 1.0 / 6.0)
}

/// Squared worst-case integration error of a lattice rule in the unweighted
/// Korobov space with `alpha = 1`.
pub fn korobov_worst_case_error2(lattice: &Rank1Lattice) -> f64 {
    let n = lattice.n();
    let sum: f64 = (0..n)
        .map(|k| {
            lattice
                .generator()
                .iter()
                .map(|&zj| korobov_kernel((zj * k % n) as f64 / n as f64))
                .product::<f64>()
        })
        .sum();
    sum / n as f64 - 1.0
}

/// Greedy component-by-component construction of a generating vector.
///
/// `z_1 = 1`; each further component is the candidate coprime to `n` that
/// minimizes the `alpha = 1` Korobov worst-case error of the partial vector,
/// ties going to the smallest candidate. Cost is `O(d n^2)`.
pub fn cbc_construct(d: usize, n: u64) -> Result<Rank1Lattice> {
    if d == 0 {
        return Err(Error::InvalidLattice("dimension must be positive".into()));
    }
    if n < 2 {
        return Err(Error::InvalidLattice("CBC needs n >= 2".into()));
    }
    let nu = n as usize;
    let kernel: Vec<f64> = (0..nu).map(|r| korobov_kernel(r as f64 / n as f64)).collect();
    // Running product over chosen components, indexed by k.
    let mut partial: Vec<f64> = kernel.clone();
    let mut z = vec![1u64];
    let candidates: Vec<u64> = if n.is_power_of_two() {
        (1..n).step_by(2).collect()
    } else {
        (1..n).filter(|&c| gcd(c, n) == 1).collect()
    };

    for _ in 1..d {
        let (best, _) = candidates
            .par_iter()
            .map(|&c| {
                let score: f64 = partial
                    .iter()
                    .enumerate()
                    .map(|(k, &pk)| pk * kernel[(k as u64 * c % n) as usize])
                    .sum();
                (c, score)
            })
            .reduce(
                || (u64::MAX, f64::INFINITY),
                |a, b| {
                    if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            );
        for (k, pk) in partial.iter_mut().enumerate() {
            *pk *= kernel[(k as u64 * best % n) as usize];
        }
        z.push(best);
    }
    Rank1Lattice::new(z, n)
}
