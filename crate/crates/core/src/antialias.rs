//! Full-cardinality anti-aliasing sets with minimal-ℓ2 representatives.
//!
//! For every residue `xi` in `Z_n` the set holds one frequency `h_xi` with
//! `h_xi . z = xi (mod n)` and smallest Euclidean norm in its class. Ties are
//! broken by plain lexicographic order on the signed coordinates.
//!
//! Construction walks integer vectors by increasing ℓ2 radius. Keeping the
//! first vector seen per residue in (norm, lexicographic) order is the same as
//! keeping the per-residue minimum under that order, so the enumeration is
//! streamed into an `n`-entry table instead of being materialized and sorted.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::Rank1Lattice;

const MAGIC: &[u8; 6] = b"AASET1";
const HEADER_LEN: usize = 6 + 4 + 8 + 8;

/// Default cap on the estimated number of enumerated frequency vectors.
pub const DEFAULT_CANDIDATE_BUDGET: u64 = 1 << 34;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AntiAliasingSet {
    lattice: Rank1Lattice,
    /// Row-major `n x d` table; row `xi` is `h_xi`.
    freq: Vec<i32>,
    norms2: Vec<u64>,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub candidate_budget: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            candidate_budget: DEFAULT_CANDIDATE_BUDGET,
        }
    }
}

/// How `load_or_build` obtained its set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit(PathBuf),
    Built(PathBuf),
    /// The cache file was unreadable or inconsistent and has been rewritten.
    Rebuilt { path: PathBuf, reason: String },
}

/// Volume of the unit ball in `d` dimensions.
fn unit_ball_volume(d: usize) -> f64 {
    let mut v = [1.0, 2.0];
    for k in 2..=d {
        v[k % 2] *= 2.0 * std::f64::consts::PI / k as f64;
    }
    v[d % 2]
}

fn isqrt(x: u64) -> u64 {
    let mut r = (x as f64).sqrt() as u64;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

/// Estimated number of integer points with `|h|^2 <= r2`, padded for the
/// boundary layer that dominates at small radii.
fn estimated_ball_count(d: usize, r2: u64) -> u64 {
    let r = (r2 as f64).sqrt() + 0.5 * (d as f64).sqrt();
    (unit_ball_volume(d) * r.powi(d as i32)).ceil() as u64
}

struct Enumerator<'a> {
    z: &'a [u64],
    n: i64,
    lo: u64,
    hi: u64,
    h: Vec<i32>,
    best_norm: &'a mut [u64],
    best: &'a mut [i32],
    filled: usize,
}

impl Enumerator<'_> {
    fn descend(&mut self, j: usize, partial: u64, dot: i64) {
        let d = self.z.len();
        let remaining = self.hi - partial;
        let bound = isqrt(remaining) as i64;
        let zj = self.z[j] as i64;
        if j + 1 == d {
            // Last coordinate: only values landing in (lo, hi] are new.
            let skip = if self.lo >= partial {
                isqrt(self.lo - partial) as i64
            } else {
                -1
            };
            for v in -bound..=bound {
                if v.abs() <= skip {
                    continue;
                }
                self.h[j] = v as i32;
                let norm = partial + (v * v) as u64;
                let r = (dot + v * zj).rem_euclid(self.n) as usize;
                self.offer(r, norm);
            }
        } else {
            for v in -bound..=bound {
                self.h[j] = v as i32;
                let norm = partial + (v * v) as u64;
                self.descend(j + 1, norm, (dot + v * zj) % self.n);
            }
        }
    }

    fn offer(&mut self, r: usize, norm: u64) {
        let d = self.h.len();
        let cur = self.best_norm[r];
        let row = &mut self.best[r * d..(r + 1) * d];
        let better = norm < cur || (norm == cur && self.h.as_slice() < &*row);
        if better {
            if cur == u64::MAX {
                self.filled += 1;
            }
            self.best_norm[r] = norm;
            row.copy_from_slice(&self.h);
        }
    }
}

/// Builds the minimal-ℓ2 anti-aliasing set with default options.
pub fn build(lattice: &Rank1Lattice) -> Result<AntiAliasingSet> {
    build_with(lattice, BuildOptions::default())
}

pub fn build_with(lattice: &Rank1Lattice, opts: BuildOptions) -> Result<AntiAliasingSet> {
    let d = lattice.dim();
    let n = lattice.len();
    let mut best_norm = vec![u64::MAX; n];
    let mut best = vec![0i32; n * d];

    // Start where the ball volume predicts at least 2n candidates.
    let radius = (2.0 * n as f64 / unit_ball_volume(d)).powf(1.0 / d as f64);
    let mut hi = ((radius * radius).ceil() as u64).max(1);
    let mut lo: Option<u64> = None;
    let mut filled = 0usize;

    while filled < n {
        let needed = estimated_ball_count(d, hi);
        if needed > opts.candidate_budget {
            return Err(Error::CandidateBudget {
                needed,
                budget: opts.candidate_budget,
            });
        }
        let mut e = Enumerator {
            z: lattice.generator(),
            n: lattice.n() as i64,
            // `lo` is exclusive; the first pass must include the origin.
            lo: lo.unwrap_or(0),
            hi,
            h: vec![0; d],
            best_norm: &mut best_norm,
            best: &mut best,
            filled,
        };
        if lo.is_none() {
            e.offer(0, 0);
        }
        e.descend(0, 0, 0);
        filled = e.filled;
        lo = Some(hi);
        hi *= 2;
    }

    Ok(AntiAliasingSet {
        lattice: lattice.clone(),
        freq: best,
        norms2: best_norm,
    })
}

impl AntiAliasingSet {
    /// Wraps an explicit frequency table (row `xi` = `h_xi`), checking that it
    /// is a full-cardinality anti-aliasing set. Minimality is not required.
    pub fn from_frequencies(lattice: &Rank1Lattice, freq: Vec<i32>) -> Result<Self> {
        let d = lattice.dim();
        if freq.len() != lattice.len() * d {
            return Err(Error::SizeMismatch {
                expected: lattice.len() * d,
                got: freq.len(),
            });
        }
        let norms2 = freq
            .chunks_exact(d)
            .map(|h| h.iter().map(|&c| (c as i64 * c as i64) as u64).sum())
            .collect();
        let set = Self {
            lattice: lattice.clone(),
            freq,
            norms2,
        };
        set.verify().map_err(Error::InvalidLattice)?;
        Ok(set)
    }

    pub fn lattice(&self) -> &Rank1Lattice {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.norms2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms2.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// The representative `h_xi`.
    pub fn frequency(&self, xi: usize) -> &[i32] {
        let d = self.dim();
        &self.freq[xi * d..(xi + 1) * d]
    }

    pub fn frequencies(&self) -> impl Iterator<Item = &[i32]> {
        self.freq.chunks_exact(self.dim())
    }

    pub fn norms2(&self) -> &[u64] {
        &self.norms2
    }

    /// The conjugacy class `(h . z) mod n` of an arbitrary frequency.
    pub fn residue_lookup(&self, h: &[i64]) -> Result<usize> {
        Ok(self.lattice.residue(h)? as usize)
    }

    pub fn max_norm2(&self) -> u64 {
        self.norms2.iter().copied().max().unwrap_or(0)
    }

    /// Checks that row `xi` lies in residue class `xi` for every `xi` and that
    /// the stored norms match the coordinates.
    pub fn verify(&self) -> std::result::Result<(), String> {
        for (xi, h) in self.frequencies().enumerate() {
            let r = self
                .lattice
                .residue_unchecked(h.iter().map(|&c| c as i64));
            if r as usize != xi {
                return Err(format!("row {xi} has residue {r}"));
            }
            let norm: u64 = h.iter().map(|&c| (c as i64 * c as i64) as u64).sum();
            if norm != self.norms2[xi] {
                return Err(format!("row {xi} has inconsistent norm"));
            }
        }
        Ok(())
    }

    /// Serializes to the cache format: the `AASET1` header followed by `n`
    /// rows of `d` little-endian `i32` coordinates in residue order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.freq.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&self.lattice.n().to_le_bytes());
        out.extend_from_slice(&self.lattice.fingerprint().to_le_bytes());
        for &c in &self.freq {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(lattice: &Rank1Lattice, bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN || &bytes[..6] != MAGIC {
            return Err("bad magic".into());
        }
        let d = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
        let hash = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
        if d != lattice.dim() || n != lattice.n() || hash != lattice.fingerprint() {
            return Err("header does not match lattice".into());
        }
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * d * lattice.len() {
            return Err(format!("expected {} body bytes, found {}", 4 * d * lattice.len(), body.len()));
        }
        let freq = body
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        AntiAliasingSet::from_frequencies(lattice, freq).map_err(|e| e.to_string())
    }

    /// SHA-256 of the cache serialization, as lowercase hex.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, lattice: &Rank1Lattice) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(lattice, &bytes).map_err(|reason| Error::CorruptCache {
            path: path.to_path_buf(),
            reason,
        })
    }
}

/// Cache file location for `lattice` under `dir`.
pub fn cache_path(dir: &Path, lattice: &Rank1Lattice) -> PathBuf {
    dir.join(format!(
        "aaset_d{}_n{}_{:016x}.bin",
        lattice.dim(),
        lattice.n(),
        lattice.fingerprint()
    ))
}

/// Loads the set from `cache_dir` if present and valid, otherwise builds it
/// and writes the cache. A corrupt cache file is replaced.
pub fn load_or_build(
    lattice: &Rank1Lattice,
    cache_dir: Option<&Path>,
    opts: BuildOptions,
) -> Result<(AntiAliasingSet, CacheStatus)> {
    let Some(dir) = cache_dir else {
        return Ok((build_with(lattice, opts)?, CacheStatus::Disabled));
    };
    let path = cache_path(dir, lattice);
    let status = match AntiAliasingSet::load(&path, lattice) {
        Ok(set) => return Ok((set, CacheStatus::Hit(path))),
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
            CacheStatus::Built(path.clone())
        }
        Err(e) => CacheStatus::Rebuilt {
            path: path.clone(),
            reason: e.to_string(),
        },
    };
    let set = build_with(lattice, opts)?;
    set.save(&path)?;
    Ok((set, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_min_norm2;

    fn small() -> Rank1Lattice {
        Rank1Lattice::new(vec![1, 3], 5).unwrap()
    }

    #[test]
    fn small_lattice_representatives() {
        let aa = build(&small()).unwrap();
        let rows: Vec<Vec<i32>> = aa.frequencies().map(|h| h.to_vec()).collect();
        assert_eq!(
            rows,
            vec![vec![0, 0], vec![1, 0], vec![0, -1], vec![0, 1], vec![-1, 0]]
        );
        assert_eq!(aa.norms2(), &[0, 1, 1, 1, 1]);
        assert_eq!(aa.max_norm2(), 1);
    }

    #[test]
    fn one_dimensional_tie_picks_negative() {
        let aa = build(&Rank1Lattice::new(vec![1], 4).unwrap()).unwrap();
        assert_eq!(aa.norms2(), &[0, 1, 4, 1]);
        assert_eq!(aa.frequency(2), &[-2]);
        assert_eq!(aa.frequency(3), &[-1]);
        assert_eq!(aa.max_norm2(), 4);
    }

    #[test]
    fn origin_and_single_point() {
        let aa = build(&Rank1Lattice::new(vec![1, 1, 1], 1).unwrap()).unwrap();
        assert_eq!(aa.len(), 1);
        assert_eq!(aa.frequency(0), &[0, 0, 0]);
        assert_eq!(aa.max_norm2(), 0);
        let aa = build(&Rank1Lattice::preset("paper-d2").unwrap()).unwrap();
        assert_eq!(aa.frequency(0), &[0, 0]);
    }

    #[test]
    fn residue_lookup_examples() {
        let aa = build(&small()).unwrap();
        assert_eq!(aa.residue_lookup(&[0, 0]).unwrap(), 0);
        assert_eq!(aa.residue_lookup(&[2, 1]).unwrap(), 0);
        assert_eq!(aa.residue_lookup(&[1, 1]).unwrap(), 4);
    }

    #[test]
    fn residues_form_a_permutation() {
        for lat in [
            Rank1Lattice::new(vec![1, 27, 11], 128).unwrap(),
            Rank1Lattice::preset("paper-d2").unwrap(),
        ] {
            let aa = build(&lat).unwrap();
            let mut seen = vec![false; aa.len()];
            for h in aa.frequencies() {
                let r = lat.residue_unchecked(h.iter().map(|&c| c as i64)) as usize;
                assert!(!seen[r]);
                seen[r] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn representatives_are_minimal() {
        for (z, n) in [(vec![1u64, 3], 5u64), (vec![1, 41], 256), (vec![1, 7, 19], 512)] {
            let lat = Rank1Lattice::new(z, n).unwrap();
            let aa = build(&lat).unwrap();
            let brute = brute_force_min_norm2(&lat, aa.max_norm2());
            assert_eq!(aa.norms2(), brute.as_slice());
        }
    }

    #[test]
    fn conjugacy_classes_partition_a_box() {
        let lat = Rank1Lattice::new(vec![1, 3], 5).unwrap();
        let aa = build(&lat).unwrap();
        let mut counts = vec![0usize; aa.len()];
        for a in -6i64..=6 {
            for b in -6i64..=6 {
                let xi = aa.residue_lookup(&[a, b]).unwrap();
                // h - h_xi lies in the dual lattice exactly for the class xi.
                let rep = aa.frequency(xi);
                let diff = [a - rep[0] as i64, b - rep[1] as i64];
                assert!(lat.in_dual(&diff).unwrap());
                counts[xi] += 1;
            }
        }
        assert_eq!(counts.iter().sum::<usize>(), 13 * 13);
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn budget_guard() {
        let lat = Rank1Lattice::preset("paper-d2").unwrap();
        let err = build_with(&lat, BuildOptions { candidate_budget: 10 }).unwrap_err();
        assert!(matches!(err, Error::CandidateBudget { .. }));
    }

    #[test]
    fn from_frequencies_rejects_wrong_classes() {
        let lat = small();
        assert!(AntiAliasingSet::from_frequencies(&lat, vec![0, 0, 1, 0, 0, 1, 0, -1, -1, 0]).is_err());
        assert!(AntiAliasingSet::from_frequencies(&lat, vec![0; 4]).is_err());
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Rank1Lattice::new(vec![1, 27, 11], 128).unwrap();
        let (first, status) = load_or_build(&lat, Some(dir.path()), BuildOptions::default()).unwrap();
        assert!(matches!(status, CacheStatus::Built(_)));
        let path = cache_path(dir.path(), &lat);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..6], b"AASET1");
        assert_eq!(bytes.len(), HEADER_LEN + 128 * 3 * 4);

        let (second, status) = load_or_build(&lat, Some(dir.path()), BuildOptions::default()).unwrap();
        assert!(matches!(status, CacheStatus::Hit(_)));
        assert_eq!(first, second);

        // Swap two rows: header still valid but residues no longer match.
        let mut bad = bytes.clone();
        bad[HEADER_LEN..HEADER_LEN + 24].rotate_left(12);
        fs::write(&path, &bad).unwrap();
        let (third, status) = load_or_build(&lat, Some(dir.path()), BuildOptions::default()).unwrap();
        assert!(matches!(status, CacheStatus::Rebuilt { .. }));
        assert_eq!(third, first);
        assert_eq!(fs::read(&path).unwrap(), bytes);
    }
}
