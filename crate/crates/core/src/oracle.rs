//! Brute-force reference computations.
//!
//! Everything here is deliberately slow and shares no code path with the
//! production routines it is used to check (no FFT, no shell enumeration).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::diagnostics::DenseMatrix;
use crate::lattice::Rank1Lattice;
use crate::spectral::SparseSeries;

/// `exp(sign * 2 pi i r / n)` with the exponent reduced exactly first.
fn root_of_unity(r: u64, n: u64, sign: f64) -> Complex64 {
    Complex64::from_polar(1.0, sign * 2.0 * PI * (r % n) as f64 / n as f64)
}

/// `O(n^2)` DFT with the `1/n` factor: `c_xi = (1/n) sum_k v_k e^{-2 pi i xi k / n}`.
pub fn direct_dft(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len() as u64;
    (0..n)
        .map(|xi| {
            values
                .iter()
                .enumerate()
                .map(|(k, &v)| v * root_of_unity(xi * k as u64, n, -1.0))
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// For every residue, the smallest `|h|^2` over the box `|h|_inf <= sqrt(bound) + 1`.
///
/// Residues not hit inside the box are reported as `u64::MAX`.
pub fn brute_force_min_norm2(lattice: &Rank1Lattice, bound: u64) -> Vec<u64> {
    let d = lattice.dim();
    let r = (bound as f64).sqrt().ceil() as i64 + 1;
    let mut best = vec![u64::MAX; lattice.len()];
    let mut h = vec![-r; d];
    loop {
        let xi = lattice.residue(&h).unwrap() as usize;
        let norm: u64 = h.iter().map(|&c| (c * c) as u64).sum();
        best[xi] = best[xi].min(norm);
        // Odometer increment over [-r, r]^d.
        let mut j = 0;
        loop {
            if j == d {
                return best;
            }
            h[j] += 1;
            if h[j] <= r {
                break;
            }
            h[j] = -r;
            j += 1;
        }
    }
}

/// `(1/n) sum_k exp(2 pi i (h - h') . p_k)` evaluated directly at the points.
pub fn character_sum(lattice: &Rank1Lattice, h: &[i32], h2: &[i32]) -> Complex64 {
    let n = lattice.n();
    lattice
        .all_points()
        .map(|p| {
            let num: i64 = p
                .numerators
                .iter()
                .zip(h.iter().zip(h2))
                .map(|(&x, (&a, &b))| (a as i64 - b as i64) * x as i64)
                .sum();
            root_of_unity(num.rem_euclid(n as i64) as u64, n, 1.0)
        })
        .sum::<Complex64>()
        / n as f64
}

/// `F_n diag(v) F_n^{-1}` by explicit `O(n^3)` matrix products, with the
/// unitary Fourier matrix `F_n = (n^{-1/2} e^{-2 pi i xi xi' / n})`.
pub fn dense_fourier_conjugate(values: &[f64]) -> DenseMatrix {
    let n = values.len();
    let nn = n as u64;
    let s = 1.0 / (n as f64).sqrt();
    let f = DenseMatrix::from_fn(n, |i, j| root_of_unity((i * j) as u64, nn, -1.0) * s);
    let finv = DenseMatrix::from_fn(n, |i, j| root_of_unity((i * j) as u64, nn, 1.0) * s);
    let fv = DenseMatrix::from_fn(n, |i, j| f.get(i, j) * values[j]);
    fv.matmul(&finv)
}

/// First column of the circulant multiplication operator from exact Fourier
/// coefficients: `w_j = sum_{h . z = j (mod n)} v^(h)`.
pub fn circulant_column_from_series(lattice: &Rank1Lattice, series: &SparseSeries) -> Vec<Complex64> {
    let mut w = vec![Complex64::default(); lattice.len()];
    for (h, &c) in series {
        w[lattice.residue(h).unwrap() as usize] += c;
    }
    w
}

/// Analytic coefficients of `prod_j (1 - cos(2 pi x_j))`: the tensor product of
/// `{0: 1, +-1: -1/2}`.
pub fn smooth_potential_series(d: usize) -> SparseSeries {
    let mut out = SparseSeries::new();
    let mut h = vec![-1i64; d];
    loop {
        let c: f64 = h.iter().map(|&x| if x == 0 { 1.0 } else { -0.5 }).product();
        out.insert(h.clone(), Complex64::new(c, 0.0));
        let mut j = 0;
        loop {
            if j == d {
                return out;
            }
            h[j] += 1;
            if h[j] <= 1 {
                break;
            }
            h[j] = -1;
            j += 1;
        }
    }
}

pub fn random_complex<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Up to `terms` random coefficients on frequencies with `|h_j| <= max_abs`.
pub fn random_sparse_series<R: Rng>(rng: &mut R, d: usize, max_abs: i64, terms: usize) -> SparseSeries {
    (0..terms)
        .map(|_| {
            let h = (0..d).map(|_| rng.gen_range(-max_abs..=max_abs)).collect();
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (h, c)
        })
        .collect()
}
