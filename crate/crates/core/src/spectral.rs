//! Lattice samples <-> Fourier coefficients on the anti-aliasing set.
//!
//! Coefficients are indexed by residue `xi`, so both directions are plain
//! length-`n` 1-D FFTs: `forward` carries the `1/n` factor, `inverse` none.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::antialias::AntiAliasingSet;
use crate::error::{Error, Result};

/// A finitely supported Fourier series `h -> f^(h)`.
pub type SparseSeries = BTreeMap<Vec<i64>, Complex64>;

/// Approximate Fourier coefficients `u_a(h_xi)` for `xi = 0..n-1`.
#[derive(Clone, Debug)]
pub struct SpectralState {
    pub coeffs: Vec<Complex64>,
    pub time: f64,
    aa: Arc<AntiAliasingSet>,
}

/// Function values `u(p_k)` at the lattice points, `k = 0..n-1`.
#[derive(Clone, Debug)]
pub struct NodalValues {
    pub values: Vec<Complex64>,
    aa: Arc<AntiAliasingSet>,
}

impl SpectralState {
    pub fn new(aa: Arc<AntiAliasingSet>, coeffs: Vec<Complex64>, time: f64) -> Result<Self> {
        check_len(aa.len(), coeffs.len())?;
        Ok(Self { coeffs, time, aa })
    }

    pub fn zeros(aa: Arc<AntiAliasingSet>) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); aa.len()],
            time: 0.0,
            aa,
        }
    }

    /// The state with coefficient 1 at residue `xi` and 0 elsewhere.
    pub fn unit(aa: Arc<AntiAliasingSet>, xi: usize) -> Self {
        let mut s = Self::zeros(aa);
        s.coeffs[xi] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn aaset(&self) -> &Arc<AntiAliasingSet> {
        &self.aa
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }
}

impl NodalValues {
    pub fn new(aa: Arc<AntiAliasingSet>, values: Vec<Complex64>) -> Result<Self> {
        check_len(aa.len(), values.len())?;
        Ok(Self { values, aa })
    }

    /// Samples `f` at every lattice point.
    pub fn sample<F>(aa: Arc<AntiAliasingSet>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let values = aa.lattice().sample(f);
        Self { values, aa }
    }

    pub fn aaset(&self) -> &Arc<AntiAliasingSet> {
        &self.aa
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::SizeMismatch { expected, got });
    }
    Ok(())
}

/// Planned forward/inverse FFTs of one length.
#[derive(Clone)]
pub struct Transform {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Transform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    /// Unnormalized `sum_k x_k exp(-2 pi i xi k / n)`, in place.
    pub fn forward_unscaled(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fwd.process_with_scratch(data, scratch);
    }

    /// `sum_xi c_xi exp(2 pi i xi k / n)`, in place.
    pub fn inverse_in_place(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inv.process_with_scratch(data, scratch);
    }

    /// Nodal values to coefficients, including the `1/n` factor.
    pub fn forward_in_place(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward_unscaled(data, scratch);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }
}

/// Coefficients of the lattice interpolant of `values`.
pub fn forward(values: &NodalValues) -> SpectralState {
    let t = Transform::new(values.values.len());
    let mut scratch = vec![Complex64::default(); t.scratch_len()];
    let mut coeffs = values.values.clone();
    t.forward_in_place(&mut coeffs, &mut scratch);
    SpectralState {
        coeffs,
        time: 0.0,
        aa: values.aa.clone(),
    }
}

/// Values of the truncated series at the lattice points.
pub fn inverse(state: &SpectralState) -> NodalValues {
    let t = Transform::new(state.coeffs.len());
    let mut scratch = vec![Complex64::default(); t.scratch_len()];
    let mut values = state.coeffs.clone();
    t.inverse_in_place(&mut values, &mut scratch);
    NodalValues {
        values,
        aa: state.aa.clone(),
    }
}

/// Direct `O(n d)` evaluation of `sum_xi c_xi exp(2 pi i h_xi . x)`.
pub fn evaluate_offlattice(state: &SpectralState, x: &[f64]) -> Result<Complex64> {
    if x.len() != state.aa.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.aa.dim(),
            got: x.len(),
        });
    }
    Ok(state
        .coeffs
        .iter()
        .zip(state.aa.frequencies())
        .map(|(&c, h)| {
            let phase: f64 = h.iter().zip(x).map(|(&hj, &xj)| hj as f64 * xj).sum();
            c * Complex64::from_polar(1.0, 2.0 * PI * phase)
        })
        .sum())
}

/// The coefficient vector that sampling `true_coeffs` on the lattice and
/// transforming would produce: each frequency folds onto its residue class.
pub fn aliasing_oracle(true_coeffs: &SparseSeries, aa: &Arc<AntiAliasingSet>) -> Result<SpectralState> {
    let mut state = SpectralState::zeros(aa.clone());
    for (h, &c) in true_coeffs {
        state.coeffs[aa.residue_lookup(h)?] += c;
    }
    Ok(state)
}

/// Euclidean norm of the coefficients; equals the L2 norm of the series.
pub fn l2_norm(state: &SpectralState) -> f64 {
    state.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Evaluates a sparse series at a point.
pub fn evaluate_series(series: &SparseSeries, x: &[f64]) -> Complex64 {
    series
        .iter()
        .map(|(h, &c)| {
            let phase: f64 = h.iter().zip(x).map(|(&hj, &xj)| hj as f64 * xj).sum();
            c * Complex64::from_polar(1.0, 2.0 * PI * phase)
        })
        .sum()
}

/// Raw contents of a snapshot file: `n: u64`, `time: f64`, then `n`
/// interleaved `(re, im)` pairs, all little-endian.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub data: Vec<Complex64>,
}

impl Snapshot {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + 16 * self.data.len());
        buf.extend_from_slice(&(self.data.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.time.to_le_bytes());
        for c in &self.data {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 16 {
            return Err(Error::Snapshot("truncated header".into()));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let time = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let body = &bytes[16..];
        if body.len() != n.checked_mul(16).ok_or_else(|| Error::Snapshot("bad length".into()))? {
            return Err(Error::Snapshot(format!(
                "header says {n} entries but body holds {} bytes",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self { time, data })
    }

    pub fn into_state(self, aa: Arc<AntiAliasingSet>) -> Result<SpectralState> {
        SpectralState::new(aa, self.data, self.time)
    }
}

impl From<&SpectralState> for Snapshot {
    fn from(state: &SpectralState) -> Self {
        Self {
            time: state.time,
            data: state.coeffs.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antialias::build;
    use crate::lattice::Rank1Lattice;
    use crate::oracle::{direct_dft, random_complex, random_sparse_series};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn aaset(z: Vec<u64>, n: u64) -> Arc<AntiAliasingSet> {
        Arc::new(build(&Rank1Lattice::new(z, n).unwrap()).unwrap())
    }

    fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_maps_to_zero_frequency() {
        let aa = aaset(vec![1, 19], 64);
        let s = forward(&NodalValues::sample(aa, |_| Complex64::new(1.0, 0.0)));
        assert!((s.coeffs[0] - 1.0).norm() < 1e-15);
        assert!(s.coeffs[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn character_maps_to_unit_vector() {
        let aa = aaset(vec![1, 19], 64);
        for xi0 in [1usize, 7, 33] {
            let h: Vec<f64> = aa.frequency(xi0).iter().map(|&c| c as f64).collect();
            let s = forward(&NodalValues::sample(aa.clone(), |x| {
                let ph: f64 = h.iter().zip(x).map(|(a, b)| a * b).sum();
                Complex64::from_polar(1.0, 2.0 * PI * ph)
            }));
            let unit = SpectralState::unit(aa.clone(), xi0);
            assert!(max_dev(&s.coeffs, &unit.coeffs) < 1e-13);
        }
    }

    #[test]
    fn forward_matches_direct_dft() {
        let aa = aaset(vec![1, 101], 256);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_complex(&mut rng, 256);
        let fast = forward(&NodalValues::new(aa, v.clone()).unwrap());
        let slow = direct_dft(&v);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(max_dev(&fast.coeffs, &slow) / scale <= 1e-12);
    }

    #[test]
    fn inverse_examples() {
        let aa = aaset(vec![1, 3], 5);
        let ones = inverse(&SpectralState::unit(aa.clone(), 0));
        assert!(ones.values.iter().all(|v| (v - 1.0).norm() < 1e-15));

        let mut s = SpectralState::zeros(aa.clone());
        let c = Complex64::new(0.5, -2.0);
        s.coeffs[3] = c;
        let vals = inverse(&s);
        for (k, v) in vals.values.iter().enumerate() {
            let expect = c * Complex64::from_polar(1.0, 2.0 * PI * (3 * k) as f64 / 5.0);
            assert!((v - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn round_trip_large() {
        let aa = aaset(vec![1, 1571], 1 << 12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_complex(&mut rng, 1 << 12);
        let back = inverse(&forward(&NodalValues::new(aa, v.clone()).unwrap()));
        assert!(max_dev(&back.values, &v) <= 1e-12);
    }

    #[test]
    fn offlattice_evaluation() {
        let aa = aaset(vec![1, 19], 64);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = SpectralState::new(aa.clone(), random_complex(&mut rng, 64), 0.0).unwrap();
        let nodal = inverse(&s);
        for k in [0u64, 5, 63] {
            let x = aa.lattice().point(k).unwrap().coords();
            let v = evaluate_offlattice(&s, &x).unwrap();
            assert!((v - nodal.values[k as usize]).norm() < 1e-10);
        }

        let h: Vec<f64> = aa.frequency(9).iter().map(|&c| c as f64).collect();
        let chi = |x: &[f64]| {
            let ph: f64 = h.iter().zip(x).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, 2.0 * PI * ph)
        };
        let s = forward(&NodalValues::sample(aa.clone(), chi));
        for x in [[0.123, 0.987], [0.5, 0.25], [0.77, 0.01]] {
            assert!((evaluate_offlattice(&s, &x).unwrap() - chi(&x)).norm() < 1e-10);
        }

        let one = SpectralState::unit(aa, 0);
        assert!((evaluate_offlattice(&one, &[0.3, 0.6]).unwrap() - 1.0).norm() < 1e-15);
        assert!(evaluate_offlattice(&one, &[0.3]).is_err());
    }

    #[test]
    fn aliasing_examples() {
        let aa = aaset(vec![1, 3], 5);
        let mut series = SparseSeries::new();
        series.insert(vec![2, 1], Complex64::new(1.0, 0.0));
        let s = aliasing_oracle(&series, &aa).unwrap();
        assert_eq!(s.coeffs[0], Complex64::new(1.0, 0.0));

        // Support inside the set: no folding.
        let mut series = SparseSeries::new();
        for xi in 0..5 {
            let h: Vec<i64> = aa.frequency(xi).iter().map(|&c| c as i64).collect();
            series.insert(h, Complex64::new(xi as f64, 1.0));
        }
        let s = aliasing_oracle(&series, &aa).unwrap();
        for xi in 0..5 {
            assert_eq!(s.coeffs[xi], Complex64::new(xi as f64, 1.0));
        }
    }

    #[test]
    fn sampling_matches_aliasing_oracle() {
        let aa = aaset(vec![1, 27, 11], 128);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let series = random_sparse_series(&mut rng, 3, 12, 20);
            let sampled = forward(&NodalValues::sample(aa.clone(), |x| evaluate_series(&series, x)));
            let folded = aliasing_oracle(&series, &aa).unwrap();
            assert!(max_dev(&sampled.coeffs, &folded.coeffs) < 1e-12);
        }
    }

    #[test]
    fn l2_norm_examples() {
        let aa = aaset(vec![1, 3], 5);
        assert_eq!(SpectralState::unit(aa.clone(), 2).l2_norm(), 1.0);
        let mut coeffs = vec![Complex64::default(); 5];
        coeffs[0] = Complex64::new(3.0, 0.0);
        coeffs[1] = Complex64::new(4.0, 0.0);
        assert_eq!(l2_norm(&SpectralState::new(aa, coeffs, 0.0).unwrap()), 5.0);
    }

    #[test]
    fn size_checks() {
        let aa = aaset(vec![1, 3], 5);
        assert!(SpectralState::new(aa.clone(), vec![Complex64::default(); 4], 0.0).is_err());
        assert!(NodalValues::new(aa, vec![Complex64::default(); 6]).is_err());
    }

    #[test]
    fn snapshot_rejects_truncation() {
        let snap = Snapshot {
            time: 0.5,
            data: vec![Complex64::new(1.0, 2.0); 3],
        };
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 48);
        assert_eq!(Snapshot::read_from(buf.as_slice()).unwrap(), snap);
        assert!(Snapshot::read_from(&buf[..buf.len() - 1]).is_err());
        assert!(Snapshot::read_from(&buf[..7]).is_err());
    }

    proptest! {
        #[test]
        fn discrete_plancherel(seed in 0u64..1000) {
            let aa = aaset(vec![1, 19], 64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SpectralState::new(aa, random_complex(&mut rng, 64), 0.0).unwrap();
            let nodal = inverse(&s);
            let lhs: f64 = nodal.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / 64.0;
            let rhs: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn snapshot_round_trip(time in -1e3f64..1e3, re in proptest::collection::vec(-1e6f64..1e6, 0..40)) {
            let snap = Snapshot { time, data: re.iter().map(|&r| Complex64::new(r, -r / 3.0)).collect() };
            let mut buf = Vec::new();
            snap.write_to(&mut buf).unwrap();
            prop_assert_eq!(Snapshot::read_from(buf.as_slice()).unwrap(), snap);
        }
    }
}
