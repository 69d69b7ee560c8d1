//! The two split operators of the semi-discrete Schrödinger equation
//!
//! ```text
//! i eps u' = (eps^2 / 2) D_n u + W_n u,   D_n = diag(4 pi^2 |h_xi|^2),   W_n = F_n V_n F_n^{-1}
//! ```
//!
//! together with the Gaussian initial condition and the two test potentials.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::antialias::AntiAliasingSet;
use crate::error::{Error, Result};
use crate::lattice::Rank1Lattice;
use crate::oracle::smooth_potential_series;
use crate::spectral::{evaluate_series, forward, inverse, NodalValues, SparseSeries, SpectralState};

/// Kinetic phase rates `2 pi^2 eps |h_xi|^2` per residue.
#[derive(Clone, Debug)]
pub struct KineticTable {
    phases_base: Vec<f64>,
    epsilon: f64,
}

impl KineticTable {
    pub fn new(aa: &AntiAliasingSet, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let rate = 2.0 * PI * PI * epsilon;
        Ok(Self {
            phases_base: aa.norms2().iter().map(|&h2| rate * h2 as f64).collect(),
            epsilon,
        })
    }

    pub fn phases_base(&self) -> &[f64] {
        &self.phases_base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.phases_base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases_base.is_empty()
    }

    /// The diagonal factor `exp(-i a dt phase_xi)`.
    pub fn factors(&self, a: f64, dt: f64) -> Vec<Complex64> {
        let s = -a * dt;
        self.phases_base
            .iter()
            .map(|&p| Complex64::from_polar(1.0, s * p))
            .collect()
    }
}

/// `exp(-i a dt (eps/2) D_n)`: solves the free part exactly in frequency space.
pub fn kinetic_apply(state: &mut SpectralState, kt: &KineticTable, a: f64, dt: f64) -> Result<()> {
    if state.len() != kt.len() {
        return Err(Error::SizeMismatch {
            expected: kt.len(),
            got: state.len(),
        });
    }
    let s = -a * dt;
    for (c, &p) in state.coeffs.iter_mut().zip(&kt.phases_base) {
        *c *= Complex64::from_polar(1.0, s * p);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialKind {
    /// `prod_j (1 - cos(2 pi x_j))`
    #[serde(rename = "v1", alias = "smooth_v1")]
    SmoothV1,
    /// `(1/2) sum_j (2 pi x_j - pi)^2`
    #[serde(rename = "v2", alias = "harmonic_v2")]
    HarmonicV2,
    #[serde(rename = "custom")]
    Custom,
}

impl std::str::FromStr for PotentialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v1" | "smooth_v1" => Ok(Self::SmoothV1),
            "v2" | "harmonic_v2" => Ok(Self::HarmonicV2),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Config(format!("unknown potential `{other}`"))),
        }
    }
}

pub fn smooth_v1(x: &[f64]) -> f64 {
    x.iter().map(|&xj| 1.0 - (2.0 * PI * xj).cos()).product()
}

pub fn harmonic_v2(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|&xj| (2.0 * PI * xj - PI).powi(2)).sum::<f64>()
}

/// A real potential tabulated at the lattice points, `values[k] = v(p_k)`.
#[derive(Clone, Debug)]
pub struct PotentialField {
    values: Vec<f64>,
    kind: PotentialKind,
    lattice: Rank1Lattice,
    series: Option<SparseSeries>,
}

impl PotentialField {
    pub fn from_fn<F>(lattice: &Rank1Lattice, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        Self::from_values(lattice, lattice.sample(f))
    }

    pub fn from_values(lattice: &Rank1Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::SizeMismatch {
                expected: lattice.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("potential value at node {k} is not finite")));
        }
        Ok(Self {
            values,
            kind: PotentialKind::Custom,
            lattice: lattice.clone(),
            series: None,
        })
    }

    /// A real trigonometric polynomial given by its (Hermitian) coefficients.
    pub fn from_series(lattice: &Rank1Lattice, series: SparseSeries) -> Result<Self> {
        let mut field = Self::from_fn(lattice, |x| evaluate_series(&series, x).re)?;
        field.series = Some(series);
        Ok(field)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn lattice(&self) -> &Rank1Lattice {
        &self.lattice
    }

    /// Exact Fourier coefficients, when the potential is a known polynomial.
    pub fn series(&self) -> Option<&SparseSeries> {
        self.series.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The nodal factor `exp(-i b dt v(p_k) / eps)` times `scale`.
    pub fn factors(&self, b: f64, dt: f64, epsilon: f64, scale: f64) -> Vec<Complex64> {
        let s = -b * dt / epsilon;
        self.values
            .iter()
            .map(|&v| Complex64::from_polar(scale, s * v))
            .collect()
    }
}

pub fn make_potential(kind: PotentialKind, lattice: &Rank1Lattice) -> Result<PotentialField> {
    let mut field = match kind {
        PotentialKind::SmoothV1 => {
            let mut f = PotentialField::from_fn(lattice, smooth_v1)?;
            f.series = Some(smooth_potential_series(lattice.dim()));
            f
        }
        PotentialKind::HarmonicV2 => PotentialField::from_fn(lattice, harmonic_v2)?,
        PotentialKind::Custom => {
            return Err(Error::Config(
                "custom potentials are built from values or a function".into(),
            ))
        }
    };
    field.kind = kind;
    Ok(field)
}

/// `exp(-i b dt W_n / eps)`, applied as inverse FFT, nodal phase, forward FFT.
pub fn potential_apply(
    state: &mut SpectralState,
    pf: &PotentialField,
    b: f64,
    dt: f64,
    epsilon: f64,
) -> Result<()> {
    if state.aaset().lattice() != pf.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let mut nodal = inverse(state);
    let s = -b * dt / epsilon;
    for (u, &v) in nodal.values.iter_mut().zip(&pf.values) {
        *u *= Complex64::from_polar(1.0, s * v);
    }
    state.coeffs = forward(&nodal).coeffs;
    Ok(())
}

/// Unnormalized Gaussian wave packet centred at `(1/2, ..., 1/2)`.
pub fn gaussian(x: &[f64], epsilon: f64) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|&xj| (2.0 * PI * xj - PI).powi(2)).sum();
    (2.0 / (PI * epsilon)).powf(d / 4.0) * (-r2 / epsilon).exp()
}

/// The Gaussian initial state, scaled so its coefficient vector has unit norm.
pub fn make_gaussian(aa: &Arc<AntiAliasingSet>, epsilon: f64) -> Result<SpectralState> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let nodal = NodalValues::sample(aa.clone(), |x| Complex64::new(gaussian(x, epsilon), 0.0));
    let mut state = forward(&nodal);
    let c = state.l2_norm();
    state.coeffs.iter_mut().for_each(|z| *z /= c);
    Ok(state)
}

/// `sqrt(sum_h |f^(h)|^2 prod_j max(|h_j|^{2 alpha}, 1))`.
pub fn korobov_norm_estimate(coeffs: &SparseSeries, alpha: f64) -> f64 {
    coeffs
        .iter()
        .map(|(h, c)| {
            let r2: f64 = h
                .iter()
                .map(|&hj| (hj.unsigned_abs() as f64).powf(2.0 * alpha).max(1.0))
                .product();
            c.norm_sqr() * r2
        })
        .sum::<f64>()
        .sqrt()
}
