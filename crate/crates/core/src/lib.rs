//! Spectral solver for the semiclassical Schrödinger equation on rank-1
//! lattices, with operator splitting in time.
//!
//! The unknown is stored as Fourier coefficients indexed by residue class
//! `xi in 0..n`; each residue carries the minimal-norm frequency of its
//! class so that a single 1-D FFT moves between nodal values and
//! coefficients.

pub mod antialias;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod operators;
pub mod oracle;
pub mod selftest;
pub mod spectral;
pub mod splitting;

pub use antialias::{load_or_build, AntiAliasingSet, BuildOptions, CacheStatus};
pub use diagnostics::{CommutatorReport, DenseMatrix, PowerIteration};
pub use error::{Error, Result};
pub use experiments::{run_convergence, run_convergence_in, ConvergenceReport, ConvergenceRow, ExperimentConfig, ReportFormat};
pub use lattice::{cbc_construct, LatticePoint, Rank1Lattice};
pub use operators::{KineticTable, PotentialField, PotentialKind};
pub use spectral::{NodalValues, Snapshot, SparseSeries, SpectralState, Transform};
pub use splitting::{scheme, EvolutionRecord, Propagator, SplittingScheme};
