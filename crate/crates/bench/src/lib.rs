//! Shared fixtures for the solver benchmarks.

use std::sync::Arc;

use latspec::antialias::build;
use latspec::operators::{make_gaussian, make_potential};
use latspec::{AntiAliasingSet, KineticTable, PotentialField, PotentialKind, Rank1Lattice, SpectralState};

pub struct Fixture {
    pub aa: Arc<AntiAliasingSet>,
    pub kinetic: KineticTable,
    pub potential: PotentialField,
    pub state: SpectralState,
}

/// Gaussian state with the given potential on a lattice, at `epsilon = 1`.
pub fn fixture(lattice: &Rank1Lattice, potential: PotentialKind) -> Fixture {
    let aa = Arc::new(build(lattice).expect("anti-aliasing set"));
    Fixture {
        kinetic: KineticTable::new(&aa, 1.0).expect("kinetic table"),
        potential: make_potential(potential, lattice).expect("potential"),
        state: make_gaussian(&aa, 1.0).expect("initial state"),
        aa,
    }
}
