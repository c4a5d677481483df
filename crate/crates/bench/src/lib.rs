//! Shared fixtures for the benchmarks in `benches/`.

use polarlattice::lattice::coupling_matrix;
use polarlattice::{CouplingMatrix, Lattice};

/// Square patch with the reference spacing and `Omega0 = 1 meV`.
pub fn square_patch(side: usize) -> (Lattice, CouplingMatrix) {
    let lat = Lattice::new(side, side, 0.5).expect("valid lattice");
    let c = coupling_matrix(&lat, 1.0).expect("valid coupling");
    (lat, c)
}
