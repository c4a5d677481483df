//! Collective vibrational modes of 2D dipole lattices, their coupling to a
//! localized cavity mode, and the resulting polariton spectra.
//!
//! Energies are in meV (angular frequencies with `hbar = 1`), lengths in nm.

pub mod analytic;
pub mod cavity;
pub mod collective;
pub mod error;
pub mod hopfield;
pub mod lattice;
pub mod materials;
pub mod spectra;
pub mod validate;

pub use cavity::{CavityMode, PolaritonModes};
pub use collective::CollectiveModes;
pub use error::{Error, Result};
pub use hopfield::HopfieldMatrix;
pub use lattice::{CouplingMatrix, Lattice};
pub use spectra::Spectrum;

/// Worker threads used inside dense factorizations; `0` means one per
/// available core.
pub fn set_parallelism(threads: usize) {
    let par = if threads == 1 { faer::Par::Seq } else { faer::Par::rayon(threads) };
    faer::set_global_parallelism(par);
}

/// Fixed-width scientific formatting used by every CSV export: 12
/// significant digits, `.` decimal separator.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}
