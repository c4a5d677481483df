//! Finite square patches of identical point dipoles and their static
//! dipole-dipole coupling.
//!
//! Molecules are indexed row-major: `j = row * nx + col`, sitting at
//! `(x, y) = (a * col, a * row)` in nm. All dipoles point along `z`,
//! perpendicular to the lattice plane.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `e^2 / (4 pi eps0)` in eV nm (CODATA 2018).
pub const COULOMB_EV_NM: f64 = 1.439_964_547_842_567;

/// One debye expressed in units of `e * nm`.
pub const DEBYE_IN_E_NM: f64 = 0.020_819_433_622_621_47;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "a_nm")]
    pub a: f64,
    pub positions: Vec<[f64; 2]>,
}

impl Lattice {
    pub fn new(nx: usize, ny: usize, a: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!(
                "lattice dimensions must be positive, got {nx}x{ny}"
            )));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!(
                "lattice constant must be positive and finite, got {a}"
            )));
        }
        let positions = (0..nx * ny)
            .map(|j| {
                let (row, col) = (j / nx, j % nx);
                [a * col as f64, a * row as f64]
            })
            .collect();
        Ok(Self { nx, ny, a, positions })
    }

    /// Number of molecules.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.ny && col < self.nx);
        row * self.nx + col
    }

    pub fn row_col(&self, j: usize) -> (usize, usize) {
        (j / self.nx, j % self.nx)
    }

    pub fn centroid(&self) -> [f64; 2] {
        [
            0.5 * self.a * (self.nx - 1) as f64,
            0.5 * self.a * (self.ny - 1) as f64,
        ]
    }

    /// Side lengths `(nx * a, ny * a)` of the patch in nm.
    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.a, self.ny as f64 * self.a)
    }

    pub fn distance(&self, j: usize, l: usize) -> f64 {
        let [xj, yj] = self.positions[j];
        let [xl, yl] = self.positions[l];
        (xl - xj).hypot(yl - yj)
    }

    /// Index of the molecule mirrored across the vertical center line.
    pub fn mirror_x(&self, j: usize) -> usize {
        let (row, col) = self.row_col(j);
        self.index(row, self.nx - 1 - col)
    }

    /// Index of the molecule mirrored across the horizontal center line.
    pub fn mirror_y(&self, j: usize) -> usize {
        let (row, col) = self.row_col(j);
        self.index(self.ny - 1 - row, col)
    }

    /// All unordered pairs `(j, l)` with `j < l`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |j| (j + 1..n).map(move |l| (j, l)))
    }
}

/// Orientation-dependent part of the static dipole-dipole interaction,
/// `d_j . d_l - 3 (d_j . e)(d_l . e)`, scaled by `(a / r)^3`.
///
/// For unit dipoles perpendicular to the separation this is exactly
/// `(a / r)^3`, so multiplying by the nearest-neighbour energy gives the
/// coupling.
pub fn dipole_angular_factor(d_j: [f64; 3], d_l: [f64; 3], r_jl: [f64; 3], a: f64) -> f64 {
    let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let r = dot(r_jl, r_jl).sqrt();
    let e = [r_jl[0] / r, r_jl[1] / r, r_jl[2] / r];
    let angular = dot(d_j, d_l) - 3.0 * dot(d_j, e) * dot(d_l, e);
    angular * (a / r).powi(3)
}

const DIPOLE_AXIS: [f64; 3] = [0.0, 0.0, 1.0];

/// Symmetric matrix of pair couplings `hbar Omega_jl` in meV, zero diagonal.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub omega0: f64,
    values: Mat<f64>,
}

impl CouplingMatrix {
    /// Wraps an explicit matrix. Used for fault injection and for
    /// couplings that do not come from a lattice.
    pub fn from_mat(omega0: f64, values: Mat<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                what: "coupling matrix must be square",
                expected: values.nrows(),
                got: values.ncols(),
            });
        }
        Ok(Self { omega0, values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.values[(j, l)]
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|l| self.values[(j, l)] == 0.0))
    }

    /// First `(j, l)` with `Omega_jl != Omega_lj` (bitwise), if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        let n = self.dim();
        (0..n)
            .flat_map(|j| (j + 1..n).map(move |l| (j, l)))
            .find(|&(j, l)| self.values[(j, l)].to_bits() != self.values[(l, j)].to_bits())
    }

    /// Largest eigenvalue-free bound `max_j sum_l |Omega_jl|`.
    pub fn row_sum_bound(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|l| self.values[(j, l)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Builds `Omega_jl = omega0 * (a / r_jl)^3` for every pair of the lattice.
pub fn coupling_matrix(lat: &Lattice, omega0: f64) -> Result<CouplingMatrix> {
    if !omega0.is_finite() {
        return Err(Error::invalid(format!("omega0 must be finite, got {omega0}")));
    }
    let n = lat.len();
    let mut values = Mat::<f64>::zeros(n, n);
    if omega0 != 0.0 {
        for j in 0..n {
            let [xj, yj] = lat.positions[j];
            for l in j + 1..n {
                let [xl, yl] = lat.positions[l];
                let r = [xl - xj, yl - yj, 0.0];
                let v = omega0 * dipole_angular_factor(DIPOLE_AXIS, DIPOLE_AXIS, r, lat.a);
                values[(j, l)] = v;
                values[(l, j)] = v;
            }
        }
    }
    Ok(CouplingMatrix { omega0, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleUnit {
    /// Elementary charge times nanometre.
    ENm,
    Debye,
}

/// Nearest-neighbour coupling `hbar Omega_0 = d^2 / (4 pi eps0 a^3)` in meV.
pub fn omega0_from_dipole(d_mol: f64, unit: DipoleUnit, a: f64) -> Result<f64> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("lattice constant must be positive, got {a}")));
    }
    if !(d_mol.is_finite() && d_mol >= 0.0) {
        return Err(Error::invalid(format!("dipole moment must be non-negative, got {d_mol}")));
    }
    let d = match unit {
        DipoleUnit::ENm => d_mol,
        DipoleUnit::Debye => d_mol * DEBYE_IN_E_NM,
    };
    Ok(1e3 * COULOMB_EV_NM * d * d / a.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_patch_size() {
        let lat = Lattice::new(51, 51, 0.5).unwrap();
        assert_eq!(lat.len(), 2601);
        let (w, h) = lat.extent();
        assert_relative_eq!(w, 25.5);
        assert_relative_eq!(h, 25.5);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(Lattice::new(0, 3, 0.5).is_err());
        assert!(Lattice::new(3, 0, 0.5).is_err());
        assert!(Lattice::new(3, 3, 0.0).is_err());
        assert!(Lattice::new(3, 3, -1.0).is_err());
        assert!(Lattice::new(3, 3, f64::NAN).is_err());
    }

    #[test]
    fn single_site_has_no_pairs() {
        let lat = Lattice::new(1, 1, 0.5).unwrap();
        assert_eq!(lat.pairs().count(), 0);
        let c = coupling_matrix(&lat, 1.0).unwrap();
        assert_eq!(c.dim(), 1);
        assert_eq!(c.get(0, 0), 0.0);
    }

    #[test]
    fn two_by_two_pair_distances() {
        let lat = Lattice::new(2, 2, 0.5).unwrap();
        let mut d: Vec<f64> = lat.pairs().map(|(j, l)| lat.distance(j, l)).collect();
        d.sort_by(f64::total_cmp);
        assert_eq!(d.len(), 6);
        for r in &d[..4] {
            assert_relative_eq!(*r, 0.5);
        }
        for r in &d[4..] {
            assert_relative_eq!(*r, 0.5 * 2f64.sqrt());
        }
    }

    #[test]
    fn row_major_indexing() {
        let lat = Lattice::new(4, 3, 0.5).unwrap();
        assert_eq!(lat.index(2, 1), 9);
        assert_eq!(lat.row_col(9), (2, 1));
        assert_eq!(lat.positions[9], [0.5, 1.0]);
        assert_eq!(lat.mirror_x(9), lat.index(2, 2));
        assert_eq!(lat.mirror_y(9), lat.index(0, 1));
    }

    #[test]
    fn inverse_cube_values() {
        let lat = Lattice::new(3, 3, 0.5).unwrap();
        let c = coupling_matrix(&lat, 2.0).unwrap();
        assert_relative_eq!(c.get(0, 1), 2.0, max_relative = 1e-15);
        assert_relative_eq!(c.get(0, 2), 2.0 / 8.0, max_relative = 1e-15);
        assert_relative_eq!(c.get(0, 4), 2.0 * 0.353_553_390_593_273_8, max_relative = 1e-14);
    }

    #[test]
    fn chain_closed_form() {
        let lat = Lattice::new(9, 1, 0.3).unwrap();
        let c = coupling_matrix(&lat, 1.5).unwrap();
        for j in 0..9usize {
            for l in 0..9 {
                let expect = if j == l { 0.0 } else { 1.5 / (j.abs_diff(l) as f64).powi(3) };
                assert_relative_eq!(c.get(j, l), expect, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn angular_factor_in_plane_dipoles() {
        // Head-to-tail in-plane dipoles: 1 - 3 = -2 at r = a.
        let f = dipole_angular_factor([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.0], 0.5);
        assert_relative_eq!(f, -2.0, max_relative = 1e-15);
        // Side-by-side in-plane dipoles behave like the perpendicular case.
        let f = dipole_angular_factor([0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.0, 0.0], 0.5);
        assert_relative_eq!(f, 1.0, max_relative = 1e-15);
        // Orthogonal dipoles do not couple.
        let f = dipole_angular_factor([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.3, 0.4, 0.0], 0.5);
        assert_eq!(f, 0.0);
    }

    #[test]
    fn omega0_dipole_scaling() {
        assert_eq!(omega0_from_dipole(0.0, DipoleUnit::Debye, 0.5).unwrap(), 0.0);
        let base = omega0_from_dipole(0.3, DipoleUnit::Debye, 0.5).unwrap();
        let doubled = omega0_from_dipole(0.6, DipoleUnit::Debye, 0.5).unwrap();
        assert_relative_eq!(doubled / base, 4.0, max_relative = 1e-14);
        let halved_a = omega0_from_dipole(0.3, DipoleUnit::Debye, 0.25).unwrap();
        assert_relative_eq!(halved_a / base, 8.0, max_relative = 1e-14);
        // 0.1 e nm at 1 nm: 1.44 eV nm * 0.01 nm^2 / 1 nm^3.
        assert_relative_eq!(
            omega0_from_dipole(0.1, DipoleUnit::ENm, 1.0).unwrap(),
            14.399_645_478_425_67,
            max_relative = 1e-12
        );
        assert!(omega0_from_dipole(1.0, DipoleUnit::ENm, 0.0).is_err());
    }

    #[test]
    fn lattice_json_fields() {
        let lat = Lattice::new(2, 1, 0.5).unwrap();
        let v: serde_json::Value = serde_json::to_value(&lat).unwrap();
        assert_eq!(v["nx"], 2);
        assert_eq!(v["a_nm"], 0.5);
        assert_eq!(v["positions"][1][0], 0.5);
    }
}
