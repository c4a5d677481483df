//! Gaussian cavity profile, projection onto collective modes, and the
//! cavity-plus-collective-modes Hopfield problem.

use std::io::{self, Write};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::collective::CollectiveModes;
use crate::error::{Error, Result};
use crate::hopfield::{self, degenerate_clusters, BogoliubovModes, HopfieldMatrix};
use crate::lattice::Lattice;

/// Polaritons with photon fraction below this are flagged dark in exports.
pub const DARK_PHOTON_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CavityMode {
    pub omega_cav: f64,
    /// Gaussian width in nm; `f64::INFINITY` for a homogeneous field.
    pub sigma_l: f64,
    pub center: [f64; 2],
    /// Per-molecule couplings in meV, in lattice index order.
    pub g: Vec<f64>,
    pub g0: f64,
    pub g_tot: f64,
}

impl CavityMode {
    pub fn is_homogeneous(&self) -> bool {
        self.sigma_l.is_infinite()
    }

    /// Diamagnetic shift `2 sum_j g_j^2 / omega_j` added to the cavity frequency.
    pub fn diamagnetic_shift(&self, omega_mol: &[f64]) -> Result<f64> {
        if omega_mol.len() != self.g.len() {
            return Err(Error::DimensionMismatch {
                what: "molecular frequencies vs cavity couplings",
                expected: self.g.len(),
                got: omega_mol.len(),
            });
        }
        Ok(2.0 * self.g.iter().zip(omega_mol).map(|(g, w)| g * g / w).sum::<f64>())
    }

    pub fn with_omega_cav(mut self, omega_cav: f64) -> Self {
        self.omega_cav = omega_cav;
        self
    }

    /// Multiplies every coupling by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.g.iter_mut().for_each(|g| *g *= s);
        self.g0 *= s;
        self.g_tot *= s.abs();
        self
    }
}

/// Builds `g_j = g0 exp(-|r_j - r0|^2 / (2 sigma_L^2))`. Exactly one of `g0`
/// and `g_tot` must be given; with `g_tot` the profile is rescaled so that
/// `sum_j g_j^2 = g_tot^2`. The center defaults to the lattice centroid.
pub fn gaussian_coupling(
    lat: &Lattice,
    omega_cav: f64,
    sigma_l: f64,
    center: Option<[f64; 2]>,
    g0: Option<f64>,
    g_tot: Option<f64>,
) -> Result<CavityMode> {
    if !(sigma_l > 0.0) {
        return Err(Error::invalid(format!("sigma_L must be positive or infinite, got {sigma_l}")));
    }
    if !omega_cav.is_finite() {
        return Err(Error::invalid(format!("cavity frequency must be finite, got {omega_cav}")));
    }
    let center = center.unwrap_or_else(|| lat.centroid());
    let profile: Vec<f64> = lat
        .positions
        .iter()
        .map(|p| {
            if sigma_l.is_infinite() {
                1.0
            } else {
                let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                (-r2 / (2.0 * sigma_l * sigma_l)).exp()
            }
        })
        .collect();
    let norm = profile.iter().map(|x| x * x).sum::<f64>().sqrt();
    let g0 = match (g0, g_tot) {
        (Some(g0), None) => g0,
        (None, Some(gt)) => {
            if gt < 0.0 {
                return Err(Error::invalid(format!("g_tot must be non-negative, got {gt}")));
            }
            gt / norm
        }
        (Some(_), Some(_)) => return Err(Error::invalid("give either g0 or g_tot, not both")),
        (None, None) => return Err(Error::invalid("one of g0 or g_tot is required")),
    };
    let g: Vec<f64> = profile.iter().map(|p| g0 * p).collect();
    Ok(CavityMode { omega_cav, sigma_l, center, g0, g_tot: g0.abs() * norm, g })
}

/// `G_n = sum_j g_j x_jn`.
pub fn collective_couplings(cav: &CavityMode, modes: &CollectiveModes) -> Result<Vec<f64>> {
    let n = modes.len();
    if cav.g.len() != n {
        return Err(Error::DimensionMismatch { what: "cavity couplings vs collective modes", expected: n, got: cav.g.len() });
    }
    Ok((0..n).map(|m| (0..n).map(|j| cav.g[j] * modes.x[(j, m)]).sum()).collect())
}

/// Upper and lower eigenfrequencies of one cavity mode coupled to one
/// collective mode, without the rotating-wave approximation.
pub fn two_mode_energies(omega_cav: f64, w1: f64, g1: f64) -> Result<(f64, f64)> {
    if !(omega_cav > 0.0 && w1 > 0.0) {
        return Err(Error::invalid(format!("frequencies must be positive, got {omega_cav} and {w1}")));
    }
    let sum = omega_cav * omega_cav + w1 * w1;
    let root = ((omega_cav * omega_cav - w1 * w1).powi(2) + 16.0 * g1 * g1 * omega_cav * w1).sqrt();
    let (plus, minus) = (0.5 * (sum + root), 0.5 * (sum - root));
    if minus < 0.0 {
        return Err(Error::Instability(format!("lower polariton squared frequency {minus:e} meV^2 is negative")));
    }
    Ok((plus.sqrt(), minus.sqrt()))
}

/// Hopfield matrix of the cavity (index 0) coupled to collective modes
/// (index `n + 1`) with strengths `G_n`.
pub fn polariton_matrix_from(omega_cav: f64, w: &[f64], gcal: &[f64]) -> Result<HopfieldMatrix> {
    if w.len() != gcal.len() {
        return Err(Error::DimensionMismatch { what: "mode frequencies vs couplings", expected: w.len(), got: gcal.len() });
    }
    let freqs: Vec<f64> = std::iter::once(omega_cav).chain(w.iter().copied()).collect();
    Ok(HopfieldMatrix::assemble(&freqs, |i, k| match (i, k) {
        (0, n) | (n, 0) => gcal[n - 1],
        _ => 0.0,
    }))
}

pub fn polariton_matrix(cav: &CavityMode, modes: &CollectiveModes) -> Result<HopfieldMatrix> {
    polariton_matrix_from(cav.omega_cav, &modes.w, &collective_couplings(cav, modes)?)
}

/// Positive-branch polaritons. Row `m` of `zeta2`/`eta2` holds the matter
/// coefficients of polariton `m` on every collective mode.
#[derive(Debug, Clone)]
pub struct PolaritonModes {
    pub w: Vec<f64>,
    pub zeta1: Vec<f64>,
    pub eta1: Vec<f64>,
    pub zeta2: Mat<f64>,
    pub eta2: Mat<f64>,
    pub photon_fraction: Vec<f64>,
}

impl PolaritonModes {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn norm(&self, m: usize) -> f64 {
        let matter: f64 = (0..self.zeta2.ncols())
            .map(|n| self.zeta2[(m, n)].powi(2) - self.eta2[(m, n)].powi(2))
            .sum();
        self.photon_fraction[m] + matter
    }

    pub fn is_dark(&self, m: usize) -> bool {
        self.photon_fraction[m] < DARK_PHOTON_FRACTION
    }

    /// Writes `m, W_meV, photon_fraction, dark_flag` rows (1-based `m`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "m,W_meV,photon_fraction,dark_flag")?;
        for m in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                m + 1,
                crate::fmt_num(self.w[m]),
                crate::fmt_num(self.photon_fraction[m]),
                u8::from(self.is_dark(m))
            )?;
        }
        Ok(())
    }

    fn from_bogoliubov(b: BogoliubovModes) -> Self {
        let (rows, cols) = (b.alpha.nrows(), b.alpha.ncols());
        let mut out = Self {
            zeta1: (0..rows).map(|m| b.alpha[(m, 0)]).collect(),
            eta1: (0..rows).map(|m| b.beta[(m, 0)]).collect(),
            zeta2: Mat::from_fn(rows, cols - 1, |m, n| b.alpha[(m, n + 1)]),
            eta2: Mat::from_fn(rows, cols - 1, |m, n| b.beta[(m, n + 1)]),
            photon_fraction: Vec::new(),
            w: b.freqs,
        };
        out.fix_signs();
        out.photon_fraction = (0..rows).map(|m| out.zeta1[m].powi(2) - out.eta1[m].powi(2)).collect();
        out
    }

    /// Makes the first largest-magnitude `zeta + eta` component positive.
    fn fix_signs(&mut self) {
        let cols = self.zeta2.ncols();
        for m in 0..self.len() {
            let u = |i: usize| {
                if i == 0 {
                    self.zeta1[m] + self.eta1[m]
                } else {
                    self.zeta2[(m, i - 1)] + self.eta2[(m, i - 1)]
                }
            };
            let max = (0..=cols).map(|i| u(i).abs()).fold(0.0, f64::max);
            let lead = (0..=cols).find(|&i| u(i).abs() >= max * (1.0 - 1e-9)).unwrap_or(0);
            if u(lead) < 0.0 {
                self.zeta1[m] = -self.zeta1[m];
                self.eta1[m] = -self.eta1[m];
                for n in 0..cols {
                    self.zeta2[(m, n)] = -self.zeta2[(m, n)];
                    self.eta2[(m, n)] = -self.eta2[(m, n)];
                }
            }
        }
    }
}

/// Reference path: general solve of the `2(N+1)` Hopfield matrix.
pub fn diagonalize_polaritons(h: &HopfieldMatrix) -> Result<PolaritonModes> {
    Ok(PolaritonModes::from_bogoliubov(hopfield::diagonalize(h)?))
}

/// Fast path through the `(N+1)` symmetric problem
/// `Lambda^2 + 2 Lambda^1/2 C Lambda^1/2`, where `Lambda` holds the bare
/// frequencies and `C` the cavity-mode couplings.
pub fn solve_polaritons(omega_cav: f64, w: &[f64], gcal: &[f64]) -> Result<PolaritonModes> {
    if w.len() != gcal.len() {
        return Err(Error::DimensionMismatch { what: "mode frequencies vs couplings", expected: w.len(), got: gcal.len() });
    }
    let lam: Vec<f64> = std::iter::once(omega_cav).chain(w.iter().copied()).collect();
    if let Some(bad) = lam.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::invalid(format!("bare frequencies must be positive, got {bad}")));
    }
    let n = lam.len();
    if gcal.iter().all(|&g| g == 0.0) {
        return Ok(PolaritonModes::from_bogoliubov(hopfield::uncoupled_modes(&lam)));
    }
    let m = Mat::from_fn(n, n, |i, k| match (i, k) {
        (i, k) if i == k => lam[i] * lam[i],
        (0, k) => 2.0 * (lam[0] * lam[k]).sqrt() * gcal[k - 1],
        (i, 0) => 2.0 * (lam[0] * lam[i]).sqrt() * gcal[i - 1],
        _ => 0.0,
    });
    let (vals, vecs) = hopfield::symmetric_eigen(&m)?;
    if let Some(v) = vals.iter().find(|v| **v <= 0.0) {
        return Err(Error::Instability(format!("polariton squared frequency {v:e} meV^2 is not positive")));
    }
    let freqs: Vec<f64> = vals.iter().rev().map(|v| v.sqrt()).collect();
    let mut z = Mat::from_fn(n, n, |i, m| vecs[(i, n - 1 - m)]);
    let metric = vec![1.0; n];
    for cluster in degenerate_clusters(&freqs) {
        if cluster.len() > 1 {
            hopfield::orthonormalize(&mut z, cluster, &metric);
        }
    }
    let r = |m: usize, i: usize| (freqs[m] / lam[i]).sqrt();
    let alpha = Mat::from_fn(n, n, |m, i| 0.5 * z[(i, m)] * (r(m, i) + r(m, i).recip()));
    let beta = Mat::from_fn(n, n, |m, i| 0.5 * z[(i, m)] * (r(m, i) - r(m, i).recip()));
    Ok(PolaritonModes::from_bogoliubov(BogoliubovModes { freqs, alpha, beta }))
}

/// Builds couplings from `cav` and solves with the fast path.
pub fn polaritons(cav: &CavityMode, modes: &CollectiveModes) -> Result<PolaritonModes> {
    solve_polaritons(cav.omega_cav, &modes.w, &collective_couplings(cav, modes)?)
}
