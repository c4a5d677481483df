//! Optical spectral functions of polariton modes: Lorentzian broadening of
//! lossless modes, and modes of the Hamiltonian with complex frequencies.

use std::io::{self, Write};

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::{CavityMode, PolaritonModes};
use crate::error::{Error, Result};
use crate::lattice::CouplingMatrix;

pub const DEFAULT_GRID_POINTS: usize = 2001;
/// Default grid margin beyond the outermost mode, in linewidths.
pub const DEFAULT_GRID_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LossModel {
    /// Lossless modes broadened with full width `gamma`.
    LorentzianAdhoc { gamma: f64 },
    /// Cavity frequency `+ i kappa/2`, molecular frequencies `+ i Gamma/2`.
    ComplexHamiltonian { kappa: f64, big_gamma: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    /// Non-negative values; peak-normalized when `normalized` is set.
    pub s: Vec<f64>,
    pub normalized: bool,
    /// Factor mapping `s` back to the unnormalized function.
    pub raw_scale: f64,
    pub model: LossModel,
}

impl Spectrum {
    fn new(omega: Vec<f64>, s: Vec<f64>, model: LossModel) -> Self {
        Self { omega, s, normalized: false, raw_scale: 1.0, model }
    }

    /// Divides by the maximum; the raw maximum is kept in `raw_scale`.
    pub fn normalize(mut self) -> Self {
        if self.normalized {
            return self;
        }
        let max = self.s.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            self.s.iter_mut().for_each(|v| *v /= max);
            self.raw_scale = max;
        }
        self.normalized = true;
        self
    }

    pub fn raw(&self) -> Vec<f64> {
        self.s.iter().map(|v| v * self.raw_scale).collect()
    }

    pub fn normalized_values(&self) -> Vec<f64> {
        if self.normalized {
            return self.s.clone();
        }
        let max = self.s.iter().cloned().fold(0.0, f64::max);
        self.s.iter().map(|v| if max > 0.0 { v / max } else { 0.0 }).collect()
    }

    /// Trapezoid-rule integral of the unnormalized function.
    pub fn area(&self) -> f64 {
        trapezoid(&self.omega, &self.s) * self.raw_scale
    }

    pub fn peaks(&self) -> Vec<Peak> {
        local_maxima(&self.omega, &self.s)
    }

    /// Largest value below `pivot` and at or above it.
    pub fn split_max(&self, pivot: f64) -> (f64, f64) {
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        for (w, s) in self.omega.iter().zip(&self.s) {
            if *w < pivot {
                lower = lower.max(*s);
            } else {
                upper = upper.max(*s);
            }
        }
        (lower, upper)
    }

    /// Writes `omega_meV, S_normalized, S_raw` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "omega_meV,S_normalized,S_raw")?;
        for ((w, n), r) in self.omega.iter().zip(self.normalized_values()).zip(self.raw()) {
            writeln!(out, "{},{},{}", crate::fmt_num(*w), crate::fmt_num(n), crate::fmt_num(r))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Position refined by a parabola through the three grid points.
    pub omega: f64,
    pub height: f64,
    pub index: usize,
}

/// Strict interior local maxima, ordered by frequency.
pub fn local_maxima(omega: &[f64], s: &[f64]) -> Vec<Peak> {
    let mut out = Vec::new();
    for i in 1..s.len().saturating_sub(1) {
        if s[i] > s[i - 1] && s[i] >= s[i + 1] {
            let (y0, y1, y2) = (s[i - 1], s[i], s[i + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let shift = if denom != 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
            let h = 0.5 * (omega[i + 1] - omega[i - 1]);
            out.push(Peak { omega: omega[i] + shift * h, height: y1 - 0.25 * (y0 - y2) * shift, index: i });
        }
    }
    out
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(points >= 2 && lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid(format!("grid needs lo < hi and at least 2 points, got [{lo}, {hi}] x {points}")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect())
}

/// Uniform grid over `[min W - margin*gamma, max W + margin*gamma]`.
pub fn default_grid_with(w: &[f64], gamma: f64, margin: f64, points: usize) -> Result<Vec<f64>> {
    if w.is_empty() {
        return Err(Error::invalid("no modes to place a grid around"));
    }
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    uniform_grid(lo - margin * gamma, hi + margin * gamma, points)
}

pub fn default_grid(pm: &PolaritonModes, gamma: f64) -> Result<Vec<f64>> {
    default_grid_with(&pm.w, gamma, DEFAULT_GRID_MARGIN, DEFAULT_GRID_POINTS)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("frequency grid must be non-empty and strictly increasing"));
    }
    Ok(())
}

/// `S(w) = sum_m f_m (gamma/2) / ((w - W_m)^2 + (gamma/2)^2)` with photon
/// fractions `f_m` clamped at zero.
pub fn spectral_function(pm: &PolaritonModes, gamma: f64, grid: &[f64]) -> Result<Spectrum> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    check_grid(grid)?;
    let hw = 0.5 * gamma;
    let terms: Vec<(f64, f64)> = pm
        .w
        .iter()
        .zip(&pm.photon_fraction)
        .filter(|(_, f)| **f > 0.0)
        .map(|(w, f)| (*w, *f))
        .collect();
    let s = grid
        .iter()
        .map(|&x| terms.iter().map(|&(w, f)| f * hw / ((x - w).powi(2) + hw * hw)).sum())
        .collect();
    Ok(Spectrum::new(grid.to_vec(), s, LossModel::LorentzianAdhoc { gamma }))
}

/// Modes of the molecular-basis Hamiltonian with complex frequencies.
#[derive(Debug, Clone)]
pub struct LossyModes {
    /// Complex eigenfrequencies with positive real part, descending real part.
    pub w: Vec<Complex64>,
    /// `|zeta_1|^2 - |eta_1|^2` under the bilinear normalization
    /// `sum (zeta^2 - eta^2) = 1`.
    pub photon_fraction: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossyRoute {
    /// `(N+1)` complex-symmetric problem for the squared frequencies.
    Reduced,
    /// Full `2(N+1)` complex Hopfield matrix.
    Full,
}

/// Inputs of the molecular-basis loss model.
#[derive(Debug, Clone, Copy)]
pub struct LossySystem<'a> {
    pub cavity: &'a CavityMode,
    pub omega_mol: &'a [f64],
    pub coupling: &'a CouplingMatrix,
    pub kappa: f64,
    pub big_gamma: f64,
}

impl LossySystem<'_> {
    fn validate(&self) -> Result<usize> {
        let n = self.coupling.dim();
        for (what, got) in [("molecular frequencies", self.omega_mol.len()), ("cavity couplings", self.cavity.g.len())] {
            if got != n {
                return Err(Error::DimensionMismatch { what, expected: n, got });
            }
        }
        if !(self.kappa >= 0.0 && self.big_gamma >= 0.0) {
            return Err(Error::invalid(format!(
                "loss rates must be non-negative, got kappa={} Gamma={}",
                self.kappa, self.big_gamma
            )));
        }
        Ok(n + 1)
    }

    fn lambda(&self) -> Vec<Complex64> {
        std::iter::once(Complex64::new(self.cavity.omega_cav, 0.5 * self.kappa))
            .chain(self.omega_mol.iter().map(|&w| Complex64::new(w, 0.5 * self.big_gamma)))
            .collect()
    }

    fn c(&self, i: usize, k: usize) -> f64 {
        match (i, k) {
            _ if i == k => 0.0,
            (0, k) => self.cavity.g[k - 1],
            (i, 0) => self.cavity.g[i - 1],
            (i, k) => self.coupling.get(i - 1, k - 1),
        }
    }
}

fn eigen_failure(m: &Mat<Complex64>, e: impl std::fmt::Debug) -> Error {
    let n = m.nrows();
    let mut fro = 0.0;
    let mut diag = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            fro += m[(i, k)].norm_sqr();
        }
        diag = diag.max(m[(i, i)].norm());
    }
    Error::Numerical(format!(
        "complex eigensolve failed ({e:?}) for {n}x{n} matrix: Frobenius norm {:.6e}, max |diagonal| {diag:.6e}",
        fro.sqrt()
    ))
}

/// Normalizes columns under the bilinear form `sum_i w_i v_i^2` and
/// orthogonalizes within clusters of (near) equal eigenvalues.
fn bilinear_normalize(vecs: &mut Mat<Complex64>, cols: &[usize], keys: &[Complex64], weight: &[f64]) -> Result<()> {
    let dot = |v: &Mat<Complex64>, a: usize, b: usize| -> Complex64 {
        (0..v.nrows()).map(|i| v[(i, a)] * v[(i, b)] * weight[i]).sum()
    };
    for (pos, &a) in cols.iter().enumerate() {
        for &b in &cols[..pos] {
            let (ka, kb) = (keys[a], keys[b]);
            if (ka - kb).norm() > crate::hopfield::DEGENERACY_RTOL * ka.norm().max(kb.norm()) {
                continue;
            }
            let p = dot(vecs, b, a);
            for i in 0..vecs.nrows() {
                let vb = vecs[(i, b)];
                vecs[(i, a)] -= p * vb;
            }
        }
        let s = dot(vecs, a, a);
        if s.norm() < 1e-13 {
            return Err(Error::Numerical(format!(
                "eigenvector at {} has vanishing bilinear norm {:e}",
                keys[a],
                s.norm()
            )));
        }
        let s = s.sqrt().inv();
        for i in 0..vecs.nrows() {
            vecs[(i, a)] *= s;
        }
    }
    Ok(())
}

fn sort_desc(mut modes: Vec<(Complex64, f64)>) -> LossyModes {
    modes.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    LossyModes { w: modes.iter().map(|m| m.0).collect(), photon_fraction: modes.iter().map(|m| m.1).collect() }
}

/// Diagonalizes the lossy Hamiltonian in the molecular basis.
pub fn lossy_modes(sys: &LossySystem<'_>, route: LossyRoute) -> Result<LossyModes> {
    let n = sys.validate()?;
    let lam = sys.lambda();
    match route {
        LossyRoute::Reduced => {
            // Lambda^2 + 2 Lambda^1/2 C Lambda^1/2, complex symmetric.
            let root: Vec<Complex64> = lam.iter().map(|l| l.sqrt()).collect();
            let m = Mat::from_fn(n, n, |i, k| {
                let off = 2.0 * sys.c(i, k) * root[i] * root[k];
                if i == k { lam[i] * lam[i] } else { off }
            });
            let evd = m.eigen().map_err(|e| eigen_failure(&m, e))?;
            let vals = evd.S().column_vector();
            let mut vecs = evd.U().to_owned();
            let sq: Vec<Complex64> = (0..n).map(|i| vals[i]).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sq[b].re.total_cmp(&sq[a].re));
            bilinear_normalize(&mut vecs, &order, &sq, &vec![1.0; n])?;
            let modes = (0..n)
                .map(|m| {
                    let w = sq[m].sqrt();
                    let z0 = vecs[(0, m)];
                    let (up, down) = ((w / lam[0]).sqrt() * z0, (lam[0] / w).sqrt() * z0);
                    let (zeta, eta) = (0.5 * (up + down), 0.5 * (up - down));
                    (w, zeta.norm_sqr() - eta.norm_sqr())
                })
                .filter(|(w, _)| w.re > 0.0)
                .collect();
            Ok(sort_desc(modes))
        }
        LossyRoute::Full => {
            let dim = 2 * n;
            let mut m = Mat::<Complex64>::zeros(dim, dim);
            for i in 0..n {
                m[(2 * i, 2 * i)] = lam[i];
                m[(2 * i + 1, 2 * i + 1)] = -lam[i];
                for k in 0..n {
                    let c = Complex64::new(sys.c(i, k), 0.0);
                    if i == k || c.re == 0.0 {
                        continue;
                    }
                    m[(2 * i, 2 * k)] = c;
                    m[(2 * i + 1, 2 * k)] = c;
                    m[(2 * i, 2 * k + 1)] = -c;
                    m[(2 * i + 1, 2 * k + 1)] = -c;
                }
            }
            let evd = m.eigen().map_err(|e| eigen_failure(&m, e))?;
            let vals = evd.S().column_vector();
            let mut vecs = evd.U().to_owned();
            let keys: Vec<Complex64> = (0..dim).map(|i| vals[i]).collect();
            let mut pos: Vec<usize> = (0..dim).filter(|&i| keys[i].re > 0.0).collect();
            pos.sort_by(|&a, &b| keys[b].re.total_cmp(&keys[a].re));
            // The full eigenvectors are bilinear-orthogonal under the
            // symplectic metric diag(1, -1, 1, -1, ...).
            let weight: Vec<f64> = (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            bilinear_normalize(&mut vecs, &pos, &keys, &weight)?;
            let modes = pos
                .iter()
                .map(|&m| (keys[m], vecs[(0, m)].norm_sqr() - vecs[(1, m)].norm_sqr()))
                .collect();
            Ok(sort_desc(modes))
        }
    }
}

/// `S(w) = sum_m f_m Im W_m / ((w - Re W_m)^2 + (Im W_m)^2)`, negative
/// photon fractions clamped at zero.
pub fn spectrum_from_lossy(modes: &LossyModes, grid: &[f64], kappa: f64, big_gamma: f64) -> Result<Spectrum> {
    check_grid(grid)?;
    let terms: Vec<(Complex64, f64)> = modes
        .w
        .iter()
        .zip(&modes.photon_fraction)
        .filter(|(w, f)| **f > 0.0 && w.im > 0.0)
        .map(|(w, f)| (*w, *f))
        .collect();
    let s = grid
        .iter()
        .map(|&x| terms.iter().map(|&(w, f)| f * w.im / ((x - w.re).powi(2) + w.im * w.im)).sum())
        .collect();
    Ok(Spectrum::new(grid.to_vec(), s, LossModel::ComplexHamiltonian { kappa, big_gamma }))
}

pub fn spectral_function_lossy(sys: &LossySystem<'_>, grid: &[f64], route: LossyRoute) -> Result<Spectrum> {
    let modes = lossy_modes(sys, route)?;
    spectrum_from_lossy(&modes, grid, sys.kappa, sys.big_gamma)
}
