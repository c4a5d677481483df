//! Collective vibrational modes of a dipole-coupled lattice.
//!
//! Mode `n` is row `n` of `alpha`/`beta`; modes are sorted by descending
//! frequency so index 0 is the highest-energy mode. `x[(j, n)]` is the
//! inverse map from collective to molecular operators.

use std::io::{self, Write};
use std::ops::Range;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::hopfield::{self, degenerate_clusters, BogoliubovModes, HopfieldMatrix};
use crate::lattice::{CouplingMatrix, Lattice};

/// Relative tolerance below which `sum_j (alpha + beta)` counts as zero for
/// sign fixing.
const DARK_SUM_RTOL: f64 = 1e-10;
/// Relative tolerance for ties in the FFT power argmax.
const FFT_TIE_RTOL: f64 = 1e-9;

/// Assembles the molecular-basis Hopfield matrix.
pub fn build_hopfield(omega: &[f64], coupling: &CouplingMatrix) -> Result<HopfieldMatrix> {
    if omega.len() != coupling.dim() {
        return Err(Error::DimensionMismatch {
            what: "molecular frequencies vs coupling matrix",
            expected: coupling.dim(),
            got: omega.len(),
        });
    }
    if let Some((j, w)) = omega.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::invalid(format!("molecular frequency {j} must be positive, got {w}")));
    }
    Ok(HopfieldMatrix::assemble(omega, |j, l| coupling.get(j, l)))
}

#[derive(Debug, Clone)]
pub struct CollectiveModes {
    /// Eigenfrequencies in meV, descending.
    pub w: Vec<f64>,
    pub alpha: Mat<f64>,
    pub beta: Mat<f64>,
    /// `x = (alpha + beta)^-1`, indexed `(molecule, mode)`.
    pub x: Mat<f64>,
    /// Signed total dipoles in units of the molecular dipole.
    pub d: Vec<f64>,
    /// Folded wavevectors `(kx, ky)` in nm^-1.
    pub k: Vec<[f64; 2]>,
    pub nx: usize,
    pub ny: usize,
}

impl CollectiveModes {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn bosonic_norm(&self, n: usize) -> f64 {
        (0..self.alpha.ncols())
            .map(|j| self.alpha[(n, j)].powi(2) - self.beta[(n, j)].powi(2))
            .sum()
    }

    /// Largest entry of `|x (alpha + beta) - I|`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.len();
        let ab = Mat::from_fn(n, n, |m, j| self.alpha[(m, j)] + self.beta[(m, j)]);
        let prod = &self.x * &ab;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn kmag(&self, n: usize) -> f64 {
        self.k[n][0].hypot(self.k[n][1])
    }

    /// Coefficients `alpha_nj` of mode `n` as a row-major `ny x nx` grid.
    pub fn alpha_map(&self, n: usize) -> Vec<f64> {
        (0..self.alpha.ncols()).map(|j| self.alpha[(n, j)]).collect()
    }

    /// Writes `n, W_meV, kx_invnm, ky_invnm, D_over_dmol` rows (1-based `n`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,W_meV,kx_invnm,ky_invnm,D_over_dmol")?;
        for n in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                n + 1,
                crate::fmt_num(self.w[n]),
                crate::fmt_num(self.k[n][0]),
                crate::fmt_num(self.k[n][1]),
                crate::fmt_num(self.d[n])
            )?;
        }
        Ok(())
    }

    /// Writes the `alpha` map of mode `n` as `row,col,x_nm,y_nm,alpha`.
    pub fn write_map_csv<W: Write>(&self, lat: &Lattice, n: usize, mut out: W) -> io::Result<()> {
        writeln!(out, "row,col,x_nm,y_nm,alpha")?;
        for j in 0..lat.len() {
            let (r, c) = lat.row_col(j);
            let p = lat.positions[j];
            writeln!(
                out,
                "{r},{c},{},{},{}",
                crate::fmt_num(p[0]),
                crate::fmt_num(p[1]),
                crate::fmt_num(self.alpha[(n, j)])
            )?;
        }
        Ok(())
    }
}

/// Total dipole `D_n = d_mol * sum_j x_jn` of every mode.
pub fn total_dipoles(modes: &CollectiveModes, d_mol: f64) -> Vec<f64> {
    let n = modes.len();
    (0..n)
        .map(|m| d_mol * (0..n).map(|j| modes.x[(j, m)]).sum::<f64>())
        .collect()
}

/// Total dipoles for eigenvectors scaled to unit Euclidean length in the
/// `(alpha, beta)` space instead of unit bosonic norm: `D_n` times
/// `sqrt(sum_j alpha_nj^2 + beta_nj^2)`.
pub fn total_dipoles_unit_norm(modes: &CollectiveModes, d_mol: f64) -> Vec<f64> {
    let n = modes.len();
    total_dipoles(modes, d_mol)
        .into_iter()
        .enumerate()
        .map(|(m, d)| {
            let e: f64 = (0..n).map(|j| modes.alpha[(m, j)].powi(2) + modes.beta[(m, j)].powi(2)).sum();
            d * e.sqrt()
        })
        .collect()
}

/// Reference path: general `2N x 2N` solve of the Hopfield matrix.
pub fn diagonalize_collective(h: &HopfieldMatrix, lat: &Lattice) -> Result<CollectiveModes> {
    if h.modes() != lat.len() {
        return Err(Error::DimensionMismatch {
            what: "Hopfield matrix vs lattice",
            expected: lat.len(),
            got: h.modes(),
        });
    }
    let n = h.modes();
    let BogoliubovModes { freqs, alpha, beta } = hopfield::diagonalize(h)?;
    if h.is_uncoupled() {
        return finish_identity(freqs, alpha, lat);
    }
    // Columns [alpha; beta] under the metric diag(1, -1).
    let mut stacked = Mat::from_fn(2 * n, n, |i, m| if i < n { alpha[(m, i)] } else { beta[(m, i - n)] });
    let metric: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let fold = |mirror: fn(&Lattice, usize) -> usize| {
        move |i: usize| if i < n { mirror(lat, i) } else { n + mirror(lat, i - n) }
    };
    let (mx, my) = (fold(Lattice::mirror_x), fold(Lattice::mirror_y));
    for cluster in degenerate_clusters(&freqs) {
        hopfield::resolve_by_symmetry(&mut stacked, cluster, &metric, &[(1.0, &mx), (2.0, &my)])?;
    }
    let alpha = Mat::from_fn(n, n, |m, j| stacked[(j, m)]);
    let beta = Mat::from_fn(n, n, |m, j| stacked[(n + j, m)]);
    let ab = Mat::from_fn(n, n, |m, j| alpha[(m, j)] + beta[(m, j)]);
    let x = ab.partial_piv_lu().inverse();
    finish(freqs, alpha, beta, x, lat)
}

/// Fast path for a uniform molecular frequency: `W_n^2` are the eigenvalues
/// of the symmetric matrix `w^2 I + 2 w Omega`.
pub fn reduced_symmetric_solve(omega_mol: f64, coupling: &CouplingMatrix, lat: &Lattice) -> Result<CollectiveModes> {
    let n = coupling.dim();
    if n != lat.len() {
        return Err(Error::DimensionMismatch { what: "coupling matrix vs lattice", expected: lat.len(), got: n });
    }
    if !(omega_mol.is_finite() && omega_mol > 0.0) {
        return Err(Error::invalid(format!("molecular frequency must be positive, got {omega_mol}")));
    }
    if coupling.is_zero() {
        let id = Mat::from_fn(n, n, |m, j| if m == j { 1.0 } else { 0.0 });
        return finish_identity(vec![omega_mol; n], id, lat);
    }
    let m = Mat::from_fn(n, n, |i, j| {
        let diag = if i == j { omega_mol * omega_mol } else { 0.0 };
        diag + 2.0 * omega_mol * coupling.get(i, j)
    });
    let (vals, vecs) = hopfield::symmetric_eigen(&m)?;
    if let Some((i, v)) = vals.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::Instability(format!(
            "squared frequency {v:e} meV^2 of mode {} is not positive",
            n - i
        )));
    }
    // Ascending eigenvalues reversed into descending frequencies.
    let freqs: Vec<f64> = vals.iter().rev().map(|v| v.sqrt()).collect();
    let mut z = Mat::from_fn(n, n, |j, m| vecs[(j, n - 1 - m)]);
    let metric = vec![1.0; n];
    let (mx, my) = (|j: usize| lat.mirror_x(j), |j: usize| lat.mirror_y(j));
    for cluster in degenerate_clusters(&freqs) {
        hopfield::resolve_by_symmetry(&mut z, cluster, &metric, &[(1.0, &mx), (2.0, &my)])?;
    }
    // alpha + beta = sqrt(W/w) z, alpha - beta = sqrt(w/W) z.
    let up = |m: usize| (freqs[m] / omega_mol).sqrt();
    let alpha = Mat::from_fn(n, n, |m, j| 0.5 * z[(j, m)] * (up(m) + up(m).recip()));
    let beta = Mat::from_fn(n, n, |m, j| 0.5 * z[(j, m)] * (up(m) - up(m).recip()));
    let x = Mat::from_fn(n, n, |j, m| z[(j, m)] / up(m));
    finish(freqs, alpha, beta, x, lat)
}

/// Chooses the reduced path when every molecular frequency is equal.
pub fn solve(omega: &[f64], coupling: &CouplingMatrix, lat: &Lattice) -> Result<CollectiveModes> {
    match omega.first() {
        Some(&w0) if omega.iter().all(|&w| w == w0) && omega.len() == coupling.dim() => {
            reduced_symmetric_solve(w0, coupling, lat)
        }
        _ => diagonalize_collective(&build_hopfield(omega, coupling)?, lat),
    }
}

fn finish_identity(freqs: Vec<f64>, alpha: Mat<f64>, lat: &Lattice) -> Result<CollectiveModes> {
    let n = freqs.len();
    let x = alpha.transpose().to_owned();
    let mut modes = CollectiveModes {
        w: freqs,
        alpha,
        beta: Mat::zeros(n, n),
        x,
        d: Vec::new(),
        k: Vec::new(),
        nx: lat.nx,
        ny: lat.ny,
    };
    modes.d = total_dipoles(&modes, 1.0);
    modes.k = mode_wavevectors(&modes, lat);
    Ok(modes)
}

fn finish(freqs: Vec<f64>, alpha: Mat<f64>, beta: Mat<f64>, x: Mat<f64>, lat: &Lattice) -> Result<CollectiveModes> {
    let n = freqs.len();
    let mut modes = CollectiveModes { w: freqs, alpha, beta, x, d: Vec::new(), k: Vec::new(), nx: lat.nx, ny: lat.ny };
    for m in 0..n {
        if sign_flip_needed(&modes, m) {
            for j in 0..n {
                modes.alpha[(m, j)] = -modes.alpha[(m, j)];
                modes.beta[(m, j)] = -modes.beta[(m, j)];
                modes.x[(j, m)] = -modes.x[(j, m)];
            }
        }
    }
    modes.k = mode_wavevectors(&modes, lat);
    for cluster in degenerate_clusters(&modes.w) {
        sort_cluster_by_k(&mut modes, cluster);
    }
    modes.d = total_dipoles(&modes, 1.0);
    Ok(modes)
}

fn sign_flip_needed(modes: &CollectiveModes, m: usize) -> bool {
    let n = modes.alpha.ncols();
    let u = |j: usize| modes.alpha[(m, j)] + modes.beta[(m, j)];
    let sum: f64 = (0..n).map(u).sum();
    let scale: f64 = (0..n).map(|j| u(j).abs()).sum();
    if sum.abs() > DARK_SUM_RTOL * scale {
        return sum < 0.0;
    }
    // First component whose magnitude is within rounding of the maximum.
    let max = (0..n).map(|j| u(j).abs()).fold(0.0, f64::max);
    let lead = (0..n).find(|&j| u(j).abs() >= max * (1.0 - 1e-9)).unwrap_or(0);
    u(lead) < 0.0
}

fn sort_cluster_by_k(modes: &mut CollectiveModes, cluster: Range<usize>) {
    if cluster.len() < 2 {
        return;
    }
    let mut order: Vec<usize> = cluster.clone().collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (modes.k[a], modes.k[b]);
        ka[0].total_cmp(&kb[0]).then(ka[1].total_cmp(&kb[1])).then(a.cmp(&b))
    });
    let n = modes.alpha.ncols();
    let k = cluster.len();
    let old_alpha = Mat::from_fn(k, n, |r, j| modes.alpha[(cluster.start + r, j)]);
    let old_beta = Mat::from_fn(k, n, |r, j| modes.beta[(cluster.start + r, j)]);
    let old_x = Mat::from_fn(n, k, |j, r| modes.x[(j, cluster.start + r)]);
    let old_k = modes.k[cluster.clone()].to_vec();
    for (dst, &src) in cluster.clone().zip(order.iter()) {
        let src = src - cluster.start;
        for j in 0..n {
            modes.alpha[(dst, j)] = old_alpha[(src, j)];
            modes.beta[(dst, j)] = old_beta[(src, j)];
            modes.x[(j, dst)] = old_x[(j, src)];
        }
        modes.k[dst] = old_k[src];
    }
}

/// Folded wavevector maximizing `|FT[alpha_n]|^2` for every mode. Ties go to
/// the smallest `|k|`, then the smallest `kx`.
pub fn mode_wavevectors(modes: &CollectiveModes, lat: &Lattice) -> Vec<[f64; 2]> {
    let (nx, ny) = (lat.nx, lat.ny);
    let mut planner = FftPlanner::<f64>::new();
    let fft_x = planner.plan_fft_forward(nx);
    let fft_y = planner.plan_fft_forward(ny);
    let kx_of = |f: usize| std::f64::consts::TAU * f.min(nx - f) as f64 / (nx as f64 * lat.a);
    let ky_of = |f: usize| std::f64::consts::TAU * f.min(ny - f) as f64 / (ny as f64 * lat.a);
    let mut col = vec![Complex::new(0.0, 0.0); ny];
    (0..modes.len())
        .map(|m| {
            let mut grid: Vec<Complex<f64>> =
                (0..nx * ny).map(|j| Complex::new(modes.alpha[(m, j)], 0.0)).collect();
            for row in grid.chunks_mut(nx) {
                fft_x.process(row);
            }
            for c in 0..nx {
                for r in 0..ny {
                    col[r] = grid[r * nx + c];
                }
                fft_y.process(&mut col);
                for r in 0..ny {
                    grid[r * nx + c] = col[r];
                }
            }
            let power: Vec<f64> = grid.iter().map(|z| z.norm_sqr()).collect();
            let max = power.iter().cloned().fold(0.0, f64::max);
            let mut best: Option<[f64; 2]> = None;
            for (idx, &p) in power.iter().enumerate() {
                if p < max * (1.0 - FFT_TIE_RTOL) {
                    continue;
                }
                let k = [kx_of(idx % nx), ky_of(idx / nx)];
                let better = match best {
                    None => true,
                    Some(b) => {
                        let (km, bm) = (k[0].hypot(k[1]), b[0].hypot(b[1]));
                        km < bm || (km == bm && k[0] < b[0])
                    }
                };
                if better {
                    best = Some(k);
                }
            }
            best.unwrap_or([0.0, 0.0])
        })
        .collect()
}

/// `(|k|, W_n)` rows sorted by `|k|`; equal `|k|` keeps descending `W`.
pub fn dispersion_numeric(modes: &CollectiveModes) -> Vec<(f64, f64)> {
    let mut rows: Vec<(f64, f64)> = (0..modes.len()).map(|n| (modes.kmag(n), modes.w[n])).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows
}
