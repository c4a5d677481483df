//! Hopfield matrices of quadratic bosonic Hamiltonians
//! `H = sum_i w_i b_i^+ b_i + sum_{i<k} C_ik (b_i^+ + b_i)(b_k^+ + b_k)`
//! and their Bogoliubov diagonalization.
//!
//! The `2n x 2n` matrix is laid out in `(alpha_i, beta_i)` pairs: diagonal
//! blocks `[w_i, 0; 0, -w_i]`, off-diagonal blocks `[C, -C; C, -C]`. Every
//! positive eigenvalue `W` has a partner `-W`; only the positive branch is
//! returned, normalized so that `sum_i (alpha_i^2 - beta_i^2) = 1`.

use std::ops::Range;

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Relative gap below which neighbouring frequencies are treated as one
/// degenerate cluster.
pub const DEGENERACY_RTOL: f64 = 1e-10;

/// Eigenvalues with `|Im| > IMAG_RTOL * |Re|` are reported as unstable.
pub const IMAG_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct HopfieldMatrix {
    freqs: Vec<f64>,
    mat: Mat<f64>,
}

impl HopfieldMatrix {
    /// Assembles the matrix from bare frequencies and a symmetric coupling
    /// given as a closure over unordered index pairs (`i != k`).
    pub fn assemble(freqs: &[f64], coupling: impl Fn(usize, usize) -> f64) -> Self {
        let n = freqs.len();
        let mut mat = Mat::<f64>::zeros(2 * n, 2 * n);
        for (i, &w) in freqs.iter().enumerate() {
            mat[(2 * i, 2 * i)] = w;
            mat[(2 * i + 1, 2 * i + 1)] = -w;
        }
        for i in 0..n {
            for k in 0..n {
                if i == k {
                    continue;
                }
                let c = coupling(i, k);
                if c == 0.0 {
                    continue;
                }
                mat[(2 * i, 2 * k)] = c;
                mat[(2 * i + 1, 2 * k)] = c;
                mat[(2 * i, 2 * k + 1)] = -c;
                mat[(2 * i + 1, 2 * k + 1)] = -c;
            }
        }
        Self { freqs: freqs.to_vec(), mat }
    }

    /// Number of bosonic modes (half the matrix dimension).
    pub fn modes(&self) -> usize {
        self.freqs.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.mat[(row, col)]
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.mat
    }

    /// Coupling between modes `i` and `k`, read back from the layout.
    pub fn coupling(&self, i: usize, k: usize) -> f64 {
        self.mat[(2 * i, 2 * k)]
    }

    /// True when every off-diagonal block vanishes.
    pub fn is_uncoupled(&self) -> bool {
        let n = self.modes();
        (0..n).all(|i| (0..n).all(|k| i == k || self.coupling(i, k) == 0.0))
    }

    /// All `2n` eigenvalues as `(re, im)`, unsorted.
    pub fn spectrum(&self) -> Result<Vec<(f64, f64)>> {
        let vals = self
            .mat
            .eigenvalues()
            .map_err(|e| Error::Numerical(format!("eigenvalue solve failed: {e:?}")))?;
        Ok(vals.into_iter().map(|z| (z.re, z.im)).collect())
    }
}

/// Positive-branch Bogoliubov modes. Row `m` of `alpha`/`beta` holds the
/// coefficients of mode `m` on every bare oscillator.
#[derive(Debug, Clone)]
pub struct BogoliubovModes {
    pub freqs: Vec<f64>,
    pub alpha: Mat<f64>,
    pub beta: Mat<f64>,
}

impl BogoliubovModes {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// `sum_i (alpha_mi^2 - beta_mi^2)` for mode `m`.
    pub fn norm(&self, m: usize) -> f64 {
        (0..self.alpha.ncols())
            .map(|i| self.alpha[(m, i)].powi(2) - self.beta[(m, i)].powi(2))
            .sum()
    }
}

/// Diagonalizes a Hopfield matrix with a general (non-symmetric) dense
/// eigensolver. Output is sorted by descending frequency; degenerate
/// clusters are orthonormalized under the bosonic metric.
pub fn diagonalize(h: &HopfieldMatrix) -> Result<BogoliubovModes> {
    let n = h.modes();
    if n == 0 {
        return Err(Error::invalid("empty Hopfield matrix"));
    }
    if h.is_uncoupled() {
        return Ok(uncoupled_modes(h.freqs()));
    }
    let evd = h
        .mat
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigendecomposition of {}x{} Hopfield matrix failed: {e:?}", h.dim(), h.dim())))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();

    let mut picked: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for idx in 0..h.dim() {
        let z = vals[idx];
        if z.im.abs() > IMAG_RTOL * z.re.abs() {
            return Err(Error::Instability(format!(
                "eigenvalue {idx} is complex: {} {:+}i meV",
                z.re, z.im
            )));
        }
        if z.re <= 0.0 {
            continue;
        }
        // Rotate the complex eigenvector onto the real axis.
        let col = vecs.col(idx);
        let pivot = (0..h.dim())
            .max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm()))
            .unwrap();
        let phase = col[pivot] / col[pivot].norm();
        let v: Vec<f64> = (0..h.dim()).map(|i| (col[i] * phase.conj()).re).collect();
        let norm: f64 = (0..n).map(|i| v[2 * i].powi(2) - v[2 * i + 1].powi(2)).sum();
        if norm <= 0.0 {
            return Err(Error::Instability(format!(
                "mode at {} meV has non-positive bosonic norm {norm:e}",
                z.re
            )));
        }
        let s = norm.sqrt().recip();
        picked.push((z.re, v.into_iter().map(|x| x * s).collect()));
    }
    if picked.len() != n {
        return Err(Error::Instability(format!(
            "expected {n} positive frequencies, found {}",
            picked.len()
        )));
    }
    picked.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Stack as columns [alpha; beta] for metric-aware cluster cleanup.
    let mut stacked = Mat::<f64>::zeros(2 * n, n);
    for (m, (_, v)) in picked.iter().enumerate() {
        for i in 0..n {
            stacked[(i, m)] = v[2 * i];
            stacked[(n + i, m)] = v[2 * i + 1];
        }
    }
    let freqs: Vec<f64> = picked.iter().map(|p| p.0).collect();
    let metric: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    for cluster in degenerate_clusters(&freqs) {
        if cluster.len() > 1 {
            orthonormalize(&mut stacked, cluster, &metric);
        }
    }
    Ok(BogoliubovModes {
        alpha: Mat::from_fn(n, n, |m, i| stacked[(i, m)]),
        beta: Mat::from_fn(n, n, |m, i| stacked[(n + i, m)]),
        freqs,
    })
}

/// Uncoupled oscillators: mode `m` is oscillator `m`, stably sorted by
/// descending frequency.
pub(crate) fn uncoupled_modes(freqs: &[f64]) -> BogoliubovModes {
    let n = freqs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| freqs[b].total_cmp(&freqs[a]));
    BogoliubovModes {
        freqs: order.iter().map(|&i| freqs[i]).collect(),
        alpha: Mat::from_fn(n, n, |m, i| if order[m] == i { 1.0 } else { 0.0 }),
        beta: Mat::zeros(n, n),
    }
}

/// Runs of consecutive (descending) frequencies whose relative gap is
/// below [`DEGENERACY_RTOL`].
pub fn degenerate_clusters(freqs: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for m in 1..=freqs.len() {
        let split = m == freqs.len() || {
            let (a, b) = (freqs[m - 1], freqs[m]);
            (a - b).abs() > DEGENERACY_RTOL * a.abs().max(b.abs())
        };
        if split {
            out.push(start..m);
            start = m;
        }
    }
    out
}

fn metric_dot(vecs: &Mat<f64>, a: usize, b: usize, metric: &[f64]) -> f64 {
    (0..vecs.nrows()).map(|i| metric[i] * vecs[(i, a)] * vecs[(i, b)]).sum()
}

/// Modified Gram-Schmidt on the columns in `cols` under a diagonal metric
/// that is positive definite on their span.
pub(crate) fn orthonormalize(vecs: &mut Mat<f64>, cols: Range<usize>, metric: &[f64]) {
    for a in cols.clone() {
        for b in cols.start..a {
            let p = metric_dot(vecs, b, a, metric);
            for i in 0..vecs.nrows() {
                let vb = vecs[(i, b)];
                vecs[(i, a)] -= p * vb;
            }
        }
        let s = metric_dot(vecs, a, a, metric);
        let s = if s > 0.0 { s.sqrt().recip() } else { 1.0 };
        for i in 0..vecs.nrows() {
            vecs[(i, a)] *= s;
        }
    }
}

/// Rotates an orthonormal degenerate cluster onto eigenvectors of
/// `sum_w weight_w * P_w`, where each `P_w` is a metric-preserving
/// involutive permutation of vector components. Distinct weights make the
/// joint parities of commuting symmetries distinguishable.
pub(crate) fn resolve_by_symmetry(
    vecs: &mut Mat<f64>,
    cols: Range<usize>,
    metric: &[f64],
    ops: &[(f64, &dyn Fn(usize) -> usize)],
) -> Result<()> {
    let k = cols.len();
    if k < 2 {
        return Ok(());
    }
    let rows = vecs.nrows();
    let mut b = Mat::<f64>::zeros(k, k);
    for (x, ca) in cols.clone().enumerate() {
        for (y, cb) in cols.clone().enumerate() {
            let mut acc = 0.0;
            for &(weight, op) in ops {
                acc += weight
                    * (0..rows)
                        .map(|i| metric[i] * vecs[(i, ca)] * vecs[(op(i), cb)])
                        .sum::<f64>();
            }
            b[(x, y)] = acc;
        }
    }
    // Symmetrize away rounding before the self-adjoint solve.
    let b = Mat::from_fn(k, k, |x, y| 0.5 * (b[(x, y)] + b[(y, x)]));
    let q = symmetric_eigen(&b)?.1;
    let block = Mat::from_fn(rows, k, |i, x| vecs[(i, cols.start + x)]);
    for y in 0..k {
        for i in 0..rows {
            vecs[(i, cols.start + y)] = (0..k).map(|x| block[(i, x)] * q[(x, y)]).sum();
        }
    }
    Ok(())
}

/// Ascending eigenvalues and orthonormal eigenvectors (as columns) of a
/// real symmetric matrix.
pub(crate) fn symmetric_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolve of size {} failed: {e:?}", a.nrows())))?;
    let s = evd.S().column_vector();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}
