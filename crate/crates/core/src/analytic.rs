//! Infinite square-lattice dispersion of perpendicular dipoles, truncated
//! to the neighbor shell `|m|, |n| <= cutoff` with the origin excluded.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::collective::CollectiveModes;
use crate::error::{Error, Result};

/// Neighbor range matching a 51 x 51 patch.
pub const DEFAULT_CUTOFF: usize = 25;
/// Convergence target for the `k = 0` frequency when growing the cutoff, meV.
pub const CONVERGENCE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    pub omega_mol: f64,
    pub omega0: f64,
    pub a: f64,
    pub cutoff: usize,
}

impl DispersionParams {
    pub fn new(omega_mol: f64, omega0: f64, a: f64, cutoff: usize) -> Result<Self> {
        if !(omega_mol > 0.0 && omega_mol.is_finite()) {
            return Err(Error::invalid(format!("omega_mol must be positive, got {omega_mol}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("lattice constant must be positive, got {a}")));
        }
        if !omega0.is_finite() {
            return Err(Error::invalid(format!("omega0 must be finite, got {omega0}")));
        }
        if cutoff < 1 {
            return Err(Error::invalid("cutoff must be at least 1"));
        }
        Ok(Self { omega_mol, omega0, a, cutoff })
    }

    pub fn with_cutoff(self, cutoff: usize) -> Result<Self> {
        Self::new(self.omega_mol, self.omega0, self.a, cutoff)
    }
}

fn cos_ring(k: [f64; 2], a: f64, r: usize) -> f64 {
    // Points with max(|m|, |n|) = r.
    let term = |m: i64, n: i64| {
        let rho2 = (m * m + n * n) as f64;
        (a * (k[0] * m as f64 + k[1] * n as f64)).cos() / (rho2 * rho2.sqrt())
    };
    let r = r as i64;
    let mut s = 0.0;
    for t in -r..=r {
        s += term(r, t) + term(-r, t);
    }
    for t in (1 - r)..r {
        s += term(t, r) + term(t, -r);
    }
    s
}

/// `sum' cos(a k . (m, n)) / (m^2 + n^2)^(3/2)` over the truncated shell.
pub fn lattice_cos_sum(k: [f64; 2], a: f64, cutoff: usize) -> f64 {
    (1..=cutoff).map(|r| cos_ring(k, a, r)).sum()
}

/// `sum' (m^2 + n^2)^(-3/2)` over `[-cutoff, cutoff]^2` without the origin.
pub fn lattice_sum_s3(cutoff: usize) -> Result<f64> {
    if cutoff < 1 {
        return Err(Error::invalid("cutoff must be at least 1"));
    }
    Ok(lattice_cos_sum([0.0, 0.0], 1.0, cutoff))
}

/// Rotating-wave dispersion `omega_mol + Omega0 * sum' cos(...) / rho^3`.
pub fn dispersion_rwa(k: [f64; 2], p: &DispersionParams) -> f64 {
    p.omega_mol + p.omega0 * lattice_cos_sum(k, p.a, p.cutoff)
}

/// Dispersion without the rotating-wave approximation,
/// `sqrt(omega_mol^2 + 2 omega_mol Omega0 sum' cos(...) / rho^3)`.
pub fn dispersion_full(k: [f64; 2], p: &DispersionParams) -> Result<f64> {
    full_from_sum(p, lattice_cos_sum(k, p.a, p.cutoff))
}

fn full_from_sum(p: &DispersionParams, sum: f64) -> Result<f64> {
    let rad = p.omega_mol * p.omega_mol + 2.0 * p.omega_mol * p.omega0 * sum;
    if rad < 0.0 {
        return Err(Error::Instability(format!("dispersion radicand {rad:e} meV^2 is negative")));
    }
    Ok(rad.sqrt())
}

/// Band maximum `sqrt(omega_mol^2 + 2 omega_mol Omega0 S3)`.
pub fn band_top(p: &DispersionParams) -> Result<f64> {
    full_from_sum(p, lattice_cos_sum([0.0, 0.0], 1.0, p.cutoff))
}

/// Small-`k` line `band_top - 2 pi Omega0 |k| a`.
pub fn dispersion_linear(kmag: f64, p: &DispersionParams) -> Result<f64> {
    Ok(band_top(p)? - TAU * p.omega0 * kmag * p.a)
}

/// First-order expansion of the full dispersion, where the slope carries the
/// factor `omega_mol / band_top`.
pub fn dispersion_linear_expanded(kmag: f64, p: &DispersionParams) -> Result<f64> {
    let top = band_top(p)?;
    Ok(top - TAU * p.omega0 * kmag * p.a * p.omega_mol / top)
}

/// Smallest cutoff at which growing it by one changes the `k = 0`
/// frequency by less than `tol`, with that frequency.
pub fn converged_cutoff(p: &DispersionParams, tol: f64, max_cutoff: usize) -> Result<(usize, f64)> {
    let mut sum = lattice_cos_sum([0.0, 0.0], 1.0, p.cutoff);
    let mut prev = full_from_sum(p, sum)?;
    for c in p.cutoff + 1..=max_cutoff {
        sum += cos_ring([0.0, 0.0], 1.0, c);
        let next = full_from_sum(p, sum)?;
        if (next - prev).abs() < tol {
            return Ok((c - 1, prev));
        }
        prev = next;
    }
    Err(Error::Numerical(format!("k = 0 frequency not converged to {tol:e} meV by cutoff {max_cutoff}")))
}

/// Least-squares slope of `dispersion_full` along `direction` sampled at
/// `points` equally spaced `|k|` in `[0, kmax]`.
pub fn fitted_slope(p: &DispersionParams, direction: [f64; 2], kmax: f64, points: usize) -> Result<f64> {
    if points < 2 || !(kmax > 0.0) {
        return Err(Error::invalid("slope fit needs kmax > 0 and at least 2 points"));
    }
    let norm = direction[0].hypot(direction[1]);
    if norm == 0.0 {
        return Err(Error::invalid("fit direction must be non-zero"));
    }
    let unit = [direction[0] / norm, direction[1] / norm];
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for i in 0..points {
        let kmag = kmax * i as f64 / (points - 1) as f64;
        xs.push(kmag);
        ys.push(dispersion_full([kmag * unit[0], kmag * unit[1]], p)?);
    }
    let n = points as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    /// `2 pi Omega0 a / sigma_L`, meV.
    pub threshold_gamma: f64,
    /// Spectral width `2 pi Omega0 |k_max| a` spanned by wavevectors up to
    /// `|k_max| = 1 / sigma_L`; numerically equal to the threshold.
    pub bandwidth: f64,
    /// Largest `sigma_L / a` for which the criterion holds at this `gamma`.
    pub critical_sigma_over_a: f64,
    pub holds: bool,
}

/// Direct interactions resolve in the spectrum when `2 pi Omega0 a / sigma_L >= gamma`.
pub fn interaction_criterion(omega0: f64, a: f64, sigma_l: f64, gamma: f64) -> Result<CriterionResult> {
    if !(omega0 >= 0.0 && a > 0.0 && sigma_l > 0.0 && gamma > 0.0) {
        return Err(Error::invalid(format!(
            "criterion needs omega0 >= 0 and positive a, sigma_L, gamma; got {omega0}, {a}, {sigma_l}, {gamma}"
        )));
    }
    let threshold = TAU * omega0 * a / sigma_l;
    let kmax = sigma_l.recip();
    Ok(CriterionResult {
        threshold_gamma: threshold,
        bandwidth: TAU * omega0 * kmax * a,
        critical_sigma_over_a: TAU * omega0 / gamma,
        holds: threshold >= gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRow {
    pub kmag: f64,
    pub numeric: Option<f64>,
    pub rwa: f64,
    pub full: f64,
    pub linear: f64,
}

/// Analytic curves evaluated at every collective mode's wavevector, with
/// the mode frequency as the numeric column; sorted by `|k|`.
pub fn dispersion_table_modes(modes: &CollectiveModes, p: &DispersionParams) -> Result<Vec<DispersionRow>> {
    let mut rows = (0..modes.len())
        .map(|n| {
            let k = modes.k[n];
            let kmag = k[0].hypot(k[1]);
            Ok(DispersionRow {
                kmag,
                numeric: Some(modes.w[n]),
                rwa: dispersion_rwa(k, p),
                full: dispersion_full(k, p)?,
                linear: dispersion_linear(kmag, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.kmag.total_cmp(&b.kmag));
    Ok(rows)
}

/// Analytic curves along `direction` from the zone center to `|k| = kmax`.
pub fn dispersion_table_path(p: &DispersionParams, direction: [f64; 2], kmax: f64, points: usize) -> Result<Vec<DispersionRow>> {
    let norm = direction[0].hypot(direction[1]);
    if norm == 0.0 || points < 2 {
        return Err(Error::invalid("path needs a non-zero direction and at least 2 points"));
    }
    (0..points)
        .map(|i| {
            let kmag = kmax * i as f64 / (points - 1) as f64;
            let k = [kmag * direction[0] / norm, kmag * direction[1] / norm];
            Ok(DispersionRow {
                kmag,
                numeric: None,
                rwa: dispersion_rwa(k, p),
                full: dispersion_full(k, p)?,
                linear: dispersion_linear(kmag, p)?,
            })
        })
        .collect()
}

/// Zone-boundary `|k|` along an axis, `pi / a`.
pub fn zone_edge(a: f64) -> f64 {
    PI / a
}

/// Writes `kmag_invnm, omega_numeric_meV, omega_rwa_meV, omega_full_meV,
/// omega_linear_meV`; the numeric column is empty where absent.
pub fn write_dispersion_csv<W: Write>(rows: &[DispersionRow], mut out: W) -> io::Result<()> {
    writeln!(out, "kmag_invnm,omega_numeric_meV,omega_rwa_meV,omega_full_meV,omega_linear_meV")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            crate::fmt_num(r.kmag),
            r.numeric.map(crate::fmt_num).unwrap_or_default(),
            crate::fmt_num(r.rwa),
            crate::fmt_num(r.full),
            crate::fmt_num(r.linear)
        )?;
    }
    Ok(())
}
