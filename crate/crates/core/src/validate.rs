//! Built-in oracle suite: brute-force solves against the fast paths, sum
//! rules and tabulated regressions.

use std::time::Instant;

use faer::Mat;
use serde::Serialize;

use crate::analytic::lattice_sum_s3;
use crate::cavity::{
    diagonalize_polaritons, gaussian_coupling, polariton_matrix, polariton_matrix_from, solve_polaritons,
    two_mode_energies, PolaritonModes,
};
use crate::collective::{build_hopfield, diagonalize_collective, reduced_symmetric_solve};
use crate::error::Result;
use crate::lattice::{coupling_matrix, CouplingMatrix, Lattice};
use crate::materials::builtin_by_name;
use crate::spectra::{default_grid_with, lossy_modes, spectral_function, LossyRoute, LossySystem};

const OMEGA_MOL: f64 = 100.0;
const A: f64 = 0.5;
const RATIOS: [f64; 3] = [0.0, 1e-3, 1e-2];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Adds a tiny offset to `Omega[j][l]` only, breaking symmetry.
    pub perturb_coupling: Option<(usize, usize)>,
}

fn lattices() -> impl Iterator<Item = Lattice> {
    (1..=4).flat_map(|nx| (1..=4).map(move |ny| Lattice::new(nx, ny, A).expect("valid lattice")))
}

fn outcome(name: &'static str, f: impl FnOnce() -> Result<std::result::Result<String, String>>) -> Check {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(e) => (false, format!("error: {e}")),
    };
    Check { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Fails with the first asymmetric pair.
pub fn check_coupling_symmetry(c: &CouplingMatrix) -> std::result::Result<String, String> {
    match c.asymmetry() {
        None => Ok(format!("{0}x{0} symmetric", c.dim())),
        Some((j, l)) => Err(format!(
            "Omega[{j}][{l}] = {:e} but Omega[{l}][{j}] = {:e}",
            c.get(j, l),
            c.get(l, j)
        )),
    }
}

fn perturbed(c: CouplingMatrix, at: Option<(usize, usize)>) -> Result<CouplingMatrix> {
    match at {
        Some((j, l)) if j < c.dim() && l < c.dim() => {
            let mut m: Mat<f64> = c.as_mat().to_owned();
            m[(j, l)] += 1e-9 * c.omega0.abs().max(1.0);
            CouplingMatrix::from_mat(c.omega0, m)
        }
        _ => Ok(c),
    }
}

fn worst(label: &str, value: f64, tol: f64) -> std::result::Result<String, String> {
    let msg = format!("max {label} {value:.3e} (tol {tol:.0e})");
    if value <= tol { Ok(msg) } else { Err(msg) }
}

fn both(a: std::result::Result<String, String>, b: std::result::Result<String, String>) -> std::result::Result<String, String> {
    let ok = a.is_ok() && b.is_ok();
    let msg = format!("{}; {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e));
    if ok { Ok(msg) } else { Err(msg) }
}

pub fn run_suite(opts: &SuiteOptions) -> Report {
    let mut checks = Vec::new();

    checks.push(outcome("coupling_symmetry", || {
        let lat = Lattice::new(4, 4, A)?;
        let c = perturbed(coupling_matrix(&lat, 1.0)?, opts.perturb_coupling)?;
        Ok(check_coupling_symmetry(&c))
    }));

    checks.push(outcome("eigenvalue_pairing", || {
        let mut err = 0.0f64;
        for lat in lattices() {
            let c = coupling_matrix(&lat, 1.0)?;
            let h = build_hopfield(&vec![OMEGA_MOL; lat.len()], &c)?;
            let mut re: Vec<f64> = h.spectrum()?.into_iter().map(|z| z.0).collect();
            re.sort_by(f64::total_cmp);
            let n = re.len();
            for i in 0..n / 2 {
                err = err.max((re[i] + re[n - 1 - i]).abs() / OMEGA_MOL);
            }
        }
        Ok(worst("relative |W + W'|", err, 1e-10))
    }));

    checks.push(outcome("bosonicity", || {
        let (mut norm, mut inv) = (0.0f64, 0.0f64);
        for lat in lattices() {
            for r in RATIOS {
                let c = coupling_matrix(&lat, r * OMEGA_MOL)?;
                let fast = reduced_symmetric_solve(OMEGA_MOL, &c, &lat)?;
                let full = diagonalize_collective(&build_hopfield(&vec![OMEGA_MOL; lat.len()], &c)?, &lat)?;
                for m in [&fast, &full] {
                    for n in 0..m.len() {
                        norm = norm.max((m.bosonic_norm(n) - 1.0).abs());
                    }
                    inv = inv.max(m.inverse_residual());
                }
            }
        }
        Ok(both(worst("|norm - 1|", norm, 1e-9), worst("|X(alpha+beta) - I|", inv, 1e-8)))
    }));

    checks.push(outcome("oracle_equivalence", || {
        let (mut dw, mut dd) = (0.0f64, 0.0f64);
        for lat in lattices() {
            for r in RATIOS {
                let c = coupling_matrix(&lat, r * OMEGA_MOL)?;
                let fast = reduced_symmetric_solve(OMEGA_MOL, &c, &lat)?;
                let full = diagonalize_collective(&build_hopfield(&vec![OMEGA_MOL; lat.len()], &c)?, &lat)?;
                for n in 0..fast.len() {
                    dw = dw.max((fast.w[n] - full.w[n]).abs() / fast.w[n]);
                    dd = dd.max((fast.d[n].abs() - full.d[n].abs()).abs());
                }
            }
        }
        Ok(both(worst("relative dW", dw, 1e-8), worst("d|D|", dd, 1e-6)))
    }));

    checks.push(outcome("brute_force_3x3", || {
        let lat = Lattice::new(3, 3, A)?;
        let c = coupling_matrix(&lat, 1.0)?;
        let fast = reduced_symmetric_solve(OMEGA_MOL, &c, &lat)?;
        let full = diagonalize_collective(&build_hopfield(&[OMEGA_MOL; 9], &c)?, &lat)?;
        let mut err = 0.0f64;
        for n in 0..9 {
            err = err.max((fast.w[n] - full.w[n]).abs() / fast.w[n]);
            for j in 0..9 {
                err = err.max((fast.alpha[(n, j)] - full.alpha[(n, j)]).abs());
                err = err.max((fast.beta[(n, j)] - full.beta[(n, j)]).abs());
            }
        }
        Ok(worst("deviation", err, 1e-8))
    }));

    checks.push(outcome("two_mode_formula", || {
        let mut err = 0.0f64;
        for n in 1..=9 {
            let w: Vec<f64> = (0..n).map(|i| OMEGA_MOL + 1.5 - 0.4 * i as f64).collect();
            let mut g = vec![0.0; n];
            g[0] = 2.0;
            let omega_cav = w[0] + 0.3;
            let p = diagonalize_polaritons(&polariton_matrix_from(omega_cav, &w, &g)?)?;
            let (up, lo) = two_mode_energies(omega_cav, w[0], g[0])?;
            for target in [up, lo] {
                let nearest = p.w.iter().map(|x| (x - target).abs()).fold(f64::INFINITY, f64::min);
                err = err.max(nearest / target);
            }
        }
        Ok(worst("relative deviation", err, 1e-10))
    }));

    let polariton_cases = || -> Result<Vec<(PolaritonModes, PolaritonModes)>> {
        let lat = Lattice::new(4, 4, A)?;
        let c = coupling_matrix(&lat, 1.0)?;
        let modes = reduced_symmetric_solve(OMEGA_MOL, &c, &lat)?;
        let mut out = Vec::new();
        for sigma in [f64::INFINITY, 2.5 * A, A] {
            let cav = gaussian_coupling(&lat, modes.w[0], sigma, None, None, Some(2.0))?;
            let h = polariton_matrix(&cav, &modes)?;
            let gc = crate::cavity::collective_couplings(&cav, &modes)?;
            out.push((solve_polaritons(cav.omega_cav, &modes.w, &gc)?, diagonalize_polaritons(&h)?));
        }
        Ok(out)
    };

    checks.push(outcome("photon_fraction_sum", || {
        let (mut err, mut norm) = (0.0f64, 0.0f64);
        for (fast, full) in polariton_cases()? {
            for p in [&fast, &full] {
                err = err.max((p.photon_fraction.iter().sum::<f64>() - 1.0).abs());
                for m in 0..p.len() {
                    norm = norm.max((p.norm(m) - 1.0).abs());
                }
            }
        }
        Ok(both(worst("|sum - 1|", err, 1e-6), worst("|norm - 1|", norm, 1e-8)))
    }));

    checks.push(outcome("lorentzian_area_rule", || {
        let mut err = 0.0f64;
        for (p, _) in polariton_cases()? {
            let gamma = 1.0;
            let grid = default_grid_with(&p.w, gamma, 20.0, 20001)?;
            let s = spectral_function(&p, gamma, &grid)?;
            err = err.max((s.area() / std::f64::consts::PI - 1.0).abs());
        }
        Ok(worst("|area/pi - 1|", err, 0.02))
    }));

    checks.push(outcome("homogeneous_reduction", || {
        let lat = Lattice::new(4, 4, A)?;
        let c = coupling_matrix(&lat, 0.0)?;
        let modes = reduced_symmetric_solve(OMEGA_MOL, &c, &lat)?;
        let cav = gaussian_coupling(&lat, OMEGA_MOL, f64::INFINITY, None, None, Some(2.0))?;
        let p = crate::cavity::polaritons(&cav, &modes)?;
        let (up, lo) = two_mode_energies(OMEGA_MOL, OMEGA_MOL, 2.0)?;
        let mut err = (p.w[0] - up).abs().max((p.w[p.len() - 1] - lo).abs()) / OMEGA_MOL;
        for m in 1..p.len() - 1 {
            err = err.max((p.w[m] - OMEGA_MOL).abs() / OMEGA_MOL);
        }
        Ok(worst("relative deviation", err, 1e-10))
    }));

    checks.push(outcome("lossy_routes", || {
        let lat = Lattice::new(3, 3, A)?;
        let c = coupling_matrix(&lat, 1.0)?;
        let cav = gaussian_coupling(&lat, 104.0, 2.5 * A, None, None, Some(2.0))?;
        let sys = LossySystem { cavity: &cav, omega_mol: &[OMEGA_MOL; 9], coupling: &c, kappa: 1.0, big_gamma: 1.0 };
        let a = lossy_modes(&sys, LossyRoute::Reduced)?;
        let b = lossy_modes(&sys, LossyRoute::Full)?;
        if a.w.len() != b.w.len() {
            return Ok(Err(format!("mode counts differ: {} vs {}", a.w.len(), b.w.len())));
        }
        let mut err = 0.0f64;
        for m in 0..a.w.len() {
            err = err.max((a.w[m] - b.w[m]).norm() / a.w[m].norm());
            err = err.max((a.photon_fraction[m] - b.photon_fraction[m]).abs());
        }
        Ok(worst("deviation", err, 1e-8))
    }));

    checks.push(outcome("lattice_sum", || {
        let s = lattice_sum_s3(1)?;
        Ok(worst("|S3(1) - 4 - 2^(1/2)|", (s - 4.0 - 2f64.sqrt()).abs(), 1e-12))
    }));

    checks.push(outcome("material_regressions", || {
        // Quoted values carry 3, 2, 1 and 2 significant digits.
        let mut bad = Vec::new();
        for (name, quoted, digits) in [
            ("SiC", 0.0196f64, 3),
            ("hBN-in-plane", 0.016, 2),
            ("hBN-out-of-plane", 0.008, 1),
            ("CBP", 1.7e-4, 2),
        ] {
            let m = builtin_by_name(name).expect("built-in material");
            let r = m.model.ratio()?;
            let scale = 10f64.powi(digits - 1 - quoted.log10().floor() as i32);
            if ((r * scale).round() / scale - quoted).abs() > 1e-12 * quoted {
                bad.push(format!("{name}: {r:.5e} does not round to {quoted}"));
            }
        }
        Ok(if bad.is_empty() { Ok("4 materials reproduce quoted values".into()) } else { Err(bad.join("; ")) })
    }));

    Report { checks }
}
