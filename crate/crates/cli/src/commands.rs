use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use polarlattice::analytic::{dispersion_table_modes, interaction_criterion, write_dispersion_csv, DispersionParams};
use polarlattice::cavity::{gaussian_coupling, polaritons};
use polarlattice::collective::solve;
use polarlattice::lattice::coupling_matrix;
use polarlattice::materials::{builtin, NamedMaterial};
use polarlattice::spectra::{
    default_grid_with, spectral_function, spectral_function_lossy, uniform_grid, LossyRoute, LossySystem,
};
use polarlattice::validate::{run_suite, SuiteOptions};
use polarlattice::{fmt_num, CavityMode, CollectiveModes, CouplingMatrix, Lattice, PolaritonModes, Spectrum};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{
    point_config, sweep_points, ConfigDoc, ExperimentConfig, LossMethod, Molecular, NumberOr, Route, SweepPoint,
};
use crate::error::CliError;
use crate::output::{plot_stub, OutDir, Timer};

/// Diagonalized molecular layer shared by every spectrum with the same
/// lattice and molecular parameters.
pub struct Solved {
    pub lat: Lattice,
    pub coupling: CouplingMatrix,
    pub modes: CollectiveModes,
    pub molecular: Molecular,
}

pub fn solve_layer(cfg: &ExperimentConfig) -> Result<Solved, CliError> {
    let molecular = cfg.molecular()?;
    let lat = Lattice::new(cfg.lattice.nx, cfg.lattice.ny, cfg.lattice.a_nm)?;
    let coupling = coupling_matrix(&lat, molecular.omega0)?;
    let modes = solve(&vec![molecular.omega_mol; lat.len()], &coupling, &lat)?;
    Ok(Solved { lat, coupling, modes, molecular })
}

pub fn cmd_modes(doc: &ConfigDoc, out: &OutDir, timer: &mut Timer) -> Result<serde_json::Value, CliError> {
    let cfg = &doc.config;
    let s = solve_layer(cfg)?;
    timer.lap("diagonalize");

    out.write_csv("modes.csv", |w| s.modes.write_csv(w))?;
    let maps = cfg.map_indices();
    for &m in &maps {
        out.write_csv(&format!("mode_map_{m:04}.csv"), |w| s.modes.write_map_csv(&s.lat, m - 1, w))?;
    }
    let params = DispersionParams::new(s.molecular.omega_mol, s.molecular.omega0, cfg.lattice.a_nm, cfg.modes.cutoff)?;
    let rows = dispersion_table_modes(&s.modes, &params)?;
    out.write_csv("dispersion.csv", |w| write_dispersion_csv(&rows, w))?;
    out.write(
        "plot_modes.py",
        plot_stub("dispersion.csv", "kmag_invnm", &["omega_numeric_meV", "omega_full_meV", "omega_rwa_meV"], "|k| (1/nm)")
            .as_bytes(),
    )?;
    timer.lap("write");

    let (lo, hi) = (s.modes.w.last().copied().unwrap_or(f64::NAN), s.modes.w.first().copied().unwrap_or(f64::NAN));
    println!("{} modes, W in [{lo:.4}, {hi:.4}] meV", s.modes.len());
    Ok(json!({ "modes": s.modes.len(), "W_min_meV": lo, "W_max_meV": hi, "maps": maps }))
}

pub struct SpectrumResult {
    pub spectrum: Spectrum,
    pub polaritons: PolaritonModes,
    pub cavity: CavityMode,
    pub sidecar: serde_json::Value,
}

pub fn compute_spectrum(cfg: &ExperimentConfig, s: &Solved, config_sha256: &str) -> Result<SpectrumResult, CliError> {
    let c = cfg.cavity()?;
    let l = cfg.losses()?;
    let w1 = s.modes.w[0];
    let omega_cav = match c.omega_cav {
        NumberOr::Value(v) => v,
        NumberOr::Keyword(_) => w1,
    };
    let sigma_l = match c.sigma_over_a {
        NumberOr::Value(v) => v * cfg.lattice.a_nm,
        NumberOr::Keyword(_) => f64::INFINITY,
    };
    let cav = gaussian_coupling(&s.lat, omega_cav, sigma_l, c.center, None, Some(c.g_tot))?;
    let pm = polaritons(&cav, &s.modes)?;
    let grid = match (cfg.spectrum.omega_min, cfg.spectrum.omega_max) {
        (Some(lo), Some(hi)) => uniform_grid(lo, hi, cfg.spectrum.points)?,
        _ => default_grid_with(&pm.w, l.gamma, cfg.spectrum.margin_gamma, cfg.spectrum.points)?,
    };
    let kappa = l.kappa.unwrap_or(l.gamma);
    let big_gamma = l.big_gamma.unwrap_or(l.gamma);
    let spectrum = match l.method {
        LossMethod::Lorentzian => spectral_function(&pm, l.gamma, &grid)?,
        LossMethod::ComplexHamiltonian => {
            let omega_mol = vec![s.molecular.omega_mol; s.lat.len()];
            let sys = LossySystem { cavity: &cav, omega_mol: &omega_mol, coupling: &s.coupling, kappa, big_gamma };
            let route = match l.route {
                Route::Reduced => LossyRoute::Reduced,
                Route::Full => LossyRoute::Full,
            };
            spectral_function_lossy(&sys, &grid, route)?
        }
    }
    .normalize();
    let peaks: Vec<_> = spectrum.peaks().iter().map(|p| json!({ "omega_meV": p.omega, "S_normalized": p.height })).collect();
    let sidecar = json!({
        "code_version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_sha256,
        "lattice": { "nx": cfg.lattice.nx, "ny": cfg.lattice.ny, "a_nm": cfg.lattice.a_nm },
        "molecular": {
            "omega_mol_meV": s.molecular.omega_mol,
            "omega0_meV": s.molecular.omega0,
            "material": cfg.molecular.material,
        },
        "W1_meV": w1,
        "cavity": {
            "omega_cav_requested": c.omega_cav,
            "omega_cav_meV": omega_cav,
            "sigma_L_over_a": c.sigma_over_a,
            "sigma_L_nm": if sigma_l.is_finite() { json!(sigma_l) } else { json!("homogeneous") },
            "center_nm": cav.center,
            "g0_meV": cav.g0,
            "g_tot_meV": cav.g_tot,
        },
        "losses": {
            "method": l.method,
            "gamma_meV": l.gamma,
            "kappa_meV": kappa,
            "Gamma_meV": big_gamma,
            "route": l.route,
        },
        "grid": {
            "omega_min_meV": grid.first(),
            "omega_max_meV": grid.last(),
            "points": grid.len(),
        },
        "raw_scale": spectrum.raw_scale,
        "peaks": peaks,
    });
    Ok(SpectrumResult { spectrum, polaritons: pm, cavity: cav, sidecar })
}

fn write_spectrum(out: &OutDir, dir: &str, r: &SpectrumResult) -> Result<(), CliError> {
    out.write_csv(&format!("{dir}spectrum.csv"), |w| r.spectrum.write_csv(w))?;
    out.write_json(&format!("{dir}spectrum.json"), &r.sidecar)
}

pub fn cmd_spectrum(doc: &ConfigDoc, out: &OutDir, timer: &mut Timer) -> Result<serde_json::Value, CliError> {
    let cfg = &doc.config;
    cfg.cavity()?;
    cfg.losses()?;
    let s = solve_layer(cfg)?;
    timer.lap("diagonalize");
    let r = compute_spectrum(cfg, &s, &doc.sha256)?;
    timer.lap("spectrum");
    write_spectrum(out, "", &r)?;
    out.write_csv("polaritons.csv", |w| r.polaritons.write_csv(w))?;
    out.write(
        "plot_spectrum.py",
        plot_stub("spectrum.csv", "omega_meV", &["S_normalized"], "frequency (meV)").as_bytes(),
    )?;
    timer.lap("write");
    let peaks = r.spectrum.peaks();
    println!(
        "omega_cav = {:.4} meV, {} peaks: {}",
        r.cavity.omega_cav,
        peaks.len(),
        peaks.iter().map(|p| format!("{:.4}", p.omega)).collect::<Vec<_>>().join(", ")
    );
    Ok(json!({ "omega_cav_meV": r.cavity.omega_cav, "W1_meV": s.modes.w[0] }))
}

type LayerKey = (usize, usize, u64, u64, u64);

/// Solved layers keyed by lattice and molecular inputs. The per-key lock
/// keeps two workers from diagonalizing the same layer.
#[derive(Default)]
struct LayerCache {
    slots: Mutex<HashMap<LayerKey, Arc<Mutex<Option<Arc<Solved>>>>>>,
}

impl LayerCache {
    fn get(&self, cfg: &ExperimentConfig) -> Result<Arc<Solved>, CliError> {
        let m = cfg.molecular()?;
        let key = (cfg.lattice.nx, cfg.lattice.ny, cfg.lattice.a_nm.to_bits(), m.omega_mol.to_bits(), m.omega0.to_bits());
        let slot = self.slots.lock().expect("cache lock").entry(key).or_default().clone();
        let mut guard = slot.lock().expect("cache slot lock");
        if let Some(s) = guard.as_ref() {
            return Ok(s.clone());
        }
        let s = Arc::new(solve_layer(cfg)?);
        *guard = Some(s.clone());
        Ok(s)
    }
}

pub fn cmd_sweep(doc: &ConfigDoc, out: &OutDir, timer: &mut Timer) -> Result<serde_json::Value, CliError> {
    let points = sweep_points(doc)?;
    let configs = points.iter().map(|p| point_config(doc, p)).collect::<Result<Vec<_>, _>>()?;
    for c in &configs {
        c.cavity()?;
        c.losses()?;
    }
    timer.lap("expand");

    let cache = LayerCache::default();
    let results = points
        .par_iter()
        .zip(&configs)
        .map(|(p, cfg)| {
            let s = cache.get(cfg)?;
            let r = compute_spectrum(cfg, &s, &doc.sha256)?;
            write_spectrum(out, &point_dir(p), &r)?;
            Ok((r.cavity.omega_cav, s.modes.w[0], r.spectrum.peaks()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    timer.lap("points");

    let fields: Vec<&str> = doc.config.sweep.iter().map(|a| a.field.as_str()).collect();
    out.write_csv("sweep_points.csv", |w| {
        writeln!(w, "point,{},omega_cav_meV,W1_meV,dir", fields.join(","))?;
        for (p, (omega_cav, w1, _)) in points.iter().zip(&results) {
            writeln!(w, "{},{},{},{},{}", p.index, axis_values(p), fmt_num(*omega_cav), fmt_num(*w1), point_dir(p))?;
        }
        Ok(())
    })?;
    out.write_csv("peaks.csv", |w| {
        writeln!(w, "point,{},peak,omega_meV,S_normalized", fields.join(","))?;
        for (p, (_, _, peaks)) in points.iter().zip(&results) {
            for (i, pk) in peaks.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", p.index, axis_values(p), i + 1, fmt_num(pk.omega), fmt_num(pk.height))?;
            }
        }
        Ok(())
    })?;
    out.write(
        "plot_sweep.py",
        plot_stub("peaks.csv", fields[0], &["omega_meV"], fields[0]).replace("plt.plot(", "plt.scatter(").as_bytes(),
    )?;
    timer.lap("write");
    println!("{} sweep points written", points.len());
    let listing: Vec<_> = points
        .iter()
        .zip(&results)
        .map(|(p, (omega_cav, w1, _))| json!({ "index": p.index, "values": p.values, "dir": point_dir(p), "omega_cav_meV": omega_cav, "W1_meV": w1 }))
        .collect();
    Ok(json!({ "points": listing }))
}

fn point_dir(p: &SweepPoint) -> String {
    format!("points/p{:04}/", p.index)
}

fn axis_values(p: &SweepPoint) -> String {
    p.values.iter().map(|(_, v)| fmt_num(*v)).collect::<Vec<_>>().join(",")
}

pub fn cmd_criterion(doc: &ConfigDoc) -> Result<(), CliError> {
    let cfg = &doc.config;
    let m = cfg.molecular()?;
    let a = cfg.lattice.a_nm;
    let sigma_l = match cfg.cavity()?.sigma_over_a {
        NumberOr::Value(v) => v * a,
        NumberOr::Keyword(_) => f64::INFINITY,
    };
    let gamma = cfg.losses()?.gamma;
    let r = interaction_criterion(m.omega0, a, sigma_l, gamma)?;
    println!("Omega0 = {} meV, a = {a} nm, sigma_L = {} nm, gamma = {gamma} meV", m.omega0, sigma_l);
    println!("threshold gamma = 2 pi Omega0 a / sigma_L = {:.6} meV", r.threshold_gamma);
    println!(
        "wavevectors up to |k_max| = 1/sigma_L span a spectral width 2 pi Omega0 |k_max| a = {:.6} meV",
        r.bandwidth
    );
    println!("critical sigma_L / a at this gamma = {:.6}", r.critical_sigma_over_a);
    println!(
        "verdict: {}",
        if r.holds {
            "direct dipole-dipole interactions are spectrally resolved; model them explicitly"
        } else {
            "interaction structure is hidden by the linewidth; the homogeneous-field picture suffices"
        }
    );
    Ok(())
}

pub fn cmd_material(doc: Option<&ConfigDoc>, name: Option<&str>) -> Result<(), CliError> {
    let mut list: Vec<NamedMaterial> = doc.map(|d| d.config.materials.clone()).unwrap_or_default();
    let extra: Vec<_> = builtin().into_iter().filter(|b| !list.iter().any(|m| m.name.eq_ignore_ascii_case(&b.name))).collect();
    list.extend(extra);
    if let Some(name) = name {
        list.retain(|m| m.name.eq_ignore_ascii_case(name));
        if list.is_empty() {
            return Err(CliError::Config(format!("material: unknown material \"{name}\"")));
        }
    }
    println!("{:<20} {:<8} {:>12} {:>6} {:>12} {:>12}", "name", "model", "Omega0", "unit", "Omega0_meV", "ratio");
    for m in &list {
        let model = match m.model {
            polarlattice::materials::MaterialModel::Polar(_) => "polar",
            polarlattice::materials::MaterialModel::Lorentz(_) => "lorentz",
        };
        let unit = match m.model.unit() {
            polarlattice::materials::FreqUnit::Mev => "meV",
            polarlattice::materials::FreqUnit::InvCm => "cm-1",
        };
        println!(
            "{:<20} {:<8} {:>12.6} {:>6} {:>12.6} {:>12.4e}",
            m.name,
            model,
            m.model.omega0()?,
            unit,
            m.model.omega0_mev()?,
            m.model.ratio()?
        );
    }
    Ok(())
}

pub fn cmd_validate(perturb: Option<(usize, usize)>) -> Result<(), CliError> {
    let report = run_suite(&SuiteOptions { perturb_coupling: perturb });
    for c in &report.checks {
        println!("{} {:<24} ({:.2} s) {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.seconds, c.detail);
    }
    let failed: Vec<_> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if failed.is_empty() {
        println!("{} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::Validation(failed.join("; ")))
    }
}

/// Files of the fresh tree `fresh` that are missing from `out` or differ
/// from it byte for byte. Manifests are excluded.
pub fn compare_trees(out: &Path, fresh: &Path) -> Result<Vec<String>, CliError> {
    let have = crate::output::checksum_tree(out)?;
    let want = crate::output::checksum_tree(fresh)?;
    Ok(want
        .into_iter()
        .filter(|w| !have.iter().any(|h| h.path == w.path && h.sha256 == w.sha256))
        .map(|w| w.path)
        .collect())
}
