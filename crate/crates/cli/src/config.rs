//! TOML experiment configuration (`config_version = 1`).
//!
//! Sweeps operate on the raw TOML tree: each point is the base document with
//! the axis fields overwritten, deserialized and validated like a normal
//! config, so any scalar field can be an axis.

use std::path::{Path, PathBuf};

use polarlattice::materials::{builtin_by_name, NamedMaterial};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub lattice: LatticeConfig,
    pub molecular: MolecularConfig,
    pub cavity: Option<CavityConfig>,
    pub losses: Option<LossConfig>,
    #[serde(default)]
    pub spectrum: GridConfig,
    #[serde(default)]
    pub modes: ModesConfig,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub materials: Vec<NamedMaterial>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub nx: usize,
    pub ny: usize,
    pub a_nm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MolecularConfig {
    #[serde(rename = "omega_mol_meV")]
    pub omega_mol: Option<f64>,
    #[serde(rename = "omega0_meV")]
    pub omega0: Option<f64>,
    /// Name of a `[[materials]]` entry or a built-in material.
    pub material: Option<String>,
}

/// A number, or a keyword resolved at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberOr {
    Value(f64),
    Keyword(String),
}

pub const RESONANT_W1: &str = "resonant_W1";
pub const HOMOGENEOUS: &str = "homogeneous";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    #[serde(rename = "omega_cav_meV")]
    pub omega_cav: NumberOr,
    #[serde(rename = "sigma_L_over_a")]
    pub sigma_over_a: NumberOr,
    #[serde(rename = "g_tot_meV")]
    pub g_tot: f64,
    /// Field center in nm; defaults to the lattice centroid.
    #[serde(rename = "center_nm")]
    pub center: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMethod {
    #[default]
    Lorentzian,
    ComplexHamiltonian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    Reduced,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(rename = "gamma_meV")]
    pub gamma: f64,
    #[serde(default)]
    pub method: LossMethod,
    /// Cavity loss for the complex-Hamiltonian method; defaults to `gamma`.
    #[serde(rename = "kappa_meV")]
    pub kappa: Option<f64>,
    /// Molecular loss for the complex-Hamiltonian method; defaults to `gamma`.
    #[serde(rename = "Gamma_meV")]
    pub big_gamma: Option<f64>,
    #[serde(default)]
    pub route: Route,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_margin")]
    pub margin_gamma: f64,
    #[serde(rename = "omega_min_meV")]
    pub omega_min: Option<f64>,
    #[serde(rename = "omega_max_meV")]
    pub omega_max: Option<f64>,
}

fn default_points() -> usize {
    polarlattice::spectra::DEFAULT_GRID_POINTS
}

fn default_margin() -> f64 {
    polarlattice::spectra::DEFAULT_GRID_MARGIN
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: default_points(), margin_gamma: default_margin(), omega_min: None, omega_max: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    /// 1-based mode indices for amplitude maps. Unset means 1, 50, 300, 1500
    /// restricted to the available modes.
    pub maps: Option<Vec<usize>>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

fn default_cutoff() -> usize {
    polarlattice::analytic::DEFAULT_CUTOFF
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self { maps: None, cutoff: default_cutoff() }
    }
}

pub const DEFAULT_MAPS: [usize; 4] = [1, 50, 300, 1500];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path of a scalar field, e.g. `losses.gamma_meV`.
    pub field: String,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
    /// Explicit values; exclusive with `from`/`to`/`steps`.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Physical inputs after resolving the material reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Molecular {
    pub omega_mol: f64,
    pub omega0: f64,
}

fn err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn positive(path: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(err(path, format!("must be a positive number, got {x}")))
    }
}

fn non_negative(path: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(err(path, format!("must be a non-negative number, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.config_version != CONFIG_VERSION {
            return Err(err(
                "config_version",
                format!("unsupported version {} (this build reads {CONFIG_VERSION})", self.config_version),
            ));
        }
        if self.lattice.nx == 0 {
            return Err(err("lattice.nx", "must be at least 1"));
        }
        if self.lattice.ny == 0 {
            return Err(err("lattice.ny", "must be at least 1"));
        }
        positive("lattice.a_nm", self.lattice.a_nm)?;
        self.molecular()?;
        if let Some(c) = &self.cavity {
            match &c.omega_cav {
                NumberOr::Value(v) => positive("cavity.omega_cav_meV", *v)?,
                NumberOr::Keyword(k) if k == RESONANT_W1 => {}
                NumberOr::Keyword(k) => {
                    return Err(err("cavity.omega_cav_meV", format!("expected a number or \"{RESONANT_W1}\", got \"{k}\"")))
                }
            }
            match &c.sigma_over_a {
                NumberOr::Value(v) => positive("cavity.sigma_L_over_a", *v)?,
                NumberOr::Keyword(k) if k == HOMOGENEOUS => {}
                NumberOr::Keyword(k) => {
                    return Err(err("cavity.sigma_L_over_a", format!("expected a number or \"{HOMOGENEOUS}\", got \"{k}\"")))
                }
            }
            non_negative("cavity.g_tot_meV", c.g_tot)?;
            if let Some(p) = c.center {
                if !p.iter().all(|x| x.is_finite()) {
                    return Err(err("cavity.center_nm", "must be finite"));
                }
            }
        }
        if let Some(l) = &self.losses {
            positive("losses.gamma_meV", l.gamma)?;
            if let Some(k) = l.kappa {
                non_negative("losses.kappa_meV", k)?;
            }
            if let Some(g) = l.big_gamma {
                non_negative("losses.Gamma_meV", g)?;
            }
        }
        if self.spectrum.points < 2 {
            return Err(err("spectrum.points", "must be at least 2"));
        }
        non_negative("spectrum.margin_gamma", self.spectrum.margin_gamma)?;
        match (self.spectrum.omega_min, self.spectrum.omega_max) {
            (Some(lo), Some(hi)) if !(hi > lo) => {
                return Err(err("spectrum.omega_max_meV", format!("must exceed omega_min_meV ({lo}), got {hi}")))
            }
            (Some(_), None) => return Err(err("spectrum.omega_max_meV", "required when omega_min_meV is set")),
            (None, Some(_)) => return Err(err("spectrum.omega_min_meV", "required when omega_max_meV is set")),
            _ => {}
        }
        if self.modes.cutoff == 0 {
            return Err(err("modes.cutoff", "must be at least 1"));
        }
        let n = self.lattice.nx * self.lattice.ny;
        if let Some(maps) = &self.modes.maps {
            for (i, &m) in maps.iter().enumerate() {
                if m == 0 || m > n {
                    return Err(err(&format!("modes.maps[{i}]"), format!("mode index {m} outside 1..={n}")));
                }
            }
        }
        if let Some(t) = self.output.threads {
            if t == 0 {
                return Err(err("output.threads", "must be at least 1"));
            }
        }
        for (i, m) in self.materials.iter().enumerate() {
            m.model.omega0().map_err(|e| err(&format!("materials[{i}]"), e))?;
        }
        Ok(())
    }

    pub fn molecular(&self) -> Result<Molecular, CliError> {
        let m = &self.molecular;
        match (m.omega0, &m.material) {
            (Some(_), Some(_)) => Err(err("molecular", "give exactly one of omega0_meV and material, not both")),
            (None, None) => Err(err("molecular", "one of omega0_meV or material is required")),
            (Some(omega0), None) => {
                let omega_mol = m.omega_mol.ok_or_else(|| err("molecular.omega_mol_meV", "required"))?;
                positive("molecular.omega_mol_meV", omega_mol)?;
                non_negative("molecular.omega0_meV", omega0)?;
                Ok(Molecular { omega_mol, omega0 })
            }
            (None, Some(name)) => {
                let mat = self
                    .find_material(name)
                    .ok_or_else(|| err("molecular.material", format!("unknown material \"{name}\"")))?;
                let ratio = mat.model.ratio().map_err(|e| err("molecular.material", e))?;
                let omega_mol = match m.omega_mol {
                    Some(w) => w,
                    None => mat.model.unit().to_mev(mat.model.reference()),
                };
                positive("molecular.omega_mol_meV", omega_mol)?;
                Ok(Molecular { omega_mol, omega0: ratio * omega_mol })
            }
        }
    }

    /// Config-defined materials shadow the built-in table.
    pub fn find_material(&self, name: &str) -> Option<NamedMaterial> {
        self.materials
            .iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
            .cloned()
            .or_else(|| builtin_by_name(name))
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.nx * self.lattice.ny
    }

    pub fn map_indices(&self) -> Vec<usize> {
        match &self.modes.maps {
            Some(m) => m.clone(),
            None => DEFAULT_MAPS.iter().copied().filter(|&m| m <= self.n_sites()).collect(),
        }
    }

    pub fn cavity(&self) -> Result<&CavityConfig, CliError> {
        self.cavity.as_ref().ok_or_else(|| err("cavity", "section required for this command"))
    }

    pub fn losses(&self) -> Result<&LossConfig, CliError> {
        self.losses.as_ref().ok_or_else(|| err("losses", "section required for this command"))
    }
}

/// A parsed config document with its checksum.
#[derive(Debug, Clone)]
pub struct ConfigDoc {
    pub tree: toml::Table,
    pub config: ExperimentConfig,
    pub sha256: String,
    pub path: PathBuf,
}

pub fn parse_tree(tree: toml::Table) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(tree).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "config".to_string() } else { path };
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ConfigDoc, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let tree: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
    let config = parse_tree(tree.clone())?;
    Ok(ConfigDoc { tree, config, sha256: hex::encode(Sha256::digest(text.as_bytes())), path: path.to_path_buf() })
}

impl SweepAxis {
    pub fn points(&self, index: usize) -> Result<Vec<f64>, CliError> {
        let path = format!("sweep[{index}]");
        let v = match (&self.values, self.from, self.to, self.steps) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(from), Some(to), Some(steps)) => match steps {
                0 => Vec::new(),
                1 => vec![from],
                _ => (0..steps).map(|i| from + (to - from) * i as f64 / (steps - 1) as f64).collect(),
            },
            _ => return Err(err(&path, "give either values or all of from, to, steps")),
        };
        if v.is_empty() {
            return Err(err(&path, format!("axis over {} is empty", self.field)));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(err(&format!("{path}.values"), format!("non-finite value {bad}")));
        }
        Ok(v)
    }
}

/// One sweep point: axis fields and values, in axis order.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<(String, f64)>,
}

/// Cartesian product of the axes, last axis fastest.
pub fn sweep_points(doc: &ConfigDoc) -> Result<Vec<SweepPoint>, CliError> {
    let axes = &doc.config.sweep;
    if axes.is_empty() {
        return Err(err("sweep", "at least one [[sweep]] axis is required"));
    }
    let mut grids = Vec::new();
    for (i, a) in axes.iter().enumerate() {
        if a.field.starts_with("sweep") || a.field.starts_with("output") {
            return Err(err(&format!("sweep[{i}].field"), format!("\"{}\" cannot be swept", a.field)));
        }
        lookup(&doc.tree, &a.field)
            .filter(|v| matches!(v, toml::Value::Float(_) | toml::Value::Integer(_) | toml::Value::String(_)))
            .ok_or_else(|| err(&format!("sweep[{i}].field"), format!("\"{}\" is not a scalar field of this config", a.field)))?;
        grids.push(a.points(i)?);
    }
    let total: usize = grids.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut rest = index;
        let mut values = vec![(String::new(), 0.0); axes.len()];
        for k in (0..axes.len()).rev() {
            let len = grids[k].len();
            values[k] = (axes[k].field.clone(), grids[k][rest % len]);
            rest /= len;
        }
        out.push(SweepPoint { index, values });
    }
    Ok(out)
}

fn lookup<'a>(tree: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
    let mut parts = path.split('.');
    let mut cur = tree.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Config for one sweep point. Integer fields accept integral values only.
pub fn point_config(doc: &ConfigDoc, point: &SweepPoint) -> Result<ExperimentConfig, CliError> {
    let mut tree = doc.tree.clone();
    tree.remove("sweep");
    for (field, value) in &point.values {
        let mut parts: Vec<&str> = field.split('.').collect();
        let leaf = parts.pop().unwrap_or_default();
        let mut table = &mut tree;
        for p in parts {
            table = table
                .get_mut(p)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| err(field, "not a field of this config"))?;
        }
        let slot = table.get_mut(leaf).ok_or_else(|| err(field, "not a field of this config"))?;
        *slot = match slot {
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 {
                    return Err(err(field, format!("integer field cannot take {value}")));
                }
                toml::Value::Integer(*value as i64)
            }
            _ => toml::Value::Float(*value),
        };
    }
    parse_tree(tree).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("sweep point {}: {m}", point.index)),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
config_version = 1
[lattice]
nx = 3
ny = 3
a_nm = 0.5
[molecular]
omega_mol_meV = 100.0
omega0_meV = 1.0
[cavity]
omega_cav_meV = "resonant_W1"
sigma_L_over_a = "homogeneous"
g_tot_meV = 2.0
[losses]
gamma_meV = 1.0
"#;

    fn doc(text: &str) -> Result<ConfigDoc, CliError> {
        let tree: toml::Table = toml::from_str(text).unwrap();
        let config = parse_tree(tree.clone())?;
        Ok(ConfigDoc { tree, config, sha256: String::new(), path: PathBuf::new() })
    }

    fn message(r: Result<ConfigDoc, CliError>) -> String {
        match r {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_keywords() {
        let d = doc(BASE).unwrap();
        let c = d.config.cavity().unwrap();
        assert_eq!(c.omega_cav, NumberOr::Keyword(RESONANT_W1.into()));
        assert_eq!(c.sigma_over_a, NumberOr::Keyword(HOMOGENEOUS.into()));
        assert_eq!(d.config.map_indices(), vec![1]);
    }

    #[test]
    fn unknown_field_reports_path() {
        let m = message(doc(&BASE.replace("g_tot_meV", "g_total_meV")));
        assert!(m.starts_with("cavity"), "{m}");
        assert!(m.contains("g_total_meV"), "{m}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let m = message(doc(&BASE.replace("nx = 3", "nx = \"three\"")));
        assert!(m.starts_with("lattice.nx"), "{m}");
    }

    #[test]
    fn omega0_and_material_are_exclusive() {
        let both = BASE.replace("omega0_meV = 1.0", "omega0_meV = 1.0\nmaterial = \"SiC\"");
        assert!(message(doc(&both)).contains("exactly one"));
        let neither = BASE.replace("omega0_meV = 1.0", "");
        assert!(message(doc(&neither)).contains("required"));
    }

    #[test]
    fn material_scales_with_omega_mol() {
        let d = doc(&BASE.replace("omega0_meV = 1.0", "material = \"sic\"")).unwrap();
        let m = d.config.molecular().unwrap();
        let ratio = builtin_by_name("SiC").unwrap().model.ratio().unwrap();
        assert!((m.omega0 - 100.0 * ratio).abs() < 1e-12);
    }

    #[test]
    fn map_index_bound_is_named() {
        let m = message(doc(&format!("{BASE}\n[modes]\nmaps = [1, 10]\n")));
        assert!(m.contains("modes.maps[1]") && m.contains("1..=9"), "{m}");
    }

    #[test]
    fn bad_keyword_rejected() {
        let m = message(doc(&BASE.replace("\"resonant_W1\"", "\"resonant\"")));
        assert!(m.starts_with("cavity.omega_cav_meV"), "{m}");
    }

    #[test]
    fn sweep_product_order_and_override() {
        let text = format!(
            "{BASE}\n[[sweep]]\nfield = \"losses.gamma_meV\"\nvalues = [0.5, 1.0]\n[[sweep]]\nfield = \"cavity.omega_cav_meV\"\nfrom = 90.0\nto = 110.0\nsteps = 3\n"
        );
        let d = doc(&text).unwrap();
        let pts = sweep_points(&d).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1].values[0].1, 0.5);
        assert_eq!(pts[1].values[1].1, 100.0);
        assert_eq!(pts[3].values[0].1, 1.0);
        let cfg = point_config(&d, &pts[5]).unwrap();
        assert_eq!(cfg.losses().unwrap().gamma, 1.0);
        assert_eq!(cfg.cavity().unwrap().omega_cav, NumberOr::Value(110.0));
    }

    #[test]
    fn sweep_rejects_empty_and_unknown_axes() {
        let empty = format!("{BASE}\n[[sweep]]\nfield = \"losses.gamma_meV\"\nvalues = []\n");
        let d = doc(&empty).unwrap();
        assert!(matches!(sweep_points(&d), Err(CliError::Config(m)) if m.contains("empty")));
        let unknown = format!("{BASE}\n[[sweep]]\nfield = \"losses.beta\"\nvalues = [1.0]\n");
        let d = doc(&unknown).unwrap();
        assert!(matches!(sweep_points(&d), Err(CliError::Config(m)) if m.contains("sweep[0].field")));
    }

    #[test]
    fn integer_axis_requires_integral_values() {
        let text = format!("{BASE}\n[[sweep]]\nfield = \"lattice.nx\"\nvalues = [2.5]\n");
        let d = doc(&text).unwrap();
        let pts = sweep_points(&d).unwrap();
        assert!(point_config(&d, &pts[0]).is_err());
    }
}
