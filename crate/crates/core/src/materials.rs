//! Nearest-neighbor coupling estimated from single-oscillator permittivity
//! models of polar crystals and molecular layers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::COULOMB_EV_NM;

/// Wavenumbers per meV.
pub const INV_CM_PER_MEV: f64 = 8.06554;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqUnit {
    #[serde(rename = "meV")]
    Mev,
    #[serde(rename = "cm-1")]
    InvCm,
}

impl FreqUnit {
    pub fn to_mev(self, x: f64) -> f64 {
        match self {
            FreqUnit::Mev => x,
            FreqUnit::InvCm => x / INV_CM_PER_MEV,
        }
    }

    pub fn from_mev(self, x: f64) -> f64 {
        match self {
            FreqUnit::Mev => x,
            FreqUnit::InvCm => x * INV_CM_PER_MEV,
        }
    }
}

fn default_unit() -> FreqUnit {
    FreqUnit::InvCm
}

/// Polar crystal near a phonon resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarMaterial {
    #[serde(rename = "omega_L")]
    pub omega_l: f64,
    #[serde(rename = "omega_T")]
    pub omega_t: f64,
    pub eps_inf: f64,
    /// Unit-cell volume in nm^3.
    #[serde(default, rename = "V_cell_nm3")]
    pub v_cell: Option<f64>,
    #[serde(default = "default_unit")]
    pub unit: FreqUnit,
}

/// Lorentz oscillator written with a resonance strength `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzOscillator {
    #[serde(rename = "S")]
    pub s: f64,
    pub omega_mol: f64,
    pub eps_inf: f64,
    #[serde(default = "default_unit")]
    pub unit: FreqUnit,
}

impl PolarMaterial {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_t > 0.0) {
            return Err(Error::invalid(format!("omega_T must be positive, got {}", self.omega_t)));
        }
        if self.omega_l < self.omega_t {
            return Err(Error::invalid(format!(
                "omega_L ({}) must not be below omega_T ({})",
                self.omega_l, self.omega_t
            )));
        }
        if !(self.eps_inf > 0.0) {
            return Err(Error::invalid(format!("eps_inf must be positive, got {}", self.eps_inf)));
        }
        if let Some(v) = self.v_cell {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("V_cell must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl LorentzOscillator {
    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0) {
            return Err(Error::invalid(format!("S must be non-negative, got {}", self.s)));
        }
        if !(self.omega_mol > 0.0) {
            return Err(Error::invalid(format!("omega_mol must be positive, got {}", self.omega_mol)));
        }
        if !(self.eps_inf > 0.0) {
            return Err(Error::invalid(format!("eps_inf must be positive, got {}", self.eps_inf)));
        }
        Ok(())
    }
}

/// `(omega_L^2 - omega_T^2) / (8 pi omega_T)` in the unit of the inputs;
/// independent of `eps_inf`.
pub fn omega0_polar(m: &PolarMaterial) -> Result<f64> {
    m.validate()?;
    Ok((m.omega_l * m.omega_l - m.omega_t * m.omega_t) / (8.0 * PI * m.omega_t))
}

/// `S^2 / (8 pi omega_mol eps_inf)` in the unit of the inputs.
pub fn omega0_lorentz(m: &LorentzOscillator) -> Result<f64> {
    m.validate()?;
    Ok(m.s * m.s / (8.0 * PI * m.omega_mol * m.eps_inf))
}

/// Transition dipole per unit cell in e nm,
/// `d_u^2 = V_cell eps0 eps_inf (E_L^2 - E_T^2) / (2 E_T)` with phonon
/// energies `E = hbar omega` in eV and `eps0 = 1 / (4 pi * 1.44 eV nm)` in
/// `e^2 / (eV nm)`.
pub fn dipole_per_cell(m: &PolarMaterial) -> Result<f64> {
    m.validate()?;
    let v = m.v_cell.ok_or_else(|| Error::invalid("dipole per cell needs V_cell"))?;
    let el = m.unit.to_mev(m.omega_l) * 1e-3;
    let et = m.unit.to_mev(m.omega_t) * 1e-3;
    let eps0 = 1.0 / (4.0 * PI * COULOMB_EV_NM);
    Ok((v * eps0 * m.eps_inf * (el * el - et * et) / (2.0 * et)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum MaterialModel {
    Polar(PolarMaterial),
    Lorentz(LorentzOscillator),
}

impl MaterialModel {
    /// Coupling in the material's own frequency unit.
    pub fn omega0(&self) -> Result<f64> {
        match self {
            MaterialModel::Polar(m) => omega0_polar(m),
            MaterialModel::Lorentz(m) => omega0_lorentz(m),
        }
    }

    pub fn omega0_mev(&self) -> Result<f64> {
        Ok(self.unit().to_mev(self.omega0()?))
    }

    /// Coupling relative to the reference frequency (`omega_T` or `omega_mol`).
    pub fn ratio(&self) -> Result<f64> {
        Ok(self.omega0()? / self.reference())
    }

    pub fn reference(&self) -> f64 {
        match self {
            MaterialModel::Polar(m) => m.omega_t,
            MaterialModel::Lorentz(m) => m.omega_mol,
        }
    }

    pub fn unit(&self) -> FreqUnit {
        match self {
            MaterialModel::Polar(m) => m.unit,
            MaterialModel::Lorentz(m) => m.unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMaterial {
    pub name: String,
    #[serde(flatten)]
    pub model: MaterialModel,
}

fn polar(name: &str, omega_t: f64, omega_l: f64, eps_inf: f64) -> NamedMaterial {
    NamedMaterial {
        name: name.into(),
        model: MaterialModel::Polar(PolarMaterial { omega_l, omega_t, eps_inf, v_cell: None, unit: FreqUnit::InvCm }),
    }
}

/// Tabulated reference materials, frequencies in cm^-1. Expected couplings
/// relative to the reference frequency: SiC 0.0196, hBN in-plane 0.016,
/// hBN out-of-plane 0.008, CBP 1.7e-4.
pub fn builtin() -> Vec<NamedMaterial> {
    vec![
        polar("SiC", 793.9, 969.9, 6.5),
        polar("hBN-in-plane", 1360.0, 1614.0, 4.87),
        polar("hBN-out-of-plane", 746.0, 819.0, 2.95),
        NamedMaterial {
            name: "CBP".into(),
            model: MaterialModel::Lorentz(LorentzOscillator {
                s: 164.0,
                omega_mol: 1504.0,
                eps_inf: 2.8,
                unit: FreqUnit::InvCm,
            }),
        },
    ]
}

pub fn builtin_by_name(name: &str) -> Option<NamedMaterial> {
    builtin().into_iter().find(|m| m.name.eq_ignore_ascii_case(name))
}
