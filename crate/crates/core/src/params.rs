//! Physical parameters of the molecule and the drive, and the code-unit
//! convention used by every dynamical routine.
//!
//! All energies are stored in cm⁻¹. The dynamics run in units where the
//! reference energy ħΩ equals 1 cm⁻¹ and τ = Ωt, so with the default
//! [`CodeUnits`] the code-unit values are numerically the cm⁻¹ values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Molecule and field constants in spectroscopic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParameters {
    /// Harmonic vibrational quantum ħω_e (cm⁻¹).
    pub hbar_omega_e: f64,
    /// Detuning ħ(ω_e − ω) of the drive from the harmonic frequency (cm⁻¹).
    pub hbar_detuning: f64,
    /// Anharmonicity ħx_eω_e (cm⁻¹).
    pub hbar_xe_omega_e: f64,
    /// Rotational constant ħ²/2μr₀² (cm⁻¹).
    pub beta: f64,
    /// Drive strength (cm⁻¹).
    #[serde(rename = "W")]
    pub w: f64,
    /// Permanent dipole (Debye). Bookkeeping only.
    pub d0: f64,
    /// Equilibrium bond length (Å). Bookkeeping only.
    pub r0: f64,
    /// Reduced mass (amu). Bookkeeping only.
    pub mu: f64,
    /// Value of the constant of motion p_φ − I in units of ħ.
    pub k: i64,
}

/// GeO constants. The drive strength is left at zero; set it with
/// [`ModelParameters::with_drive`].
pub fn geo_preset() -> ModelParameters {
    ModelParameters {
        hbar_omega_e: 985.8,
        hbar_detuning: 15.0,
        hbar_xe_omega_e: 2.2,
        beta: 0.48,
        w: 0.0,
        d0: 3.28,
        r0: 1.62,
        mu: 13.1,
        k: 0,
    }
}

impl ModelParameters {
    pub fn with_drive(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    pub fn with_k(mut self, k: i64) -> Self {
        self.k = k;
        self
    }

    /// Relative anharmonicity x_e.
    pub fn xe(&self) -> f64 {
        self.hbar_xe_omega_e / self.hbar_omega_e
    }

    /// Drive photon energy ħω = ħω_e − ħ(ω_e − ω) (cm⁻¹).
    pub fn hbar_omega_drive(&self) -> f64 {
        self.hbar_omega_e - self.hbar_detuning
    }

    /// Checks every invariant and returns the parameters unchanged, or
    /// names the first one that fails.
    pub fn validate(self) -> Result<Self> {
        let fields = [
            ("hbar_omega_e", self.hbar_omega_e),
            ("hbar_detuning", self.hbar_detuning),
            ("hbar_xe_omega_e", self.hbar_xe_omega_e),
            ("beta", self.beta),
            ("W", self.w),
            ("d0", self.d0),
            ("r0", self.r0),
            ("mu", self.mu),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be finite")));
        }
        let checks = [
            (self.hbar_omega_e > 0.0, "hbar_omega_e > 0"),
            (self.beta > 0.0, "beta > 0"),
            (self.hbar_xe_omega_e > 0.0, "hbar_xe_omega_e > 0"),
            (self.w >= 0.0, "W ≥ 0"),
            (
                self.hbar_xe_omega_e < self.hbar_omega_e,
                "hbar_xe_omega_e < hbar_omega_e",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, name)) => Err(Error::InvalidParameter(format!("violated {name}"))),
            None => Ok(self),
        }
    }

    /// Energies converted to code units.
    pub fn code_constants(&self, units: CodeUnits) -> CodeConstants {
        let s = units.energy_scale;
        CodeConstants {
            omega_e: self.hbar_omega_e / s,
            detuning: self.hbar_detuning / s,
            anharmonicity: self.hbar_xe_omega_e / s,
            beta: self.beta / s,
            drive: self.w / s,
            omega_drive: self.hbar_omega_drive() / s,
            k: self.k as f64,
        }
    }

    /// Code-unit constants with the default ħΩ = 1 cm⁻¹ scale.
    pub fn code(&self) -> CodeConstants {
        self.code_constants(CodeUnits::default())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let params: ModelParameters = serde_json::from_str(text)?;
        params.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }
}

/// Reference energy ħΩ that defines the code units; τ = Ωt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeUnits {
    /// ħΩ in cm⁻¹.
    pub energy_scale: f64,
}

impl Default for CodeUnits {
    fn default() -> Self {
        Self { energy_scale: 1.0 }
    }
}

impl CodeUnits {
    pub fn to_code(&self, energy_cm1: f64) -> f64 {
        energy_cm1 / self.energy_scale
    }
}

/// Dimensionless constants consumed by the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeConstants {
    pub omega_e: f64,
    pub detuning: f64,
    pub anharmonicity: f64,
    pub beta: f64,
    pub drive: f64,
    pub omega_drive: f64,
    pub k: f64,
}
