//! Scenario files.
//!
//! A scenario is a TOML document with a top-level `task` (optional when the
//! task is given on the command line), an optional `figure_id` and the
//! sections `[trap]`, `[crystal]`, `[drive]`, `[noise]` and `[oracle]`.
//! Every frequency is an ordinary frequency ω/2π in Hz. See the README for
//! the full key list.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Modes,
    Design,
    Sweep,
    PulseTrain,
    Oracle,
    Figure,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Modes => "modes",
            Task::Design => "design",
            Task::Sweep => "sweep",
            Task::PulseTrain => "pulse-train",
            Task::Oracle => "oracle",
            Task::Figure => "figure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bus {
    SingleMode,
    TwoMode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure_id: Option<u8>,
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub crystal: CrystalSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

/// Paul-trap drive. Only needed on the micromotion sideband or when q > 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    /// Mathieu q of the bus axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Ω_rf/2π (Hz).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rf_hz: Option<f64>,
    /// Ω_rf as a multiple of the bus-axis trap frequency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rf_ratio: Option<f64>,
    /// Ω_rf = 4δ/q at every point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rf_crossover: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    /// Only "40Ca+" is built in; other ions need `mass_amu`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_amu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_z_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_x_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    /// "z" (axial) or "x" (transverse).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bus: Option<Bus>,
    /// 0 (secular) or 1 (first micromotion sideband).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sideband: Option<u8>,
    /// Single-ion Lamb-Dicke parameter of the bus axis at its trap frequency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Residual excess-micromotion modulation index, same for both ions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_tilde: Option<f64>,
    /// Effective Rabi frequency Ω/2π (Hz) of a single-mode design.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_hz: Option<f64>,
    /// Sweep start: Ω/2π (Hz) for single-mode, ω_z/2π (Hz) for two-mode,
    /// t_g fraction for pulse trains.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_from: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_to: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pulses: Option<usize>,
    /// Pulse-train gate time as a fraction of the single-pulse optimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_fraction: Option<f64>,
    /// Explicit pulse-train gate time (µs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate_time_us: Option<f64>,
    /// Explicit detuning from the bus mode, (δ − ω₁)/2π (Hz).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bus_detuning_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Dephasing time (s).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    /// Mean phonon number of the bus mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fock_cutoff: Option<usize>,
    /// Modes kept in the simulation (1 or 2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_carrier: Option<bool>,
    /// Start from a thermal state at `noise.nbar` instead of the ground state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thermal: Option<bool>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are always representable in TOML")
    }
}

/// Unwraps a required key or reports it by its dotted name.
pub fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::missing(key))
}

/// Requires a strictly positive, finite value.
pub fn positive(v: Option<f64>, key: &str) -> Result<f64, CliError> {
    let x = need(v, key)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(CliError::invalid(key, "must be positive"));
    }
    Ok(x)
}
