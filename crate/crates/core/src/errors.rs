//! Analytic infidelity budget of Mølmer–Sørensen gates.
//!
//! The total error is `ε_g = ε_carr + ε_mot + ε_deph`. Rabi frequencies
//! entering these estimates are the effective ones that set the force, so a
//! micromotion gate and its secular twin share the same Ω.

use core::f64::consts::PI;

use crate::crystal::CrystalModes;
use crate::error::invalid;
use crate::Result;

pub mod sweep;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Ramsey dephasing time (s).
    pub t2: f64,
    /// Mean thermal phonon number of the bus branch.
    pub nbar: f64,
    pub n_ions: usize,
}

impl NoiseConfig {
    pub fn new(t2: f64, nbar: f64, n_ions: usize) -> Result<Self> {
        let n = Self { t2, nbar, n_ions };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t2 > 0.0) || !self.t2.is_finite() {
            return Err(invalid("t2", "must be positive"));
        }
        if !(self.nbar >= 0.0) || !self.nbar.is_finite() {
            return Err(invalid("nbar", "must be non-negative"));
        }
        if self.n_ions < 2 {
            return Err(invalid("n_ions", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BusScheme {
    AxialSingleMode,
    TransverseSingleMode,
    TransverseTwoMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pulsing {
    SinglePulse,
    MultiPulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForceKind {
    Secular,
    Micromotion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeTag {
    pub bus: BusScheme,
    pub pulsing: Pulsing,
    pub force: ForceKind,
}

impl SchemeTag {
    pub fn new(bus: BusScheme, pulsing: Pulsing, force: ForceKind) -> Self {
        Self { bus, pulsing, force }
    }
}

/// Carrier-suppression parameters of the detuning-based estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CarrierDrive {
    /// Secular force: carrier detuned by δ (rad/s).
    Secular { detuning: f64 },
    /// First micromotion sideband: carrier detuned by Ω_rf.
    Micromotion { q: f64, rf_freq: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub eps_carr: f64,
    pub eps_mot: f64,
    pub eps_deph: f64,
    pub eps_total: f64,
    /// s
    pub gate_time: f64,
    pub scheme: SchemeTag,
}

impl ErrorBudget {
    pub fn new(eps_carr: f64, eps_mot: f64, eps_deph: f64, gate_time: f64, scheme: SchemeTag) -> Self {
        Self {
            eps_carr,
            eps_mot,
            eps_deph,
            eps_total: eps_carr + eps_mot + eps_deph,
            gate_time,
            scheme,
        }
    }
}

/// Off-resonant carrier error from the mean square effective Rabi frequency:
/// `½N⟨Ω²⟩/δ²` (secular) or `8N⟨Ω²⟩/(q²Ω_rf²)` (micromotion).
pub fn carrier_error(n_ions: usize, mean_square_rabi: f64, drive: CarrierDrive) -> f64 {
    let n = n_ions as f64;
    match drive {
        CarrierDrive::Secular { detuning } => 0.5 * n * mean_square_rabi / (detuning * detuning),
        CarrierDrive::Micromotion { q, rf_freq } => 8.0 * n * mean_square_rabi / (q * q * rf_freq * rf_freq),
    }
}

/// Inputs of the motional-error estimate at one design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionalInputs {
    /// Effective Rabi frequency (rad/s).
    pub rabi: f64,
    /// δ or δ̃ (rad/s).
    pub detuning: f64,
    /// s
    pub gate_time: f64,
}

/// Motional error from Lamb-Dicke corrections and spectator modes.
///
/// The axial constants 0.8, 1.2 and 1.4 are empirical fits quoted without
/// derivation. The transverse single-mode form uses the bare Lamb-Dicke
/// parameter of the second mode.
pub fn motional_error(bus: BusScheme, modes: &CrystalModes, inp: MotionalInputs, noise: &NoiseConfig) -> f64 {
    let n = noise.n_ions as f64;
    let nb = noise.nbar;
    match bus {
        BusScheme::AxialSingleMode => {
            let w = modes.mode_freqs[0];
            let eta = modes.lamb_dicke[0];
            let first = 0.8 * PI * n * (inp.detuning - w).abs() * (nb + 1.0) / (2.0 * w * w * inp.gate_time);
            first + lamb_dicke_term(n, eta, 1.2 * nb * nb + 1.4 * nb)
        }
        BusScheme::TransverseSingleMode => {
            let w2 = modes.mode_freqs[1];
            let x = inp.rabi * modes.lamb_dicke[1];
            let d2 = inp.detuning * inp.detuning;
            let den = d2 - w2 * w2;
            x * x * (2.0 * nb + 1.0) * (d2 + w2 * w2) / (den * den)
        }
        BusScheme::TransverseTwoMode => 2.0 * lamb_dicke_term(n, modes.lamb_dicke[0], nb * nb + nb),
    }
}

fn lamb_dicke_term(n: f64, eta: f64, thermal: f64) -> f64 {
    PI * PI * n * (n - 1.0) * (eta * eta) * (eta * eta) * thermal / (8.0 * n * n)
}

/// `2N²t_g/T₂`.
pub fn dephasing_error(noise: &NoiseConfig, t_g: f64) -> f64 {
    let n = noise.n_ions as f64;
    2.0 * n * n * t_g / noise.t2
}

/// r.f. frequency `4δ/q` at which micromotion and secular gates perform alike.
pub fn crossover_rf(detuning: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(invalid("q", "must be positive"));
    }
    Ok(4.0 * detuning / q)
}
