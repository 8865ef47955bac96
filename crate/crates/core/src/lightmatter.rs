//! Bichromatic laser-ion coupling in the Lamb-Dicke, resolved-sideband regime.
//!
//! Excess micromotion modulates the laser phase as `φ_i + β̃_i cos(Ω_rf t)`,
//! which splits the coupling into a Jacobi–Anger comb. Intrinsic micromotion
//! dresses each mode with its Floquet envelope. Tuning the bichromatic pair to
//! the secular sideband (ℓ★ = 0) or to the first micromotion sideband (ℓ★ = 1)
//! yields the two force models below.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::crystal::{Axis, CrystalModes};
use crate::error::invalid;
use crate::special::bessel_j;
use crate::{Error, Result};

/// Ratio thresholds for "≪": pass up to 0.1, warn up to 0.3.
pub const PASS_RATIO: f64 = 0.1;
pub const WARN_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sideband {
    /// ℓ★ = 0
    Secular,
    /// ℓ★ = 1
    FirstMicromotion,
}

impl Sideband {
    pub fn index(self) -> u8 {
        match self {
            Sideband::Secular => 0,
            Sideband::FirstMicromotion => 1,
        }
    }

    pub fn from_index(l: u8) -> Result<Self> {
        match l {
            0 => Ok(Sideband::Secular),
            1 => Ok(Sideband::FirstMicromotion),
            _ => Err(invalid("sideband_index", "must be 0 or 1")),
        }
    }
}

/// Laser configuration for one trap axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveConfig {
    pub axis: Axis,
    /// Renormalised per-ion Rabi frequencies Ω_i^α (rad/s).
    pub rabi: Vec<f64>,
    /// δ for the secular sideband, δ̃ for the micromotion sideband (rad/s).
    pub detuning: f64,
    pub sideband: Sideband,
    /// Rotated-basis phases φ_i.
    pub phase: Vec<f64>,
    /// Modulation indices |β̃_i|.
    pub beta_tilde: Vec<f64>,
    pub q: f64,
    /// Ω_rf (rad/s).
    pub rf_freq: f64,
}

/// `exp(−Σ_m (𝓜_{i,m} η_m)²/2)`.
pub fn debye_waller_factor(modes: &CrystalModes, ion: usize) -> f64 {
    let s: f64 = (0..modes.n_modes())
        .map(|m| {
            let x = modes.participation(ion, m) * modes.lamb_dicke[m];
            x * x
        })
        .sum();
    libm::exp(-0.5 * s)
}

impl DriveConfig {
    /// Builds a drive from bare Rabi frequencies, applying the Debye-Waller
    /// renormalisation of each ion.
    pub fn new(
        modes: &CrystalModes,
        bare_rabi: &[f64],
        detuning: f64,
        sideband: Sideband,
        q: f64,
        rf_freq: f64,
    ) -> Result<Self> {
        let rabi: Vec<f64> = bare_rabi
            .iter()
            .enumerate()
            .map(|(i, &r)| r * debye_waller_factor(modes, i))
            .collect();
        Self::renormalized(modes, rabi, detuning, sideband, q, rf_freq)
    }

    /// Builds a drive whose Rabi frequencies already include the
    /// Debye-Waller factor.
    pub fn renormalized(
        modes: &CrystalModes,
        rabi: Vec<f64>,
        detuning: f64,
        sideband: Sideband,
        q: f64,
        rf_freq: f64,
    ) -> Result<Self> {
        if rabi.len() != modes.n_ions {
            return Err(invalid("rabi", "one Rabi frequency per ion is required"));
        }
        if !(rf_freq > 0.0) {
            return Err(invalid("rf_freq", "must be positive"));
        }
        if !(q >= 0.0 && q < 1.0) {
            return Err(invalid("q", "must lie in [0, 1)"));
        }
        if !detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        Ok(Self {
            axis: modes.axis,
            rabi,
            detuning,
            sideband,
            phase: vec![0.0; modes.n_ions],
            beta_tilde: vec![0.0; modes.n_ions],
            q,
            rf_freq,
        })
    }

    pub fn with_beta_tilde(mut self, beta_tilde: Vec<f64>) -> Self {
        self.beta_tilde = beta_tilde.into_iter().map(f64::abs).collect();
        self
    }

    pub fn with_phase(mut self, phase: Vec<f64>) -> Self {
        self.phase = phase;
        self
    }

    pub fn n_ions(&self) -> usize {
        self.rabi.len()
    }
}

/// Which Pauli operator a residual carrier couples through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierTerm {
    pub ion: usize,
    /// rad/s
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    pub quadrature: Quadrature,
}

/// State-dependent force `Σ 𝔉_{i,m} x_m 𝔰_i (a_m† e^{iω_m t} + h.c.) cos δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceModel {
    pub sideband: Sideband,
    /// 𝔉_{i,m} in rad/s per metre.
    pub strengths: DMatrix<f64>,
    /// (c_y, c_x) per ion: 𝔰_i = c_y σ̃ʸ + c_x σ̃ˣ.
    pub spin_mixing: Vec<(f64, f64)>,
    /// rad/s
    pub effective_detuning: f64,
    pub carriers: Vec<CarrierTerm>,
}

impl ForceModel {
    /// Dimensionless coupling 𝔉_{i,m} x_m.
    pub fn coupling(&self, modes: &CrystalModes, ion: usize, mode: usize) -> f64 {
        self.strengths[(ion, mode)] * modes.ground_state_width(mode)
    }

    /// 2×2 matrix of 𝔰_i in the {|↓⟩, |↑⟩} basis, as
    /// `[[re, im]; 4]` row-major.
    pub fn spin_operator(&self, ion: usize) -> [[(f64, f64); 2]; 2] {
        // σ̃ʸ = iσ⁻ − iσ⁺, σ̃ˣ = σ⁺ + σ⁻ with σ⁺ = |↑⟩⟨↓|
        let (cy, cx) = self.spin_mixing[ion];
        [[(0.0, 0.0), (cx, cy)], [(cx, -cy), (0.0, 0.0)]]
    }
}

/// β̃ = −k_L r_driv(0) q/2.
pub fn beta_tilde(k_l: f64, driv_amp_dc: f64, q: f64) -> f64 {
    -k_l * driv_amp_dc * q / 2.0
}

/// Jacobi–Anger weight J_l(β̃).
pub fn sideband_weights(beta_tilde: f64, l: i32) -> f64 {
    bessel_j(l, beta_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub value: f64,
    pub verdict: Verdict,
}

impl Margin {
    pub fn new(value: f64) -> Self {
        let verdict = if value <= PASS_RATIO {
            Verdict::Pass
        } else if value <= WARN_RATIO {
            Verdict::Warn
        } else {
            Verdict::Fail
        };
        Self { value, verdict }
    }

    /// True when the "≪" condition holds.
    pub fn ok(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    /// max |Ω_i|/Ω_rf
    pub resolved_micromotion: Margin,
    /// |ΩJ₀|/δ for ℓ★ = 0; for ℓ★ = 1 the pair (|Ω|/Ω_rf, |Ω|β̃/δ̃).
    pub carrier_margin: Vec<Margin>,
    /// β̃/(q/4)
    pub compensation: Margin,
    /// β̃/(qω/(4Ω_rf)) with ω the centre-of-mass frequency
    pub beta_bound: Margin,
}

impl RegimeReport {
    pub fn compensation_ok(&self) -> bool {
        self.compensation.ok()
    }

    pub fn beta_bound_ok(&self) -> bool {
        self.beta_bound.ok()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).abs()
    }
}

pub fn regime_check(d: &DriveConfig, modes: &CrystalModes) -> RegimeReport {
    let max_rabi = d.rabi.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let max_beta = d.beta_tilde.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let resolved = Margin::new(ratio(max_rabi, d.rf_freq));
    let carrier_margin = match d.sideband {
        Sideband::Secular => {
            let worst = d
                .rabi
                .iter()
                .zip(&d.beta_tilde)
                .fold(0.0f64, |a, (r, b)| a.max(ratio(r * bessel_j(0, *b), d.detuning)));
            vec![Margin::new(worst)]
        }
        Sideband::FirstMicromotion => {
            let worst = d
                .rabi
                .iter()
                .zip(&d.beta_tilde)
                .fold(0.0f64, |a, (r, b)| a.max(ratio(r * b, d.detuning)));
            vec![resolved, Margin::new(worst)]
        }
    };
    let omega_com = modes.mode_freqs.first().copied().unwrap_or(0.0);
    RegimeReport {
        resolved_micromotion: resolved,
        carrier_margin,
        compensation: Margin::new(ratio(max_beta, d.q / 4.0)),
        beta_bound: Margin::new(ratio(max_beta, d.q * omega_com / (4.0 * d.rf_freq))),
    }
}

fn check_shapes(d: &DriveConfig, modes: &CrystalModes) -> Result<()> {
    if d.axis != modes.axis {
        return Err(invalid("axis", "drive and modes refer to different axes"));
    }
    if d.rabi.len() != modes.n_ions || d.beta_tilde.len() != modes.n_ions {
        return Err(invalid("rabi", "one entry per ion is required"));
    }
    Ok(())
}

fn require(m: Margin, what: &'static str) -> Result<()> {
    if m.verdict == Verdict::Fail {
        Err(Error::RegimeViolation { what, margin: m.value, limit: WARN_RATIO })
    } else {
        Ok(())
    }
}

/// Factor turning the laser Rabi frequency into the force-relevant one:
/// `sqrt(J₀² + (q/4 J₁)²)/(1−q/2)` for ℓ★ = 0 and
/// `sqrt(J₁² + (q/4 J₀)²)/(1−q/2)` for ℓ★ = 1.
pub fn dressing(d: &DriveConfig, ion: usize) -> f64 {
    let b = d.beta_tilde[ion];
    let j0 = bessel_j(0, b);
    let j1 = bessel_j(1, b);
    let qq = d.q / 4.0;
    let norm = match d.sideband {
        Sideband::Secular => libm::hypot(j0, qq * j1),
        Sideband::FirstMicromotion => libm::hypot(j1, qq * j0),
    };
    norm / (1.0 - d.q / 2.0)
}

fn strengths(d: &DriveConfig, modes: &CrystalModes, dressing: &[f64]) -> DMatrix<f64> {
    let n = modes.n_ions;
    let mut s = DMatrix::zeros(n, modes.n_modes());
    for i in 0..n {
        for m in 0..modes.n_modes() {
            s[(i, m)] = d.rabi[i] * modes.participation(i, m) * modes.k_l * dressing[i];
        }
    }
    s
}

/// ℓ★ = 0: `𝔉 = Ω𝓜k_L/(1−q/2) · sqrt(J₀² + (q/4 J₁)²)`.
pub fn secular_force_model(d: &DriveConfig, modes: &CrystalModes) -> Result<ForceModel> {
    if d.sideband != Sideband::Secular {
        return Err(invalid("sideband_index", "secular force needs sideband 0"));
    }
    check_shapes(d, modes)?;
    let report = regime_check(d, modes);
    require(report.resolved_micromotion, "resolved micromotion |Omega|/Omega_rf")?;
    let qq = d.q / 4.0;
    let mut dressing = Vec::with_capacity(d.n_ions());
    let mut mixing = Vec::with_capacity(d.n_ions());
    let mut carriers = Vec::new();
    for (i, &b) in d.beta_tilde.iter().enumerate() {
        let j0 = bessel_j(0, b);
        let j1 = bessel_j(1, b);
        let norm = libm::hypot(j0, qq * j1);
        dressing.push(norm / (1.0 - d.q / 2.0));
        mixing.push((j0 / norm, qq * j1 / norm));
        carriers.push(CarrierTerm {
            ion: i,
            amplitude: d.rabi[i] * j0,
            frequency: d.detuning,
            quadrature: Quadrature::X,
        });
    }
    Ok(ForceModel {
        sideband: Sideband::Secular,
        strengths: strengths(d, modes, &dressing),
        spin_mixing: mixing,
        effective_detuning: d.detuning,
        carriers,
    })
}

/// ℓ★ = 1: `𝔉̃ = Ω𝓜k_L/(1−q/2) · sqrt(J₁² + (q/4 J₀)²)`.
pub fn micromotion_force_model(d: &DriveConfig, modes: &CrystalModes) -> Result<ForceModel> {
    if d.sideband != Sideband::FirstMicromotion {
        return Err(invalid("sideband_index", "micromotion force needs sideband 1"));
    }
    check_shapes(d, modes)?;
    let qq = d.q / 4.0;
    for &b in &d.beta_tilde {
        if b >= qq {
            return Err(Error::RegimeViolation {
                what: "compensation beta_tilde/(q/4)",
                margin: ratio(b, qq),
                limit: 1.0,
            });
        }
    }
    let report = regime_check(d, modes);
    require(report.resolved_micromotion, "resolved micromotion |Omega|/Omega_rf")?;
    let mut dressing = Vec::with_capacity(d.n_ions());
    let mut mixing = Vec::with_capacity(d.n_ions());
    let mut carriers = Vec::new();
    for (i, &b) in d.beta_tilde.iter().enumerate() {
        let j0 = bessel_j(0, b);
        let j1 = bessel_j(1, b);
        let norm = libm::hypot(j1, qq * j0);
        dressing.push(norm / (1.0 - d.q / 2.0));
        mixing.push((qq * j0 / norm, -j1 / norm));
        carriers.push(CarrierTerm {
            ion: i,
            amplitude: d.rabi[i] * j0,
            frequency: d.rf_freq,
            quadrature: Quadrature::X,
        });
        carriers.push(CarrierTerm {
            ion: i,
            amplitude: d.rabi[i] * j1,
            frequency: d.detuning,
            quadrature: Quadrature::Y,
        });
    }
    Ok(ForceModel {
        sideband: Sideband::FirstMicromotion,
        strengths: strengths(d, modes, &dressing),
        spin_mixing: mixing,
        effective_detuning: d.detuning,
        carriers,
    })
}

/// Dispatch on the drive's sideband.
pub fn force_model(d: &DriveConfig, modes: &CrystalModes) -> Result<ForceModel> {
    match d.sideband {
        Sideband::Secular => secular_force_model(d, modes),
        Sideband::FirstMicromotion => micromotion_force_model(d, modes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{normal_modes, IonSpecies};
    use approx::assert_relative_eq;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    const WZ: f64 = 2.0 * PI * 0.975e6;
    const WX: f64 = 2.0 * PI * 9.75e6;
    const K729: f64 = 2.0 * PI / 729e-9;

    fn modes(axis: Axis) -> CrystalModes {
        normal_modes(&IonSpecies::calcium40(), WZ, WX, axis, 2, K729).unwrap()
    }

    fn drive(sb: Sideband, q: f64, beta: f64, rabi: f64) -> (DriveConfig, CrystalModes) {
        let m = modes(Axis::X);
        let d = DriveConfig::renormalized(&m, vec![rabi; 2], 2.0 * PI * 20e3, sb, q, 46.0 * WX)
            .unwrap()
            .with_beta_tilde(vec![beta; 2]);
        (d, m)
    }

    /// Bessel J_l by the integral representation (1/π)∫cos(lθ − x sinθ)dθ.
    fn bessel_quadrature(l: i32, x: f64) -> f64 {
        let n = 2000;
        let h = PI / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let th = k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            s += w * (l as f64 * th - x * th.sin()).cos();
        }
        s * h / PI
    }

    #[test]
    fn beta_tilde_values() {
        assert_eq!(beta_tilde(K729, 0.0, 0.3), 0.0);
        // k r q/2 = (2π/729 nm)(10 nm)(0.15)
        assert_relative_eq!(beta_tilde(K729, 10e-9, 0.3), -0.012_928_364_8, max_relative = 1e-8);
    }

    #[test]
    fn bessel_weights() {
        assert_eq!(sideband_weights(0.0, 0), 1.0);
        assert_eq!(sideband_weights(0.0, 1), 0.0);
        assert_relative_eq!(sideband_weights(0.001, 1), 5.0e-4, max_relative = 1e-6);
        for &x in &[0.001, 0.01, 0.3, 0.9] {
            for l in -2..=3 {
                assert!((sideband_weights(x, l) - bessel_quadrature(l, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn secular_force_without_modulation() {
        let (d, m) = drive(Sideband::Secular, 0.3, 0.0, 2.0 * PI * 1e5);
        let f = secular_force_model(&d, &m).unwrap();
        let expect = d.rabi[0] * m.participation(0, 0) * K729 / 0.85;
        assert_relative_eq!(f.strengths[(0, 0)], expect, max_relative = 1e-14);
        assert_eq!(f.spin_mixing[0], (1.0, 0.0));
        assert_eq!(f.effective_detuning, d.detuning);
        assert_eq!(f.carriers[0].frequency, d.detuning);
    }

    #[test]
    fn secular_mixing_ratio() {
        let (d, m) = drive(Sideband::Secular, 0.3, 0.01, 2.0 * PI * 1e5);
        let f = secular_force_model(&d, &m).unwrap();
        let (cy, cx) = f.spin_mixing[0];
        assert_relative_eq!(cx / cy, 3.75e-4, max_relative = 1e-4);
    }

    #[test]
    fn secular_force_without_dressing() {
        let (d, m) = drive(Sideband::Secular, 0.0, 0.02, 2.0 * PI * 1e5);
        let f = secular_force_model(&d, &m).unwrap();
        let expect = d.rabi[1] * m.participation(1, 1) * K729 * sideband_weights(0.02, 0);
        assert_relative_eq!(f.strengths[(1, 1)], expect, max_relative = 1e-14);
    }

    #[test]
    fn micromotion_strength_ratio() {
        let (ds, m) = drive(Sideband::Secular, 0.3, 0.0, 2.0 * PI * 1e5);
        let (dm, _) = drive(Sideband::FirstMicromotion, 0.3, 0.0, 2.0 * PI * 1e5);
        let fs = secular_force_model(&ds, &m).unwrap();
        let fm = micromotion_force_model(&dm, &m).unwrap();
        assert_relative_eq!(fm.strengths[(0, 0)] / fs.strengths[(0, 0)], 0.075, max_relative = 1e-14);
        assert_eq!(fm.spin_mixing[0], (1.0, 0.0));
        let near: Vec<_> = fm.carriers.iter().filter(|c| c.frequency == dm.detuning).collect();
        assert_eq!(near[0].amplitude, 0.0);
        assert!(fm.carriers.iter().any(|c| c.frequency == dm.rf_freq));
    }

    #[test]
    fn micromotion_near_resonant_carrier() {
        let (d, m) = drive(Sideband::FirstMicromotion, 0.3, 0.005, 2.0 * PI * 1e5);
        let f = micromotion_force_model(&d, &m).unwrap();
        let near = f.carriers.iter().find(|c| c.frequency == d.detuning).unwrap();
        assert_relative_eq!(near.amplitude, d.rabi[0] * 0.0025, max_relative = 1e-5);
    }

    #[test]
    fn micromotion_rejects_poor_compensation() {
        let (d, m) = drive(Sideband::FirstMicromotion, 0.3, 0.075, 2.0 * PI * 1e5);
        assert!(matches!(micromotion_force_model(&d, &m), Err(Error::RegimeViolation { .. })));
    }

    #[test]
    fn unresolved_micromotion_is_rejected() {
        let (d, m) = drive(Sideband::Secular, 0.3, 0.0, 0.5 * 46.0 * WX);
        assert!(matches!(secular_force_model(&d, &m), Err(Error::RegimeViolation { .. })));
    }

    #[test]
    fn regime_examples() {
        let m = modes(Axis::Z);
        let d = DriveConfig::renormalized(&m, vec![2.0 * PI * 0.12e6; 2], 2.0 * PI * 0.99e6, Sideband::Secular, 0.0, 2.0 * PI * 30e6).unwrap();
        let r = regime_check(&d, &m);
        assert_relative_eq!(r.carrier_margin[0].value, 0.12 / 0.99, max_relative = 1e-12);
        assert_eq!(r.carrier_margin[0].verdict, Verdict::Warn);

        let m = modes(Axis::X);
        let d = DriveConfig::renormalized(&m, vec![2.0 * PI * 1e6; 2], 2.0 * PI * 1e6, Sideband::FirstMicromotion, 0.3, 2.0 * PI * 100e6)
            .unwrap()
            .with_beta_tilde(vec![1e-3; 2]);
        let r = regime_check(&d, &m);
        assert_relative_eq!(r.carrier_margin[0].value, 0.01, max_relative = 1e-12);
        assert_relative_eq!(r.carrier_margin[1].value, 0.001, max_relative = 1e-12);
        assert!(r.carrier_margin.iter().all(|c| c.ok()));

        let d = d.with_beta_tilde(vec![0.075; 2]);
        assert!(!regime_check(&d, &m).compensation_ok());
    }

    #[test]
    fn debye_waller_applied_once() {
        let m = modes(Axis::Z);
        let bare = 2.0 * PI * 50e3;
        let d = DriveConfig::new(&m, &[bare, bare], 1.0, Sideband::Secular, 0.0, 1e8).unwrap();
        let eta2: f64 = (0..2).map(|k| (m.participation(0, k) * m.lamb_dicke[k]).powi(2)).sum();
        assert_relative_eq!(d.rabi[0], bare * (-eta2 / 2.0).exp(), max_relative = 1e-14);
        assert!(d.rabi[0] < bare && d.rabi[0] > 0.99 * bare);
    }

    fn matmul(a: [[(f64, f64); 2]; 2], b: [[(f64, f64); 2]; 2]) -> [[(f64, f64); 2]; 2] {
        let mut c = [[(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let (ar, ai) = a[i][k];
                    let (br, bi) = b[k][j];
                    c[i][j].0 += ar * br - ai * bi;
                    c[i][j].1 += ar * bi + ai * br;
                }
            }
        }
        c
    }

    proptest! {
        #[test]
        fn spin_operator_is_hermitian_involution(q in 0.01f64..0.6, beta_frac in 0.0f64..0.9, micro in any::<bool>()) {
            let beta = beta_frac * q / 4.0;
            let sb = if micro { Sideband::FirstMicromotion } else { Sideband::Secular };
            let (d, m) = drive(sb, q, beta, 2.0 * PI * 1e5);
            let f = force_model(&d, &m).unwrap();
            for i in 0..2 {
                let (cy, cx) = f.spin_mixing[i];
                prop_assert!((cy * cy + cx * cx - 1.0).abs() < 1e-12);
                let s = f.spin_operator(i);
                for a in 0..2 {
                    for b in 0..2 {
                        prop_assert!((s[a][b].0 - s[b][a].0).abs() < 1e-15);
                        prop_assert!((s[a][b].1 + s[b][a].1).abs() < 1e-15);
                    }
                }
                let s2 = matmul(s, s);
                prop_assert!((s2[0][0].0 - 1.0).abs() < 1e-12 && (s2[1][1].0 - 1.0).abs() < 1e-12);
                prop_assert!(s2[0][1].0.abs() < 1e-12 && s2[0][1].1.abs() < 1e-12);
            }
        }

        #[test]
        fn crossover_ratio_is_q_over_four(q in 0.01f64..0.9, rabi in 1e3f64..1e6) {
            let (ds, m) = drive(Sideband::Secular, q, 0.0, rabi);
            let (dm, _) = drive(Sideband::FirstMicromotion, q, 0.0, rabi);
            let fs = secular_force_model(&ds, &m).unwrap();
            let fm = micromotion_force_model(&dm, &m).unwrap();
            for i in 0..2 {
                for k in 0..2 {
                    prop_assert!((fm.strengths[(i, k)] / fs.strengths[(i, k)] - q / 4.0).abs() < 1e-13);
                }
            }
        }

        #[test]
        fn continuous_at_zero_modulation(eps in 1e-9f64..1e-7) {
            let (d0, m) = drive(Sideband::Secular, 0.3, 0.0, 1e5);
            let (d1, _) = drive(Sideband::Secular, 0.3, eps, 1e5);
            let f0 = secular_force_model(&d0, &m).unwrap();
            let f1 = secular_force_model(&d1, &m).unwrap();
            prop_assert!((&f0.strengths - &f1.strengths).abs().max() <= 1e-6 * f0.strengths.abs().max());
            prop_assert!((f0.spin_mixing[0].1 - f1.spin_mixing[0].1).abs() < 1e-6);
        }
    }
}
