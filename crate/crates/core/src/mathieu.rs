//! Floquet analysis of the Mathieu equation `r'' + (a − 2q cos 2τ) r = 0`,
//! with `τ = Ω_rf t / 2`.
//!
//! Everything here is the lowest-order Floquet solution: `β = sqrt(a + q²/2)`
//! and `C_{±2ℓ}` from the truncated recursion with `C_{-2ℓ} = C_{2ℓ}`.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::{Error, Result, C64};

/// Default series truncation.
pub const DEFAULT_L_MAX: usize = 3;

/// Dimensionless Mathieu parameters of one trap axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MathieuParams {
    pub a: f64,
    pub q: f64,
    /// Ω_rf in rad/s.
    pub rf_freq: f64,
    pub l_max: usize,
}

impl MathieuParams {
    pub fn new(a: f64, q: f64, rf_freq: f64, l_max: usize) -> Result<Self> {
        let p = Self { a, q, rf_freq, l_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.abs() < 1.0) {
            return Err(invalid("a", "|a| must be < 1"));
        }
        if !(self.q * self.q < 1.0) {
            return Err(invalid("q", "q^2 must be < 1"));
        }
        if !(self.rf_freq > 0.0) || !self.rf_freq.is_finite() {
            return Err(invalid("rf_freq", "must be positive"));
        }
        if self.l_max < 1 {
            return Err(invalid("l_max", "must be >= 1"));
        }
        Ok(())
    }
}

/// Lowest-order Floquet solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSolution {
    pub beta: f64,
    /// ω = (Ω_rf/2)β.
    pub secular_freq: f64,
    pub rf_freq: f64,
    /// `coeffs[ℓ-1] = C_{±2ℓ}/C_0`.
    pub coeffs: Vec<f64>,
    pub xi: f64,
}

impl FloquetSolution {
    pub fn coeff(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            self.coeffs.get(l - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn l_max(&self) -> usize {
        self.coeffs.len()
    }

    /// `1 + Σ 2C_ℓ cos(ℓΩ_rf t)`.
    pub fn envelope(&self, t: f64) -> f64 {
        let mut p = 1.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            p += 2.0 * c * libm::cos((k + 1) as f64 * self.rf_freq * t);
        }
        p
    }

    fn envelope_dot(&self, t: f64) -> f64 {
        let mut p = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let w = (k + 1) as f64 * self.rf_freq;
            p -= 2.0 * c * w * libm::sin(w * t);
        }
        p
    }
}

/// β = sqrt(a + q²/2).
pub fn characteristic_exponent(p: &MathieuParams) -> Result<f64> {
    p.validate()?;
    let b2 = p.a + 0.5 * p.q * p.q;
    if b2 <= 0.0 {
        return Err(Error::Domain(b2));
    }
    Ok(libm::sqrt(b2))
}

/// `C_{±2ℓ} = (−1)^ℓ q^ℓ / (4^ℓ ((ℓ−1)!)²)`.
pub fn floquet_coefficient(q: f64, l: usize) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let mut fact = 1.0;
    for k in 1..l {
        fact *= k as f64;
    }
    let mut c = 1.0;
    for _ in 0..l {
        c *= -q / 4.0;
    }
    c / (fact * fact)
}

pub fn floquet_solution(p: &MathieuParams) -> Result<FloquetSolution> {
    let beta = characteristic_exponent(p)?;
    let coeffs: Vec<f64> = (1..=p.l_max).map(|l| floquet_coefficient(p.q, l)).collect();
    let xi = 1.0 + coeffs.iter().map(|c| 2.0 * c).sum::<f64>();
    Ok(FloquetSolution {
        beta,
        secular_freq: 0.5 * p.rf_freq * beta,
        rf_freq: p.rf_freq,
        coeffs,
        xi,
    })
}

/// Mode function `u(t) = e^{iωt}/ξ · (1 + Σ 2C_ℓ cos(ℓΩ_rf t))`.
pub fn mode_function(s: &FloquetSolution, t: f64) -> C64 {
    C64::from_polar(s.envelope(t) / s.xi, s.secular_freq * t)
}

/// Time derivative of [`mode_function`].
pub fn mode_function_dot(s: &FloquetSolution, t: f64) -> C64 {
    let ph = C64::from_polar(1.0 / s.xi, s.secular_freq * t);
    ph * C64::new(s.envelope_dot(t), s.secular_freq * s.envelope(t))
}

/// Excess-micromotion drive from stray fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessDrive {
    /// Static stray field along the axis (V/m).
    pub e_dc: f64,
    /// a.c. phase asymmetry between electrodes (rad).
    pub phi_ac: f64,
    /// Electrode distance (m).
    pub r0: f64,
    pub alpha_tilde: f64,
    /// QE_dc/(Mω²) in m.
    pub driv_amp_dc: f64,
    /// q r0 φ_ac α̃/4 in m.
    pub driv_amp_ac: f64,
}

impl ExcessDrive {
    pub fn new(
        e_dc: f64,
        phi_ac: f64,
        r0: f64,
        alpha_tilde: f64,
        charge: f64,
        mass: f64,
        secular_freq: f64,
        q: f64,
    ) -> Self {
        Self {
            e_dc,
            phi_ac,
            r0,
            alpha_tilde,
            driv_amp_dc: charge * e_dc / (mass * secular_freq * secular_freq),
            driv_amp_ac: q * r0 * phi_ac * alpha_tilde / 4.0,
        }
    }

    /// A perfectly compensated trap.
    pub fn none() -> Self {
        Self {
            e_dc: 0.0,
            phi_ac: 0.0,
            r0: 0.0,
            alpha_tilde: 0.0,
            driv_amp_dc: 0.0,
            driv_amp_ac: 0.0,
        }
    }

    /// r_driv(t) = driv_amp_dc + driv_amp_ac sin(Ω_rf t).
    pub fn driven_amplitude(&self, rf_freq: f64, t: f64) -> f64 {
        self.driv_amp_dc + self.driv_amp_ac * libm::sin(rf_freq * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub secular: f64,
    pub intrinsic: f64,
    pub excess: f64,
}

impl Trajectory {
    pub fn total(&self) -> f64 {
        self.secular + self.intrinsic + self.excess
    }
}

/// Secular, intrinsic and excess parts of the classical ion position.
///
/// Only the slowly varying terms of the driven solution are kept.
pub fn classical_trajectory(s: &FloquetSolution, x: &ExcessDrive, r0_init: f64, t: f64) -> Trajectory {
    let modulation = s.envelope(t) - 1.0;
    let secular = r0_init / s.xi * libm::cos(s.secular_freq * t);
    Trajectory {
        secular,
        intrinsic: secular * modulation,
        excess: x.driven_amplitude(s.rf_freq, t) * (1.0 + modulation),
    }
}
