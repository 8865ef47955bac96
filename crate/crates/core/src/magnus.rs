//! Magnus-expansion gate engine.
//!
//! For a force `H = Σ_{i,m} 𝔣_{i,m} x_m 𝔰_i cos(δt)(a_m† e^{iω_m t} + h.c.)` the
//! propagator is exactly `exp(Σ γ_{i,m}𝔰_i a_m − h.c. + Σ_{i≠j} g_ij 𝔰_i 𝔰_j)`.
//! Below, the dimensionless product `𝔣_{i,m} x_m` is written `f` and equals
//! `Ω_i 𝓜_{i,m} η_m` for an effective (force-relevant) Rabi frequency `Ω_i`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::crystal::CrystalModes;
use crate::error::invalid;
use crate::lightmatter::{dressing, force_model, regime_check, DriveConfig, ForceModel, Sideband, Verdict};
use crate::special::{phase_integral, triangle_integral};
use crate::{Error, Result, C64};

/// Target entangling coefficient for a maximally entangling gate.
pub const TARGET_G12: C64 = C64::new(0.0, -PI / 8.0);

/// Relative distance |δ−ω| < tol·ω below which resonance limits are used.
pub const RESONANCE_TOL: f64 = 1e-6;

/// Default closure tolerance for accepted designs.
pub const CLOSURE_TOL: f64 = 1e-8;

const I: C64 = C64::new(0.0, 1.0);

/// `C^τ_ω = (1 − e^{iωτ})/ω`, equal to −iτ at ω = 0.
pub fn circle_function(omega: f64, tau: f64) -> C64 {
    -I * phase_integral(omega, tau)
}

/// RWA displacement `γ = (f/2)(1 − e^{i(δ−ω)t})/(δ−ω)`.
fn gamma_rwa(f: f64, delta: f64, omega: f64, t: f64) -> C64 {
    let d = delta - omega;
    if d.abs() < RESONANCE_TOL * omega {
        return -I * f * t / 2.0;
    }
    C64::new(f / 2.0, 0.0) * (C64::new(1.0, 0.0) - C64::from_polar(1.0, d * t)) / d
}

/// RWA phase of one mode, `i f₁f₂/(2(ω²−δ²))·(ωt − ω sin((δ−ω)t)/(δ−ω))`.
fn g12_rwa_mode(f1: f64, f2: f64, delta: f64, omega: f64, t: f64) -> C64 {
    let d = delta - omega;
    if d.abs() < RESONANCE_TOL * omega {
        // t − sin(dt)/d → d²t³/6
        return -I * f1 * f2 * d * t * t * t / 24.0;
    }
    let bracket = omega * t - omega * libm::sin(d * t) / d;
    I * f1 * f2 * bracket / (2.0 * (omega * omega - delta * delta))
}

/// Single-pulse state-dependent displacement of `ion` in `mode`.
pub fn gamma_single_pulse(force: &ForceModel, modes: &CrystalModes, ion: usize, mode: usize, t: f64) -> C64 {
    gamma_rwa(
        force.coupling(modes, ion, mode),
        force.effective_detuning,
        modes.mode_freqs[mode],
        t,
    )
}

/// Single-pulse entangling coefficient g₁₂ for ions 0 and 1.
pub fn g12_single_pulse(force: &ForceModel, modes: &CrystalModes, t: f64) -> C64 {
    (0..modes.n_modes())
        .map(|m| {
            g12_rwa_mode(
                force.coupling(modes, 0, m),
                force.coupling(modes, 1, m),
                force.effective_detuning,
                modes.mode_freqs[m],
                t,
            )
        })
        .sum()
}

/// Spin-spin coupling `J₁₂ = Σ_m f₁f₂ ω_m/(δ² − ω_m²)`, so that 2g₁₂ ≈ −iJ₁₂t.
pub fn j_coupling(force: &ForceModel, modes: &CrystalModes, detuning: f64) -> Result<f64> {
    let mut j = 0.0;
    for m in 0..modes.n_modes() {
        let w = modes.mode_freqs[m];
        if (detuning - w).abs() < RESONANCE_TOL * w {
            return Err(Error::Resonance { mode: m });
        }
        j += force.coupling(modes, 0, m) * force.coupling(modes, 1, m) * w / (detuning * detuning - w * w);
    }
    Ok(j)
}

/// Result of a gate design.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSolution {
    /// γ_{i,m}(t_g), ions × modes.
    pub gamma: DMatrix<C64>,
    pub g12: C64,
    /// rad/s
    pub j_coupling: f64,
    /// s
    pub gate_time: f64,
    /// δ (or δ̃), rad/s
    pub detuning: f64,
    /// Effective Rabi frequency per ion (rad/s); a negative entry marks a π
    /// phase shift of that ion's force.
    pub rabi: Vec<f64>,
    /// Laser Rabi frequency per ion Ω_i^α (rad/s) that produces `rabi`.
    pub laser_rabi: Vec<f64>,
    /// (r₁, r₂); r₂ = 0 for single-mode designs.
    pub loops: (i32, i32),
    /// Modes whose trajectories the design closes.
    pub bus_modes: Vec<usize>,
    /// max |γ| over the bus modes.
    pub closure_residual: f64,
}

impl GateSolution {
    /// max |γ| over modes that are not buses.
    pub fn spectator_excursion(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.gamma.ncols() {
            if !self.bus_modes.contains(&m) {
                for i in 0..self.gamma.nrows() {
                    worst = worst.max(self.gamma[(i, m)].norm());
                }
            }
        }
        worst
    }

    pub fn is_maximally_entangling(&self, tol: f64) -> bool {
        (self.g12 - TARGET_G12).norm() <= tol
    }
}

fn couplings(rabi: &[f64], modes: &CrystalModes) -> DMatrix<f64> {
    DMatrix::from_fn(modes.n_ions, modes.n_modes(), |i, m| {
        rabi[i] * modes.participation(i, m) * modes.lamb_dicke[m]
    })
}

fn single_pulse_state(
    f: &DMatrix<f64>,
    modes: &CrystalModes,
    delta: f64,
    t: f64,
) -> (DMatrix<C64>, C64, f64) {
    let gamma = DMatrix::from_fn(f.nrows(), f.ncols(), |i, m| gamma_rwa(f[(i, m)], delta, modes.mode_freqs[m], t));
    let mut g = C64::new(0.0, 0.0);
    let mut j = 0.0;
    for m in 0..f.ncols() {
        let w = modes.mode_freqs[m];
        g += g12_rwa_mode(f[(0, m)], f[(1, m)], delta, w, t);
        j += f[(0, m)] * f[(1, m)] * w / (delta * delta - w * w);
    }
    (gamma, g, j)
}

fn effective_rabi(drive: &DriveConfig) -> Vec<f64> {
    (0..drive.n_ions()).map(|i| drive.rabi[i] * dressing(drive, i)).collect()
}

fn check_drive(modes: &CrystalModes, drive: &DriveConfig) -> Result<()> {
    if modes.n_ions < 2 {
        return Err(invalid("n_ions", "a two-qubit gate needs at least two ions"));
    }
    force_model(drive, modes).map(|_| ())
}

/// Single-mode gate on the centre-of-mass mode.
///
/// Starts from `δ = ω₁ + sqrt(2r₁)Ωη₁`, `t_g = 2πr₁/|δ−ω₁|` and refines the
/// detuning so that the phase from every mode (spectators included) gives
/// exactly g₁₂ = −iπ/8 while the bus loop stays closed.
pub fn design_single_mode_gate(modes: &CrystalModes, drive: &DriveConfig, r1: u32) -> Result<GateSolution> {
    if r1 < 1 {
        return Err(invalid("r1", "must be >= 1"));
    }
    check_drive(modes, drive)?;
    let rabi = effective_rabi(drive);
    let f = couplings(&rabi, modes);
    let w1 = modes.mode_freqs[0];
    let p = f[(0, 0)] * f[(1, 0)];
    if p == 0.0 {
        return Err(invalid("rabi", "the bus mode is not driven"));
    }
    let r = r1 as f64;
    let phase_err = |d: f64| -> f64 {
        let t = 2.0 * PI * r / d.abs();
        let (_, g, _) = single_pulse_state(&f, modes, w1 + d, t);
        g.im + PI / 8.0
    };
    let mut d0 = p.signum() * 2.0 * libm::sqrt(r * p.abs());
    let mut d1 = d0 * (1.0 + 1e-4);
    let mut h0 = phase_err(d0);
    let mut h1 = phase_err(d1);
    for _ in 0..100 {
        if h1.abs() < 1e-15 || h1 == h0 {
            break;
        }
        let d2 = d1 - h1 * (d1 - d0) / (h1 - h0);
        d0 = d1;
        h0 = h1;
        d1 = d2;
        h1 = phase_err(d1);
    }
    if !(h1.abs() < 1e-12) {
        return Err(Error::Infeasible(format!("single-mode detuning refinement stalled at {h1:e}")));
    }
    let delta = w1 + d1;
    let t_g = 2.0 * PI * r / d1.abs();
    let (gamma, g12, j) = single_pulse_state(&f, modes, delta, t_g);
    let closure = (0..modes.n_ions).map(|i| gamma[(i, 0)].norm()).fold(0.0, f64::max);
    Ok(GateSolution {
        gamma,
        g12,
        j_coupling: j,
        gate_time: t_g,
        detuning: delta,
        laser_rabi: drive.rabi.clone(),
        rabi,
        loops: (r1 as i32, 0),
        bus_modes: vec![0],
        closure_residual: closure,
    })
}

/// Closed-form single-mode detuning offset `δ − ω₁ = sqrt(2r₁)Ωη₁`.
pub fn single_mode_detuning_offset(rabi: f64, eta1: f64, r1: u32) -> f64 {
    libm::sqrt(2.0 * r1 as f64) * rabi * eta1
}

/// Closed-form single-mode gate time `t_g = π sqrt(2r₁)/(Ωη₁)`.
pub fn single_mode_gate_time(rabi: f64, eta1: f64, r1: u32) -> f64 {
    PI * libm::sqrt(2.0 * r1 as f64) / (rabi * eta1)
}

/// Two-mode gate closing both transverse modes of a two-ion crystal.
///
/// Detuning and gate time follow from commensurability,
/// `δ = (r₂ω₁ − ω₂)/(r₂ − 1)`, `t_g = 2πr₁|r₂−1|/(ω₁−ω₂)`; the Rabi frequency
/// is then scaled to hit g₁₂ = −iπ/8. The drive supplies sideband, q and β̃.
pub fn design_two_mode_gate(modes: &CrystalModes, drive: &DriveConfig, r1: u32, r2: i32) -> Result<GateSolution> {
    if modes.axis.is_axial() {
        return Err(Error::AxialTwoMode);
    }
    if r1 < 1 {
        return Err(invalid("r1", "must be >= 1"));
    }
    if !(r2 >= 2 || r2 <= -1) {
        return Err(invalid("r2", "must be >= 2 or <= -1"));
    }
    if modes.n_ions < 2 || modes.n_modes() < 2 {
        return Err(invalid("n_ions", "a two-mode gate needs two ions"));
    }
    let (w1, w2) = (modes.mode_freqs[0], modes.mode_freqs[1]);
    let rr = r2 as f64;
    let delta = (rr * w1 - w2) / (rr - 1.0);
    let t_g = 2.0 * PI * r1 as f64 * (rr - 1.0).abs() / (w1 - w2);
    let unit: Vec<f64> = vec![1.0; modes.n_ions];
    let f = couplings(&unit, modes);
    let (_, g_unit, _) = single_pulse_state(&f, modes, delta, t_g);
    if g_unit.im == 0.0 {
        return Err(Error::Infeasible(format!("no entangling phase at r2 = {r2}")));
    }
    let scale = libm::sqrt((PI / 8.0) / g_unit.im.abs());
    let mut rabi = vec![scale; modes.n_ions];
    if g_unit.im > 0.0 {
        rabi[1] = -scale;
    }
    let f = couplings(&rabi, modes);
    let (gamma, g12, j) = single_pulse_state(&f, modes, delta, t_g);
    let closure = gamma.iter().take(modes.n_ions * 2).map(|z| z.norm()).fold(0.0, f64::max);
    let laser_rabi = rabi.iter().enumerate().map(|(i, r)| r / dressing(drive, i)).collect();
    Ok(GateSolution {
        gamma,
        g12,
        j_coupling: j,
        gate_time: t_g,
        detuning: delta,
        rabi,
        laser_rabi,
        loops: (r1 as i32, r2),
        bus_modes: vec![0, 1],
        closure_residual: closure,
    })
}

/// One square pulse. `rabi` holds effective Rabi frequencies per ion.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub t_start: f64,
    pub width: f64,
    pub rabi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub pulses: Vec<Pulse>,
    /// rad/s
    pub detuning: f64,
    /// s
    pub total_time: f64,
}

impl PulseSequence {
    /// N_p equal-width pulses filling `total_time`; `amplitudes[n]` holds the
    /// per-ion Rabi frequencies of pulse n.
    pub fn equidistant(total_time: f64, detuning: f64, amplitudes: Vec<Vec<f64>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(invalid("n_pulses", "must be >= 1"));
        }
        if !(total_time > 0.0) {
            return Err(invalid("t_g", "must be positive"));
        }
        let tau = total_time / amplitudes.len() as f64;
        let pulses = amplitudes
            .into_iter()
            .enumerate()
            .map(|(n, rabi)| Pulse { t_start: n as f64 * tau, width: tau, rabi })
            .collect();
        let s = Self { pulses, detuning, total_time };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut end = 0.0;
        for (n, p) in self.pulses.iter().enumerate() {
            if !(p.width > 0.0) {
                return Err(invalid("width", format!("pulse {n} has non-positive width")));
            }
            if p.t_start < end * (1.0 - 1e-12) {
                return Err(invalid("t_start", format!("pulse {n} overlaps its predecessor")));
            }
            end = p.t_start + p.width;
            if p.rabi.len() != self.pulses[0].rabi.len() {
                return Err(invalid("rabi", "all pulses need the same number of ions"));
            }
        }
        if end > self.total_time * (1.0 + 1e-12) {
            return Err(invalid("total_time", "pulses extend beyond the gate time"));
        }
        Ok(())
    }

    /// Mean of Ω² over pulses (equal widths assumed) for one ion.
    pub fn mean_square_rabi(&self, ion: usize) -> f64 {
        self.pulses.iter().map(|p| p.rabi[ion] * p.rabi[ion]).sum::<f64>() / self.pulses.len() as f64
    }
}

/// Per-mode, per-pulse integrals shared by γ and g₁₂.
struct PulseKernels {
    /// z_{m,n}
    z: Vec<C64>,
    /// `∫_{win} cos(δt) e^{iωt} dt`
    w: Vec<C64>,
    /// `∫∫_{win, t₂<t₁} cos δt₁ cos δt₂ sin ω(t₁−t₂)`
    s: Vec<f64>,
}

fn kernels(seq: &PulseSequence, omega: f64) -> PulseKernels {
    let delta = seq.detuning;
    let a = delta - omega;
    let b = -delta - omega;
    let mut z = Vec::with_capacity(seq.pulses.len());
    let mut w = Vec::with_capacity(seq.pulses.len());
    let mut s = Vec::with_capacity(seq.pulses.len());
    for p in &seq.pulses {
        let (tn, tau) = (p.t_start, p.width);
        z.push(circle_function(a, tau) * C64::from_polar(1.0, a * tn) + circle_function(b, tau) * C64::from_polar(1.0, b * tn));
        let mut wn = C64::new(0.0, 0.0);
        for sg in [1.0, -1.0] {
            let nu = sg * delta + omega;
            wn += C64::from_polar(0.5, nu * tn) * phase_integral(nu, tau);
        }
        w.push(wn);
        let mut sn = C64::new(0.0, 0.0);
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                for rho in [1.0, -1.0] {
                    let ph = C64::from_polar(rho, (s1 + s2) * delta * tn);
                    sn += ph * triangle_integral(s1 * delta + rho * omega, s2 * delta - rho * omega, tau);
                }
            }
        }
        s.push((sn / (8.0 * I)).re);
    }
    PulseKernels { z, w, s }
}

/// Displacements and entangling phases of a pulse train.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipulseCoefficients {
    /// γ_{i,m}(t_g)
    pub gamma: DMatrix<C64>,
    /// Ordered pair (ion 0 acting after ion 1).
    pub g12: C64,
    pub g21: C64,
    /// Σ_n |γ^n| per mode, the scale against which closure is judged.
    pub excursion_scale: Vec<f64>,
}

/// Exact second-order Magnus coefficients of a square-pulse train, including
/// counter-rotating terms and inter-pulse cross terms.
pub fn multipulse_coefficients(seq: &PulseSequence, modes: &CrystalModes) -> Result<MultipulseCoefficients> {
    seq.validate()?;
    let n_ions = modes.n_ions;
    if seq.pulses.iter().any(|p| p.rabi.len() != n_ions) {
        return Err(invalid("rabi", "one Rabi frequency per ion is required"));
    }
    let mut gamma = DMatrix::from_element(n_ions, modes.n_modes(), C64::new(0.0, 0.0));
    let mut g12 = C64::new(0.0, 0.0);
    let mut g21 = C64::new(0.0, 0.0);
    let mut scale = vec![0.0; modes.n_modes()];
    for m in 0..modes.n_modes() {
        let k = kernels(seq, modes.mode_freqs[m]);
        let eta = modes.lamb_dicke[m];
        let mut acc = vec![C64::new(0.0, 0.0); n_ions];
        for (n, p) in seq.pulses.iter().enumerate() {
            let f: Vec<f64> = (0..n_ions).map(|i| p.rabi[i] * modes.participation(i, m) * eta).collect();
            if n_ions >= 2 {
                g12 += I * (f[0] * f[1] * k.s[n] + f[0] * (acc[1] * k.w[n]).re);
                g21 += I * (f[1] * f[0] * k.s[n] + f[1] * (acc[0] * k.w[n]).re);
            }
            let mut contrib: f64 = 0.0;
            for i in 0..n_ions {
                let d = k.z[n] * (f[i] / 2.0);
                acc[i] += d;
                contrib = contrib.max(d.norm());
            }
            scale[m] += contrib;
        }
        for i in 0..n_ions {
            gamma[(i, m)] = acc[i];
        }
    }
    Ok(MultipulseCoefficients { gamma, g12, g21, excursion_scale: scale })
}

/// Solution of the pulse-train linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub sequence: PulseSequence,
    pub coefficients: MultipulseCoefficients,
    /// Relative pulse amplitudes, first entry positive.
    pub pattern: Vec<f64>,
    /// Sign applied to ion 1's force (±1).
    pub ion_sign: f64,
    pub constrained_modes: Vec<usize>,
    /// ‖A Ω‖/‖Ω‖ with A the row-normalised closure system.
    pub nullspace_residual: f64,
    /// max over constrained modes of |γ|/Σ_n|γ^n|.
    pub closure_residual: f64,
    pub nullspace_dim: usize,
    /// Mean Ω² over pulses (rad²/s²).
    pub mean_square_rabi: f64,
}

/// Equidistant pulse train closing the listed modes with g₁₂ = −iπ/8.
///
/// Rabi frequencies are identical on both ions up to a global sign on ion 1.
/// With a multi-dimensional nullspace, the direction with the smallest mean
/// square Rabi frequency is chosen.
pub fn solve_pulse_train(
    modes: &CrystalModes,
    detuning: f64,
    t_g: f64,
    n_pulses: usize,
    constrained_modes: &[usize],
) -> Result<PulseTrain> {
    if modes.n_ions < 2 {
        return Err(invalid("n_ions", "a two-qubit gate needs at least two ions"));
    }
    if constrained_modes.is_empty() || constrained_modes.iter().any(|&m| m >= modes.n_modes()) {
        return Err(invalid("constrained_modes", "must list existing modes"));
    }
    if n_pulses < 2 * constrained_modes.len() + 1 {
        return Err(invalid("n_pulses", "need at least 2K+1 pulses for K constrained modes"));
    }
    let geom = PulseSequence::equidistant(t_g, detuning, vec![vec![0.0; modes.n_ions]; n_pulses])?;
    let tau = t_g / n_pulses as f64;

    // closure system, rows scaled by 1/τ
    let mut a = DMatrix::zeros(n_pulses.max(2 * constrained_modes.len()), n_pulses);
    for (r, &m) in constrained_modes.iter().enumerate() {
        let k = kernels(&geom, modes.mode_freqs[m]);
        for n in 0..n_pulses {
            a[(2 * r, n)] = k.z[n].re / tau;
            a[(2 * r + 1, n)] = k.z[n].im / tau;
        }
    }
    let svd = SVD::new(a.clone(), false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Infeasible("SVD failed".into()))?;
    let smax = svd.singular_values.iter().fold(0.0f64, |x, &y| x.max(y));
    let tol = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let null: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] <= tol).collect();
    if null.is_empty() {
        return Err(Error::Infeasible("closure system has an empty nullspace".into()));
    }
    let basis = DMatrix::from_fn(n_pulses, null.len(), |n, c| v_t[(null[c], n)]);

    // phase quadratic form on unit effective Rabi amplitude
    let mut g = DMatrix::<f64>::zeros(n_pulses, n_pulses);
    for m in 0..modes.n_modes() {
        let k = kernels(&geom, modes.mode_freqs[m]);
        let c = modes.participation(0, m) * modes.participation(1, m) * modes.lamb_dicke[m] * modes.lamb_dicke[m];
        for n in 0..n_pulses {
            g[(n, n)] += c * k.s[n];
            for np in 0..n {
                g[(n, np)] += c * (k.z[np] * k.w[n]).re / 2.0;
            }
        }
    }
    let g_sym = (&g + g.transpose()) * 0.5;
    let q = basis.transpose() * &g_sym * &basis;
    let eig = SymmetricEigen::new(q);
    let mut best = 0usize;
    for k in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[k].abs() > eig.eigenvalues[best].abs() * (1.0 + 1e-12) {
            best = k;
        }
    }
    let lam = eig.eigenvalues[best];
    if lam == 0.0 || !lam.is_finite() {
        return Err(Error::Infeasible("nullspace carries no entangling phase".into()));
    }
    // Im g12 = s·λ|c|² must equal −π/8
    let ion_sign = if lam < 0.0 { 1.0 } else { -1.0 };
    let amp = libm::sqrt((PI / 8.0) / lam.abs());
    let mut omega: Vec<f64> = (&basis * eig.eigenvectors.column(best)).iter().map(|x| x * amp).collect();
    let lead = omega.iter().copied().find(|x| x.abs() > 1e-12 * amp).unwrap_or(1.0);
    if lead < 0.0 {
        omega.iter_mut().for_each(|x| *x = -*x);
    }
    let norm = libm::sqrt(omega.iter().map(|x| x * x).sum::<f64>());
    let resid = {
        let v = nalgebra::DVector::from_column_slice(&omega);
        (&a * v).norm() / norm
    };
    let amplitudes: Vec<Vec<f64>> = omega
        .iter()
        .map(|&o| {
            let mut v = vec![o; modes.n_ions];
            v[1] = ion_sign * o;
            v
        })
        .collect();
    let sequence = PulseSequence::equidistant(t_g, detuning, amplitudes)?;
    let coefficients = multipulse_coefficients(&sequence, modes)?;
    let closure = constrained_modes
        .iter()
        .map(|&m| {
            let worst = (0..modes.n_ions).map(|i| coefficients.gamma[(i, m)].norm()).fold(0.0, f64::max);
            worst / coefficients.excursion_scale[m].max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let pattern = omega.iter().map(|x| x / omega[0]).collect();
    let mean_square_rabi = sequence.mean_square_rabi(0);
    Ok(PulseTrain {
        sequence,
        coefficients,
        pattern,
        ion_sign,
        constrained_modes: constrained_modes.to_vec(),
        nullspace_residual: resid,
        closure_residual: closure,
        nullspace_dim: null.len(),
        mean_square_rabi,
    })
}

/// Replaces a secular drive by the first-micromotion-sideband drive with the
/// same force: `δ → δ̃` (same value) and laser Rabi `Ω → 4Ω/q`, so that every
/// secular design routine yields the micromotion design unchanged.
pub fn micromotion_transform(d: &DriveConfig, modes: &CrystalModes) -> Result<DriveConfig> {
    if d.sideband != Sideband::Secular {
        return Err(invalid("sideband_index", "transform starts from a secular drive"));
    }
    if !(d.q > 0.0) {
        return Err(invalid("q", "micromotion sideband needs q > 0"));
    }
    let report = regime_check(d, modes);
    if report.beta_bound.verdict == Verdict::Fail {
        return Err(Error::RegimeViolation {
            what: "compensation bound beta_tilde/(q omega/(4 Omega_rf))",
            margin: report.beta_bound.value,
            limit: crate::lightmatter::WARN_RATIO,
        });
    }
    let mut out = d.clone();
    out.sideband = Sideband::FirstMicromotion;
    let mut scaled = Vec::with_capacity(d.n_ions());
    for i in 0..d.n_ions() {
        let target = d.rabi[i] * dressing(d, i);
        scaled.push(target / dressing(&out, i));
    }
    out.rabi = scaled;
    Ok(out)
}

/// ε̃_carr/ε_carr = (4δ/(qΩ_rf))².
pub fn carrier_error_ratio(detuning: f64, q: f64, rf_freq: f64) -> f64 {
    let r = 4.0 * detuning / (q * rf_freq);
    r * r
}

/// t̃_g/t_g = 4δ/(qΩ_rf) at equal fidelity.
pub fn gate_time_ratio(detuning: f64, q: f64, rf_freq: f64) -> f64 {
    4.0 * detuning / (q * rf_freq)
}

/// `(|↓↓⟩ + i e^{i(φ₁+φ₂)}|↑↑⟩)/√2` in the basis |↓↓⟩, |↓↑⟩, |↑↓⟩, |↑↑⟩.
pub fn ideal_bell_state(phases: [f64; 2]) -> [C64; 4] {
    let z = C64::new(0.0, 0.0);
    [
        C64::new(FRAC_1_SQRT_2, 0.0),
        z,
        z,
        I * C64::from_polar(FRAC_1_SQRT_2, phases[0] + phases[1]),
    ]
}
