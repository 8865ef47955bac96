//! Brute-force check of the gate designs.
//!
//! Integrates the Schrödinger equation of two qubits and one or two vibrational
//! modes under the interaction-picture Hamiltonian
//!
//! ```text
//! H(t) = Σ_i σ_i⁺ B_i(t) + h.c.,
//! B_i(t) = Ω_i(t) e^{iφ_i + iβ̃_i cos(Ω_rf t)} cos(δ_L t) [1 + i Σ_m 𝓜_{i,m} η_m (u_m(t) a_m† + u_m(t)* a_m)]
//! ```
//!
//! in a truncated Fock space, with `δ_L = ℓ★Ω_rf + δ` and `u_m` the Floquet mode
//! functions. The carrier (the `1` in the bracket) is kept without any rotating
//! wave approximation; it can be switched off to isolate the spin-phonon part.
//!
//! States are stored spin-major: index `s·D + p` with `s = 2 s₀ + s₁` (↓ = 0)
//! and `p = n₀ + L n₁` for Fock cutoff `L`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;

use crate::crystal::CrystalModes;
use crate::error::invalid;
use crate::lightmatter::{dressing, DriveConfig, Sideband};
use crate::magnus::{ideal_bell_state, PulseSequence};
use crate::mathieu::{floquet_solution, mode_function, FloquetSolution, MathieuParams, DEFAULT_L_MAX};
use crate::special::bessel_j;
use crate::{Error, Result, C64};

/// Largest tolerated population of the top Fock level.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Ground,
    Thermal { nbar: f64, truncation_weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertSpec {
    /// Number of simulated modes (1 or 2), taken from the start of the mode list.
    pub n_modes: usize,
    /// Fock levels kept per mode.
    pub fock_cutoff: usize,
    pub initial: InitialState,
}

impl HilbertSpec {
    pub fn ground(n_modes: usize, fock_cutoff: usize) -> Self {
        Self { n_modes, fock_cutoff, initial: InitialState::Ground }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n_modes) {
            return Err(invalid("n_modes", "must be 1 or 2"));
        }
        if self.fock_cutoff < 4 {
            return Err(invalid("fock_cutoff", "must be >= 4"));
        }
        if let InitialState::Thermal { nbar, truncation_weight } = self.initial {
            if !(nbar >= 0.0) {
                return Err(invalid("nbar", "must be non-negative"));
            }
            if !(truncation_weight >= 0.999 && truncation_weight < 1.0) {
                return Err(invalid("truncation_weight", "must lie in [0.999, 1)"));
            }
        }
        Ok(())
    }

    fn phonon_dim(&self) -> usize {
        self.fock_cutoff.pow(self.n_modes as u32)
    }
}

/// Drive fed to the oracle: laser parameters plus an optional pulse schedule
/// of effective Rabi frequencies (replacing `config.rabi` inside pulses and
/// switching the light off between them).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDrive {
    pub config: DriveConfig,
    pub schedule: Option<PulseSequence>,
}

impl OracleDrive {
    pub fn continuous(config: DriveConfig) -> Self {
        Self { config, schedule: None }
    }

    /// Laser detuning from the qubit transition, `ℓ★Ω_rf + δ`.
    pub fn laser_detuning(&self) -> f64 {
        self.config.sideband.index() as f64 * self.config.rf_freq + self.detuning()
    }

    fn detuning(&self) -> f64 {
        self.schedule.as_ref().map_or(self.config.detuning, |s| s.detuning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Keep the carrier term.
    pub include_carrier: bool,
    pub rtol: f64,
    pub atol: f64,
    /// Minimum number of steps per period of the fastest oscillation.
    pub steps_per_period: f64,
    pub max_steps: usize,
    /// Floquet truncation of the mode functions.
    pub l_max: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            include_carrier: true,
            rtol: 1e-9,
            atol: 1e-11,
            steps_per_period: 20.0,
            max_steps: 20_000_000,
            l_max: DEFAULT_L_MAX,
        }
    }
}

impl OracleOptions {
    pub fn force_only() -> Self {
        Self { include_carrier: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Final state of a pure-state run; `None` after thermal averaging.
    pub final_state: Option<Vec<C64>>,
    /// Spin density matrix after tracing out the modes (basis ↓↓, ↓↑, ↑↓, ↑↑).
    pub spin_density: [[C64; 4]; 4],
    pub bell_fidelity: f64,
    /// Largest |‖ψ‖ − 1| over the runs.
    pub norm_drift: f64,
    /// γ_{i,m} reconstructed from ⟨a_m⟩ in the eigenbasis of the force spin
    /// operators. Defined up to the overall sign of those operators.
    pub gamma_measured: DMatrix<C64>,
    /// Largest population of a top Fock level seen during the run.
    pub top_population: f64,
    /// Population weight covered by the simulated initial states.
    pub retained_weight: f64,
    pub steps: usize,
}

impl SimResult {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.bell_fidelity
    }
}

struct System {
    l: usize,
    n_modes: usize,
    dim_ph: usize,
    omegas: Vec<f64>,
    floquet: Vec<Option<FloquetSolution>>,
    /// 𝓜_{i,m} η_m
    g: Vec<Vec<f64>>,
    /// laser Rabi per ion when no schedule is given
    rabi: Vec<f64>,
    /// per-pulse laser Rabi per ion and pulse windows
    schedule: Vec<(f64, f64, Vec<f64>)>,
    has_schedule: bool,
    phase: Vec<f64>,
    beta_tilde: Vec<f64>,
    rf: f64,
    delta_l: f64,
    carrier: bool,
    sqrt_n: Vec<f64>,
}

impl System {
    fn new(spec: &HilbertSpec, modes: &CrystalModes, drive: &OracleDrive, opts: &OracleOptions) -> Result<Self> {
        spec.validate()?;
        let d = &drive.config;
        if modes.n_ions != 2 || d.n_ions() != 2 {
            return Err(invalid("n_ions", "the oracle simulates two ions"));
        }
        if spec.n_modes > modes.n_modes() {
            return Err(invalid("n_modes", "more simulated modes than the crystal has"));
        }
        let q = d.q;
        let mut floquet = Vec::new();
        let mut omegas = Vec::new();
        for m in 0..spec.n_modes {
            let w = modes.mode_freqs[m];
            omegas.push(w);
            if q > 0.0 {
                let beta = 2.0 * w / d.rf_freq;
                let p = MathieuParams::new(beta * beta - 0.5 * q * q, q, d.rf_freq, opts.l_max.max(1))?;
                floquet.push(Some(floquet_solution(&p)?));
            } else {
                floquet.push(None);
            }
        }
        let g = (0..2)
            .map(|i| (0..spec.n_modes).map(|m| modes.participation(i, m) * modes.lamb_dicke[m]).collect())
            .collect();
        let mut schedule = Vec::new();
        if let Some(seq) = &drive.schedule {
            seq.validate()?;
            for p in &seq.pulses {
                if p.rabi.len() != 2 {
                    return Err(invalid("rabi", "one Rabi frequency per ion is required"));
                }
                let mut laser = Vec::with_capacity(2);
                for i in 0..2 {
                    let dr = dressing(d, i);
                    if dr == 0.0 {
                        return Err(invalid("q", "the selected sideband carries no force"));
                    }
                    laser.push(p.rabi[i] / dr);
                }
                schedule.push((p.t_start, p.t_start + p.width, laser));
            }
        }
        let l = spec.fock_cutoff;
        Ok(Self {
            l,
            n_modes: spec.n_modes,
            dim_ph: spec.phonon_dim(),
            omegas,
            floquet,
            g,
            rabi: d.rabi.clone(),
            schedule,
            has_schedule: drive.schedule.is_some(),
            phase: d.phase.clone(),
            beta_tilde: d.beta_tilde.clone(),
            rf: d.rf_freq,
            delta_l: drive.laser_detuning(),
            carrier: opts.include_carrier,
            sqrt_n: (0..=l).map(|n| libm::sqrt(n as f64)).collect(),
        })
    }

    fn dim(&self) -> usize {
        4 * self.dim_ph
    }

    fn stride(&self, m: usize) -> usize {
        if m == 0 {
            1
        } else {
            self.l
        }
    }

    fn rabi_at(&self, i: usize, t: f64) -> f64 {
        if !self.has_schedule {
            return self.rabi[i];
        }
        for (a, b, r) in &self.schedule {
            if t >= *a && t < *b {
                return r[i];
            }
        }
        0.0
    }

    fn mode_fn(&self, m: usize, t: f64) -> C64 {
        match &self.floquet[m] {
            Some(f) => mode_function(f, t),
            None => C64::from_polar(1.0, self.omegas[m] * t),
        }
    }

    /// Fastest angular frequency in H(t).
    fn fastest(&self) -> f64 {
        let wmax = self.omegas.iter().fold(0.0f64, |a, &w| a.max(w));
        let mut f = self.delta_l.abs() + wmax;
        let modulated = self.floquet.iter().any(|x| x.is_some()) || self.beta_tilde.iter().any(|&b| b != 0.0);
        if modulated {
            f += DEFAULT_L_MAX as f64 * self.rf;
        }
        f.max(wmax)
    }

    /// out = H(t) ψ, using `xs` as scratch for X_m ψ_s.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64], xs: &mut [C64]) {
        let d = self.dim_ph;
        let l = self.l;
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let u: Vec<C64> = (0..self.n_modes).map(|m| self.mode_fn(m, t)).collect();
        // X_m = u* a + u a†
        for s in 0..4 {
            for m in 0..self.n_modes {
                let st = self.stride(m);
                let src = &psi[s * d..(s + 1) * d];
                let dst = &mut xs[(s * self.n_modes + m) * d..(s * self.n_modes + m + 1) * d];
                for p in 0..d {
                    let n = (p / st) % l;
                    let mut acc = C64::new(0.0, 0.0);
                    if n + 1 < l {
                        acc += u[m].conj() * src[p + st] * self.sqrt_n[n + 1];
                    }
                    if n > 0 {
                        acc += u[m] * src[p - st] * self.sqrt_n[n];
                    }
                    dst[p] = acc;
                }
            }
        }
        let cosd = libm::cos(self.delta_l * t);
        let cos_rf = libm::cos(self.rf * t);
        for ion in 0..2 {
            let om = self.rabi_at(ion, t);
            if om == 0.0 {
                continue;
            }
            let c = C64::from_polar(om * cosd, self.phase[ion] + self.beta_tilde[ion] * cos_rf);
            let cc = c.conj();
            let bit = if ion == 0 { 2 } else { 1 };
            for s in 0..4 {
                if s & bit != 0 {
                    continue;
                }
                let up = s | bit;
                for p in 0..d {
                    // Σ_m g X_m ψ
                    let mut fx_s = C64::new(0.0, 0.0);
                    let mut fx_up = C64::new(0.0, 0.0);
                    for m in 0..self.n_modes {
                        let g = self.g[ion][m];
                        fx_s += xs[(s * self.n_modes + m) * d + p] * g;
                        fx_up += xs[(up * self.n_modes + m) * d + p] * g;
                    }
                    let i_fx_s = C64::new(-fx_s.im, fx_s.re);
                    let i_fx_up = C64::new(-fx_up.im, fx_up.re);
                    let (mut to_up, mut to_s) = (i_fx_s, -i_fx_up);
                    if self.carrier {
                        to_up += psi[s * d + p];
                        to_s += psi[up * d + p];
                    }
                    out[up * d + p] += c * to_up;
                    out[s * d + p] += cc * to_s;
                }
            }
        }
    }

    fn top_population(&self, psi: &[C64]) -> f64 {
        let d = self.dim_ph;
        let mut worst: f64 = 0.0;
        for m in 0..self.n_modes {
            let st = self.stride(m);
            let mut pop = 0.0;
            for s in 0..4 {
                for p in 0..d {
                    if (p / st) % self.l == self.l - 1 {
                        pop += psi[s * d + p].norm_sqr();
                    }
                }
            }
            worst = worst.max(pop);
        }
        worst
    }
}

/// Dense H(t) on the truncated space.
pub fn build_hamiltonian(
    spec: &HilbertSpec,
    modes: &CrystalModes,
    drive: &OracleDrive,
    opts: &OracleOptions,
    t: f64,
) -> Result<DMatrix<C64>> {
    let sys = System::new(spec, modes, drive, opts)?;
    let n = sys.dim();
    let mut h = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    let mut e = vec![C64::new(0.0, 0.0); n];
    let mut col = vec![C64::new(0.0, 0.0); n];
    let mut xs = vec![C64::new(0.0, 0.0); 4 * sys.n_modes * sys.dim_ph];
    for k in 0..n {
        e[k] = C64::new(1.0, 0.0);
        sys.apply(t, &e, &mut col, &mut xs);
        for r in 0..n {
            h[(r, k)] = col[r];
        }
        e[k] = C64::new(0.0, 0.0);
    }
    Ok(h)
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Integrator<'a> {
    sys: &'a System,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    xs: Vec<C64>,
    steps: usize,
    top: f64,
}

impl<'a> Integrator<'a> {
    fn new(sys: &'a System) -> Self {
        let n = sys.dim();
        let z = || vec![C64::new(0.0, 0.0); n];
        Self {
            sys,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            xs: vec![C64::new(0.0, 0.0); 4 * sys.n_modes * sys.dim_ph],
            steps: 0,
            top: 0.0,
        }
    }

    /// k = −i H(t) y
    fn rhs(&mut self, t: f64, stage: usize, y_from_tmp: bool, y: &[C64]) {
        let src: &[C64] = if y_from_tmp { &self.tmp } else { y };
        let (k, xs) = (&mut self.k[stage], &mut self.xs);
        self.sys.apply(t, src, k, xs);
        for z in k.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }

    fn stage(&mut self, y: &[C64], h: f64, coeffs: &[(usize, f64)]) {
        for j in 0..y.len() {
            let mut acc = y[j];
            for &(s, a) in coeffs {
                acc += self.k[s][j] * (a * h);
            }
            self.tmp[j] = acc;
        }
    }

    fn integrate(&mut self, y: &mut Vec<C64>, t0: f64, t1: f64, opts: &OracleOptions, h_max: f64) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        let mut t = t0;
        let mut h = h_max.min(t1 - t0);
        self.rhs(t, 0, false, y);
        let n = y.len();
        let mut ynew = vec![C64::new(0.0, 0.0); n];
        while t < t1 {
            if self.steps >= opts.max_steps {
                return Err(Error::StepSizeUnderflow { t });
            }
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            self.stage(y, h, &[(0, A21)]);
            self.rhs(t + C2 * h, 1, true, &[]);
            self.stage(y, h, &[(0, A31), (1, A32)]);
            self.rhs(t + C3 * h, 2, true, &[]);
            self.stage(y, h, &[(0, A41), (1, A42), (2, A43)]);
            self.rhs(t + C4 * h, 3, true, &[]);
            self.stage(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            self.rhs(t + C5 * h, 4, true, &[]);
            self.stage(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            self.rhs(t + h, 5, true, &[]);
            self.stage(y, h, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
            ynew.copy_from_slice(&self.tmp);
            self.rhs(t + h, 6, false, &ynew);
            let mut err: f64 = 0.0;
            for j in 0..n {
                let e = (self.k[0][j] * E1
                    + self.k[2][j] * E3
                    + self.k[3][j] * E4
                    + self.k[4][j] * E5
                    + self.k[5][j] * E6
                    + self.k[6][j] * E7)
                    * h;
                let sc = opts.atol + opts.rtol * y[j].norm().max(ynew[j].norm());
                err = err.max(e.norm() / sc);
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&ynew);
                let (k0, rest) = self.k.split_at_mut(1);
                k0[0].copy_from_slice(&rest[5]);
                self.steps += 1;
                self.top = self.top.max(self.sys.top_population(y));
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(h_max);
            if h < 1e-14 * t.abs().max(1e-12) {
                return Err(Error::StepSizeUnderflow { t });
            }
        }
        Ok(())
    }
}

fn spin_mixing(d: &DriveConfig, ion: usize) -> (f64, f64) {
    let b = d.beta_tilde[ion];
    let j0 = bessel_j(0, b);
    let j1 = bessel_j(1, b);
    let qq = d.q / 4.0;
    match d.sideband {
        Sideband::Secular => {
            let n = libm::hypot(j0, qq * j1);
            (j0 / n, qq * j1 / n)
        }
        Sideband::FirstMicromotion => {
            let n = libm::hypot(j1, qq * j0);
            if n == 0.0 {
                (1.0, 0.0)
            } else {
                (qq * j0 / n, -j1 / n)
            }
        }
    }
}

struct Pure {
    state: Vec<C64>,
    rho: [[C64; 4]; 4],
    drift: f64,
    gamma: DMatrix<C64>,
    top: f64,
    steps: usize,
}

fn run_pure(
    sys: &System,
    drive: &OracleDrive,
    opts: &OracleOptions,
    t_g: f64,
    fock: &[usize],
) -> Result<Pure> {
    let d = sys.dim_ph;
    let mut y = vec![C64::new(0.0, 0.0); sys.dim()];
    let p0 = fock.iter().enumerate().map(|(m, &n)| n * sys.stride(m)).sum::<usize>();
    y[p0] = C64::new(1.0, 0.0);
    let h_max = 2.0 * PI / sys.fastest() / opts.steps_per_period;
    let mut breaks = vec![0.0];
    for (a, b, _) in &sys.schedule {
        for x in [*a, *b] {
            if x > 0.0 && x < t_g {
                breaks.push(x);
            }
        }
    }
    breaks.push(t_g);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut integ = Integrator::new(sys);
    for w in breaks.windows(2) {
        integ.integrate(&mut y, w[0], w[1], opts, h_max)?;
    }
    let norm = libm::sqrt(y.iter().map(|z| z.norm_sqr()).sum::<f64>());
    let mut rho = [[C64::new(0.0, 0.0); 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..d {
                acc += y[a * d + p] * y[b * d + p].conj();
            }
            rho[a][b] = acc;
        }
    }
    let gamma = measured_gamma(sys, &drive.config, &y);
    Ok(Pure { state: y, rho, drift: (norm - 1.0).abs(), gamma, top: integ.top, steps: integ.steps })
}

fn measured_gamma(sys: &System, d: &DriveConfig, y: &[C64]) -> DMatrix<C64> {
    let dp = sys.dim_ph;
    // +1 and −1 eigenvectors of [[0, cx+icy], [cx−icy, 0]]
    let eig = |ion: usize, sign: f64| -> [C64; 2] {
        let (cy, cx) = spin_mixing(d, ion);
        [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(cx, -cy) * (sign * FRAC_1_SQRT_2)]
    };
    let mut a_sector = [vec![C64::new(0.0, 0.0); sys.n_modes], vec![C64::new(0.0, 0.0); sys.n_modes]];
    for (k, sign1) in [1.0, -1.0].into_iter().enumerate() {
        let v0 = eig(0, 1.0);
        let v1 = eig(1, sign1);
        let mut phi = vec![C64::new(0.0, 0.0); dp];
        for s in 0..4 {
            let e = v0[s >> 1] * v1[s & 1];
            for p in 0..dp {
                phi[p] += e.conj() * y[s * dp + p];
            }
        }
        let nrm: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        for m in 0..sys.n_modes {
            let st = sys.stride(m);
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..dp {
                let n = (p / st) % sys.l;
                if n + 1 < sys.l {
                    acc += phi[p].conj() * phi[p + st] * sys.sqrt_n[n + 1];
                }
            }
            a_sector[k][m] = if nrm > 0.0 { acc / nrm } else { C64::new(0.0, 0.0) };
        }
    }
    DMatrix::from_fn(2, sys.n_modes, |i, m| {
        let (pp, pm) = (a_sector[0][m], a_sector[1][m]);
        let s = if i == 0 { pp + pm } else { pp - pm };
        -s.conj() * 0.5
    })
}

fn fidelity(rho: &[[C64; 4]; 4], phases: [f64; 2]) -> f64 {
    let psi = ideal_bell_state(phases);
    let mut f = C64::new(0.0, 0.0);
    for a in 0..4 {
        for b in 0..4 {
            f += psi[a].conj() * rho[a][b] * psi[b];
        }
    }
    f.re.clamp(0.0, 1.0)
}

fn finish(sys: &System, drive: &OracleDrive, runs: Vec<(f64, Pure)>, weight: f64, keep_state: bool) -> Result<SimResult> {
    let mut rho = [[C64::new(0.0, 0.0); 4]; 4];
    let mut gamma = DMatrix::from_element(2, sys.n_modes, C64::new(0.0, 0.0));
    let (mut drift, mut top, mut steps) = (0.0f64, 0.0f64, 0usize);
    let total: f64 = runs.iter().map(|(w, _)| w).sum();
    for (w, r) in &runs {
        let w = w / total;
        for a in 0..4 {
            for b in 0..4 {
                rho[a][b] += r.rho[a][b] * w;
            }
        }
        gamma += &r.gamma * C64::new(w, 0.0);
        drift = drift.max(r.drift);
        top = top.max(r.top);
        steps += r.steps;
    }
    if top > LEAKAGE_LIMIT {
        return Err(Error::CutoffTooSmall { cutoff: sys.l, population: top });
    }
    let phases = [drive.config.phase[0], drive.config.phase[1]];
    let final_state = if keep_state { runs.into_iter().next().map(|(_, r)| r.state) } else { None };
    Ok(SimResult {
        final_state,
        bell_fidelity: fidelity(&rho, phases),
        spin_density: rho,
        norm_drift: drift,
        gamma_measured: gamma,
        top_population: top,
        retained_weight: weight,
        steps,
    })
}

/// Evolves |↓↓⟩ ⊗ |0…0⟩ (or the thermal ensemble of `spec.initial`) for `t_g`.
pub fn evolve(
    spec: &HilbertSpec,
    modes: &CrystalModes,
    drive: &OracleDrive,
    opts: &OracleOptions,
    t_g: f64,
) -> Result<SimResult> {
    if let InitialState::Thermal { .. } = spec.initial {
        return thermal_average(spec, modes, drive, opts, t_g);
    }
    if !(t_g >= 0.0) {
        return Err(invalid("t_g", "must be non-negative"));
    }
    let sys = System::new(spec, modes, drive, opts)?;
    let run = run_pure(&sys, drive, opts, t_g, &vec![0; spec.n_modes])?;
    finish(&sys, drive, vec![(1.0, run)], 1.0, true)
}

/// `p_n = n̄ⁿ/(n̄+1)^{n+1}`.
pub fn thermal_weight(nbar: f64, n: usize) -> f64 {
    libm::pow(nbar, n as f64) / libm::pow(nbar + 1.0, n as f64 + 1.0)
}

/// Fock configurations (one level per simulated mode) with their weights,
/// most probable first, until `target` of the population is covered. Levels
/// are limited to the lower half of the cutoff so the displaced states fit.
pub fn thermal_configurations(spec: &HilbertSpec, nbar: f64, target: f64) -> Result<(Vec<(Vec<usize>, f64)>, f64)> {
    let n_max = spec.fock_cutoff / 2;
    let mut all: Vec<(Vec<usize>, f64)> = Vec::new();
    if spec.n_modes == 1 {
        for n in 0..n_max {
            all.push((vec![n], thermal_weight(nbar, n)));
        }
    } else {
        for a in 0..n_max {
            for b in 0..n_max {
                all.push((vec![a, b], thermal_weight(nbar, a) * thermal_weight(nbar, b)));
            }
        }
    }
    all.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut out = Vec::new();
    let mut w = 0.0;
    for (cfg, p) in all {
        if w >= target {
            break;
        }
        w += p;
        out.push((cfg, p));
    }
    if w < target {
        return Err(Error::Truncation { weight: w });
    }
    Ok((out, w))
}

/// Thermal average `Σ p_n F_n` over the retained Fock configurations, with
/// weights renormalised to the retained population.
pub fn thermal_average(
    spec: &HilbertSpec,
    modes: &CrystalModes,
    drive: &OracleDrive,
    opts: &OracleOptions,
    t_g: f64,
) -> Result<SimResult> {
    let sys = System::new(spec, modes, drive, opts)?;
    let (nbar, target) = match spec.initial {
        InitialState::Thermal { nbar, truncation_weight } => (nbar, truncation_weight),
        InitialState::Ground => (0.0, 0.999),
    };
    let (cfgs, weight) = thermal_configurations(spec, nbar, target)?;
    let mut runs = Vec::with_capacity(cfgs.len());
    for (cfg, p) in cfgs {
        runs.push((p, run_pure(&sys, drive, opts, t_g, &cfg)?));
    }
    let keep = runs.len() == 1;
    finish(&sys, drive, runs, weight, keep)
}

/// `‖H − H†‖_F / ‖H‖_F` of the dense Hamiltonian at time t.
pub fn hermiticity_defect(h: &DMatrix<C64>) -> f64 {
    let n = h.norm();
    if n == 0.0 {
        return 0.0;
    }
    (h - h.adjoint()).norm() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::angular;
    use crate::crystal::{normal_modes, wavevector_from_reference, Axis, IonSpecies};
    use crate::lightmatter::force_model;
    use crate::magnus::{gamma_single_pulse, multipulse_coefficients};

    fn axial_modes() -> CrystalModes {
        let ca = IonSpecies::calcium40();
        let wz = angular(0.975e6);
        let k = wavevector_from_reference(&ca, 0.098, wz);
        normal_modes(&ca, wz, 0.0, Axis::Z, 2, k).unwrap()
    }

    fn drive(modes: &CrystalModes, rabi: f64, detuning: f64) -> DriveConfig {
        DriveConfig::renormalized(modes, vec![rabi; 2], detuning, Sideband::Secular, 0.0, angular(30e6)).unwrap()
    }

    #[test]
    fn zero_rabi_gives_zero_operator() {
        let modes = axial_modes();
        let d = OracleDrive::continuous(drive(&modes, 0.0, angular(1e6)));
        let h = build_hamiltonian(&HilbertSpec::ground(1, 4), &modes, &d, &OracleOptions::default(), 0.3e-6).unwrap();
        assert_eq!(h.norm(), 0.0);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let modes = axial_modes();
        let mut cfg = DriveConfig::renormalized(&modes, vec![angular(0.1e6), angular(0.07e6)], angular(1e6), Sideband::Secular, 0.03, angular(30e6))
            .unwrap()
            .with_beta_tilde(vec![0.002, 0.001])
            .with_phase(vec![0.3, -1.1]);
        let spec = HilbertSpec::ground(2, 5);
        for &t in &[0.0, 1.3e-7, 4.7e-6, 2.2e-5] {
            let h = build_hamiltonian(&spec, &modes, &OracleDrive::continuous(cfg.clone()), &OracleOptions::default(), t).unwrap();
            assert!(hermiticity_defect(&h) <= 1e-12);
        }
        cfg.sideband = Sideband::FirstMicromotion;
        let h = build_hamiltonian(&spec, &modes, &OracleDrive::continuous(cfg), &OracleOptions::default(), 3e-7).unwrap();
        assert!(hermiticity_defect(&h) <= 1e-12);
    }

    #[test]
    fn resonant_carrier_rabi_oscillation() {
        // δ = 0: H = Ω σˣ on each ion, so |↓⟩ → cos(Ωt)|↓⟩ − i sin(Ωt)|↑⟩
        let modes = axial_modes();
        let om = angular(50e3);
        let cfg = drive(&modes, om, 0.0);
        let spec = HilbertSpec::ground(1, 4);
        let t = 3.1e-6;
        let mut modes_off = modes.clone();
        modes_off.lamb_dicke = vec![0.0; 2];
        let r = evolve(&spec, &modes_off, &OracleDrive::continuous(cfg), &OracleOptions::default(), t).unwrap();
        let p_up = libm::sin(om * t).powi(2);
        let p = [(1.0 - p_up) * (1.0 - p_up), (1.0 - p_up) * p_up, p_up * (1.0 - p_up), p_up * p_up];
        for s in 0..4 {
            assert!((r.spin_density[s][s].re - p[s]).abs() < 1e-8);
        }
    }

    #[test]
    fn modulated_carrier_uses_bessel_amplitude() {
        // with phase modulation β̃ the resonant carrier is Ω J₀(β̃)
        let modes = axial_modes();
        let mut modes_off = modes.clone();
        modes_off.lamb_dicke = vec![0.0; 2];
        let om = angular(50e3);
        let b = 1.2;
        let cfg = DriveConfig::renormalized(&modes, vec![om; 2], 0.0, Sideband::Secular, 0.0, angular(20e6))
            .unwrap()
            .with_beta_tilde(vec![b, b]);
        let t = 4.0e-6;
        let r = evolve(&HilbertSpec::ground(1, 4), &modes_off, &OracleDrive::continuous(cfg), &OracleOptions::default(), t).unwrap();
        let p_up = libm::sin(om * bessel_j(0, b) * t).powi(2);
        assert!((r.spin_density[3][3].re - p_up * p_up).abs() < 2e-3);
    }

    #[test]
    fn force_only_displacement_matches_magnus() {
        let modes = axial_modes();
        let om = angular(60e3);
        let delta = modes.mode_freqs[0] + angular(20e3);
        let cfg = drive(&modes, om, delta);
        let f = force_model(&cfg, &modes).unwrap();
        let t = 17e-6;
        let r = evolve(&HilbertSpec::ground(1, 10), &modes, &OracleDrive::continuous(cfg), &OracleOptions::force_only(), t).unwrap();
        for i in 0..2 {
            let g = gamma_single_pulse(&f, &modes, i, 0, t);
            let meas = r.gamma_measured[(i, 0)];
            // RWA vs full: O(Ω/δ) counter-rotating corrections
            assert!((meas.norm() - g.norm()).abs() < 0.02 * g.norm() + 1e-4, "{meas} vs {g}");
        }
        assert!(r.norm_drift < 1e-8);
    }

    #[test]
    fn force_only_train_matches_exact_magnus() {
        let modes = axial_modes();
        let delta = modes.mode_freqs[0] + angular(25e3);
        let seq = PulseSequence::equidistant(30e-6, delta, vec![vec![angular(40e3), angular(40e3)], vec![angular(-15e3), angular(-15e3)], vec![angular(55e3), angular(55e3)]]).unwrap();
        let cfg = drive(&modes, 0.0, delta);
        let od = OracleDrive { config: cfg, schedule: Some(seq.clone()) };
        let r = evolve(&HilbertSpec::ground(1, 10), &modes.select_modes(&[0]), &od, &OracleOptions::force_only(), 30e-6).unwrap();
        let c = multipulse_coefficients(&seq, &modes.select_modes(&[0])).unwrap();
        for i in 0..2 {
            let (a, b) = (r.gamma_measured[(i, 0)], c.gamma[(i, 0)]);
            // oracle force operator is −𝔰
            assert!((a + b).norm() < 1e-6 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }

    #[test]
    fn thermal_weights() {
        assert!((thermal_weight(0.0, 0) - 1.0).abs() < 1e-15);
        let spec = HilbertSpec { n_modes: 1, fock_cutoff: 8, initial: InitialState::Thermal { nbar: 0.1, truncation_weight: 0.9999 } };
        let (cfg, w) = thermal_configurations(&spec, 0.1, 0.9999).unwrap();
        assert!(w >= 0.9999);
        assert!(cfg.len() <= 4);
        let tail: f64 = (0..4).map(|n| thermal_weight(0.1, n)).sum();
        assert!((tail - (1.0 - (0.1f64 / 1.1).powi(4))).abs() < 1e-14);
        assert!(thermal_configurations(&spec, 5.0, 0.9999).is_err());
    }

    #[test]
    fn thermal_at_zero_nbar_equals_ground() {
        let modes = axial_modes();
        let cfg = drive(&modes, angular(40e3), modes.mode_freqs[0] + angular(15e3));
        let od = OracleDrive::continuous(cfg);
        let g = evolve(&HilbertSpec::ground(1, 6), &modes, &od, &OracleOptions::default(), 5e-6).unwrap();
        let spec = HilbertSpec { n_modes: 1, fock_cutoff: 6, initial: InitialState::Thermal { nbar: 0.0, truncation_weight: 0.999 } };
        let t = evolve(&spec, &modes, &od, &OracleOptions::default(), 5e-6).unwrap();
        assert!((g.bell_fidelity - t.bell_fidelity).abs() < 1e-15);
    }

    #[test]
    fn small_cutoff_is_reported() {
        let modes = axial_modes();
        let cfg = drive(&modes, angular(300e3), modes.mode_freqs[0] + angular(5e3));
        let r = evolve(&HilbertSpec::ground(1, 4), &modes, &OracleDrive::continuous(cfg), &OracleOptions::force_only(), 60e-6);
        assert!(matches!(r, Err(Error::CutoffTooSmall { .. })));
    }
}
