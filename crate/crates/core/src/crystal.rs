//! Linear Coulomb crystals: equilibrium positions, normal modes and
//! Lamb-Dicke parameters.
//!
//! Lengths are solved in units of `ℓ = (Q̃²/(Mω_z²))^{1/3}` with
//! `Q̃² = Q²/4πε₀`, then scaled back to metres.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::consts::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, EPSILON_0, HBAR, TWO_PI};
use crate::error::invalid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    pub label: String,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64, label: impl Into<String>) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(invalid("mass", "must be positive"));
        }
        if !(charge > 0.0) {
            return Err(invalid("charge", "must be positive"));
        }
        Ok(Self { mass, charge, label: label.into() })
    }

    /// ⁴⁰Ca⁺
    pub fn calcium40() -> Self {
        Self {
            mass: 39.962_590_863 * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
            label: String::from("40Ca+"),
        }
    }

    /// Q̃² = Q²/4πε₀ in J·m.
    pub fn coulomb_strength(&self) -> f64 {
        self.charge * self.charge / (2.0 * TWO_PI * EPSILON_0)
    }

    /// Length unit (Q̃²/(Mω_z²))^{1/3}.
    pub fn length_scale(&self, omega_z: f64) -> f64 {
        libm::cbrt(self.coulomb_strength() / (self.mass * omega_z * omega_z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn is_axial(self) -> bool {
        self == Axis::Z
    }

    /// Coulomb coupling factor: +1 transverse, −2 axial.
    fn coupling_factor(self) -> f64 {
        if self.is_axial() {
            -2.0
        } else {
            1.0
        }
    }
}

/// Normal modes of one branch of a linear chain.
///
/// Mode index 0 is the centre-of-mass mode: the lowest axial frequency or the
/// highest transverse one. Remaining modes follow in the same direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalModes {
    pub n_ions: usize,
    pub axis: Axis,
    /// Ion mass (kg).
    pub mass: f64,
    /// Effective wavevector projection along the axis (1/m).
    pub k_l: f64,
    /// Equilibrium positions along the trap axis (m).
    pub eq_positions: Vec<f64>,
    /// `mode_matrix[(i, m)]`, orthogonal.
    pub mode_matrix: DMatrix<f64>,
    /// rad/s
    pub mode_freqs: Vec<f64>,
    pub lamb_dicke: Vec<f64>,
}

impl CrystalModes {
    pub fn n_modes(&self) -> usize {
        self.mode_freqs.len()
    }

    /// Ground-state width `sqrt(ħ/(2Mω_m))` of mode m.
    pub fn ground_state_width(&self, m: usize) -> f64 {
        libm::sqrt(HBAR / (2.0 * self.mass * self.mode_freqs[m]))
    }

    pub fn participation(&self, ion: usize, mode: usize) -> f64 {
        self.mode_matrix[(ion, mode)]
    }

    /// Keep only the listed modes (e.g. to drop far-detuned spectators).
    pub fn select_modes(&self, keep: &[usize]) -> Self {
        let n = self.n_ions;
        let mut mm = DMatrix::zeros(n, keep.len());
        for (c, &m) in keep.iter().enumerate() {
            for i in 0..n {
                mm[(i, c)] = self.mode_matrix[(i, m)];
            }
        }
        Self {
            mode_matrix: mm,
            mode_freqs: keep.iter().map(|&m| self.mode_freqs[m]).collect(),
            lamb_dicke: keep.iter().map(|&m| self.lamb_dicke[m]).collect(),
            ..self.clone()
        }
    }
}

/// η = k_L sqrt(ħ/(2Mω)).
pub fn lamb_dicke(species: &IonSpecies, k_l: f64, mode_freq: f64) -> f64 {
    k_l * libm::sqrt(HBAR / (2.0 * species.mass * mode_freq))
}

/// Wavevector reproducing a reference Lamb-Dicke parameter at a reference
/// frequency.
pub fn wavevector_from_reference(species: &IonSpecies, eta_ref: f64, omega_ref: f64) -> f64 {
    eta_ref / libm::sqrt(HBAR / (2.0 * species.mass * omega_ref))
}

fn force_residual(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut f = vec![0.0; n];
    for i in 0..n {
        let mut s = u[i];
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                s -= 1.0 / (d * d.abs());
            }
        }
        f[i] = s;
    }
    f
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Dimensionless equilibrium positions (units of the length scale).
pub fn dimensionless_equilibrium(n_ions: usize) -> Result<Vec<f64>> {
    if n_ions == 0 {
        return Err(invalid("n_ions", "must be >= 1"));
    }
    if n_ions == 1 {
        return Ok(vec![0.0]);
    }
    let z0 = libm::cbrt(0.25);
    let spacing = 2.0 * z0 * libm::pow(2.0 / n_ions as f64, 0.56);
    let mid = 0.5 * (n_ions - 1) as f64;
    let mut u: Vec<f64> = (0..n_ions).map(|i| (i as f64 - mid) * spacing).collect();
    let mut f = force_residual(&u);
    let mut res = max_abs(&f);
    for _ in 0..200 {
        let scale = max_abs(&u).max(1.0);
        if res < 1e-14 * scale {
            break;
        }
        let jac = axial_hessian(&u);
        let rhs = DVector::from_iterator(n_ions, f.iter().map(|x| -x));
        let step = match jac.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => return Err(Error::NonConvergence { residual: res }),
        };
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let ft = force_residual(&trial);
                let rt = max_abs(&ft);
                if rt < res || lambda < 1e-6 {
                    u = trial;
                    f = ft;
                    res = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::NonConvergence { residual: res });
            }
        }
    }
    let scale = max_abs(&u).max(1.0);
    if res >= 1e-12 * scale {
        return Err(Error::NonConvergence { residual: res / scale });
    }
    // enforce exact mirror symmetry
    let sym: Vec<f64> = (0..n_ions).map(|i| 0.5 * (u[i] - u[n_ions - 1 - i])).collect();
    Ok(sym)
}

/// Equilibrium positions along the trap axis in metres, sorted ascending.
pub fn equilibrium_positions(species: &IonSpecies, omega_z: f64, n_ions: usize) -> Result<Vec<f64>> {
    if !(omega_z > 0.0) {
        return Err(invalid("omega_z", "must be positive"));
    }
    let l = species.length_scale(omega_z);
    Ok(dimensionless_equilibrium(n_ions)?.into_iter().map(|u| u * l).collect())
}

/// Axial Hessian in units of Mω_z².
fn axial_hessian(u: &[f64]) -> DMatrix<f64> {
    coupling_matrix(u, Axis::Z, 1.0)
}

/// `ω_α²/ω_z² δ_ij + V_ij/(Mω_z²)` for the chosen branch.
fn coupling_matrix(u: &[f64], axis: Axis, omega_ratio_sq: f64) -> DMatrix<f64> {
    let n = u.len();
    let c = axis.coupling_factor();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = omega_ratio_sq;
        for j in 0..n {
            if i != j {
                let d = (u[i] - u[j]).abs();
                let d3 = d * d * d;
                k[(i, j)] = c / d3;
                k[(i, i)] -= c / d3;
            }
        }
    }
    k
}

/// Normal modes of the branch `axis`.
///
/// `omega_axial` sets the chain; `omega_radial` is the single-ion transverse
/// frequency (unused for the axial branch). `k_l` is the wavevector projection
/// on `axis` used for the Lamb-Dicke parameters.
pub fn normal_modes(
    species: &IonSpecies,
    omega_axial: f64,
    omega_radial: f64,
    axis: Axis,
    n_ions: usize,
    k_l: f64,
) -> Result<CrystalModes> {
    if !(omega_axial > 0.0) {
        return Err(invalid("omega_axial", "must be positive"));
    }
    if !axis.is_axial() && !(omega_radial > 0.0) {
        return Err(invalid("omega_radial", "must be positive"));
    }
    let u = dimensionless_equilibrium(n_ions)?;
    let ratio_sq = if axis.is_axial() {
        1.0
    } else {
        let r = omega_radial / omega_axial;
        r * r
    };
    let k = coupling_matrix(&u, axis, ratio_sq);
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..n_ions).collect();
    if axis.is_axial() {
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    } else {
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    }
    let mut mode_matrix = DMatrix::zeros(n_ions, n_ions);
    let mut mode_freqs = Vec::with_capacity(n_ions);
    for (m, &src) in order.iter().enumerate() {
        let lam = eig.eigenvalues[src];
        if !(lam > 0.0) {
            return Err(Error::Unstable { mode: m, omega_sq: lam * omega_axial * omega_axial });
        }
        mode_freqs.push(omega_axial * libm::sqrt(lam));
        let col = eig.eigenvectors.column(src);
        let lead = col.iter().copied().find(|x| x.abs() > 1e-9).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n_ions {
            mode_matrix[(i, m)] = sign * col[i];
        }
    }
    let lamb = mode_freqs.iter().map(|&w| lamb_dicke(species, k_l, w)).collect();
    let l = species.length_scale(omega_axial);
    Ok(CrystalModes {
        n_ions,
        axis,
        mass: species.mass,
        k_l,
        eq_positions: u.into_iter().map(|x| x * l).collect(),
        mode_matrix,
        mode_freqs,
        lamb_dicke: lamb,
    })
}
