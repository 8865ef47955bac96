//! Small numerical kernels shared by the physics modules.

use crate::C64;

/// sin(x)/x with the removable singularity filled in.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        libm::sin(x) / x
    }
}

/// `∫_0^τ e^{iνs} ds`, stable for any ν.
pub(crate) fn phase_integral(nu: f64, tau: f64) -> C64 {
    let h = 0.5 * nu * tau;
    C64::from_polar(tau * sinc(h), h)
}

/// `∫_0^τ s^k e^{iνs} ds` for small k.
pub(crate) fn moment_integral(k: usize, nu: f64, tau: f64) -> C64 {
    let x = nu * tau;
    if x.abs() < 2.0 {
        // Power series in (iντ); converges fast for |x| < 2.
        let mut sum = C64::new(0.0, 0.0);
        let mut term = C64::new(libm::pow(tau, (k + 1) as f64), 0.0);
        let ix = C64::new(0.0, x);
        for j in 0..60 {
            let add = term / ((k + j + 1) as f64);
            sum += add;
            if add.norm() < 1e-18 * sum.norm() {
                break;
            }
            term = term * ix / ((j + 1) as f64);
        }
        sum
    } else {
        let inu = C64::new(0.0, nu);
        let e = C64::from_polar(1.0, x);
        let mut m = (e - 1.0) / inu;
        for j in 1..=k {
            m = (e * libm::pow(tau, j as f64) - m * j as f64) / inu;
        }
        m
    }
}

/// `∫_0^τ ds₁ e^{iαs₁} ∫_0^{s₁} ds₂ e^{iβs₂}`.
pub(crate) fn triangle_integral(alpha: f64, beta: f64, tau: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    if (beta * tau).abs() < 1e-3 {
        let b = C64::new(0.0, beta);
        moment_integral(1, alpha, tau)
            + b * moment_integral(2, alpha, tau) / 2.0
            + b * b * moment_integral(3, alpha, tau) / 6.0
            + b * b * b * moment_integral(4, alpha, tau) / 24.0
    } else {
        (phase_integral(alpha + beta, tau) - phase_integral(alpha, tau)) / (i * beta)
    }
}

/// Bessel function of the first kind by its power series.
pub(crate) fn bessel_j(l: i32, x: f64) -> f64 {
    let n = l.unsigned_abs() as i32;
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let h2 = half * half;
    for k in 1..200 {
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    if l < 0 && n % 2 == 1 {
        -sum
    } else {
        sum
    }
}
