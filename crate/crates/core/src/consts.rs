//! Physical constants (CODATA 2018, SI).

use core::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

pub const TWO_PI: f64 = 2.0 * PI;

/// Angular frequency from an ordinary frequency in Hz.
#[inline]
pub fn angular(hz: f64) -> f64 {
    TWO_PI * hz
}

/// Ordinary frequency in Hz from an angular frequency.
#[inline]
pub fn ordinary(omega: f64) -> f64 {
    omega / TWO_PI
}
