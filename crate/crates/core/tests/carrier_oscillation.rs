//! The off-resonant carrier infidelity seen by the full integrator oscillates
//! as 2 ε_carr sin²(δ t_g); ε_carr is its phase average.

use iongate_core::consts::angular;
use iongate_core::crystal::{normal_modes, wavevector_from_reference, Axis, IonSpecies};
use iongate_core::errors::{carrier_error, CarrierDrive};
use iongate_core::lightmatter::{DriveConfig, Sideband};
use iongate_core::magnus::design_single_mode_gate;
use iongate_core::oracle::{evolve, HilbertSpec, OracleDrive, OracleOptions};

#[test]
fn carrier_infidelity_follows_sin_squared() {
    let ca = IonSpecies::calcium40();
    let wz = angular(0.975e6);
    let modes = normal_modes(&ca, wz, 0.0, Axis::Z, 2, wavevector_from_reference(&ca, 0.098, wz))
        .unwrap()
        .select_modes(&[0]);
    let (mut mean, mut mean_model) = (0.0, 0.0);
    let n = 12;
    for j in 0..n {
        let rabi = angular(19e3 + 2e3 * j as f64 / n as f64);
        let d = DriveConfig::renormalized(&modes, vec![rabi; 2], 0.0, Sideband::Secular, 0.0, angular(30e6)).unwrap();
        let sol = design_single_mode_gate(&modes, &d, 1).unwrap();
        let mut drive = d.clone();
        drive.detuning = sol.detuning;
        let r = evolve(
            &HilbertSpec::ground(1, 12),
            &modes,
            &OracleDrive::continuous(drive),
            &OracleOptions::default(),
            sol.gate_time,
        )
        .unwrap();
        let eps = carrier_error(2, rabi * rabi, CarrierDrive::Secular { detuning: sol.detuning });
        let ratio = r.infidelity() / eps;
        let s = (sol.detuning * sol.gate_time).sin();
        assert!((ratio - 2.0 * s * s).abs() < 0.1, "ratio {ratio}, 2 sin^2 {}", 2.0 * s * s);
        mean += ratio / n as f64;
        mean_model += 2.0 * s * s / n as f64;
    }
    assert!((mean / mean_model - 1.0).abs() < 0.1, "mean ratio {mean} vs {mean_model}");
}
