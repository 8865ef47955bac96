//! Acceptance criteria. Each test prints one `criterion N PASS|FAIL` line.
//!
//! Criteria 6 (slow point) and 7 (monodromy, series residual) are known to
//! fail with the leading-order model; the reasons are in the README.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use iongate_core::consts::{angular, ordinary};
use iongate_core::crystal::{normal_modes, wavevector_from_reference, Axis, IonSpecies};
use iongate_core::errors::sweep::{
    compute_anchor, constrained_modes, evaluate_point, sweep_and_optimize, Recipe, RfFrequency, RfSettings,
};
use iongate_core::errors::{carrier_error, CarrierDrive};
use iongate_core::lightmatter::{DriveConfig, Sideband};
use iongate_core::magnus::{
    design_single_mode_gate, design_two_mode_gate, multipulse_coefficients, solve_pulse_train, PulseSequence,
    TARGET_G12,
};
use iongate_core::mathieu::{characteristic_exponent, floquet_solution, MathieuParams};
use iongate_core::oracle::{evolve, HilbertSpec, OracleDrive, OracleOptions};
use iongate::{run, RunOptions, Scenario, Task};
use iongate_core::C64;
use rand::{Rng, SeedableRng};

/// Written to the stdout handle directly so the line survives output capture.
fn report(n: &str, ok: bool, detail: &str) {
    let line = format!("criterion {n} {}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
}

fn rel(x: f64, target: f64) -> f64 {
    (x / target - 1.0).abs()
}

fn ca() -> IonSpecies {
    IonSpecies::calcium40()
}

#[test]
fn criterion_1_normal_modes() {
    let start = Instant::now();
    let (wz, wx) = (angular(0.975e6), angular(9.75e6));
    let ax = normal_modes(&ca(), wz, 0.0, Axis::Z, 2, 1e7).unwrap();
    let tr = normal_modes(&ca(), wz, wx, Axis::X, 2, 1e7).unwrap();
    let e_ax = rel(ax.mode_freqs[0], wz).max(rel(ax.mode_freqs[1], 3f64.sqrt() * wz));
    let e_tr = rel(tr.mode_freqs[0], wx).max(rel(tr.mode_freqs[1], (wx * wx - wz * wz).sqrt()));
    let dt = start.elapsed();
    let ok = e_ax < 1e-10 && e_tr < 1e-10 && dt < Duration::from_secs(1);
    report("1", ok, &format!("axial rel err {e_ax:.1e}, transverse {e_tr:.1e} (tol 1e-10), {dt:.2?} (< 1 s)"));
    assert!(ok);
}

#[test]
fn criterion_2_caption_cross_checks() {
    let start = Instant::now();
    let wz = angular(0.975e6);
    let axial = normal_modes(&ca(), wz, 0.0, Axis::Z, 2, wavevector_from_reference(&ca(), 0.098, wz)).unwrap();
    let d = DriveConfig::renormalized(&axial, vec![angular(0.12e6); 2], 0.0, Sideband::Secular, 0.0, angular(30e6))
        .unwrap();
    let single = design_single_mode_gate(&axial, &d, 1).unwrap();
    let khz1 = ordinary(single.detuning - axial.mode_freqs[0]) / 1e3;

    let wx = angular(9.75e6);
    let trans = normal_modes(&ca(), wz, wx, Axis::X, 2, wavevector_from_reference(&ca(), 0.031, wx)).unwrap();
    let d = DriveConfig::renormalized(&trans, vec![0.0; 2], 0.0, Sideband::Secular, 0.0, angular(30e6)).unwrap();
    let two = design_two_mode_gate(&trans, &d, 1, 2).unwrap();
    let mhz = ordinary(two.rabi[0].abs()) / 1e6;
    let khz2 = ordinary(two.detuning - trans.mode_freqs[0]) / 1e3;
    let dt = start.elapsed();
    let ok = rel(khz1, 16.6) < 0.02 && rel(mhz, 1.58) < 0.02 && rel(khz2, 48.9) < 0.02 && dt < Duration::from_secs(1);
    report(
        "2",
        ok,
        &format!("delta-omega_z = {khz1:.2} kHz (16.6), Omega = {mhz:.4} MHz (1.58), delta-omega_1 = {khz2:.2} kHz (48.9), tol 2%, {dt:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_secular_vs_micromotion_optimum() {
    let start = Instant::now();
    let secular = Recipe::figure(3, 0.8).unwrap();
    let micro = secular.clone().with_micromotion(RfSettings { q: 0.3, rf: RfFrequency::Ratio(46.0) });
    let s = sweep_and_optimize(&secular).unwrap().optimum;
    let m = sweep_and_optimize(&micro).unwrap().optimum;
    let (ts, es) = (s.budget.gate_time * 1e6, s.budget.eps_total);
    let (tm, em) = (m.budget.gate_time * 1e6, m.budget.eps_total);
    let dt = start.elapsed();
    let ok = rel(es, 2e-3) < 0.15
        && rel(ts, 129.0) < 0.15
        && rel(em, 8e-4) < 0.15
        && rel(tm, 57.0) < 0.15
        && dt < Duration::from_secs(60);
    report(
        "3",
        ok,
        &format!("secular {es:.3e} at {ts:.1} us (2e-3, 129), micromotion {em:.3e} at {tm:.1} us (8e-4, 57), tol 15%, {dt:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_4_crossover_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (id, q) in [(1, 0.03), (2, 0.3), (3, 0.3), (4, 0.03), (5, 0.3)] {
        let sec = Recipe::figure(id, 0.8).unwrap();
        let mm = sec.clone().with_micromotion(RfSettings { q, rf: RfFrequency::Crossover });
        let (a_sec, a_mm) = (compute_anchor(&sec).unwrap(), compute_anchor(&mm).unwrap());
        for p in sec.grid() {
            let x = evaluate_point(&sec, a_sec.as_ref(), p).unwrap().budget;
            let y = evaluate_point(&mm, a_mm.as_ref(), p).unwrap().budget;
            for (u, v) in [(x.eps_total, y.eps_total), (x.eps_carr, y.eps_carr), (x.gate_time, y.gate_time)] {
                worst = worst.max(rel(v, u));
            }
            n += 1;
        }
    }
    let dt = start.elapsed();
    let ok = worst < 1e-12 && dt < Duration::from_secs(60);
    report("4", ok, &format!("{n} points, worst relative difference {worst:.1e} (tol 1e-12), {dt:.2?}"));
    assert!(ok);
}

/// Strong pulses on even slots, weak ones in between, signs alternating.
fn alternates_with_weak_intermediates(pattern: &[f64]) -> bool {
    let alternating = pattern.windows(2).all(|w| w[0] * w[1] < 0.0);
    let strong = pattern.iter().step_by(2).map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let weak = pattern.iter().skip(1).step_by(2).map(|x| x.abs()).fold(0.0, f64::max);
    alternating && weak < strong
}

#[test]
fn criterion_5_pulse_trains() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for (id, fraction) in [(4, 0.74), (5, 0.8)] {
        let r = Recipe::figure(id, 0.8).unwrap();
        let a = compute_anchor(&r).unwrap().unwrap();
        let modes = r.modes_at(a.omega_z).unwrap();
        let tr = solve_pulse_train(&modes, a.detuning, fraction * a.gate_time, r.n_pulses, &constrained_modes(r.scheme.bus))
            .unwrap();
        let g_err = (tr.coefficients.g12 - TARGET_G12).norm();
        let shape = alternates_with_weak_intermediates(&tr.pattern);
        ok &= tr.closure_residual < 1e-8 && tr.nullspace_residual < 1e-10 && g_err < 1e-6 && shape;
        let pattern: Vec<String> = tr.pattern.iter().map(|x| format!("{x:.3}")).collect();
        detail.push(format!(
            "N_p={} closure {:.1e} nullspace {:.1e} |g12+i pi/8| {:.1e} pattern [{}]",
            r.n_pulses,
            tr.closure_residual,
            tr.nullspace_residual,
            g_err,
            pattern.join(", ")
        ));
    }
    let dt = start.elapsed();
    ok &= dt < Duration::from_secs(10);
    report("5", ok, &format!("{}; {dt:.2?}", detail.join("; ")));
    assert!(ok);
}

#[test]
fn criterion_6_oracle_equivalence() {
    let start = Instant::now();
    let r = Recipe::figure(1, 0.8).unwrap();
    let optimum = sweep_and_optimize(&r).unwrap().optimum.rabi;
    let modes = r.modes_at(r.omega_z).unwrap();
    let spec = HilbertSpec::ground(2, 12);
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, rabi) in [("slow", r.range.0), ("optimal", optimum), ("fast", r.range.1)] {
        let d = DriveConfig::renormalized(&modes, vec![rabi; 2], 0.0, Sideband::Secular, 0.0, angular(30e6)).unwrap();
        let sol = design_single_mode_gate(&modes, &d, 1).unwrap();
        let mut drive = d.clone();
        drive.detuning = sol.detuning;
        drive.rabi = sol.laser_rabi.clone();
        let drive = OracleDrive::continuous(drive);
        let force = evolve(&spec, &modes, &drive, &OracleOptions::force_only(), sol.gate_time).unwrap();
        // exact Magnus endpoint (counter-rotating terms included); the oracle
        // measures it with the opposite sign of the spin operator
        let seq = PulseSequence::equidistant(sol.gate_time, sol.detuning, vec![sol.rabi.clone()]).unwrap();
        let magnus = multipulse_coefficients(&seq, &modes).unwrap();
        let agree = (0..2)
            .flat_map(|i| (0..2).map(move |m| (i, m)))
            .map(|(i, m)| (force.gamma_measured[(i, m)] + magnus.gamma[(i, m)]).norm())
            .fold(0.0, f64::max);
        let f_bus = sol.rabi[0].abs() * modes.participation(0, 0) * modes.lamb_dicke[0];
        let diameter = f_bus / (sol.detuning - modes.mode_freqs[0]).abs();
        let residual = force.gamma_measured.column(0).iter().map(|z| z.norm()).fold(0.0, f64::max) / diameter;
        let full = evolve(&spec, &modes, &drive, &OracleOptions::default(), sol.gate_time).unwrap();
        let eps_carr = carrier_error(2, sol.rabi[0] * sol.rabi[0], CarrierDrive::Secular { detuning: sol.detuning });
        let ratio = full.infidelity() / eps_carr;
        let pass = force.infidelity() <= 1e-3 && agree < 1e-6 && residual < 1e-2 && (0.5..=2.0).contains(&ratio);
        ok &= pass;
        detail.push(format!(
            "{label} ({:.2} kHz): force-only 1-F {:.1e}, |gamma - magnus| {:.1e}, bus residual {:.1e} of loop, full 1-F / eps_carr = {:.3}",
            ordinary(rabi) / 1e3,
            force.infidelity(),
            agree,
            residual,
            ratio
        ));
    }
    let dt = start.elapsed();
    ok &= dt < Duration::from_secs(600);
    report("6", ok, &format!("{}; {dt:.2?}", detail.join("; ")));
    assert!(ok);
}

/// Exact characteristic exponent from the one-period monodromy (RK4).
fn monodromy_beta(a: f64, q: f64) -> f64 {
    let f = |tau: f64, y: [f64; 2]| [y[1], -(a - 2.0 * q * (2.0 * tau).cos()) * y[0]];
    let n = 20_000;
    let h = PI / n as f64;
    let mut trace = 0.0;
    for (k, init) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let mut y = init;
        for j in 0..n {
            let t = j as f64 * h;
            let k1 = f(t, y);
            let k2 = f(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = f(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
        trace += y[k];
    }
    (trace / 2.0).acos() / PI
}

/// sup |x'' + (a − 2q cos 2τ) x| / sup |x| for the truncated Floquet series.
fn series_residual(a: f64, q: f64, l_max: usize) -> f64 {
    let s = floquet_solution(&MathieuParams::new(a, q, 1.0, l_max).unwrap()).unwrap();
    let terms: Vec<(f64, f64)> = (-(l_max as i64)..=l_max as i64)
        .map(|l| {
            let c = if l == 0 { 1.0 } else { s.coeff(l.unsigned_abs() as usize) };
            (c, s.beta + 2.0 * l as f64)
        })
        .collect();
    let (mut res, mut norm): (f64, f64) = (0.0, 0.0);
    for j in 0..2000 {
        let tau = j as f64 * PI / 2000.0;
        let mut x = C64::new(0.0, 0.0);
        let mut x2 = C64::new(0.0, 0.0);
        for &(c, k) in &terms {
            let e = C64::from_polar(c, k * tau);
            x += e;
            x2 -= e * (k * k);
        }
        let r = x2 + x * (a - 2.0 * q * (2.0 * tau).cos());
        res = res.max(r.norm());
        norm = norm.max(x.norm());
    }
    res / norm
}

#[test]
fn criterion_7_mathieu_properties() {
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut at = (0.0, 0.0);
    let mut drawn = 0;
    while drawn < 50 {
        let a: f64 = rng.gen_range(-0.05..0.05);
        let q: f64 = rng.gen_range(0.0..0.35);
        if a + q * q / 2.0 <= 0.0 {
            continue;
        }
        drawn += 1;
        let b = characteristic_exponent(&MathieuParams::new(a, q, 1.0, 3).unwrap()).unwrap();
        let e = (b - monodromy_beta(a, q)).abs();
        if e > worst {
            worst = e;
            at = (a, q);
        }
    }
    let beta_ok = worst < 1e-3;

    // residual(q)/residual(q/2) should approach 2^{l_max+1}
    let mut slopes = Vec::new();
    for l_max in 1..=3 {
        let q = 0.2;
        let slope = (series_residual(0.01, q, l_max) / series_residual(0.01, q / 2.0, l_max)).log2();
        slopes.push((l_max, slope));
    }
    let series_ok = slopes.iter().all(|&(l, s)| s >= (l + 1) as f64 - 0.25);

    let mut closed_ok = true;
    for l_max in 1..=6 {
        for &q in &[0.01, 0.1, 0.3] {
            let s = floquet_solution(&MathieuParams::new(0.01, q, 1.0, l_max).unwrap()).unwrap();
            let mut xi = 1.0;
            for l in 1..=l_max {
                let fact: f64 = (1..l).map(|k| k as f64).product();
                let c = (-q / 4.0).powi(l as i32) / (fact * fact);
                closed_ok &= (s.coeff(l) - c).abs() <= 1e-15 * c.abs();
                xi += 2.0 * c;
            }
            closed_ok &= (s.xi - xi).abs() <= 1e-15;
        }
    }
    let dt = start.elapsed();
    let ok = beta_ok && series_ok && closed_ok && dt < Duration::from_secs(30);
    let slopes: Vec<String> = slopes.iter().map(|(l, s)| format!("l_max={l}: {s:.2} (want {})", l + 1)).collect();
    report(
        "7",
        ok,
        &format!(
            "beta vs monodromy worst {worst:.2e} at a={:.3}, q={:.3} (tol 1e-3) {}; series order {} {}; closed forms {}; {dt:.2?}",
            at.0,
            at.1,
            if beta_ok { "ok" } else { "FAIL" },
            slopes.join(", "),
            if series_ok { "ok" } else { "FAIL" },
            if closed_ok { "exact" } else { "FAIL" },
        ),
    );
    assert!(ok);
}

fn run_figure_3(out: &Path, jobs: usize) {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/figure3.toml");
    let sc = Scenario::load(&scenario).unwrap();
    let opts = RunOptions { out: out.to_path_buf(), jobs: Some(jobs), figure: Some(3) };
    run(Task::Figure, &sc, &opts).unwrap();
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [(dir.path().join("a"), 1), (dir.path().join("b"), 4), (dir.path().join("c"), 4)];
    for (p, jobs) in &runs {
        run_figure_3(p, *jobs);
    }
    let mut ok = true;
    for f in ["result.csv", "optimum.csv", "panel_a.svg"] {
        let first = std::fs::read(runs[0].0.join(f)).unwrap();
        for (p, _) in &runs[1..] {
            ok &= std::fs::read(p.join(f)).unwrap() == first;
        }
    }
    report("8", ok, "three `figure 3` runs (jobs 1, 4, 4) give byte-identical result.csv, optimum.csv, panel_a.svg");
    assert!(ok);
}
