//! Task execution.

use std::path::{Path, PathBuf};

use anyhow::Context;
use iongate_core::consts::{angular, ordinary, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use iongate_core::crystal::{normal_modes, wavevector_from_reference, Axis, CrystalModes, IonSpecies};
use iongate_core::errors::sweep::{
    constrained_modes, evaluate_point, refine_optimum, Anchor, Recipe, RfFrequency, RfSettings, SweepPoint,
    SweepResult, CAPTION_T2,
};
use iongate_core::errors::{
    carrier_error, dephasing_error, motional_error, BusScheme, CarrierDrive, ErrorBudget, ForceKind, MotionalInputs,
    NoiseConfig, Pulsing, SchemeTag,
};
use iongate_core::lightmatter::{DriveConfig, Sideband};
use iongate_core::magnus::{design_single_mode_gate, design_two_mode_gate, solve_pulse_train, GateSolution};
use iongate_core::oracle::{evolve, HilbertSpec, InitialState, OracleDrive, OracleOptions};
use rayon::prelude::*;

use crate::plot::{panel_svg, Curve, Marker, PALETTE};
use crate::scenario::{need, positive, Bus, Scenario, Task};
use crate::table::{fmt, point_row, result_row, write_csv, write_results, RESULT_COLUMNS};
use crate::CliError;

/// Ω_rf used when neither q nor the micromotion sideband makes it matter.
const IDLE_RF_HZ: f64 = 30e6;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; `None` uses all logical cores.
    pub jobs: Option<usize>,
    /// Overrides `figure_id` of the scenario.
    pub figure: Option<u8>,
}

/// Runs `task` and returns the files written.
pub fn run(task: Task, scenario: &Scenario, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    if let Some(t) = scenario.task {
        if t != task {
            return Err(CliError::invalid("task", format!("scenario is for `{}`, not `{}`", t.name(), task.name())));
        }
    }
    let mut sc = scenario.clone();
    if opts.figure.is_some() {
        sc.figure_id = opts.figure;
    }
    if let Some(id) = sc.figure_id {
        if !(1..=5).contains(&id) {
            return Err(CliError::invalid("figure_id", "must be 1..5"));
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.jobs {
        if n == 0 {
            return Err(CliError::invalid("--jobs", "must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("cannot start worker pool")?;
    std::fs::create_dir_all(&opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;
    let out = opts.out.as_path();
    pool.install(|| match task {
        Task::Modes => modes_task(&sc, out),
        Task::Design => design_task(&sc, out),
        Task::Sweep => sweep_task(&sc, out),
        Task::PulseTrain => pulse_train_task(&sc, out),
        Task::Oracle => oracle_task(&sc, out),
        Task::Figure => figure_task(&sc, out),
    })
}

// ---------------------------------------------------------------- inputs

fn species(sc: &Scenario) -> Result<IonSpecies, CliError> {
    match (sc.crystal.species.as_deref(), sc.crystal.mass_amu) {
        (_, Some(m)) => {
            let label = sc.crystal.species.clone().unwrap_or_else(|| "ion".into());
            Ok(IonSpecies::new(positive(Some(m), "crystal.mass_amu")? * ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, label)?)
        }
        (None | Some("40Ca+") | Some("Ca40"), None) => Ok(IonSpecies::calcium40()),
        (Some(other), None) => Err(CliError::invalid(
            "crystal.species",
            format!("unknown species `{other}`; give crystal.mass_amu"),
        )),
    }
}

fn axis(sc: &Scenario) -> Result<Axis, CliError> {
    match sc.drive.axis.as_deref() {
        None | Some("z") => Ok(Axis::Z),
        Some("x") => Ok(Axis::X),
        Some(a) => Err(CliError::invalid("drive.axis", format!("`{a}` is not one of z, x"))),
    }
}

fn scheme_of(sc: &Scenario) -> Result<SchemeTag, CliError> {
    let bus = match (axis(sc)?, sc.drive.bus.unwrap_or(Bus::SingleMode)) {
        (Axis::Z, Bus::SingleMode) => BusScheme::AxialSingleMode,
        (Axis::Z, Bus::TwoMode) => {
            return Err(CliError::invalid("drive.bus", "two-mode gates need the transverse axis (drive.axis = \"x\")"))
        }
        (_, Bus::SingleMode) => BusScheme::TransverseSingleMode,
        (_, Bus::TwoMode) => BusScheme::TransverseTwoMode,
    };
    let pulsing = if sc.drive.n_pulses.unwrap_or(1) > 1 { Pulsing::MultiPulse } else { Pulsing::SinglePulse };
    Ok(SchemeTag::new(bus, pulsing, force_kind(sc)?))
}

fn force_kind(sc: &Scenario) -> Result<ForceKind, CliError> {
    match sc.drive.sideband.unwrap_or(0) {
        0 => Ok(ForceKind::Secular),
        1 => Ok(ForceKind::Micromotion),
        _ => Err(CliError::invalid("drive.sideband", "must be 0 or 1")),
    }
}

fn rf_settings(sc: &Scenario) -> Result<Option<RfSettings>, CliError> {
    let t = &sc.trap;
    let given = [t.rf_hz.is_some(), t.rf_ratio.is_some(), t.rf_crossover == Some(true)];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(CliError::invalid("trap.rf_hz", "give only one of rf_hz, rf_ratio, rf_crossover"));
    }
    if force_kind(sc)? == ForceKind::Secular {
        return Ok(None);
    }
    let q = positive(t.q, "trap.q")?;
    if q >= 1.0 {
        return Err(CliError::invalid("trap.q", "must lie in (0, 1)"));
    }
    let rf = if let Some(hz) = t.rf_hz {
        RfFrequency::Fixed(angular(positive(Some(hz), "trap.rf_hz")?))
    } else if let Some(r) = t.rf_ratio {
        RfFrequency::Ratio(positive(Some(r), "trap.rf_ratio")?)
    } else if t.rf_crossover == Some(true) {
        RfFrequency::Crossover
    } else {
        return Err(CliError::missing("trap.rf_hz"));
    };
    Ok(Some(RfSettings { q, rf }))
}

fn noise(sc: &Scenario, n_ions: usize, t2: f64, nbar_default: Option<f64>) -> Result<NoiseConfig, CliError> {
    let nbar = match (sc.noise.nbar, nbar_default) {
        (Some(n), _) => n,
        (None, Some(n)) => n,
        (None, None) => return Err(CliError::missing("noise.nbar")),
    };
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(CliError::invalid("noise.nbar", "must be non-negative"));
    }
    Ok(NoiseConfig::new(t2, nbar, n_ions)?)
}

fn t2(sc: &Scenario) -> Result<f64, CliError> {
    positive(sc.noise.t2, "noise.t2")
}

/// Physical setup shared by every task except `modes`.
fn base_recipe(sc: &Scenario, t2: f64) -> Result<Recipe, CliError> {
    let mut r = match sc.figure_id {
        Some(id) => {
            let fig = Recipe::figure(id, t2)?;
            if sc.drive.axis.is_some() && axis(sc)? != fig.modes_at(fig.omega_z)?.axis {
                return Err(CliError::invalid("drive.axis", format!("figure {id} fixes the bus axis")));
            }
            if sc.drive.bus.is_some() && scheme_of(sc)?.bus != fig.scheme.bus {
                return Err(CliError::invalid("drive.bus", format!("figure {id} fixes the bus scheme")));
            }
            fig
        }
        None => {
            let scheme = scheme_of(sc)?;
            let omega_z = angular(positive(sc.crystal.omega_z_hz, "crystal.omega_z_hz")?);
            let omega_x = if scheme.bus == BusScheme::AxialSingleMode {
                sc.crystal.omega_x_hz.map(angular).unwrap_or(10.0 * omega_z)
            } else {
                angular(positive(sc.crystal.omega_x_hz, "crystal.omega_x_hz")?)
            };
            let n_ions = sc.crystal.n_ions.unwrap_or(2);
            Recipe {
                scheme: SchemeTag::new(scheme.bus, Pulsing::SinglePulse, ForceKind::Secular),
                species: species(sc)?,
                n_ions,
                omega_z,
                omega_x,
                eta_ref: positive(sc.drive.eta, "drive.eta")?,
                noise: noise(sc, n_ions, t2, None)?,
                r1: 1,
                r2: if scheme.bus == BusScheme::TransverseTwoMode { 2 } else { 0 },
                n_pulses: 1,
                range: (0.0, 0.0),
                n_points: 61,
                rf: None,
                anchor: None,
            }
        }
    };
    apply_physics(sc, &mut r, t2)?;
    Ok(r)
}

/// Crystal, noise, loop and sideband overrides.
fn apply_physics(sc: &Scenario, r: &mut Recipe, t2: f64) -> Result<(), CliError> {
    if sc.crystal.species.is_some() || sc.crystal.mass_amu.is_some() {
        r.species = species(sc)?;
    }
    if let Some(n) = sc.crystal.n_ions {
        r.n_ions = n;
    }
    if let Some(w) = sc.crystal.omega_z_hz {
        r.omega_z = angular(positive(Some(w), "crystal.omega_z_hz")?);
    }
    if let Some(w) = sc.crystal.omega_x_hz {
        r.omega_x = angular(positive(Some(w), "crystal.omega_x_hz")?);
    }
    if let Some(e) = sc.drive.eta {
        r.eta_ref = positive(Some(e), "drive.eta")?;
    }
    r.noise = noise(sc, r.n_ions, t2, Some(r.noise.nbar))?;
    if let Some(r1) = sc.drive.r1 {
        if r1 < 1 {
            return Err(CliError::invalid("drive.r1", "must be >= 1"));
        }
        r.r1 = r1;
    }
    if let Some(r2) = sc.drive.r2 {
        if r.scheme.bus == BusScheme::TransverseTwoMode && !(r2 >= 2 || r2 <= -1) {
            return Err(CliError::invalid("drive.r2", "must be >= 2 or <= -1"));
        }
        r.r2 = r2;
    }
    if let Some(rf) = rf_settings(sc)? {
        *r = r.clone().with_micromotion(rf);
    }
    if let Some(a) = r.anchor.as_mut() {
        apply_physics(sc, a, t2)?;
    }
    Ok(())
}

/// Recipe of a sweep, with range and grid overrides applied.
fn sweep_recipe(sc: &Scenario, t2: f64) -> Result<Recipe, CliError> {
    let mut r = base_recipe(sc, t2)?;
    if let Some(n) = sc.drive.n_pulses {
        if n != r.n_pulses && !(sc.figure_id.is_some() && r.scheme.pulsing == Pulsing::MultiPulse) {
            return Err(CliError::invalid(
                "drive.n_pulses",
                "pulse-train sweeps start from the single-pulse optimum of figure 4 or 5; set figure_id",
            ));
        }
        r.n_pulses = n;
    }
    let scale = |x: f64| if r.scheme.pulsing == Pulsing::MultiPulse { x } else { angular(x) };
    match (sc.drive.sweep_from, sc.drive.sweep_to) {
        (Some(a), Some(b)) => r.range = (scale(a), scale(b)),
        (None, None) if sc.figure_id.is_some() => {}
        (None, _) => return Err(CliError::missing("drive.sweep_from")),
        (_, None) => return Err(CliError::missing("drive.sweep_to")),
    }
    if let Some(p) = sc.drive.points {
        if p < 2 {
            return Err(CliError::invalid("drive.points", "must be >= 2"));
        }
        r.n_points = p;
    }
    r.validate()?;
    Ok(r)
}

fn bus_axis_freq(r: &Recipe) -> f64 {
    if r.scheme.bus == BusScheme::AxialSingleMode {
        r.omega_z
    } else {
        r.omega_x
    }
}

fn swept_column(r: &Recipe) -> &'static str {
    match (r.scheme.pulsing, r.scheme.bus) {
        (Pulsing::MultiPulse, _) => "sweep_t_fraction",
        (_, BusScheme::TransverseTwoMode) => "sweep_omega_z_over_2pi_MHz",
        _ => "sweep_rabi_over_2pi_MHz",
    }
}

fn swept_value(r: &Recipe, p: &SweepPoint) -> f64 {
    match r.scheme.pulsing {
        Pulsing::MultiPulse => p.param,
        Pulsing::SinglePulse => ordinary(p.param) / 1e6,
    }
}

/// Ω_rf of a micromotion recipe at the given detuning.
fn rf_at(r: &Recipe, detuning: f64) -> Option<f64> {
    let rf = r.rf?;
    Some(match rf.rf {
        RfFrequency::Fixed(w) => w,
        RfFrequency::Ratio(k) => k * bus_axis_freq(r),
        RfFrequency::Crossover => 4.0 * detuning / rf.q,
    })
}

// ---------------------------------------------------------------- sweeps

/// Grid evaluated on the current rayon pool, assembled in grid order.
pub fn parallel_sweep(recipe: &Recipe) -> Result<SweepResult, CliError> {
    recipe.validate()?;
    let anchor = match &recipe.anchor {
        Some(base) => {
            let res = parallel_sweep(base)?;
            Some(Anchor::from_optimum(base, &res.optimum))
        }
        None => None,
    };
    let points = recipe
        .grid()
        .par_iter()
        .map(|&p| evaluate_point(recipe, anchor.as_ref(), p))
        .collect::<Result<Vec<_>, _>>()?;
    let optimum = refine_optimum(recipe, anchor.as_ref(), &points)?;
    Ok(SweepResult { points, optimum, anchor })
}

fn write_sweep(r: &Recipe, res: &SweepResult, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let result = out.join("result.csv");
    let rows: Vec<_> = res.points.iter().map(point_row).collect();
    write_results(&result, &rows)?;
    let mut header: Vec<&str> = RESULT_COLUMNS.to_vec();
    header.push(swept_column(r));
    let mut row = point_row(&res.optimum);
    row.push(fmt(swept_value(r, &res.optimum)));
    if let Some(rf) = rf_at(r, res.optimum.detuning) {
        header.push("rf_over_2pi_MHz");
        row.push(fmt(ordinary(rf) / 1e6));
    }
    let optimum = out.join("optimum.csv");
    write_csv(&optimum, &header, &[row])?;
    Ok(vec![result, optimum])
}

fn sweep_task(sc: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let r = sweep_recipe(sc, t2(sc)?)?;
    let res = parallel_sweep(&r)?;
    write_sweep(&r, &res, out)
}

fn figure_task(sc: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let id = need(sc.figure_id, "figure_id")?;
    let t2_main = t2(sc)?;
    let main = sweep_recipe(sc, t2_main)?;
    let res = parallel_sweep(&main)?;
    let mut files = write_sweep(&main, &res, out)?;
    // figures 1-3 overlay the caption T2 values, 4 and 5 show T2 = 0.2 s and 0.8 s side by side
    let panels: Vec<Vec<f64>> = match id {
        1..=3 => vec![CAPTION_T2.to_vec()],
        _ => vec![vec![0.2], vec![0.8]],
    };
    for (k, t2s) in panels.iter().enumerate() {
        let mut curves = Vec::new();
        let mut markers = Vec::new();
        let mut shared = None;
        for (j, &t2) in t2s.iter().enumerate() {
            let r = sweep_recipe(sc, t2)?;
            let res = parallel_sweep(&r)?;
            let color = PALETTE[j % PALETTE.len()];
            let series = |f: &dyn Fn(&ErrorBudget) -> f64| -> Vec<(f64, f64)> {
                res.points.iter().map(|p| (p.budget.gate_time * 1e6, f(&p.budget))).collect()
            };
            curves.push(Curve { label: format!("total, T2 = {t2} s"), points: series(&|b| b.eps_total), color, dashed: false });
            curves.push(Curve { label: format!("deph, T2 = {t2} s"), points: series(&|b| b.eps_deph), color, dashed: true });
            markers.push(Marker { at: (res.optimum.budget.gate_time * 1e6, res.optimum.budget.eps_total), color });
            shared.get_or_insert((series(&|b| b.eps_carr), series(&|b| b.eps_mot)));
        }
        if let Some((carr, mot)) = shared {
            curves.push(Curve { label: "carrier".into(), points: carr, color: PALETTE[4], dashed: true });
            curves.push(Curve { label: "motional".into(), points: mot, color: PALETTE[5], dashed: true });
        }
        let letter = (b'a' + k as u8) as char;
        let title = format!("figure {id} ({letter})");
        let svg = panel_svg(&title, &curves, &markers).context("svg rendering")?;
        let path = out.join(format!("panel_{letter}.svg"));
        std::fs::write(&path, svg).with_context(|| format!("cannot write {}", path.display()))?;
        files.push(path);
    }
    Ok(files)
}

// ---------------------------------------------------------------- single designs

fn bus_modes(r: &Recipe) -> Result<CrystalModes, CliError> {
    Ok(r.modes_at(r.omega_z)?)
}

struct Designed {
    recipe: Recipe,
    modes: CrystalModes,
    /// Drive with the designed detuning and laser Rabi frequencies.
    drive: DriveConfig,
    sol: GateSolution,
    budget: ErrorBudget,
}

fn design(sc: &Scenario) -> Result<Designed, CliError> {
    let recipe = base_recipe(sc, t2(sc)?)?;
    if sc.trap.rf_crossover == Some(true) {
        return Err(CliError::invalid("trap.rf_crossover", "only meaningful for sweeps; give trap.rf_hz"));
    }
    let modes = bus_modes(&recipe)?;
    let q = sc.trap.q.unwrap_or(0.0);
    if !(0.0..1.0).contains(&q) {
        return Err(CliError::invalid("trap.q", "must lie in [0, 1)"));
    }
    let rf = match (sc.trap.rf_hz, sc.trap.rf_ratio) {
        (Some(hz), _) => angular(positive(Some(hz), "trap.rf_hz")?),
        (None, Some(k)) => positive(Some(k), "trap.rf_ratio")? * bus_axis_freq(&recipe),
        (None, None) if q > 0.0 => return Err(CliError::missing("trap.rf_hz")),
        (None, None) => angular(IDLE_RF_HZ),
    };
    let sideband = Sideband::from_index(sc.drive.sideband.unwrap_or(0))?;
    let n = recipe.n_ions;
    let (sol, drive) = match recipe.scheme.bus {
        BusScheme::TransverseTwoMode => {
            let d = DriveConfig::renormalized(&modes, vec![0.0; n], 0.0, sideband, q, rf)?;
            let d = d.with_beta_tilde(vec![sc.drive.beta_tilde.unwrap_or(0.0); n]);
            (design_two_mode_gate(&modes, &d, recipe.r1, recipe.r2)?, d)
        }
        _ => {
            let rabi = angular(positive(sc.drive.rabi_hz, "drive.rabi_hz")?);
            let d = DriveConfig::renormalized(&modes, vec![rabi; n], 0.0, sideband, q, rf)?;
            let d = d.with_beta_tilde(vec![sc.drive.beta_tilde.unwrap_or(0.0); n]);
            (design_single_mode_gate(&modes, &d, recipe.r1)?, d)
        }
    };
    let mut drive = drive;
    drive.rabi = sol.laser_rabi.clone();
    drive.detuning = sol.detuning;
    let rabi = sol.rabi[0].abs();
    let carrier = match recipe.scheme.force {
        ForceKind::Micromotion => CarrierDrive::Micromotion { q: drive.q, rf_freq: drive.rf_freq },
        ForceKind::Secular => CarrierDrive::Secular { detuning: sol.detuning },
    };
    let eps_carr = carrier_error(n, rabi * rabi, carrier);
    let inp = MotionalInputs { rabi, detuning: sol.detuning, gate_time: sol.gate_time };
    let eps_mot = motional_error(recipe.scheme.bus, &modes, inp, &recipe.noise);
    let eps_deph = dephasing_error(&recipe.noise, sol.gate_time);
    let budget = ErrorBudget::new(eps_carr, eps_mot, eps_deph, sol.gate_time, recipe.scheme);
    Ok(Designed { recipe, modes, drive, sol, budget })
}

fn design_row(d: &Designed) -> Vec<String> {
    result_row(&d.budget, d.sol.rabi[0].abs(), d.sol.detuning - d.modes.mode_freqs[0])
}

fn design_task(sc: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let d = design(sc)?;
    let result = out.join("result.csv");
    write_results(&result, &[design_row(&d)])?;
    let s = &d.sol;
    let header = [
        "r1",
        "r2",
        "rabi_over_2pi_MHz",
        "laser_rabi_over_2pi_MHz",
        "detuning_over_2pi_MHz",
        "t_g_us",
        "g12_im",
        "j_over_2pi_kHz",
        "closure_residual",
    ];
    let row = vec![
        s.loops.0.to_string(),
        s.loops.1.to_string(),
        fmt(ordinary(s.rabi[0]) / 1e6),
        fmt(ordinary(s.laser_rabi[0]) / 1e6),
        fmt(ordinary(s.detuning) / 1e6),
        fmt(s.gate_time * 1e6),
        fmt(s.g12.im),
        fmt(ordinary(s.j_coupling) / 1e3),
        fmt(s.closure_residual),
    ];
    let path = out.join("design.csv");
    write_csv(&path, &header, &[row])?;
    Ok(vec![result, path])
}

fn oracle_task(sc: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let d = design(sc)?;
    let o = &sc.oracle;
    let default_modes = if d.recipe.scheme.bus == BusScheme::TransverseTwoMode { 2 } else { 1 };
    let n_modes = o.n_modes.unwrap_or(default_modes);
    if !(1..=2).contains(&n_modes) {
        return Err(CliError::invalid("oracle.n_modes", "must be 1 or 2"));
    }
    let cutoff = o.fock_cutoff.unwrap_or(12);
    if cutoff < 4 {
        return Err(CliError::invalid("oracle.fock_cutoff", "must be >= 4"));
    }
    let initial = if o.thermal == Some(true) {
        InitialState::Thermal { nbar: d.recipe.noise.nbar, truncation_weight: 0.999 }
    } else {
        InitialState::Ground
    };
    let spec = HilbertSpec { n_modes, fock_cutoff: cutoff, initial };
    let opts = if o.include_carrier.unwrap_or(true) { OracleOptions::default() } else { OracleOptions::force_only() };
    let res = evolve(&spec, &d.modes, &OracleDrive::continuous(d.drive.clone()), &opts, d.sol.gate_time)?;
    let closure = res.gamma_measured.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let result = out.join("result.csv");
    write_results(&result, &[design_row(&d)])?;
    let header = [
        "t_g_us",
        "infidelity",
        "eps_carr",
        "ratio_to_eps_carr",
        "max_gamma_measured",
        "norm_drift",
        "top_population",
        "retained_weight",
    ];
    let row = vec![
        fmt(d.sol.gate_time * 1e6),
        fmt(res.infidelity()),
        fmt(d.budget.eps_carr),
        fmt(res.infidelity() / d.budget.eps_carr),
        fmt(closure),
        fmt(res.norm_drift),
        fmt(res.top_population),
        fmt(res.retained_weight),
    ];
    let path = out.join("oracle.csv");
    write_csv(&path, &header, &[row])?;
    Ok(vec![result, path])
}

fn pulse_train_task(sc: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let t2 = t2(sc)?;
    let (recipe, modes, detuning, t_g) = match sc.figure_id {
        Some(id @ (4 | 5)) => {
            let r = sweep_recipe(sc, t2)?;
            let base = r.anchor.as_deref().expect("figure 4/5 recipes carry an anchor");
            let a = Anchor::from_optimum(base, &parallel_sweep(base)?.optimum);
            let f = need(sc.drive.t_fraction, "drive.t_fraction")?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(CliError::invalid("drive.t_fraction", format!("must lie in (0, 1] for figure {id}")));
            }
            let modes = r.modes_at(a.omega_z)?;
            (r, modes, a.detuning, f * a.gate_time)
        }
        Some(_) => return Err(CliError::invalid("figure_id", "pulse trains use figure 4 or 5")),
        None => {
            let r = base_recipe(sc, t2)?;
            let modes = bus_modes(&r)?;
            let d = modes.mode_freqs[0] + angular(need(sc.drive.bus_detuning_hz, "drive.bus_detuning_hz")?);
            let t = positive(sc.drive.gate_time_us, "drive.gate_time_us")? * 1e-6;
            (r, modes, d, t)
        }
    };
    let n_pulses = match (sc.drive.n_pulses, sc.figure_id) {
        (Some(n), _) => n,
        (None, Some(_)) => recipe.n_pulses,
        (None, None) => return Err(CliError::missing("drive.n_pulses")),
    };
    let train = solve_pulse_train(&modes, detuning, t_g, n_pulses, &constrained_modes(recipe.scheme.bus))?;
    let n = recipe.n_ions;
    let carrier = match (recipe.rf, rf_at(&recipe, detuning)) {
        (Some(s), Some(w)) => CarrierDrive::Micromotion { q: s.q, rf_freq: w },
        _ => CarrierDrive::Secular { detuning },
    };
    let rabi = train.mean_square_rabi.sqrt();
    let eps_carr = carrier_error(n, train.mean_square_rabi, carrier);
    let eps_mot = motional_error(recipe.scheme.bus, &modes, MotionalInputs { rabi, detuning, gate_time: t_g }, &recipe.noise);
    let eps_deph = dephasing_error(&recipe.noise, t_g);
    let budget = ErrorBudget::new(eps_carr, eps_mot, eps_deph, t_g, recipe.scheme);
    let result = out.join("result.csv");
    write_results(&result, &[result_row(&budget, rabi, detuning - modes.mode_freqs[0])])?;

    let mut header = vec!["pulse".to_string(), "t_start_us".into(), "width_us".into()];
    header.extend((1..=n).map(|i| format!("rabi_ion{i}_over_2pi_kHz")));
    let rows: Vec<Vec<String>> = train
        .sequence
        .pulses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut row = vec![(k + 1).to_string(), fmt(p.t_start * 1e6), fmt(p.width * 1e6)];
            row.extend(p.rabi.iter().map(|&r| fmt(ordinary(r) / 1e3)));
            row
        })
        .collect();
    let pulses = out.join("pulses.csv");
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&pulses, &h, &rows)?;

    let diag_header = ["ion_sign", "nullspace_dim", "nullspace_residual", "closure_residual", "g12_re", "g12_im"];
    let c = &train.coefficients;
    let diag = vec![
        fmt(train.ion_sign),
        train.nullspace_dim.to_string(),
        fmt(train.nullspace_residual),
        fmt(train.closure_residual),
        fmt(c.g12.re),
        fmt(c.g12.im),
    ];
    let path = out.join("train.csv");
    write_csv(&path, &diag_header, &[diag])?;
    Ok(vec![result, pulses, path])
}

// ---------------------------------------------------------------- modes

fn modes_task(sc: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sp = species(sc)?;
    let ax = axis(sc)?;
    let omega_z = angular(positive(sc.crystal.omega_z_hz, "crystal.omega_z_hz")?);
    let omega_x = if ax.is_axial() {
        sc.crystal.omega_x_hz.map(angular).unwrap_or(0.0)
    } else {
        angular(positive(sc.crystal.omega_x_hz, "crystal.omega_x_hz")?)
    };
    let n = sc.crystal.n_ions.unwrap_or(2);
    if n < 1 {
        return Err(CliError::invalid("crystal.n_ions", "must be >= 1"));
    }
    let bus_freq = if ax.is_axial() { omega_z } else { omega_x };
    let k = match sc.drive.eta {
        Some(e) => wavevector_from_reference(&sp, positive(Some(e), "drive.eta")?, bus_freq),
        None => 0.0,
    };
    let modes = normal_modes(&sp, omega_z, omega_x, ax, n, k)?;
    let mut header = vec!["mode".to_string(), "freq_over_2pi_MHz".into(), "ratio_to_omega_z".into(), "lamb_dicke".into()];
    header.extend((1..=n).map(|i| format!("b_ion{i}")));
    let rows: Vec<Vec<String>> = (0..modes.n_modes())
        .map(|m| {
            let w = modes.mode_freqs[m];
            let mut row = vec![(m + 1).to_string(), fmt(ordinary(w) / 1e6), fmt(w / omega_z), fmt(modes.lamb_dicke[m])];
            row.extend((0..n).map(|i| fmt(modes.participation(i, m))));
            row
        })
        .collect();
    let path = out.join("modes.csv");
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&path, &h, &rows)?;
    Ok(vec![path])
}
