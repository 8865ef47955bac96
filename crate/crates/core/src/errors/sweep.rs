//! Gate-time sweeps reproducing the error-versus-speed figures.
//!
//! A [`Recipe`] fixes the crystal, bus scheme and noise; the swept parameter
//! depends on the scheme:
//!
//! | scheme                       | swept input                               |
//! |------------------------------|-------------------------------------------|
//! | single-mode, single pulse    | effective Rabi frequency Ω (rad/s)        |
//! | two-mode, single pulse       | axial trap frequency ω_z (rad/s)          |
//! | any, multi pulse             | t_g as a fraction of the single-pulse optimum |
//!
//! Every grid point is independent; [`evaluate_point`] can be mapped in
//! parallel and the results handed to [`refine_optimum`].

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{
    carrier_error, dephasing_error, motional_error, BusScheme, CarrierDrive, ErrorBudget, ForceKind, MotionalInputs,
    NoiseConfig, Pulsing, SchemeTag,
};
use crate::consts::angular;
use crate::crystal::{normal_modes, wavevector_from_reference, Axis, CrystalModes, IonSpecies};
use crate::error::invalid;
use crate::lightmatter::{DriveConfig, Sideband};
use crate::magnus::{design_two_mode_gate, single_mode_detuning_offset, solve_pulse_train};
use crate::{Error, Result};

/// T₂ values shown in the single-pulse figures (s).
pub const CAPTION_T2: [f64; 4] = [0.2, 0.4, 0.8, 1.6];

/// Relative tolerance of the golden-section refinement in t_g.
pub const REFINE_TOL: f64 = 1e-3;

/// r.f. frequency used by a micromotion sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RfFrequency {
    /// Fixed Ω_rf (rad/s).
    Fixed(f64),
    /// Fixed ratio Ω_rf/ω of the bus-axis single-ion frequency.
    Ratio(f64),
    /// Ω_rf = 4δ/q at every point.
    Crossover,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfSettings {
    pub q: f64,
    pub rf: RfFrequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub scheme: SchemeTag,
    pub species: IonSpecies,
    pub n_ions: usize,
    /// rad/s
    pub omega_z: f64,
    /// rad/s (ignored on the axial bus)
    pub omega_x: f64,
    /// Single-ion Lamb-Dicke parameter of the bus axis at its trap frequency.
    pub eta_ref: f64,
    pub noise: NoiseConfig,
    pub r1: u32,
    pub r2: i32,
    pub n_pulses: usize,
    /// Swept input range `(start, end)`; the grid runs from start to end.
    pub range: (f64, f64),
    pub n_points: usize,
    /// Present for micromotion-sideband schemes.
    pub rf: Option<RfSettings>,
    /// Single-pulse recipe whose optimum anchors a multi-pulse sweep.
    pub anchor: Option<Box<Recipe>>,
}

impl Recipe {
    /// Recipe of figure `id` (1–5) at dephasing time `t2`.
    ///
    /// 1: axial CoM, 2: transverse CoM, 3: both transverse modes,
    /// 4: axial pulse train (N_p = 3), 5: transverse pulse train (N_p = 5).
    pub fn figure(id: u8, t2: f64) -> Result<Self> {
        let ca = IonSpecies::calcium40();
        let axial = |noise| Recipe {
            scheme: SchemeTag::new(BusScheme::AxialSingleMode, Pulsing::SinglePulse, ForceKind::Secular),
            species: ca.clone(),
            n_ions: 2,
            omega_z: angular(0.975e6),
            omega_x: angular(9.75e6),
            eta_ref: 0.098,
            noise,
            r1: 1,
            r2: 0,
            n_pulses: 1,
            range: (angular(0.02e6), angular(0.12e6)),
            n_points: 61,
            rf: None,
            anchor: None,
        };
        let transverse_noise = NoiseConfig::new(t2, 0.05, 2)?;
        let two_mode = Recipe {
            scheme: SchemeTag::new(BusScheme::TransverseTwoMode, Pulsing::SinglePulse, ForceKind::Secular),
            eta_ref: 0.031,
            noise: transverse_noise,
            r2: 2,
            range: (angular(0.2e6), angular(0.975e6)),
            ..axial(transverse_noise)
        };
        Ok(match id {
            1 => axial(NoiseConfig::new(t2, 0.1, 2)?),
            2 => Recipe {
                scheme: SchemeTag::new(BusScheme::TransverseSingleMode, Pulsing::SinglePulse, ForceKind::Secular),
                eta_ref: 0.031,
                range: (angular(0.05e6), angular(1.29e6)),
                ..axial(transverse_noise)
            },
            3 => two_mode,
            4 => {
                let base = axial(NoiseConfig::new(t2, 0.1, 2)?);
                Recipe {
                    scheme: SchemeTag::new(BusScheme::AxialSingleMode, Pulsing::MultiPulse, ForceKind::Secular),
                    n_pulses: 3,
                    range: (1.0, 0.5),
                    n_points: 51,
                    anchor: Some(Box::new(base.clone())),
                    ..base
                }
            }
            5 => Recipe {
                scheme: SchemeTag::new(BusScheme::TransverseTwoMode, Pulsing::MultiPulse, ForceKind::Secular),
                n_pulses: 5,
                range: (1.0, 0.5),
                n_points: 51,
                anchor: Some(Box::new(two_mode.clone())),
                ..two_mode
            },
            _ => return Err(invalid("figure_id", "must be 1..5")),
        })
    }

    /// Same recipe driven on the first micromotion sideband.
    pub fn with_micromotion(mut self, rf: RfSettings) -> Self {
        self.scheme.force = ForceKind::Micromotion;
        self.rf = Some(rf);
        if let Some(a) = self.anchor.take() {
            self.anchor = Some(Box::new(a.with_micromotion(rf)));
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.n_ions != 2 {
            return Err(invalid("n_ions", "figure recipes describe two-ion crystals"));
        }
        if self.n_points < 2 {
            return Err(invalid("n_points", "must be >= 2"));
        }
        if !(self.omega_z > 0.0) || !(self.omega_x > 0.0) {
            return Err(invalid("omega", "trap frequencies must be positive"));
        }
        if !(self.eta_ref > 0.0) {
            return Err(invalid("eta", "must be positive"));
        }
        let (a, b) = self.range;
        if !(a.is_finite() && b.is_finite()) || a == b || a <= 0.0 || b <= 0.0 {
            return Err(Error::EmptyRange);
        }
        match (self.scheme.force, self.rf) {
            (ForceKind::Micromotion, None) => return Err(invalid("rf", "micromotion scheme needs q and Omega_rf")),
            (ForceKind::Micromotion, Some(rf)) => {
                if !(rf.q > 0.0 && rf.q < 1.0) {
                    return Err(invalid("q", "must lie in (0, 1)"));
                }
            }
            _ => {}
        }
        if self.scheme.pulsing == Pulsing::MultiPulse {
            if self.anchor.is_none() {
                return Err(invalid("anchor", "multi-pulse sweeps need a single-pulse anchor"));
            }
            if a > 1.0 + 1e-12 || b > 1.0 + 1e-12 {
                return Err(invalid("range", "multi-pulse fractions must not exceed 1"));
            }
        }
        Ok(())
    }

    fn bus_axis(&self) -> Axis {
        match self.scheme.bus {
            BusScheme::AxialSingleMode => Axis::Z,
            _ => Axis::X,
        }
    }

    fn wavevector(&self) -> f64 {
        let w = if self.bus_axis().is_axial() { self.omega_z } else { self.omega_x };
        wavevector_from_reference(&self.species, self.eta_ref, w)
    }

    /// Normal modes of the bus axis at axial frequency `omega_z`.
    pub fn modes_at(&self, omega_z: f64) -> Result<CrystalModes> {
        normal_modes(&self.species, omega_z, self.omega_x, self.bus_axis(), self.n_ions, self.wavevector())
    }

    /// Swept parameter values in grid order.
    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = self.range;
        let n = self.n_points;
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    fn carrier_drive(&self, detuning: f64) -> CarrierDrive {
        match (self.scheme.force, self.rf) {
            (ForceKind::Micromotion, Some(rf)) => {
                let bus_w = if self.bus_axis().is_axial() { self.omega_z } else { self.omega_x };
                let rf_freq = match rf.rf {
                    RfFrequency::Fixed(w) => w,
                    RfFrequency::Ratio(r) => r * bus_w,
                    RfFrequency::Crossover => 4.0 * detuning / rf.q,
                };
                CarrierDrive::Micromotion { q: rf.q, rf_freq }
            }
            _ => CarrierDrive::Secular { detuning },
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Swept input.
    pub param: f64,
    /// Effective Rabi frequency (rad/s); the rms value for pulse trains.
    pub rabi: f64,
    /// δ or δ̃ (rad/s)
    pub detuning: f64,
    /// Detuning from the CoM bus mode (rad/s).
    pub bus_detuning: f64,
    pub budget: ErrorBudget,
    /// Effective Rabi frequency of each pulse (rad/s); a single entry for CW gates.
    pub pulses: Vec<f64>,
}

/// Design inputs that stay fixed across a multi-pulse sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub omega_z: f64,
    pub detuning: f64,
    pub gate_time: f64,
    pub rabi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub optimum: SweepPoint,
    pub anchor: Option<Anchor>,
}

fn budget_at(
    recipe: &Recipe,
    modes: &CrystalModes,
    param: f64,
    mean_square_rabi: f64,
    detuning: f64,
    t_g: f64,
    pulses: Vec<f64>,
) -> SweepPoint {
    let rabi = libm::sqrt(mean_square_rabi);
    let eps_carr = carrier_error(recipe.n_ions, mean_square_rabi, recipe.carrier_drive(detuning));
    let inp = MotionalInputs { rabi, detuning, gate_time: t_g };
    let eps_mot = motional_error(recipe.scheme.bus, modes, inp, &recipe.noise);
    let eps_deph = dephasing_error(&recipe.noise, t_g);
    SweepPoint {
        param,
        rabi,
        detuning,
        bus_detuning: detuning - modes.mode_freqs[0],
        budget: ErrorBudget::new(eps_carr, eps_mot, eps_deph, t_g, recipe.scheme),
        pulses,
    }
}

/// Single-pulse design and budget at one swept value.
fn single_pulse_point(recipe: &Recipe, param: f64) -> Result<SweepPoint> {
    match recipe.scheme.bus {
        BusScheme::AxialSingleMode | BusScheme::TransverseSingleMode => {
            let modes = recipe.modes_at(recipe.omega_z)?;
            let rabi = param;
            let offset = single_mode_detuning_offset(rabi, modes.lamb_dicke[0], recipe.r1);
            let t_g = 2.0 * PI * recipe.r1 as f64 / offset;
            let delta = modes.mode_freqs[0] + offset;
            Ok(budget_at(recipe, &modes, param, rabi * rabi, delta, t_g, vec![rabi]))
        }
        BusScheme::TransverseTwoMode => {
            let modes = recipe.modes_at(param)?;
            let drive = DriveConfig::renormalized(&modes, vec![0.0; recipe.n_ions], 0.0, Sideband::Secular, 0.0, 1.0)?;
            let sol = design_two_mode_gate(&modes, &drive, recipe.r1, recipe.r2)?;
            let rabi = sol.rabi[0].abs();
            Ok(budget_at(recipe, &modes, param, rabi * rabi, sol.detuning, sol.gate_time, vec![rabi]))
        }
    }
}

/// Modes closed by a pulse train on the given bus.
pub fn constrained_modes(bus: BusScheme) -> Vec<usize> {
    match bus {
        BusScheme::TransverseTwoMode => vec![0, 1],
        _ => vec![0],
    }
}

fn multi_pulse_point(recipe: &Recipe, anchor: &Anchor, param: f64) -> Result<SweepPoint> {
    let modes = recipe.modes_at(anchor.omega_z)?;
    let t_g = param * anchor.gate_time;
    let train = solve_pulse_train(&modes, anchor.detuning, t_g, recipe.n_pulses, &constrained_modes(recipe.scheme.bus))?;
    let pulses = train.sequence.pulses.iter().map(|p| p.rabi[0]).collect();
    Ok(budget_at(recipe, &modes, param, train.mean_square_rabi, anchor.detuning, t_g, pulses))
}

/// Single-pulse optimum that anchors a multi-pulse sweep.
pub fn compute_anchor(recipe: &Recipe) -> Result<Option<Anchor>> {
    let Some(base) = &recipe.anchor else {
        return Ok(None);
    };
    let res = sweep_and_optimize(base)?;
    Ok(Some(Anchor::from_optimum(base, &res.optimum)))
}

impl Anchor {
    /// Anchor taken from the optimum of the single-pulse recipe `base`.
    pub fn from_optimum(base: &Recipe, optimum: &SweepPoint) -> Self {
        let omega_z = match base.scheme.bus {
            BusScheme::TransverseTwoMode => optimum.param,
            _ => base.omega_z,
        };
        Anchor {
            omega_z,
            detuning: optimum.detuning,
            gate_time: optimum.budget.gate_time,
            rabi: optimum.rabi,
        }
    }
}

/// Budget at one swept value. Multi-pulse recipes need their anchor.
pub fn evaluate_point(recipe: &Recipe, anchor: Option<&Anchor>, param: f64) -> Result<SweepPoint> {
    match recipe.scheme.pulsing {
        Pulsing::SinglePulse => single_pulse_point(recipe, param),
        Pulsing::MultiPulse => {
            let a = anchor.ok_or_else(|| invalid("anchor", "multi-pulse sweeps need a single-pulse anchor"))?;
            multi_pulse_point(recipe, a, param)
        }
    }
}

/// Grid minimum refined by golden-section search between its neighbours
/// until the bracket spans less than [`REFINE_TOL`] relative in t_g.
pub fn refine_optimum(recipe: &Recipe, anchor: Option<&Anchor>, points: &[SweepPoint]) -> Result<SweepPoint> {
    if points.is_empty() {
        return Err(Error::EmptyRange);
    }
    let mut k = 0;
    for (j, p) in points.iter().enumerate() {
        if p.budget.eps_total < points[k].budget.eps_total {
            k = j;
        }
    }
    let lo = points[k.saturating_sub(1)].param;
    let hi = points[(k + 1).min(points.len() - 1)].param;
    if lo == hi {
        return Ok(points[k].clone());
    }
    let eval = |x: f64| evaluate_point(recipe, anchor, x);
    let g = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut pc = eval(c)?;
    let mut pd = eval(d)?;
    let mut best = points[k].clone();
    for _ in 0..200 {
        for p in [&pc, &pd] {
            if p.budget.eps_total < best.budget.eps_total {
                best = p.clone();
            }
        }
        let ta = eval(a)?.budget.gate_time;
        let tb = eval(b)?.budget.gate_time;
        if (ta - tb).abs() <= REFINE_TOL * 0.5 * (ta + tb) {
            break;
        }
        if pc.budget.eps_total < pd.budget.eps_total {
            b = d;
            d = c;
            pd = pc;
            c = b - g * (b - a);
            pc = eval(c)?;
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + g * (b - a);
            pd = eval(d)?;
        }
    }
    Ok(best)
}

/// Sequential sweep plus optimum.
pub fn sweep_and_optimize(recipe: &Recipe) -> Result<SweepResult> {
    recipe.validate()?;
    let anchor = compute_anchor(recipe)?;
    let points = recipe
        .grid()
        .into_iter()
        .map(|p| evaluate_point(recipe, anchor.as_ref(), p))
        .collect::<Result<Vec<_>>>()?;
    let optimum = refine_optimum(recipe, anchor.as_ref(), &points)?;
    Ok(SweepResult { points, optimum, anchor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::ordinary;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn figure_one_endpoints_match_caption() {
        let r = Recipe::figure(1, 0.8).unwrap();
        let res = sweep_and_optimize(&r).unwrap();
        let first = &res.points[0];
        let last = res.points.last().unwrap();
        assert!((ordinary(last.bus_detuning) / 16.6e3 - 1.0).abs() < 0.02);
        assert!((ordinary(first.bus_detuning) / 2.9e3 - 1.0).abs() < 0.10);
        assert!(res.optimum.budget.gate_time > 1e-6);
        assert!(res.optimum.budget.eps_total < 1e-2);
    }

    #[test]
    fn figure_two_and_three_endpoints() {
        let r = Recipe::figure(2, 0.8).unwrap();
        let pts: Vec<_> = [r.range.0, r.range.1].iter().map(|&p| evaluate_point(&r, None, p).unwrap()).collect();
        assert!((ordinary(pts[1].bus_detuning) / 56.6e3 - 1.0).abs() < 0.02);
        assert!((ordinary(pts[0].bus_detuning) / 2.3e3 - 1.0).abs() < 0.10);
        let r = Recipe::figure(3, 0.8).unwrap();
        let pts: Vec<_> = [r.range.0, r.range.1].iter().map(|&p| evaluate_point(&r, None, p).unwrap()).collect();
        assert!((ordinary(pts[1].bus_detuning) / 48.9e3 - 1.0).abs() < 0.02);
        assert!((ordinary(pts[1].rabi) / 1.58e6 - 1.0).abs() < 0.02);
        assert!((ordinary(pts[0].bus_detuning) / 2.2e3 - 1.0).abs() < 0.10);
        assert!((ordinary(pts[0].rabi) / 0.07e6 - 1.0).abs() < 0.10);
    }

    #[test]
    fn grid_gate_times_are_monotone() {
        for id in 1..=3 {
            let r = Recipe::figure(id, 0.8).unwrap();
            let t: Vec<f64> = r.grid().iter().map(|&p| evaluate_point(&r, None, p).unwrap().budget.gate_time).collect();
            assert!(t.windows(2).all(|w| w[1] < w[0]), "figure {id}");
        }
    }

    #[test]
    fn optimum_beats_every_grid_point() {
        let r = Recipe::figure(2, 0.4).unwrap();
        let res = sweep_and_optimize(&r).unwrap();
        for p in &res.points {
            assert!(res.optimum.budget.eps_total <= p.budget.eps_total + 1e-15);
        }
    }

    #[test]
    fn crossover_sweep_matches_secular() {
        let sec = Recipe::figure(1, 0.8).unwrap();
        let mm = sec.clone().with_micromotion(RfSettings { q: 0.03, rf: RfFrequency::Crossover });
        for p in sec.grid() {
            let a = evaluate_point(&sec, None, p).unwrap();
            let b = evaluate_point(&mm, None, p).unwrap();
            assert_relative_eq!(a.budget.eps_total, b.budget.eps_total, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_range_rejected() {
        let mut r = Recipe::figure(1, 0.8).unwrap();
        r.range = (1.0, 1.0);
        assert!(matches!(sweep_and_optimize(&r), Err(Error::EmptyRange)));
        assert!(Recipe::figure(9, 0.8).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        // ε_carr + ε_deph alone is convex in t_g along the axial sweep
        #[test]
        fn carrier_plus_dephasing_convex(t2 in 0.05f64..5.0) {
            let r = Recipe::figure(1, t2).unwrap();
            let pts: Vec<_> = r.grid().iter().map(|&p| evaluate_point(&r, None, p).unwrap()).collect();
            let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.budget.gate_time, p.budget.eps_carr + p.budget.eps_deph)).collect();
            for w in xy.windows(3) {
                let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                // t_g decreases along the grid, so slopes must decrease
                prop_assert!(s2 < s1);
            }
        }
    }
}
