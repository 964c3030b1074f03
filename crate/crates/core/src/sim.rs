//! The coupled level-set / diffusion time loop.
//!
//! One step: temperature at `t + dt`, reference state, ΔG field from the
//! current carbon field, interface velocities, level-set transport with
//! junction repair and reinitialization, derived fields, carbon diffusion on
//! the new phase field, diagnostics.

use alloc::vec::Vec;

use crate::diffusion::{step_concentration, DiffusionCoefficients, MassAudit};
use crate::error::invalid;
use crate::grid::{ScalarField, VectorField};
use crate::kinetics::{
    assemble_v_dg, assemble_v_e, default_beta, delta_g_field, diffusive_coefficient, mobility_field,
    transport_step, StoredEnergyInput, VelocityAssembly,
};
use crate::levelset::{
    contour_length, positive_measure, zero_crossings_1d, DerivedFields, LevelSetEnsemble,
};
use crate::linalg::SolverSettings;
use crate::thermo::{CoolingSchedule, Material};
use crate::{Error, Result};

/// Steady state: the mean normal displacement of the phase interfaces stays
/// below `fraction · h` in total over `steps` consecutive steps, counted only
/// once the schedule has reached its final temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRule {
    pub fraction: f64,
    pub steps: usize,
}

impl Default for SteadyRule {
    fn default() -> Self {
        Self { fraction: 0.01, steps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub material: Material,
    pub schedule: CoolingSchedule,
    /// s
    pub dt: f64,
    /// s
    pub t_end: f64,
    pub steady: Option<SteadyRule>,
    pub capillarity: bool,
    pub stored_energy: Option<StoredEnergyInput>,
    /// Velocity smoothing exponent, 1/µm. Defaults to `3/η`.
    pub beta: Option<f64>,
    pub solver: SolverSettings,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) {
            return Err(invalid("t_end", "must be non-negative"));
        }
        if let Some(s) = self.steady {
            if !(s.fraction > 0.0) || s.steps == 0 {
                return Err(invalid("steady", "needs a positive fraction and step count"));
            }
        }
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub temperature: f64,
    pub ensemble: LevelSetEnsemble,
    pub derived: DerivedFields,
    pub concentration: ScalarField,
}

/// Per-step diagnostics; the first six entries form the diagnostics CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub temperature: f64,
    pub mass: f64,
    pub drift: f64,
    pub min_c: f64,
    pub max_c: f64,
    pub alpha_fraction: f64,
    /// Mean normal displacement of the phase interfaces over this step, µm.
    pub displacement: f64,
    pub advective_cfl: f64,
    pub interface_cfl: f64,
    pub recolored: usize,
}

/// Mean concentrations away from the diffuse phase interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateaus {
    /// Mean over `φ_pf > 0.95`, `None` without such nodes.
    pub alpha: Option<f64>,
    /// Mean over `φ_pf < 0.05`.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EndTime,
    SteadyState,
}

/// Carbon field in local partition equilibrium with a uniform austenite
/// concentration: `C = c_γ (1 + φ_pf (k − 1))` with `k = c_α/c_γ`.
pub fn partitioned_concentration(phase_field: &ScalarField, c_alpha: f64, c_gamma: f64) -> Result<ScalarField> {
    if !(c_gamma > 0.0 && c_alpha >= 0.0) {
        return Err(invalid("initial_concentration", "need c_gamma > 0 and c_alpha >= 0"));
    }
    let k = c_alpha / c_gamma;
    Ok(phase_field.map(|p| c_gamma * (1.0 + p * (k - 1.0))))
}

/// Area-weighted means of `C` in the two bulk phases.
pub fn plateau_concentrations(concentration: &ScalarField, phase_field: &ScalarField) -> Plateaus {
    let g = concentration.grid();
    let (mut sa, mut wa, mut sg, mut wg) = (0.0, 0.0, 0.0, 0.0);
    for (p, (c, f)) in concentration.values().iter().zip(phase_field.values()).enumerate() {
        let w = g.node_weight(p);
        if *f > 0.95 {
            sa += w * c;
            wa += w;
        } else if *f < 0.05 {
            sg += w * c;
            wg += w;
        }
    }
    Plateaus { alpha: (wa > 0.0).then(|| sa / wa), gamma: (wg > 0.0).then(|| sg / wg) }
}

/// Ferrite measure from the α-zone distance function.
pub fn alpha_measure(derived: &DerivedFields) -> f64 {
    positive_measure(&derived.phi_alpha_zone)
}

/// Position of the first α/γ crossing on a 1D grid.
pub fn interface_position_1d(derived: &DerivedFields) -> Option<f64> {
    if derived.phi_alpha_zone.grid().dims() != 1 {
        return None;
    }
    zero_crossings_1d(&derived.phi_alpha_zone).first().copied()
}

/// Interface concentrations `(C_α, C_γ)` of a 1D run: `C/g(φ_pf)` is
/// interpolated at the interface and split with the partition ratio `k`.
pub fn interface_concentrations_1d(state: &SimState, k: f64) -> Option<(f64, f64)> {
    let x = interface_position_1d(&state.derived)?;
    let grid = state.concentration.grid();
    let h = grid.spacing()[0];
    let s = (x - grid.origin()[0]) / h;
    let i = (s.max(0.0) as usize).min(grid.nx().saturating_sub(2));
    let w = s - i as f64;
    let reduced = |p: usize| {
        let f = state.derived.phase_field.values()[p];
        state.concentration.values()[p] / (1.0 + f * (k - 1.0))
    };
    let c_gamma = (1.0 - w) * reduced(i) + w * reduced(i + 1);
    Some((k * c_gamma, c_gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    config: SimConfig,
    state: SimState,
    audit: MassAudit,
    alpha_measure: f64,
    quiet: Vec<f64>,
}

impl Simulation {
    pub fn new(config: SimConfig, ensemble: LevelSetEnsemble, concentration: ScalarField) -> Result<Self> {
        config.validate()?;
        if concentration.grid() != ensemble.grid() {
            return Err(Error::GridMismatch);
        }
        if let Some(e) = &config.stored_energy {
            if e.per_grain.len() != ensemble.grains().len() {
                return Err(invalid("stored_energy", "needs one value per grain"));
            }
        }
        let derived = ensemble.derive()?;
        let temperature = config.schedule.initial_temperature();
        let audit = MassAudit::new(&concentration);
        let alpha_measure = alpha_measure(&derived);
        Ok(Self {
            config,
            state: SimState { t: 0.0, step: 0, temperature, ensemble, derived, concentration },
            audit,
            alpha_measure,
            quiet: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn mass_audit(&self) -> &MassAudit {
        &self.audit
    }

    pub fn alpha_fraction(&self) -> f64 {
        self.alpha_measure / self.state.ensemble.grid().measure()
    }

    pub fn plateaus(&self) -> Plateaus {
        plateau_concentrations(&self.state.concentration, &self.state.derived.phase_field)
    }

    /// Diagnostics of the current state with no motion.
    pub fn snapshot(&self) -> StepDiagnostics {
        let c = &self.state.concentration;
        StepDiagnostics {
            t: self.state.t,
            temperature: self.state.temperature,
            mass: self.audit.total(c),
            drift: self.audit.drift(c),
            min_c: c.min(),
            max_c: c.max(),
            alpha_fraction: self.alpha_fraction(),
            displacement: 0.0,
            advective_cfl: 0.0,
            interface_cfl: 0.0,
            recolored: 0,
        }
    }

    fn velocities(&self, temperature: f64) -> Result<VelocityAssembly> {
        let cfg = &self.config;
        let st = &self.state;
        let grid = *st.ensemble.grid();
        let beta = cfg.beta.unwrap_or_else(|| default_beta(st.ensemble.eta()));
        let ref_state = cfg.material.diagram.select(temperature)?;
        let dg = delta_g_field(ref_state, temperature, &st.concentration, &st.derived.phase_field)?;
        let mobility = mobility_field(&st.derived, &cfg.material.interfaces, temperature);
        let v_dg = assemble_v_dg(&st.ensemble, &st.derived, &dg, &mobility, beta)?;
        let v_e = match &cfg.stored_energy {
            Some(e) => assemble_v_e(&st.ensemble, &st.derived, e, &mobility, beta)?,
            None => VectorField::zeros(grid),
        };
        let diffusive_coeff = if cfg.capillarity {
            diffusive_coefficient(&st.derived, &cfg.material.interfaces, temperature)
        } else {
            ScalarField::constant(grid, 0.0)
        };
        Ok(VelocityAssembly { v_dg, v_e, diffusive_coeff, beta })
    }

    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let dt = self.config.dt;
        let t = self.state.t + dt;
        let temperature = self.config.schedule.temperature_at(t);
        let assembly = self.velocities(temperature)?;
        let h = self.state.ensemble.grid().h_min();
        let interface_cfl = assembly.total_velocity().max_norm() * dt / h;

        let outcome = transport_step(&mut self.state.ensemble, &assembly, dt, &self.config.solver)?;
        self.state.derived = outcome.derived;

        let mat = &self.config.material;
        let k = mat.diagram.select(temperature)?.partition_ratio(temperature)?;
        let coeffs =
            DiffusionCoefficients::new(mat.diffusivity.alpha.eval(temperature), mat.diffusivity.gamma.eval(temperature), k)?;
        let diffused =
            step_concentration(&self.state.concentration, &self.state.derived.phase_field, &coeffs, dt, &self.config.solver)?;
        self.state.concentration = diffused.concentration;
        self.state.t = t;
        self.state.step += 1;
        self.state.temperature = temperature;

        let measure = alpha_measure(&self.state.derived);
        let length = contour_length(&self.state.derived.phi_alpha_zone);
        let displacement = if length > 0.0 { (measure - self.alpha_measure).abs() / length } else { 0.0 };
        self.alpha_measure = measure;

        let mut d = self.snapshot();
        d.displacement = displacement;
        d.advective_cfl = diffused.advective_cfl;
        d.interface_cfl = interface_cfl;
        d.recolored = outcome.recolored;
        Ok(d)
    }

    /// True once the steady rule holds over the recorded window.
    fn steady(&mut self, d: &StepDiagnostics) -> bool {
        let Some(rule) = self.config.steady else { return false };
        let settled_temperature = (d.temperature - self.config.schedule.final_temperature()).abs() < 1e-9;
        if !settled_temperature {
            self.quiet.clear();
            return false;
        }
        self.quiet.push(d.displacement);
        if self.quiet.len() > rule.steps {
            self.quiet.remove(0);
        }
        let h = self.state.ensemble.grid().h_min();
        self.quiet.len() == rule.steps && self.quiet.iter().sum::<f64>() < rule.fraction * h
    }

    pub fn finished(&self) -> bool {
        self.state.t >= self.config.t_end - 1e-9 * self.config.dt
    }

    /// One step plus the stopping decision.
    pub fn advance(&mut self) -> Result<(StepDiagnostics, Option<Termination>)> {
        let d = self.step()?;
        let stop = if self.steady(&d) {
            Some(Termination::SteadyState)
        } else if self.finished() {
            Some(Termination::EndTime)
        } else {
            None
        };
        Ok((d, stop))
    }

    /// Steps until `t_end` or steady state, handing every step to `observe`.
    pub fn run(&mut self, mut observe: impl FnMut(&SimState, &StepDiagnostics)) -> Result<Termination> {
        if self.finished() {
            return Ok(Termination::EndTime);
        }
        loop {
            let (d, stop) = self.advance()?;
            observe(&self.state, &d);
            if let Some(t) = stop {
                return Ok(t);
            }
        }
    }
}

/// Sharp-interface ferrite fraction predicted by the lever rule.
pub fn lever_rule_fraction(c0: f64, c_alpha_eq: f64, c_gamma_eq: f64) -> f64 {
    (c_gamma_eq - c0) / (c_gamma_eq - c_alpha_eq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::microstructure::planar_ensemble;
    use crate::thermo::fixtures::state_1160;
    use crate::thermo::{ArrheniusLaw, Diffusivities, InterfaceProperties, LinearizedPhaseDiagram};

    fn material() -> Material {
        Material {
            diagram: LinearizedPhaseDiagram::new(alloc::vec![state_1160()]).unwrap(),
            interfaces: InterfaceProperties::homogeneous(ArrheniusLaw::new(6e17, 140_000.0).unwrap(), 0.0).unwrap(),
            diffusivity: Diffusivities {
                alpha: ArrheniusLaw::new(2.2e8, 122_500.0).unwrap(),
                gamma: ArrheniusLaw::new(1.5e7, 142_100.0).unwrap(),
            },
        }
    }

    fn config(schedule: CoolingSchedule, t_end: f64) -> SimConfig {
        SimConfig {
            material: material(),
            schedule,
            dt: 1e-3,
            t_end,
            steady: None,
            capillarity: false,
            stored_energy: None,
            beta: None,
            solver: SolverSettings::default(),
        }
    }

    fn planar(x0: f64, ca: f64, cg: f64, cfg: SimConfig) -> Simulation {
        let grid = Grid::line(241, 6.0).unwrap();
        let ens = planar_ensemble(grid, x0, 1.0, 0.5).unwrap();
        let c = partitioned_concentration(&ens.derive().unwrap().phase_field, ca, cg).unwrap();
        Simulation::new(cfg, ens, c).unwrap()
    }

    #[test]
    fn partitioned_start_is_in_local_equilibrium() {
        let grid = Grid::line(11, 1.0).unwrap();
        let pf = ScalarField::new(grid, (0..11).map(|i| i as f64 / 10.0).collect()).unwrap();
        let c = partitioned_concentration(&pf, 0.01, 0.2).unwrap();
        for (c, p) in c.values().iter().zip(pf.values()) {
            assert!((c / (1.0 + p * (0.05 - 1.0)) - 0.2).abs() < 1e-15);
        }
        let pl = plateau_concentrations(&c, &pf);
        assert!((pl.gamma.unwrap() - 0.2).abs() < 1e-15);
        assert!((pl.alpha.unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn lever_rule_endpoints() {
        assert_eq!(lever_rule_fraction(0.01, 0.01, 0.3), 1.0);
        assert_eq!(lever_rule_fraction(0.3, 0.01, 0.3), 0.0);
        let eq = state_1160().equilibrium_concentrations(1140.0);
        let f = lever_rule_fraction(0.020003, eq.c_alpha, eq.c_gamma);
        assert!((f - 0.8474343551567802).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let eq = state_1160().equilibrium_concentrations(1140.0);
        let sched = CoolingSchedule::Instantaneous { t_initial: 1140.0, t_final: 1140.0 };
        let mut sim = planar(3.0, eq.c_alpha, eq.c_gamma, config(sched, 0.05));
        let x0 = interface_position_1d(&sim.state().derived).unwrap();
        let c0 = sim.state().concentration.clone();
        sim.run(|_, _| {}).unwrap();
        let x1 = interface_position_1d(&sim.state().derived).unwrap();
        assert!((x1 - x0).abs() < 1e-9);
        let dc = c0.values().iter().zip(sim.state().concentration.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dc < 1e-12, "{dc}");
    }

    #[test]
    fn quench_moves_interface_and_conserves_solute() {
        let sched = CoolingSchedule::Instantaneous { t_initial: 1173.0, t_final: 1140.0 };
        let mut sim = planar(1.1838, 0.0014022, 0.024575, config(sched, 0.2));
        let x0 = interface_position_1d(&sim.state().derived).unwrap();
        let mut worst = 0.0f64;
        sim.run(|_, d| worst = worst.max(d.drift.abs())).unwrap();
        let x1 = interface_position_1d(&sim.state().derived).unwrap();
        assert!(x1 > x0 + 0.1);
        assert!(worst < 1e-10);
        let c = &sim.state().concentration;
        assert!(c.max() > 0.024575);
    }

    #[test]
    fn steady_rule_waits_for_final_temperature() {
        let eq = state_1160().equilibrium_concentrations(1140.0);
        let sched = CoolingSchedule::Linear { t_initial: 1141.0, t_final: 1140.0, rate: -10.0 };
        let mut cfg = config(sched, 5.0);
        cfg.steady = Some(SteadyRule::default());
        let mut sim = planar(3.0, eq.c_alpha, eq.c_gamma, cfg);
        assert_eq!(sim.run(|_, _| {}).unwrap(), Termination::SteadyState);
        // the step that reaches 1140 K is the first of the 50 quiet ones
        assert!(sim.state().t > 0.1 + 0.048, "{}", sim.state().t);
    }
}
