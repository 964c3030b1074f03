//! Semi-analytic 1D sharp-interface model of mixed-mode ferrite growth.
//!
//! Ferrite occupies `[0, Γ]`, austenite `[Γ, X]`. Each phase carries a
//! quadratic carbon profile with zero slope at its outer wall. Given `Γ`, the
//! interface concentration `c = C_γ^int` is the root of the interface
//! balance
//!
//! `f(c) = μ ΔG(c) c (1−k) − (2D_α k/Γ + 2D_γ/L)(c − C_γ⁰(c))`,
//!
//! where the far-field value `C_γ⁰(c)` follows from solute conservation.
//! The interface then moves by explicit Euler with `v = μ ΔG`.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::thermo::{CoolingSchedule, Material, ReferenceState};
use crate::{Error, Result};

/// Initial sharp-interface configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSetup {
    /// Domain length `X`, µm.
    pub length: f64,
    /// Initial interface position, µm.
    pub gamma0: f64,
    /// Initial (uniform) ferrite concentration, wt%.
    pub c_alpha_initial: f64,
    /// Initial (uniform) austenite concentration, wt%.
    pub c_gamma_initial: f64,
}

impl OracleSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(invalid("length", "must be positive"));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 < self.length) {
            return Err(invalid("gamma0", "interface must lie inside the domain"));
        }
        if !(self.c_alpha_initial > 0.0 && self.c_gamma_initial > self.c_alpha_initial) {
            return Err(invalid("c_initial", "need 0 < c_alpha < c_gamma"));
        }
        Ok(())
    }

    /// Total solute, wt%·µm.
    pub fn mass(&self) -> f64 {
        self.gamma0 * self.c_alpha_initial + (self.length - self.gamma0) * self.c_gamma_initial
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleState {
    pub t: f64,
    pub temperature: f64,
    pub gamma: f64,
    pub length: f64,
    pub k: f64,
    pub c_gamma_int: f64,
    pub c_alpha_int: f64,
    pub c_gamma_0: f64,
    pub c_alpha_0: f64,
}

impl OracleState {
    pub fn l_gamma(&self) -> f64 {
        self.length - self.gamma
    }

    pub fn profiles(&self) -> Profiles {
        Profiles {
            gamma: self.gamma,
            length: self.length,
            c_alpha_int: self.c_alpha_int,
            c_alpha_0: self.c_alpha_0,
            c_gamma_int: self.c_gamma_int,
            c_gamma_0: self.c_gamma_0,
        }
    }
}

/// Closed-form quadratic concentration profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profiles {
    pub gamma: f64,
    pub length: f64,
    pub c_alpha_int: f64,
    pub c_alpha_0: f64,
    pub c_gamma_int: f64,
    pub c_gamma_0: f64,
}

impl Profiles {
    pub fn c_alpha(&self, x: f64) -> f64 {
        let s = x / self.gamma;
        self.c_alpha_0 + (self.c_alpha_int - self.c_alpha_0) * s * s
    }

    pub fn c_gamma(&self, x: f64) -> f64 {
        let s = 1.0 - (x - self.gamma) / (self.length - self.gamma);
        self.c_gamma_0 + (self.c_gamma_int - self.c_gamma_0) * s * s
    }

    /// Piecewise profile over the whole domain.
    pub fn concentration(&self, x: f64) -> f64 {
        if x < self.gamma {
            self.c_alpha(x)
        } else {
            self.c_gamma(x)
        }
    }

    pub fn slope_alpha(&self, x: f64) -> f64 {
        2.0 * (self.c_alpha_int - self.c_alpha_0) * x / (self.gamma * self.gamma)
    }

    pub fn slope_gamma(&self, x: f64) -> f64 {
        let l = self.length - self.gamma;
        -2.0 * (self.c_gamma_int - self.c_gamma_0) * (1.0 - (x - self.gamma) / l) / l
    }

    /// Composite Simpson integral of the piecewise profile.
    pub fn mass(&self) -> f64 {
        simpson(|x| self.c_alpha(x), 0.0, self.gamma, 64) + simpson(|x| self.c_gamma(x), self.gamma, self.length, 64)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Austenite far-field concentration that conserves `mass` for the given
/// interface concentration: `C_γ⁰ = (3M/(kΓ + L) − c)/2`.
pub fn far_field_from_mass_balance(gamma: f64, length: f64, k: f64, c_gamma_int: f64, mass: f64) -> Result<f64> {
    let w = k * gamma + (length - gamma);
    if !(w > 0.0) {
        return Err(Error::DegenerateGeometry("k·Γ + L vanishes"));
    }
    Ok(0.5 * (3.0 * mass / w - c_gamma_int))
}

/// Temperature-dependent inputs of the interface balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoInputs<'a> {
    pub temperature: f64,
    pub state: &'a ReferenceState,
    pub k: f64,
    /// µm⁴/(J·s)
    pub mobility: f64,
    /// µm²/s
    pub d_alpha: f64,
    /// µm²/s
    pub d_gamma: f64,
}

impl<'a> ThermoInputs<'a> {
    pub fn from_material(material: &'a Material, temperature: f64) -> Result<Self> {
        let state = material.diagram.select(temperature)?;
        Ok(Self {
            temperature,
            state,
            k: state.partition_ratio(temperature)?,
            mobility: material.interfaces.alpha_gamma.mobility.eval(temperature),
            d_alpha: material.diffusivity.alpha.eval(temperature),
            d_gamma: material.diffusivity.gamma.eval(temperature),
        })
    }

    pub fn delta_g(&self, c_gamma: f64) -> f64 {
        self.state.delta_g(self.temperature, self.k * c_gamma, c_gamma)
    }

    pub fn c_gamma_eq(&self) -> f64 {
        self.state.equilibrium_concentrations(self.temperature).c_gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterfaceSolution {
    Root(f64),
    /// No sign change: the interface has nowhere to go. Carries the
    /// linearized equilibrium concentration.
    Equilibrium(f64),
}

/// The interface balance `f(c)` with the far field eliminated by mass
/// conservation.
pub fn interface_balance(gamma: f64, length: f64, mass: f64, th: &ThermoInputs, c: f64) -> Result<f64> {
    let c0 = far_field_from_mass_balance(gamma, length, th.k, c, mass)?;
    let l = length - gamma;
    let kinetic = th.mobility * th.delta_g(c) * c * (1.0 - th.k);
    let diffusive = (2.0 * th.d_alpha * th.k / gamma + 2.0 * th.d_gamma / l) * (c - c0);
    Ok(kinetic - diffusive)
}

/// Safeguarded bisection with secant steps on the bracket between the
/// flat-profile concentration and the linearized equilibrium.
pub fn solve_interface_concentration(gamma: f64, length: f64, mass: f64, th: &ThermoInputs) -> Result<InterfaceSolution> {
    if !(gamma > 0.0 && gamma < length) {
        return Err(Error::DomainExhausted { position: gamma });
    }
    let c_eq = th.c_gamma_eq();
    let c_flat = mass / (th.k * gamma + (length - gamma));
    let (mut a, mut b) = (c_flat.min(c_eq), c_flat.max(c_eq));
    let mut fa = interface_balance(gamma, length, mass, th, a)?;
    let mut fb = interface_balance(gamma, length, mass, th, b)?;
    if fa == 0.0 {
        return Ok(InterfaceSolution::Root(a));
    }
    if fb == 0.0 {
        return Ok(InterfaceSolution::Root(b));
    }
    if (fa > 0.0) == (fb > 0.0) || b - a <= 0.0 {
        return Ok(InterfaceSolution::Equilibrium(c_eq));
    }
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        // secant candidate, accepted only well inside the bracket
        let sec = b - fb * (b - a) / (fb - fa);
        let width = b - a;
        let x = if sec > a + 0.05 * width && sec < b - 0.05 * width { sec } else { mid };
        let fx = interface_balance(gamma, length, mass, th, x)?;
        if fx == 0.0 {
            return Ok(InterfaceSolution::Root(x));
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        // the secant may leave one end stuck; force a bisection next time
        if x == sec && (b - a) > 0.5 * width {
            let m = 0.5 * (a + b);
            let fm = interface_balance(gamma, length, mass, th, m)?;
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        if b - a <= 1e-15 * b.abs().max(1e-300) || fa.abs().min(fb.abs()) < 1e-16 {
            break;
        }
    }
    Ok(InterfaceSolution::Root(if fa.abs() < fb.abs() { a } else { b }))
}

/// One row of the oracle trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRecord {
    pub t: f64,
    pub temperature: f64,
    pub gamma: f64,
    pub c_gamma_int: f64,
    pub c_alpha_int: f64,
    pub c_gamma_0: f64,
    pub velocity: f64,
    /// Relative difference between the quadrature of the profiles and the
    /// initial solute amount.
    pub mass_residual: f64,
    /// `v(C_γ^int − C_α^int) − (D_α ∂C_α/∂x − D_γ ∂C_γ/∂x)` at the interface.
    pub flux_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EndTime,
    SteadyState,
    Equilibrium,
}

/// Stop once the interface speed stays below `speed` for `window` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyCriterion {
    /// µm/s
    pub speed: f64,
    /// s
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub records: Vec<OracleRecord>,
    pub termination: Termination,
}

impl OracleRun {
    pub fn last(&self) -> &OracleRecord {
        self.records.last().expect("a run records its initial state")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    pub material: Material,
    pub schedule: CoolingSchedule,
    pub setup: OracleSetup,
    mass: f64,
}

impl OracleModel {
    pub fn new(material: Material, schedule: CoolingSchedule, setup: OracleSetup) -> Result<Self> {
        setup.validate()?;
        schedule.validate()?;
        Ok(Self { material, schedule, setup, mass: setup.mass() })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Flat profiles at the initial concentrations.
    pub fn initial_state(&self) -> OracleState {
        let s = &self.setup;
        OracleState {
            t: 0.0,
            temperature: self.schedule.initial_temperature(),
            gamma: s.gamma0,
            length: s.length,
            k: s.c_alpha_initial / s.c_gamma_initial,
            c_gamma_int: s.c_gamma_initial,
            c_alpha_int: s.c_alpha_initial,
            c_gamma_0: s.c_gamma_initial,
            c_alpha_0: s.c_alpha_initial,
        }
    }

    fn record(&self, s: &OracleState, velocity: f64, th: Option<&ThermoInputs>) -> OracleRecord {
        let prof = s.profiles();
        let flux_residual = th.map_or(0.0, |th| {
            velocity * (s.c_gamma_int - s.c_alpha_int)
                - (th.d_alpha * prof.slope_alpha(s.gamma) - th.d_gamma * prof.slope_gamma(s.gamma))
        });
        OracleRecord {
            t: s.t,
            temperature: s.temperature,
            gamma: s.gamma,
            c_gamma_int: s.c_gamma_int,
            c_alpha_int: s.c_alpha_int,
            c_gamma_0: s.c_gamma_0,
            velocity,
            mass_residual: (prof.mass() - self.mass) / self.mass,
            flux_residual,
        }
    }

    /// Advances by `dt`: temperature and material data at `t + dt`, interface
    /// concentration at the current position, then `Γ += μΔG·dt`.
    ///
    /// The returned record describes the solve at the old position; the
    /// returned state holds the new position with the far field rebalanced.
    pub fn advance(&self, state: &OracleState, dt: f64) -> Result<(OracleState, OracleRecord, bool)> {
        if !(dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        let t = state.t + dt;
        let temperature = self.schedule.temperature_at(t);
        let th = ThermoInputs::from_material(&self.material, temperature)?;
        let (c, at_equilibrium) = match solve_interface_concentration(state.gamma, state.length, self.mass, &th)? {
            InterfaceSolution::Root(c) => (c, false),
            InterfaceSolution::Equilibrium(c) => (c, true),
        };
        let velocity = if at_equilibrium { 0.0 } else { th.mobility * th.delta_g(c) };
        let c0 = far_field_from_mass_balance(state.gamma, state.length, th.k, c, self.mass)?;
        let solved = OracleState {
            t,
            temperature,
            gamma: state.gamma,
            length: state.length,
            k: th.k,
            c_gamma_int: c,
            c_alpha_int: th.k * c,
            c_gamma_0: c0,
            c_alpha_0: th.k * c0,
        };
        let rec = self.record(&solved, velocity, Some(&th));
        let gamma = state.gamma + velocity * dt;
        if !(gamma > 0.0 && gamma < state.length) {
            return Err(Error::DomainExhausted { position: gamma });
        }
        let c0_new = far_field_from_mass_balance(gamma, state.length, th.k, c, self.mass)?;
        let next = OracleState { gamma, c_gamma_0: c0_new, c_alpha_0: th.k * c0_new, ..solved };
        Ok((next, rec, at_equilibrium))
    }

    /// Runs until `t_end`, the steady criterion, or equilibrium. Every
    /// `stride`-th step is recorded, plus the first and last.
    pub fn run(&self, dt: f64, t_end: f64, steady: Option<SteadyCriterion>, stride: usize) -> Result<OracleRun> {
        let stride = stride.max(1);
        let mut state = self.initial_state();
        let mut records = alloc::vec![self.record(&state, 0.0, None)];
        let mut quiet_since: Option<f64> = None;
        let mut step = 0usize;
        loop {
            if state.t >= t_end - 1e-12 * dt {
                break Ok(OracleRun { records, termination: Termination::EndTime });
            }
            let (next, rec, eq) = self.advance(&state, dt)?;
            step += 1;
            state = next;
            if eq {
                records.push(rec);
                break Ok(OracleRun { records, termination: Termination::Equilibrium });
            }
            let mut done = false;
            if let Some(c) = steady {
                if rec.velocity.abs() < c.speed {
                    let since = *quiet_since.get_or_insert(rec.t);
                    done = rec.t - since >= c.window;
                } else {
                    quiet_since = None;
                }
            }
            if done {
                records.push(rec);
                break Ok(OracleRun { records, termination: Termination::SteadyState });
            }
            if step % stride == 0 || state.t >= t_end - 1e-12 * dt {
                records.push(rec);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::fixtures::state_1160;
    use crate::thermo::{ArrheniusLaw, Diffusivities, InterfaceProperties, LinearizedPhaseDiagram};

    const X: f64 = 6.0;
    const G0: f64 = 1.1838;
    const CA: f64 = 0.0014022;
    const CG: f64 = 0.024575;

    fn setup() -> OracleSetup {
        OracleSetup { length: X, gamma0: G0, c_alpha_initial: CA, c_gamma_initial: CG }
    }

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

    fn quench() -> OracleModel {
        OracleModel::new(material(), CoolingSchedule::Instantaneous { t_initial: 1173.0, t_final: 1140.0 }, setup())
            .unwrap()
    }

    #[test]
    fn flat_profiles_and_boundary_values() {
        let p = Profiles { gamma: 2.0, length: 6.0, c_alpha_int: 0.01, c_alpha_0: 0.01, c_gamma_int: 0.2, c_gamma_0: 0.2 };
        assert_eq!(p.c_alpha(1.0), 0.01);
        assert_eq!(p.c_gamma(4.0), 0.2);
        let q = Profiles { c_gamma_int: 0.10, c_gamma_0: 0.02, c_alpha_int: 0.005, c_alpha_0: 0.001, ..p };
        assert!((q.c_gamma(2.0 + 2.0) - 0.04).abs() < 1e-15);
        assert_eq!(q.c_alpha(0.0), 0.001);
        assert!((q.c_alpha(2.0) - 0.005).abs() < 1e-15);
        assert!((q.c_gamma(2.0) - 0.10).abs() < 1e-15);
        assert!((q.c_gamma(6.0) - 0.02).abs() < 1e-15);
        assert_eq!(q.slope_gamma(6.0), 0.0);
        assert_eq!(q.slope_alpha(0.0), 0.0);
        let e = 1e-6;
        assert!(((q.c_gamma(6.0) - q.c_gamma(6.0 - e)) / e).abs() < 1e-6);
    }

    #[test]
    fn initial_mass_and_far_field() {
        let m = setup().mass();
        assert!((m - 0.12001803936).abs() < 1e-11);
        let k = CA / CG;
        let c0 = far_field_from_mass_balance(G0, X, k, CG, m).unwrap();
        assert!((c0 - CG).abs() < 1e-15);
        for (g, c) in [(2.0, 0.05), (3.3, 0.08), (4.9, 0.1)] {
            let c0 = far_field_from_mass_balance(g, X, 0.05, c, m).unwrap();
            let p = Profiles { gamma: g, length: X, c_alpha_int: 0.05 * c, c_alpha_0: 0.05 * c0, c_gamma_int: c, c_gamma_0: c0 };
            assert!((p.mass() - 0.120018).abs() < 1e-6);
            assert!(((p.mass() - m) / m).abs() < 1e-12);
        }
        assert!(far_field_from_mass_balance(X, X, 0.0, 0.1, m).is_err());
    }

    #[test]
    fn bracket_has_sign_change_after_quench() {
        let mat = material();
        let th = ThermoInputs::from_material(&mat, 1140.0).unwrap();
        let m = setup().mass();
        let lo = interface_balance(G0, X, m, &th, CG).unwrap();
        let hi = interface_balance(G0, X, m, &th, th.c_gamma_eq()).unwrap();
        assert!(lo > 0.0 && hi < 0.0);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let mat = material();
        let th = ThermoInputs::from_material(&mat, 1140.0).unwrap();
        let c_eq = th.c_gamma_eq();
        let k = th.k;
        // the lever-rule interface position makes flat equilibrium profiles conserve mass
        let m = setup().mass();
        let g_eq = (X * c_eq - m) / (c_eq * (1.0 - k));
        assert!((g_eq - 5.084605725420139).abs() < 1e-9);
        assert!(th.delta_g(c_eq).abs() < 1e-18);
        assert!(interface_balance(g_eq, X, m, &th, c_eq).unwrap().abs() < 1e-14);
        match solve_interface_concentration(g_eq, X, m, &th).unwrap() {
            InterfaceSolution::Root(c) | InterfaceSolution::Equilibrium(c) => assert!((c - c_eq).abs() < 1e-12),
        }
    }

    #[test]
    fn quench_trajectory() {
        let model = quench();
        let run = model.run(2e-4, 60.0, None, 500).unwrap();
        let mut prev = run.records[0];
        for r in &run.records[1..] {
            assert!(r.gamma >= prev.gamma);
            if r.t > 2e-4 {
                assert!(r.c_gamma_int >= prev.c_gamma_int - 1e-15);
            }
            assert!(r.mass_residual.abs() < 1e-9);
            assert!(r.flux_residual.abs() < 1e-12, "{}", r.flux_residual);
            prev = *r;
        }
        let last = run.last();
        assert!((last.gamma - 5.0846).abs() < 0.02, "Γ {}", last.gamma);
        assert!((last.c_gamma_int - 0.1022554).abs() < 1e-4);
    }

    #[test]
    fn explicit_euler_converges_in_dt() {
        let model = quench();
        let a = model.run(4e-4, 3.0, None, 1000).unwrap().last().gamma;
        let b = model.run(2e-4, 3.0, None, 1000).unwrap().last().gamma;
        assert!(((a - b) / b).abs() < 1e-3);
    }

    #[test]
    fn steady_criterion_stops_the_run() {
        let model = quench();
        let run = model.run(1e-3, 1e4, Some(SteadyCriterion { speed: 1e-4, window: 1.0 }), 1000).unwrap();
        assert_eq!(run.termination, Termination::SteadyState);
        assert!(run.last().t < 1e4);
    }

    #[test]
    fn no_driving_force_means_no_motion() {
        // start at the equilibrium position and concentrations of 1140 K
        let mat = material();
        let th = ThermoInputs::from_material(&mat, 1140.0).unwrap();
        let c_eq = th.c_gamma_eq();
        let g_eq = 5.084605725420139;
        let s = OracleSetup { length: X, gamma0: g_eq, c_alpha_initial: th.k * c_eq, c_gamma_initial: c_eq };
        let model = OracleModel::new(mat.clone(), CoolingSchedule::Instantaneous { t_initial: 1140.0, t_final: 1140.0 }, s).unwrap();
        let (next, rec, _) = model.advance(&model.initial_state(), 1e-3).unwrap();
        assert!(rec.velocity.abs() < 1e-9);
        assert!((next.gamma - g_eq).abs() < 1e-12);
    }
}
