//! Thermodynamic and kinetic material data.
//!
//! The driving pressure is obtained from a phase diagram linearized around
//! one or more reference temperatures. Each [`ReferenceState`] is valid on a
//! closed temperature interval; a [`LinearizedPhaseDiagram`] stitches several
//! of them along a thermal path.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::math;
use crate::{Error, Result};

/// Universal gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Closed temperature interval in K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureRange {
    pub lo: f64,
    pub hi: f64,
}

impl TemperatureRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("validity", "expected finite bounds with lo < hi"));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }
}

/// Phase boundaries linearized at a reference temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceState {
    /// Reference temperature, K.
    pub t_ref: f64,
    /// Ferrite boundary concentration at `t_ref`, wt%.
    pub c_alpha_ref: f64,
    /// Austenite boundary concentration at `t_ref`, wt%.
    pub c_gamma_ref: f64,
    /// Slope of the α/(α+γ) boundary, K/wt%.
    pub m_alpha: f64,
    /// Slope of the γ/(α+γ) boundary, K/wt%.
    pub m_gamma: f64,
    /// Entropy of transformation, J·K⁻¹·µm⁻³.
    pub delta_s: f64,
    pub validity: TemperatureRange,
}

/// Equilibrium concentrations of both phases, wt%.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPair {
    pub c_alpha: f64,
    pub c_gamma: f64,
}

impl ReferenceState {
    pub fn new(
        t_ref: f64,
        c_alpha_ref: f64,
        c_gamma_ref: f64,
        m_alpha: f64,
        m_gamma: f64,
        delta_s: f64,
        validity: TemperatureRange,
    ) -> Result<Self> {
        if !(m_alpha < 0.0 && m_gamma < 0.0) {
            return Err(invalid("m_alpha/m_gamma", "boundary slopes must be negative"));
        }
        if !(c_alpha_ref > 0.0 && c_alpha_ref < c_gamma_ref) {
            return Err(invalid("c_alpha_ref/c_gamma_ref", "need 0 < c_alpha_ref < c_gamma_ref"));
        }
        if !(delta_s > 0.0) {
            return Err(invalid("delta_s", "entropy of transformation must be positive"));
        }
        if !t_ref.is_finite() || t_ref <= 0.0 {
            return Err(invalid("t_ref", "must be a positive temperature"));
        }
        Ok(Self { t_ref, c_alpha_ref, c_gamma_ref, m_alpha, m_gamma, delta_s, validity })
    }

    /// Linearized equilibrium concentrations `c_i = c_i_ref + (T - T_ref)/m_i`.
    pub fn equilibrium_concentrations(&self, t: f64) -> EquilibriumPair {
        EquilibriumPair {
            c_alpha: self.c_alpha_ref + (t - self.t_ref) / self.m_alpha,
            c_gamma: self.c_gamma_ref + (t - self.t_ref) / self.m_gamma,
        }
    }

    /// Equilibrium partition ratio `k = c_alpha_eq / c_gamma_eq`, required in (0, 1).
    pub fn partition_ratio(&self, t: f64) -> Result<f64> {
        let eq = self.equilibrium_concentrations(t);
        let degenerate =
            Error::DegenerateDiagram { temperature: t, c_alpha_eq: eq.c_alpha, c_gamma_eq: eq.c_gamma };
        if !(eq.c_gamma > 0.0) {
            return Err(degenerate);
        }
        let k = eq.c_alpha / eq.c_gamma;
        if !(k > 0.0 && k < 1.0) {
            return Err(degenerate);
        }
        Ok(k)
    }

    /// Chemical driving pressure (J/µm³) from local phase concentrations.
    ///
    /// Positive values favour ferrite growth.
    pub fn delta_g(&self, t: f64, c_alpha: f64, c_gamma: f64) -> f64 {
        self.delta_s
            * ((self.t_ref - t)
                + 0.5 * self.m_alpha * (c_alpha - self.c_alpha_ref)
                + 0.5 * self.m_gamma * (c_gamma - self.c_gamma_ref))
    }

    /// Driving pressure expressed through the mixture concentration `c` and
    /// the phase-field value `phi` (1 in ferrite, 0 in austenite).
    pub fn delta_g_total(&self, t: f64, c: f64, phi: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(invalid("phi", "phase-field value must lie in [0, 1]"));
        }
        let k = self.partition_ratio(t)?;
        self.delta_g_mixture(t, k, c, phi)
    }

    /// Same as [`delta_g_total`](Self::delta_g_total) with a precomputed ratio.
    pub fn delta_g_mixture(&self, t: f64, k: f64, c: f64, phi: f64) -> Result<f64> {
        let denom = 1.0 + phi * (k - 1.0);
        if !(denom > 0.0) {
            return Err(Error::NumericalDegeneracy("1 + phi(k - 1) is not positive"));
        }
        let c_gamma = c / denom;
        Ok(self.delta_g(t, k * c_gamma, c_gamma))
    }
}

/// Piecewise collection of reference states along a thermal path.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedPhaseDiagram {
    states: Vec<ReferenceState>,
}

impl LinearizedPhaseDiagram {
    /// Builds a diagram; validity intervals may share end points but must not
    /// overlap otherwise.
    pub fn new(mut states: Vec<ReferenceState>) -> Result<Self> {
        if states.is_empty() {
            return Err(invalid("reference_state", "at least one reference state is required"));
        }
        states.sort_by(|a, b| a.validity.lo.total_cmp(&b.validity.lo));
        for pair in states.windows(2) {
            if pair[1].validity.lo < pair[0].validity.hi {
                return Err(invalid("validity", "reference-state intervals overlap"));
            }
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> &[ReferenceState] {
        &self.states
    }

    /// Lowest and highest covered temperature.
    pub fn coverage(&self) -> TemperatureRange {
        TemperatureRange {
            lo: self.states[0].validity.lo,
            hi: self.states[self.states.len() - 1].validity.hi,
        }
    }

    /// Selects the reference state whose interval contains `t`.
    ///
    /// A temperature on a bound shared by two intervals picks the state whose
    /// interval starts there (the warmer one).
    pub fn select(&self, t: f64) -> Result<&ReferenceState> {
        self.states
            .iter()
            .rev()
            .find(|s| s.validity.contains(t))
            .ok_or_else(|| {
                let cov = self.coverage();
                Error::TemperatureOutOfRange { temperature: t, lo: cov.lo, hi: cov.hi }
            })
    }
}

/// `value = prefactor * exp(-activation_energy / (R T))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusLaw {
    pub prefactor: f64,
    /// J/mol.
    pub activation_energy: f64,
}

impl ArrheniusLaw {
    pub fn new(prefactor: f64, activation_energy: f64) -> Result<Self> {
        if !(prefactor > 0.0 && prefactor.is_finite()) {
            return Err(invalid("prefactor", "must be positive"));
        }
        if !(activation_energy >= 0.0 && activation_energy.is_finite()) {
            return Err(invalid("activation_energy", "must be non-negative"));
        }
        Ok(Self { prefactor, activation_energy })
    }

    /// A temperature-independent law.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * math::exp(-self.activation_energy / (GAS_CONSTANT * t))
    }
}

/// Mobility law (µm⁴·J⁻¹·s⁻¹) and interfacial energy (J/µm²) of one interface class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceClass {
    pub mobility: ArrheniusLaw,
    pub energy: f64,
}

/// Interface properties for the α/γ, α/α and γ/γ classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceProperties {
    pub alpha_gamma: InterfaceClass,
    pub alpha_alpha: InterfaceClass,
    pub gamma_gamma: InterfaceClass,
}

impl InterfaceProperties {
    pub fn new(
        alpha_gamma: InterfaceClass,
        alpha_alpha: InterfaceClass,
        gamma_gamma: InterfaceClass,
    ) -> Result<Self> {
        for class in [&alpha_gamma, &alpha_alpha, &gamma_gamma] {
            if !(class.energy >= 0.0 && class.energy.is_finite()) {
                return Err(invalid("interface_energy", "must be non-negative"));
            }
        }
        Ok(Self { alpha_gamma, alpha_alpha, gamma_gamma })
    }

    /// The same mobility law and energy on every class.
    pub fn homogeneous(mobility: ArrheniusLaw, energy: f64) -> Result<Self> {
        let c = InterfaceClass { mobility, energy };
        Self::new(c, c, c)
    }
}

/// Carbon diffusivities (µm²/s) in each phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusivities {
    pub alpha: ArrheniusLaw,
    pub gamma: ArrheniusLaw,
}

/// Everything the solvers need to know about the alloy.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub diagram: LinearizedPhaseDiagram,
    pub interfaces: InterfaceProperties,
    pub diffusivity: Diffusivities,
}

/// Prescribed temperature history.
#[derive(Debug, Clone, PartialEq)]
pub enum CoolingSchedule {
    /// Jump from `t_initial` to `t_final` right after `t = 0`.
    Instantaneous { t_initial: f64, t_final: f64 },
    /// Constant rate (K/s, signed) clamped at `t_final`.
    Linear { t_initial: f64, t_final: f64, rate: f64 },
    /// Linear interpolation between `(time, temperature)` knots, held constant
    /// outside the knot range.
    Piecewise(Vec<(f64, f64)>),
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            CoolingSchedule::Instantaneous { t_initial, t_final } => {
                if !(*t_initial > 0.0 && *t_final > 0.0) {
                    return Err(invalid("schedule", "temperatures must be positive"));
                }
            }
            CoolingSchedule::Linear { t_initial, t_final, rate } => {
                if !(*t_initial > 0.0 && *t_final > 0.0) {
                    return Err(invalid("schedule", "temperatures must be positive"));
                }
                if *rate == 0.0 || (t_final - t_initial) * rate < 0.0 {
                    return Err(invalid("rate", "sign must move t_initial toward t_final"));
                }
            }
            CoolingSchedule::Piecewise(knots) => {
                if knots.is_empty() {
                    return Err(invalid("schedule", "piecewise schedule needs knots"));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(invalid("schedule", "knot times must increase"));
                }
                if knots.iter().any(|k| !(k.1 > 0.0)) {
                    return Err(invalid("schedule", "temperatures must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn initial_temperature(&self) -> f64 {
        self.temperature_at(0.0)
    }

    pub fn final_temperature(&self) -> f64 {
        match self {
            CoolingSchedule::Instantaneous { t_final, .. } => *t_final,
            CoolingSchedule::Linear { t_final, .. } => *t_final,
            CoolingSchedule::Piecewise(knots) => knots[knots.len() - 1].1,
        }
    }

    pub fn temperature_at(&self, time: f64) -> f64 {
        match self {
            CoolingSchedule::Instantaneous { t_initial, t_final } => {
                if time > 0.0 {
                    *t_final
                } else {
                    *t_initial
                }
            }
            CoolingSchedule::Linear { t_initial, t_final, rate } => {
                let t = t_initial + rate * time;
                if *rate < 0.0 {
                    t.max(*t_final)
                } else {
                    t.min(*t_final)
                }
            }
            CoolingSchedule::Piecewise(knots) => {
                let first = knots[0];
                if time <= first.0 {
                    return first.1;
                }
                for w in knots.windows(2) {
                    let (t0, v0) = w[0];
                    let (t1, v1) = w[1];
                    if time <= t1 {
                        return v0 + (v1 - v0) * (time - t0) / (t1 - t0);
                    }
                }
                knots[knots.len() - 1].1
            }
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn select_reference_two_fold() {
        let d = two_fold();
        assert_eq!(d.select(1150.0).unwrap().t_ref, 1160.0);
        assert_eq!(d.select(1100.0).unwrap().t_ref, 1090.0);
        assert_eq!(d.select(1125.0).unwrap().t_ref, 1160.0);
        assert_eq!(d.select(1175.0).unwrap().t_ref, 1160.0);
        assert_eq!(d.select(1075.0).unwrap().t_ref, 1090.0);
        match d.select(1050.0) {
            Err(Error::TemperatureOutOfRange { temperature, lo, hi }) => {
                assert_eq!((temperature, lo, hi), (1050.0, 1075.0, 1175.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let mut b = state_1090();
        b.validity = TemperatureRange::new(1075.0, 1130.0).unwrap();
        assert!(LinearizedPhaseDiagram::new(alloc::vec![state_1160(), b]).is_err());
    }

    #[test]
    fn equilibrium_concentrations_table_values() {
        let s = state_1160();
        let eq = s.equilibrium_concentrations(1160.0);
        assert_eq!(eq.c_alpha, 0.0029083);
        assert_eq!(eq.c_gamma, 0.054289);
        let eq = s.equilibrium_concentrations(1140.0);
        assert!(rel(eq.c_alpha, 0.00519491220566156) < 1e-12);
        assert!(rel(eq.c_gamma, 0.10225534681107734) < 1e-12);
        // Linearization error against the tabulated equilibrium at 1140 K.
        assert!(rel(eq.c_alpha, 0.0051473) < 0.01);
        assert!(rel(eq.c_gamma, 0.10593) < 0.035);
    }

    #[test]
    fn partition_ratio_values() {
        let s = state_1160();
        assert!((s.partition_ratio(1160.0).unwrap() - 0.053570704931017336).abs() < 1e-12);
        assert!((s.partition_ratio(1140.0).unwrap() - 0.0508033307564783).abs() < 1e-12);
        assert_eq!(s.partition_ratio(1160.0).unwrap(), 0.0029083 / 0.054289);
    }

    #[test]
    fn partition_ratio_degenerate() {
        let s = state_1160();
        // c_gamma_eq vanishes at T_ref + m_gamma * c_gamma_ref ~ 1182.6 K.
        let t0 = 1160.0 - s.m_gamma * s.c_gamma_ref;
        assert!(matches!(s.partition_ratio(t0 + 1.0), Err(Error::DegenerateDiagram { .. })));
    }

    #[test]
    fn delta_g_values() {
        let s = state_1160();
        assert_eq!(s.delta_g(1160.0, s.c_alpha_ref, s.c_gamma_ref), 0.0);
        let dg = s.delta_g(1140.0, s.c_alpha_ref, s.c_gamma_ref);
        assert!(rel(dg, 5.696235e-12) < 1e-12);
        let eq = s.equilibrium_concentrations(1140.0);
        assert!(s.delta_g(1140.0, eq.c_alpha, eq.c_gamma).abs() < 1e-18);
    }

    #[test]
    fn delta_g_total_limits_and_value() {
        let s = state_1160();
        let k = s.partition_ratio(1140.0).unwrap();
        let c = 0.0229;
        let pure_gamma = s.delta_g_total(1140.0, c, 0.0).unwrap();
        assert!((pure_gamma - s.delta_g(1140.0, k * c, c)).abs() < 1e-27);
        let pure_alpha = s.delta_g_total(1140.0, c, 1.0).unwrap();
        assert!((pure_alpha - s.delta_g(1140.0, c, c / k)).abs() < 1e-25);
        // Independent recomputation of the mixture form in Python.
        let mid = s.delta_g_total(1140.0, c, 0.5).unwrap();
        assert!(rel(mid, 7.196190772665893e-12) < 1e-10);
        assert!(s.delta_g_total(1140.0, c, 1.5).is_err());
    }

    #[test]
    fn arrhenius_values() {
        let law = ArrheniusLaw::new(6e17, 140e3).unwrap();
        assert!(rel(law.eval(1140.0), 230938397423.09097) < 1e-12);
        let flat = ArrheniusLaw::constant(3.5).unwrap();
        assert_eq!(flat.eval(300.0), 3.5);
        assert_eq!(flat.eval(1500.0), 3.5);
        assert!(ArrheniusLaw::new(0.0, 1.0).is_err());
        assert!(ArrheniusLaw::new(1.0, -1.0).is_err());
    }

    #[test]
    fn schedules() {
        let quench = CoolingSchedule::Instantaneous { t_initial: 1173.0, t_final: 1140.0 };
        assert_eq!(quench.temperature_at(0.0), 1173.0);
        assert_eq!(quench.temperature_at(0.5), 1140.0);
        let lin = CoolingSchedule::Linear { t_initial: 1173.0, t_final: 1140.0, rate: -10.0 };
        assert_eq!(lin.temperature_at(1.0), 1163.0);
        let slow = CoolingSchedule::Linear { t_initial: 1175.0, t_final: 1075.0, rate: -1.0 };
        assert_eq!(slow.temperature_at(200.0), 1075.0);
        let pw = CoolingSchedule::Piecewise(alloc::vec![(0.0, 1175.0), (10.0, 1165.0), (20.0, 1165.0)]);
        assert_eq!(pw.temperature_at(5.0), 1170.0);
        assert_eq!(pw.temperature_at(50.0), 1165.0);
        assert!(CoolingSchedule::Linear { t_initial: 1173.0, t_final: 1140.0, rate: 3.0 }
            .validate()
            .is_err());
    }

    proptest! {
        #[test]
        fn delta_g_is_affine(t in 1125.0..1175.0f64, ca in 0.0..0.01f64, cg in 0.01..0.2f64) {
            let s = state_1160();
            let h = 1e-3;
            let d_t = (s.delta_g(t + h, ca, cg) - s.delta_g(t, ca, cg)) / h;
            prop_assert!(rel(d_t, -s.delta_s) < 1e-6);
            let hc = 1e-5;
            let d_ca = (s.delta_g(t, ca + hc, cg) - s.delta_g(t, ca, cg)) / hc;
            prop_assert!(rel(d_ca, 0.5 * s.delta_s * s.m_alpha) < 1e-6);
            let d_cg = (s.delta_g(t, ca, cg + hc) - s.delta_g(t, ca, cg)) / hc;
            prop_assert!(rel(d_cg, 0.5 * s.delta_s * s.m_gamma) < 1e-6);
        }

        #[test]
        fn equilibrium_pair_has_zero_pressure(frac in 0.0..=1.0f64, which in 0usize..2) {
            let s = if which == 0 { state_1160() } else { state_1090() };
            let t = s.validity.lo + frac * (s.validity.hi - s.validity.lo);
            let eq = s.equilibrium_concentrations(t);
            prop_assert!(s.delta_g(t, eq.c_alpha, eq.c_gamma).abs() < 1e-18);
            let k = s.partition_ratio(t).unwrap();
            prop_assert!(k > 0.0 && k < 1.0);
        }

        #[test]
        fn mixture_form_matches_partitioned_form(t in 1125.0..1175.0f64, c in 0.001..0.3f64, phi in 0.0..=1.0f64) {
            let s = state_1160();
            let k = s.partition_ratio(t).unwrap();
            let cg = c / (1.0 + phi * (k - 1.0));
            let a = s.delta_g_total(t, c, phi).unwrap();
            let b = s.delta_g(t, k * cg, cg);
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-15));
        }

        #[test]
        fn arrhenius_monotone(t1 in 300.0..1500.0f64, dt in 0.1..200.0f64) {
            let law = ArrheniusLaw::new(2e17, 140e3).unwrap();
            prop_assert!(law.eval(t1 + dt) > law.eval(t1));
        }
    }
}
