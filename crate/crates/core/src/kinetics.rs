//! Interface velocities and level-set transport.
//!
//! Each node looks only at its owning grain `i` and one partner field `j`
//! (the nearest opposite-phase field for the ΔG term, the second-largest
//! field for the stored-energy term). The velocity points along `∇φ_j`, so
//! on both sides of an interface it has the same geometric direction.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::grid::{gradient_at, laplacian_at, ScalarField, VectorField};
use crate::levelset::{DerivedFields, LevelSetEnsemble, Phase, NO_TAG};
use crate::linalg::{solve_preconditioned, CsrBuilder, Ilu0, SolverSettings};
use crate::math;
use crate::thermo::{InterfaceProperties, ReferenceState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StoredEnergyInput {
    /// Stored energy per grain, J/µm³.
    pub per_grain: Vec<f64>,
    /// Replaces the per-grain lookup on the owning side when present.
    pub nodal_override: Option<ScalarField>,
}

impl StoredEnergyInput {
    pub fn new(per_grain: Vec<f64>, nodal_override: Option<ScalarField>) -> Result<Self> {
        if per_grain.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(invalid("stored_energy", "values must be finite and non-negative"));
        }
        if let Some(f) = &nodal_override {
            if f.values().iter().any(|e| *e < 0.0) {
                return Err(invalid("stored_energy", "nodal values must be non-negative"));
            }
        }
        Ok(Self { per_grain, nodal_override })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityAssembly {
    pub v_dg: VectorField,
    pub v_e: VectorField,
    /// `Σ_l χ_l μ_l σ_l`, µm²/s.
    pub diffusive_coeff: ScalarField,
    pub beta: f64,
}

impl VelocityAssembly {
    /// `v_ΔG + v_E`.
    pub fn total_velocity(&self) -> VectorField {
        self.v_dg.add(&self.v_e).expect("same grid")
    }
}

/// Default smoothing exponent `β = 3/η`.
pub fn default_beta(eta: f64) -> f64 {
    3.0 / eta
}

/// Nodal driving force `ΔG(T, C, φ_pf)` with the local partition ratio.
pub fn delta_g_field(
    state: &ReferenceState,
    temperature: f64,
    concentration: &ScalarField,
    phase_field: &ScalarField,
) -> Result<ScalarField> {
    if concentration.grid() != phase_field.grid() {
        return Err(Error::GridMismatch);
    }
    let k = state.partition_ratio(temperature)?;
    let values = concentration
        .values()
        .iter()
        .zip(phase_field.values())
        .map(|(c, p)| state.delta_g_mixture(temperature, k, *c, p.clamp(0.0, 1.0)))
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::new(*concentration.grid(), values)
}

/// Mobility of the interface class present at each node; the phase
/// interface takes precedence where bands overlap. Zero in grain bulk.
pub fn mobility_field(derived: &DerivedFields, props: &InterfaceProperties, temperature: f64) -> ScalarField {
    class_field(derived, [
        props.alpha_gamma.mobility.eval(temperature),
        props.alpha_alpha.mobility.eval(temperature),
        props.gamma_gamma.mobility.eval(temperature),
    ])
}

/// `Σ_l χ_l μ_l σ_l`.
pub fn diffusive_coefficient(derived: &DerivedFields, props: &InterfaceProperties, temperature: f64) -> ScalarField {
    class_field(derived, [
        props.alpha_gamma.mobility.eval(temperature) * props.alpha_gamma.energy,
        props.alpha_alpha.mobility.eval(temperature) * props.alpha_alpha.energy,
        props.gamma_gamma.mobility.eval(temperature) * props.gamma_gamma.energy,
    ])
}

fn class_field(d: &DerivedFields, per_class: [f64; 3]) -> ScalarField {
    let values = (0..d.chi_ag.values().len())
        .map(|p| {
            d.chi_ag.values()[p] * per_class[0]
                + d.chi_aa.values()[p] * per_class[1]
                + d.chi_gg.values()[p] * per_class[2]
        })
        .collect();
    ScalarField::new(*d.chi_ag.grid(), values).expect("finite")
}

/// Unit vector along `∇φ` at `p`, or `None` where the gradient vanishes.
fn gradient_direction(f: &ScalarField, p: usize) -> Option<[f64; 2]> {
    let d = gradient_at(f.grid(), f.values(), p);
    let n = math::hypot(d[0], d[1]);
    (n >= crate::grid::NORMAL_DEGENERACY).then(|| [d[0] / n, d[1] / n])
}

fn owner_color(ens: &LevelSetEnsemble, label: u32) -> Option<usize> {
    ens.grains().get(label as usize).map(|g| g.color)
}

/// ΔG-driven velocity: `μ exp(−β|φ_j|) χ_αγ ΔG F_s ∇φ_j/|∇φ_j|` with
/// `F_s = 2χ_α − 1`, where `j` is the largest field at the node whose
/// nearest grain has the other phase.
pub fn assemble_v_dg(
    ens: &LevelSetEnsemble,
    derived: &DerivedFields,
    dg: &ScalarField,
    mobility: &ScalarField,
    beta: f64,
) -> Result<VectorField> {
    let grid = *ens.grid();
    if *dg.grid() != grid || *mobility.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let mut out = vec![[0.0; 2]; grid.len()];
    for (p, v) in out.iter_mut().enumerate() {
        let chi = derived.chi_ag.values()[p];
        let drive = dg.values()[p];
        if chi == 0.0 || drive == 0.0 {
            continue;
        }
        let label = derived.labels[p];
        let Some(own) = ens.phase_of(label) else { continue };
        let own_color = owner_color(ens, label);
        let mut partner: Option<(usize, f64)> = None;
        for (c, (f, t)) in ens.fields().iter().zip(ens.tags()).enumerate() {
            if Some(c) == own_color || t[p] == NO_TAG {
                continue;
            }
            if ens.phase_of(t[p]) == Some(own) {
                continue;
            }
            let val = f.values()[p];
            if partner.is_none_or(|(_, best)| val > best) {
                partner = Some((c, val));
            }
        }
        let Some((j, phi_j)) = partner else { continue };
        let Some(dir) = gradient_direction(&ens.fields()[j], p) else { continue };
        let sense = if own == Phase::Alpha { 1.0 } else { -1.0 };
        let s = mobility.values()[p] * math::exp(-beta * phi_j.abs()) * chi * drive * sense;
        *v = [s * dir[0], s * dir[1]];
    }
    VectorField::new(grid, out)
}

/// Stored-energy velocity: `μ exp(−β|φ_j|) (𝓔_j − 𝓔_i) ∇φ_j/|∇φ_j|` with
/// `j` the second-largest field.
pub fn assemble_v_e(
    ens: &LevelSetEnsemble,
    derived: &DerivedFields,
    energies: &StoredEnergyInput,
    mobility: &ScalarField,
    beta: f64,
) -> Result<VectorField> {
    let grid = *ens.grid();
    if energies.per_grain.len() != ens.grains().len() {
        return Err(invalid("stored_energy", "need one value per grain"));
    }
    let energy = |g: u32| energies.per_grain[g as usize];
    let mut out = vec![[0.0; 2]; grid.len()];
    for (p, v) in out.iter_mut().enumerate() {
        let label = derived.labels[p];
        if label == NO_TAG {
            continue;
        }
        let own_color = owner_color(ens, label);
        let mut partner: Option<(usize, f64)> = None;
        for (c, (f, t)) in ens.fields().iter().zip(ens.tags()).enumerate() {
            if Some(c) == own_color || t[p] == NO_TAG {
                continue;
            }
            let val = f.values()[p];
            if partner.is_none_or(|(_, best)| val > best) {
                partner = Some((c, val));
            }
        }
        let Some((j, phi_j)) = partner else { continue };
        let e_i = match &energies.nodal_override {
            Some(f) => f.values()[p],
            None => energy(label),
        };
        let jump = energy(ens.tags()[j][p]) - e_i;
        if jump == 0.0 {
            continue;
        }
        let Some(dir) = gradient_direction(&ens.fields()[j], p) else { continue };
        let s = mobility.values()[p] * math::exp(-beta * phi_j.abs()) * jump;
        *v = [s * dir[0], s * dir[1]];
    }
    VectorField::new(grid, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportOutcome {
    pub derived: DerivedFields,
    /// Krylov iterations summed over all fields.
    pub iterations: usize,
    /// Grains moved to another color during maintenance.
    pub recolored: usize,
}

/// One backward-Euler step of `∂φ/∂t + v·∇φ − D Δφ = 0` for every field
/// (first-order upwind convection, mirrored ghosts for the Laplacian),
/// followed by junction repair, reinitialization, re-coloration and a
/// refresh of the derived fields.
pub fn transport_step(
    ens: &mut LevelSetEnsemble,
    assembly: &VelocityAssembly,
    dt: f64,
    settings: &SolverSettings,
) -> Result<TransportOutcome> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    let grid = *ens.grid();
    let vel = assembly.total_velocity();
    let diff = assembly.diffusive_coeff.values();
    if diff.iter().any(|d| *d < 0.0) {
        return Err(invalid("diffusive_coeff", "must be non-negative"));
    }
    let [hx, hy] = grid.spacing();
    let n = grid.len();
    let mut b = CsrBuilder::new(n, 5 * n);
    let mut active = false;
    for p in 0..n {
        let (i, j) = grid.ij(p);
        let v = vel.values()[p];
        let d = diff[p];
        let mut diag = 1.0 / dt;
        let mut axis = |vc: f64, h: f64, lo: Option<usize>, hi: Option<usize>, b: &mut CsrBuilder| {
            // upwind convection; an outflow boundary with no upwind node contributes nothing
            if vc > 0.0 {
                if let Some(q) = lo {
                    diag += vc / h;
                    b.add(q, -vc / h);
                }
            } else if vc < 0.0 {
                if let Some(q) = hi {
                    diag -= vc / h;
                    b.add(q, vc / h);
                }
            }
            if d > 0.0 {
                // mirrored ghost: the missing side reuses the interior neighbour
                let (ql, qr) = match (lo, hi) {
                    (Some(l), Some(r)) => (l, r),
                    (None, Some(r)) => (r, r),
                    (Some(l), None) => (l, l),
                    (None, None) => return,
                };
                diag += 2.0 * d / (h * h);
                b.add(ql, -d / (h * h));
                b.add(qr, -d / (h * h));
            }
        };
        let left = (i > 0).then(|| p - 1);
        let right = (i + 1 < grid.nx()).then(|| p + 1);
        axis(v[0], hx, left, right, &mut b);
        if grid.dims() == 2 {
            let down = (j > 0).then(|| p - grid.nx());
            let up = (j + 1 < grid.ny()).then(|| p + grid.nx());
            axis(v[1], hy, down, up, &mut b);
        }
        if diag != 1.0 / dt {
            active = true;
        }
        b.add(p, diag);
        b.finish_row();
    }
    let mut iterations = 0;
    if active {
        let a = b.build();
        let pre = Ilu0::new(&a)?;
        for f in ens.fields_mut() {
            let rhs: Vec<f64> = f.values().iter().map(|v| v / dt).collect();
            let mut x = f.values().to_vec();
            iterations += solve_preconditioned(&a, &pre, &rhs, &mut x, settings)?.iterations;
            f.values_mut().copy_from_slice(&x);
        }
    }
    let recolored = ens.maintain()?;
    let derived = ens.derive()?;
    Ok(TransportOutcome { derived, iterations, recolored })
}

/// Curvature estimate `κ = −Δφ` at a node, valid on reinitialized fields.
pub fn curvature_at(phi: &ScalarField, p: usize) -> f64 {
    -laplacian_at(phi.grid(), phi.values(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::levelset::{positive_measure, zero_crossings_1d, GrainRecord};
    use crate::thermo::{ArrheniusLaw, InterfaceClass};

    const EPS: f64 = 0.4;

    /// α on `[0, x0)`, γ beyond; one field per grain.
    fn planar(x0: f64, alpha_left: bool) -> LevelSetEnsemble {
        let g = Grid::line(241, 6.0).unwrap();
        let f0 = ScalarField::from_fn(g, |x| (x0 - x[0]).clamp(-EPS, EPS));
        let f1 = f0.map(|v| -v);
        let (p0, p1) = if alpha_left { (Phase::Alpha, Phase::Gamma) } else { (Phase::Gamma, Phase::Gamma) };
        let grains = vec![GrainRecord { id: 0, phase: p0, color: 0 }, GrainRecord { id: 1, phase: p1, color: 1 }];
        let mut e =
            LevelSetEnsemble::new(g, grains, vec![f0, f1], vec![vec![0; g.len()], vec![1; g.len()]], EPS, EPS / 2.0)
                .unwrap();
        e.maintain().unwrap();
        e
    }

    fn props(mu: f64, sigma: f64) -> InterfaceProperties {
        InterfaceProperties::homogeneous(ArrheniusLaw::constant(mu).unwrap(), sigma).unwrap()
    }

    #[test]
    fn zero_drive_gives_zero_velocity() {
        let e = planar(1.2, true);
        let d = e.derive().unwrap();
        let mob = mobility_field(&d, &props(1.0, 0.0), 1000.0);
        let zero = ScalarField::constant(*e.grid(), 0.0);
        let v = assemble_v_dg(&e, &d, &zero, &mob, default_beta(e.eta())).unwrap();
        assert_eq!(v.max_norm(), 0.0);
    }

    #[test]
    fn ferrite_grows_into_austenite_from_both_sides() {
        let x0 = 1.2;
        let e = planar(x0, true);
        let d = e.derive().unwrap();
        let mob = mobility_field(&d, &props(1.0, 0.0), 1000.0);
        let dg = ScalarField::constant(*e.grid(), 1.0);
        let v = assemble_v_dg(&e, &d, &dg, &mob, default_beta(e.eta())).unwrap();
        let g = e.grid();
        let left = g.nearest_node([x0 - 0.01, 0.0]) - 1;
        let right = left + 1;
        assert!(g.coords(left)[0] < x0 && g.coords(right)[0] > x0);
        assert!(v.values()[left][0] > 0.0 && v.values()[right][0] > 0.0);
        // no velocity on a γ/γ interface
        let gg = planar(x0, false);
        let dgg = gg.derive().unwrap();
        let v2 = assemble_v_dg(&gg, &dgg, &dg, &mobility_field(&dgg, &props(1.0, 0.0), 1000.0), 1.0).unwrap();
        assert_eq!(v2.max_norm(), 0.0);
    }

    #[test]
    fn velocity_decays_away_from_interface() {
        let x0 = 3.0;
        let e = planar(x0, true);
        let d = e.derive().unwrap();
        let beta = default_beta(e.eta());
        let mob = mobility_field(&d, &props(1.0, 0.0), 1000.0);
        let v = assemble_v_dg(&e, &d, &ScalarField::constant(*e.grid(), 1.0), &mob, beta).unwrap();
        let peak = v.max_norm();
        for p in 0..e.grid().len() {
            let dist = (e.grid().coords(p)[0] - x0).abs();
            if dist > 3.0 / beta {
                assert!(v.values()[p][0].abs() < 0.05 * peak);
            }
        }
    }

    #[test]
    fn stored_energy_consumes_the_richer_grain() {
        let x0 = 3.0;
        let e = planar(x0, false);
        let d = e.derive().unwrap();
        let mob = mobility_field(&d, &props(1.0, 0.0), 1000.0);
        let beta = default_beta(e.eta());
        let equal = StoredEnergyInput::new(vec![2e-12, 2e-12], None).unwrap();
        assert_eq!(assemble_v_e(&e, &d, &equal, &mob, beta).unwrap().max_norm(), 0.0);
        // grain 0 (left) carries the energy: the boundary moves left on both sides
        let rich = StoredEnergyInput::new(vec![1e-12, 0.0], None).unwrap();
        let v = assemble_v_e(&e, &d, &rich, &mob, beta).unwrap();
        let left = e.grid().nearest_node([x0 - 0.02, 0.0]);
        let right = e.grid().nearest_node([x0 + 0.02, 0.0]);
        assert!(v.values()[left][0] < 0.0 && v.values()[right][0] < 0.0);
        assert!(StoredEnergyInput::new(vec![-1.0], None).is_err());
    }

    fn assembly_of(e: &LevelSetEnsemble, v: VectorField, diff: ScalarField) -> VelocityAssembly {
        VelocityAssembly { v_dg: v, v_e: VectorField::zeros(*e.grid()), diffusive_coeff: diff, beta: 1.0 }
    }

    #[test]
    fn still_fields_stay_still() {
        let mut e = planar(2.0, true);
        let before = e.clone();
        let g = *e.grid();
        let a = assembly_of(&e, VectorField::zeros(g), ScalarField::constant(g, 0.0));
        transport_step(&mut e, &a, 0.1, &SolverSettings::default()).unwrap();
        for (x, y) in e.fields().iter().zip(before.fields()) {
            for (u, v) in x.values().iter().zip(y.values()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planar_advection_at_prescribed_speed() {
        let mut e = planar(2.0, true);
        let g = *e.grid();
        let h = g.spacing()[0];
        let (speed, dt) = (0.5, 0.02);
        let a = assembly_of(&e, VectorField::new(g, vec![[speed, 0.0]; g.len()]).unwrap(), ScalarField::constant(g, 0.0));
        let mut x = zero_crossings_1d(&e.fields()[0])[0];
        for _ in 0..20 {
            transport_step(&mut e, &a, dt, &SolverSettings::default()).unwrap();
            let nx = zero_crossings_1d(&e.fields()[0])[0];
            assert!((nx - x - speed * dt).abs() < h / 10.0, "moved {}", nx - x);
            x = nx;
        }
    }

    #[test]
    fn shrinking_disk_follows_curvature_law() {
        let r0 = 5.0;
        let h = 0.25;
        let g = Grid::new_2d(65, 65, [h, h], [-8.0, -8.0]).unwrap();
        let eps = 8.0 * h;
        let f0 = ScalarField::from_fn(g, |x| (r0 - math::hypot(x[0], x[1])).clamp(-eps, eps));
        let f1 = f0.map(|v| -v);
        let grains = vec![
            GrainRecord { id: 0, phase: Phase::Gamma, color: 0 },
            GrainRecord { id: 1, phase: Phase::Gamma, color: 1 },
        ];
        let mut e =
            LevelSetEnsemble::new(g, grains, vec![f0, f1], vec![vec![0; g.len()], vec![1; g.len()]], eps, eps / 2.0)
                .unwrap();
        e.maintain().unwrap();
        let mu_sigma = 1.0;
        let pr = props(mu_sigma, 1.0);
        let dt = 0.05;
        let mut t = 0.0;
        loop {
            let d = e.derive().unwrap();
            let a = assembly_of(&e, VectorField::zeros(g), diffusive_coefficient(&d, &pr, 1000.0));
            let len_before = crate::levelset::contour_length(&e.fields()[0]);
            transport_step(&mut e, &a, dt, &SolverSettings::default()).unwrap();
            t += dt;
            let len_after = crate::levelset::contour_length(&e.fields()[0]);
            assert!(len_after <= len_before * 1.005);
            let r2 = r0 * r0 - 2.0 * mu_sigma * t;
            if r2 < (r0 / 2.0) * (r0 / 2.0) {
                break;
            }
            let r = math::sqrt(positive_measure(&e.fields()[0]) / core::f64::consts::PI);
            let exact = math::sqrt(r2);
            assert!((r - exact).abs() / exact < 0.02, "t {t}: r {r} vs {exact}");
        }
    }

    #[test]
    fn class_fields_follow_characteristics() {
        let e = planar(2.0, true);
        let d = e.derive().unwrap();
        let mut pr = props(2.0, 3.0);
        pr.gamma_gamma = InterfaceClass { mobility: ArrheniusLaw::constant(7.0).unwrap(), energy: 1.0 };
        let dc = diffusive_coefficient(&d, &pr, 900.0);
        assert!(dc.values().iter().all(|v| *v == 0.0 || *v == 6.0));
        assert!(dc.values().iter().any(|v| *v == 6.0));
    }
}
