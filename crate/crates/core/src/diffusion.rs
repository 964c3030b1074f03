//! Carbon redistribution on the whole domain with a mixed diffusivity.
//!
//! The austenite-equivalent concentration `c_γ = C / (1 + φ(k−1))` is the
//! potential that is continuous across the diffuse interface, and the flux
//! is `J = −(D_γ + φ(kD_α − D_γ)) ∇c_γ`. Expanding the product gives the
//! convective-diffusive-reactive form `∇·(D*∇C) − ∇·(C A)` that
//! [`assemble_cdr`] reports; the solver discretizes the potential form
//! directly so that a concentration at partition equilibrium is an exact
//! discrete steady state.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::grid::{gradient, Grid, ScalarField, VectorField};
use crate::linalg::{solve, CsrBuilder, SolveReport, SolverSettings};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionCoefficients {
    /// µm²/s
    pub d_alpha: f64,
    /// µm²/s
    pub d_gamma: f64,
    pub k: f64,
}

impl DiffusionCoefficients {
    pub fn new(d_alpha: f64, d_gamma: f64, k: f64) -> Result<Self> {
        if !(d_alpha > 0.0 && d_alpha.is_finite()) {
            return Err(invalid("d_alpha", "must be positive"));
        }
        if !(d_gamma > 0.0 && d_gamma.is_finite()) {
            return Err(invalid("d_gamma", "must be positive"));
        }
        if !(k > 0.0 && k <= 1.0) {
            return Err(invalid("k", "must lie in (0, 1]"));
        }
        Ok(Self { d_alpha, d_gamma, k })
    }

    /// `1 + φ(k−1)`, the ratio `C / c_γ`.
    #[inline]
    pub fn partition_factor(&self, phi: f64) -> f64 {
        1.0 + phi * (self.k - 1.0)
    }

    /// `D_γ + φ(kD_α − D_γ)`, the conductance of the potential `c_γ`.
    #[inline]
    pub fn conductance(&self, phi: f64) -> f64 {
        self.d_gamma + phi * (self.k * self.d_alpha - self.d_gamma)
    }

    /// `D*(φ)`.
    #[inline]
    pub fn mixed_diffusivity(&self, phi: f64) -> f64 {
        self.conductance(phi) / self.partition_factor(phi)
    }
}

/// Coefficient fields of the convective-diffusive-reactive form.
#[derive(Debug, Clone, PartialEq)]
pub struct CdrFields {
    pub d_star: ScalarField,
    /// `A = D*(k−1)/(1+φ(k−1)) ∇φ`, µm/s.
    pub a_vec: VectorField,
    /// `R = ∇·A`, 1/s.
    pub r_scal: ScalarField,
}

pub fn assemble_cdr(phase_field: &ScalarField, coeffs: &DiffusionCoefficients) -> CdrFields {
    let grid = *phase_field.grid();
    let d_star = phase_field.map(|p| coeffs.mixed_diffusivity(p));
    let grad = gradient(phase_field);
    let a: Vec<[f64; 2]> = phase_field
        .values()
        .iter()
        .zip(grad.values())
        .map(|(&p, g)| {
            let s = coeffs.mixed_diffusivity(p) * (coeffs.k - 1.0) / coeffs.partition_factor(p);
            [s * g[0], s * g[1]]
        })
        .collect();
    let component = |k: usize| ScalarField::new(grid, a.iter().map(|v| v[k]).collect()).expect("finite");
    let dx = gradient(&component(0));
    let dy = gradient(&component(1));
    let r: Vec<f64> = dx.values().iter().zip(dy.values()).map(|(u, v)| u[0] + v[1]).collect();
    CdrFields {
        d_star,
        a_vec: VectorField::new(grid, a).expect("finite"),
        r_scal: ScalarField::new(grid, r).expect("finite"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationStep {
    pub concentration: ScalarField,
    pub solve: SolveReport,
    /// `dt · max|A| / h`; the scheme is implicit, so values above 1 only
    /// warn that positivity is no longer guaranteed for the advective part.
    pub advective_cfl: f64,
}

/// Face transmissibilities between node `p` and its `+x` / `+y` neighbour:
/// `area / distance`. Boundary rows carry half areas.
fn faces(grid: &Grid) -> Vec<(usize, usize, f64)> {
    let [hx, hy] = grid.spacing();
    let mut out = Vec::with_capacity(2 * grid.len());
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let p = grid.index(i, j);
            if i + 1 < grid.nx() {
                let area = if grid.dims() == 1 {
                    1.0
                } else if j == 0 || j + 1 == grid.ny() {
                    0.5 * hy
                } else {
                    hy
                };
                out.push((p, p + 1, area / hx));
            }
            if grid.dims() == 2 && j + 1 < grid.ny() {
                let area = if i == 0 || i + 1 == grid.nx() { 0.5 * hx } else { hx };
                out.push((p, p + grid.nx(), area / hy));
            }
        }
    }
    out
}

/// One backward-Euler step with zero-flux boundaries.
pub fn step_concentration(
    c: &ScalarField,
    phase_field: &ScalarField,
    coeffs: &DiffusionCoefficients,
    dt: f64,
    settings: &SolverSettings,
) -> Result<ConcentrationStep> {
    let grid = *c.grid();
    if *phase_field.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    let n = grid.len();
    let phi = phase_field.values();
    let g: Vec<f64> = phi.iter().map(|p| coeffs.partition_factor(*p)).collect();
    let cond: Vec<f64> = phi.iter().map(|p| coeffs.conductance(*p)).collect();

    // neighbour lists with transmissibility, built once per call
    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(4); n];
    for (p, q, t) in faces(&grid) {
        let w = t * 0.5 * (cond[p] + cond[q]);
        nbrs[p].push((q, w));
        nbrs[q].push((p, w));
    }
    let mut b = CsrBuilder::new(n, 5 * n);
    let mut rhs = vec![0.0; n];
    for p in 0..n {
        let v = grid.node_weight(p) / dt;
        let mut diag = v;
        for &(q, w) in &nbrs[p] {
            diag += w / g[p];
            b.add(q, -w / g[q]);
        }
        b.add(p, diag);
        b.finish_row();
        rhs[p] = v * c.values()[p];
    }
    let a = b.build();
    let mut x = c.values().to_vec();
    let report = solve(&a, &rhs, &mut x, settings)?;

    let cdr_a_max = advective_speed_max(phase_field, coeffs);
    Ok(ConcentrationStep {
        concentration: ScalarField::new(grid, x)?,
        solve: report,
        advective_cfl: dt * cdr_a_max / grid.h_min(),
    })
}

fn advective_speed_max(phase_field: &ScalarField, coeffs: &DiffusionCoefficients) -> f64 {
    let grad = gradient(phase_field);
    phase_field
        .values()
        .iter()
        .zip(grad.values())
        .map(|(&p, d)| {
            let s = coeffs.mixed_diffusivity(p) * (1.0 - coeffs.k) / coeffs.partition_factor(p);
            s * crate::math::hypot(d[0], d[1])
        })
        .fold(0.0, f64::max)
}

/// Total solute and relative drift against the amount at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassAudit {
    pub initial: f64,
}

impl MassAudit {
    pub fn new(c: &ScalarField) -> Self {
        Self { initial: c.integrate() }
    }

    pub fn total(&self, c: &ScalarField) -> f64 {
        c.integrate()
    }

    pub fn drift(&self, c: &ScalarField) -> f64 {
        (c.integrate() - self.initial) / self.initial
    }
}
