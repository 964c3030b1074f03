//! Uniform Cartesian grids in one or two dimensions and the nodal fields
//! living on them.
//!
//! Boundaries are closed with homogeneous Neumann conditions: ghost nodes
//! mirror their interior neighbour.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::math;
use crate::{Error, Result};

/// Node layout of a 1D (`ny == 1`) or 2D grid. Node `(i, j)` sits at
/// `origin + (i * hx, j * hy)` and is stored at `j * nx + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    spacing: [f64; 2],
    origin: [f64; 2],
}

impl Grid {
    pub fn new_1d(nx: usize, h: f64, origin: f64) -> Result<Self> {
        Self::build(nx, 1, [h, h], [origin, 0.0])
    }

    pub fn new_2d(nx: usize, ny: usize, spacing: [f64; 2], origin: [f64; 2]) -> Result<Self> {
        if ny < 3 {
            return Err(invalid("ny", "a 2D grid needs at least 3 nodes per axis"));
        }
        Self::build(nx, ny, spacing, origin)
    }

    /// 1D grid with `nx` nodes spanning `[0, length]`.
    pub fn line(nx: usize, length: f64) -> Result<Self> {
        if nx < 3 {
            return Err(invalid("nx", "need at least 3 nodes per axis"));
        }
        Self::new_1d(nx, length / (nx - 1) as f64, 0.0)
    }

    /// Square 2D grid with `n × n` nodes spanning `[0, side]²`.
    pub fn square(n: usize, side: f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid("nx", "need at least 3 nodes per axis"));
        }
        let h = side / (n - 1) as f64;
        Self::new_2d(n, n, [h, h], [0.0, 0.0])
    }

    fn build(nx: usize, ny: usize, spacing: [f64; 2], origin: [f64; 2]) -> Result<Self> {
        if nx < 3 {
            return Err(invalid("nx", "need at least 3 nodes per axis"));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0 && spacing[0].is_finite() && spacing[1].is_finite()) {
            return Err(invalid("spacing", "grid spacing must be positive"));
        }
        Ok(Self { nx, ny, spacing, origin })
    }

    pub fn dims(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// The smallest active spacing.
    pub fn h_min(&self) -> f64 {
        if self.dims() == 1 {
            self.spacing[0]
        } else {
            self.spacing[0].min(self.spacing[1])
        }
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Physical extent along each axis (zero for the inactive y axis in 1D).
    pub fn extent(&self) -> [f64; 2] {
        [
            (self.nx - 1) as f64 * self.spacing[0],
            (self.ny.max(1) - 1) as f64 * self.spacing[1],
        ]
    }

    /// Domain measure: length in 1D, area in 2D.
    pub fn measure(&self) -> f64 {
        let e = self.extent();
        if self.dims() == 1 {
            e[0]
        } else {
            e[0] * e[1]
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, p: usize) -> (usize, usize) {
        (p % self.nx, p / self.nx)
    }

    #[inline]
    pub fn coords(&self, p: usize) -> [f64; 2] {
        let (i, j) = self.ij(p);
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
        ]
    }

    /// Trapezoid-rule weight of a node (its control-volume measure).
    #[inline]
    pub fn node_weight(&self, p: usize) -> f64 {
        let (i, j) = self.ij(p);
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 } * self.spacing[0];
        if self.dims() == 1 {
            return wx;
        }
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 } * self.spacing[1];
        wx * wy
    }

    /// Index of the neighbour in direction `dir` (0: -x, 1: +x, 2: -y, 3: +y)
    /// with mirror reflection at the boundary.
    #[inline]
    pub fn mirrored_neighbor(&self, p: usize, dir: usize) -> usize {
        let (i, j) = self.ij(p);
        match dir {
            0 => self.index(if i == 0 { 1 } else { i - 1 }, j),
            1 => self.index(if i + 1 == self.nx { self.nx - 2 } else { i + 1 }, j),
            2 => self.index(i, if j == 0 { 1 } else { j - 1 }),
            _ => self.index(i, if j + 1 == self.ny { self.ny - 2 } else { j + 1 }),
        }
    }

    /// Nearest node to a physical point, clamped into the grid.
    pub fn nearest_node(&self, x: [f64; 2]) -> usize {
        let fi = math::floor((x[0] - self.origin[0]) / self.spacing[0] + 0.5);
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = if self.dims() == 1 {
            0
        } else {
            let fj = math::floor((x[1] - self.origin[1]) / self.spacing[1] + 0.5);
            (fj.max(0.0) as usize).min(self.ny - 1)
        };
        self.index(i, j)
    }
}

/// One scalar value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("values", "value count must equal node count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(grid.coords(p))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid-rule integral over the domain.
    pub fn integrate(&self) -> f64 {
        self.values.iter().enumerate().map(|(p, v)| v * self.grid.node_weight(p)).sum()
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }
}

/// One 2-vector per node; the y component is zero on 1D grids.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![[0.0; 2]; grid.len()] }
    }

    pub fn new(grid: Grid, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("values", "value count must equal node count"));
        }
        if values.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(invalid("values", "vector components must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }

    pub fn norm(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| math::hypot(v[0], v[1])).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| math::hypot(v[0], v[1])).fold(0.0, f64::max)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &VectorField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values =
            self.values.iter().zip(&other.values).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect();
        Ok(Self { grid: self.grid, values })
    }
}

/// Derivative along one axis at node index `n` of a line of `len` values with
/// stride `stride`: central in the interior, one-sided second order at the ends.
#[inline]
fn axis_derivative(v: &[f64], p: usize, n: usize, len: usize, stride: usize, h: f64) -> f64 {
    if n == 0 {
        (-3.0 * v[p] + 4.0 * v[p + stride] - v[p + 2 * stride]) / (2.0 * h)
    } else if n + 1 == len {
        (3.0 * v[p] - 4.0 * v[p - stride] + v[p - 2 * stride]) / (2.0 * h)
    } else {
        (v[p + stride] - v[p - stride]) / (2.0 * h)
    }
}

/// Gradient of raw nodal values at node `p`.
#[inline]
pub fn gradient_at(grid: &Grid, v: &[f64], p: usize) -> [f64; 2] {
    let (i, j) = grid.ij(p);
    let gx = axis_derivative(v, p, i, grid.nx, 1, grid.spacing[0]);
    let gy = if grid.dims() == 2 {
        axis_derivative(v, p, j, grid.ny, grid.nx, grid.spacing[1])
    } else {
        0.0
    };
    [gx, gy]
}

/// Second-order finite-difference gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    VectorField { grid: g, values: (0..g.len()).map(|p| gradient_at(&g, &f.values, p)).collect() }
}

/// Laplacian of raw nodal values at node `p` (3/5-point stencil, mirrored ghosts).
#[inline]
pub fn laplacian_at(grid: &Grid, v: &[f64], p: usize) -> f64 {
    let [hx, hy] = grid.spacing;
    let c = v[p];
    let mut lap = (v[grid.mirrored_neighbor(p, 0)] - 2.0 * c + v[grid.mirrored_neighbor(p, 1)]) / (hx * hx);
    if grid.dims() == 2 {
        lap += (v[grid.mirrored_neighbor(p, 2)] - 2.0 * c + v[grid.mirrored_neighbor(p, 3)]) / (hy * hy);
    }
    lap
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    ScalarField { grid: g, values: (0..g.len()).map(|p| laplacian_at(&g, &f.values, p)).collect() }
}

/// Gradient norms below this are treated as degenerate by [`unit_normal`].
pub const NORMAL_DEGENERACY: f64 = 1e-10;

/// Outward normal `n = -∇φ/|∇φ|` of the region where `phi > 0`.
///
/// Nodes where the gradient vanishes get a zero vector and are flagged in the
/// returned mask.
pub fn unit_normal(phi: &ScalarField) -> (VectorField, Vec<bool>) {
    let g = phi.grid;
    let mut flags = vec![false; g.len()];
    let values = (0..g.len())
        .map(|p| {
            let d = gradient_at(&g, &phi.values, p);
            let n = math::hypot(d[0], d[1]);
            if n < NORMAL_DEGENERACY {
                flags[p] = true;
                [0.0, 0.0]
            } else {
                [-d[0] / n, -d[1] / n]
            }
        })
        .collect();
    (VectorField { grid: g, values }, flags)
}

/// Godunov upwind approximation of `|∇φ|` at node `p`.
///
/// Unlike central differences this stays close to 1 on the kinks (medial
/// axes) that every exact distance function has.
pub fn godunov_gradient_norm_at(grid: &Grid, v: &[f64], p: usize) -> f64 {
    let c = v[p];
    let s = if c > 0.0 { 1.0 } else if c < 0.0 { -1.0 } else { 0.0 };
    let axis = |minus: usize, plus: usize, h: f64| -> f64 {
        let a = (c - v[minus]) / h; // backward
        let b = (v[plus] - c) / h; // forward
        if s >= 0.0 {
            let ap = a.max(0.0);
            let bm = b.min(0.0);
            (ap * ap).max(bm * bm)
        } else {
            let am = a.min(0.0);
            let bp = b.max(0.0);
            (am * am).max(bp * bp)
        }
    };
    let (i, j) = grid.ij(p);
    // One-sided at the boundary: drop the missing side.
    let x = if i == 0 {
        let b = (v[p + 1] - c) / grid.spacing[0];
        b * b
    } else if i + 1 == grid.nx {
        let a = (c - v[p - 1]) / grid.spacing[0];
        a * a
    } else {
        axis(p - 1, p + 1, grid.spacing[0])
    };
    let y = if grid.dims() == 1 {
        0.0
    } else if j == 0 {
        let b = (v[p + grid.nx] - c) / grid.spacing[1];
        b * b
    } else if j + 1 == grid.ny {
        let a = (c - v[p - grid.nx]) / grid.spacing[1];
        a * a
    } else {
        axis(p - grid.nx, p + grid.nx, grid.spacing[1])
    };
    math::sqrt(x + y)
}

/// `|∇φ|` from the one-sided quadrant stencil (forward or backward on each
/// axis) whose value is closest to 1, at an interior node.
///
/// A kink line through or near `p` always leaves one quadrant on a single
/// smooth piece, so a distance function reads 1 there whatever the kink's
/// orientation. A field with the wrong slope reads wrong in every quadrant.
pub fn quadrant_gradient_norm_at(grid: &Grid, v: &[f64], p: usize) -> f64 {
    let c = v[p];
    let [hx, hy] = grid.spacing;
    let xs = [(c - v[p - 1]) / hx, (v[p + 1] - c) / hx];
    if grid.dims() == 1 {
        let (a, b) = (xs[0].abs(), xs[1].abs());
        return if (a - 1.0).abs() <= (b - 1.0).abs() { a } else { b };
    }
    let ys = [(c - v[p - grid.nx]) / hy, (v[p + grid.nx] - c) / hy];
    let mut best = f64::INFINITY;
    for gx in xs {
        for gy in ys {
            let n = math::sqrt(gx * gx + gy * gy);
            if (n - 1.0).abs() < (best - 1.0).abs() {
                best = n;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::line(2, 1.0).is_err());
        assert!(Grid::new_1d(10, 0.0, 0.0).is_err());
        assert!(Grid::new_2d(10, 2, [1.0, 1.0], [0.0, 0.0]).is_err());
        let g = Grid::square(11, 10.0).unwrap();
        assert_eq!(g.len(), 121);
        assert_eq!(g.coords(g.index(3, 4)), [3.0, 4.0]);
        assert_eq!(g.nearest_node([3.4, 4.6]), g.index(3, 5));
    }

    #[test]
    fn constant_integrates_exactly() {
        let g = Grid::line(61, 6.0).unwrap();
        let c = ScalarField::constant(g, 0.02);
        assert!((c.integrate() - 0.12).abs() < 1e-15);
        let g2 = Grid::new_2d(13, 7, [0.5, 0.25], [1.0, -2.0]).unwrap();
        let c2 = ScalarField::constant(g2, 3.0);
        assert!((c2.integrate() - 3.0 * 6.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = Grid::line(21, 2.0).unwrap();
        let c = ScalarField::constant(g, 4.0);
        assert!(gradient(&c).values().iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
        let lin = ScalarField::from_fn(g, |x| 2.5 * x[0] - 1.0);
        for v in gradient(&lin).values() {
            assert!((v[0] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_sine_is_second_order() {
        let h = 0.01;
        let n = 315;
        let g = Grid::new_1d(n, h, 0.0).unwrap();
        let f = ScalarField::from_fn(g, |x| libm::sin(x[0]));
        let d = gradient(&f);
        let err = (1..n - 1)
            .map(|p| (d.values()[p][0] - libm::cos(g.coords(p)[0])).abs())
            .fold(0.0, f64::max);
        assert!(err < h * h, "max error {err}");
    }

    #[test]
    fn laplacian_of_quadratic_and_constant() {
        let g = Grid::line(31, 3.0).unwrap();
        let q = ScalarField::from_fn(g, |x| x[0] * x[0]);
        let l = laplacian(&q);
        for p in 1..30 {
            assert!((l.values()[p] - 2.0).abs() < 1e-9);
        }
        let g2 = Grid::square(21, 4.0).unwrap();
        assert!(laplacian(&ScalarField::constant(g2, 7.0)).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_of_circle_distance_gives_curvature() {
        let r0 = 5.0;
        let h = 0.05;
        let n = 301;
        let g = Grid::new_2d(n, n, [h, h], [-7.5, -7.5]).unwrap();
        let phi = ScalarField::from_fn(g, |x| math::hypot(x[0], x[1]) - r0);
        let l = laplacian(&phi);
        let mut worst: f64 = 0.0;
        for p in 0..g.len() {
            if phi.values()[p].abs() < h {
                let r = math::hypot(g.coords(p)[0], g.coords(p)[1]);
                worst = worst.max((l.values()[p] - 1.0 / r).abs());
                // close to the interface 1/r ~ 1/R within O(h)
                assert!((l.values()[p] - 1.0 / r0).abs() < 2.0 * h);
            }
        }
        assert!(worst < 1e-3, "worst {worst}");
    }

    #[test]
    fn unit_normals() {
        let g = Grid::line(11, 10.0).unwrap();
        let phi = ScalarField::from_fn(g, |x| x[0] - 3.0);
        let (n, flags) = unit_normal(&phi);
        assert!(n.values().iter().all(|v| (v[0] + 1.0).abs() < 1e-12));
        assert!(flags.iter().all(|f| !f));

        let g2 = Grid::new_2d(41, 41, [0.25, 0.25], [-5.0, -5.0]).unwrap();
        let disk = ScalarField::from_fn(g2, |x| 3.0 - math::hypot(x[0], x[1]));
        let (n2, _) = unit_normal(&disk);
        for p in 0..g2.len() {
            let x = g2.coords(p);
            let r = math::hypot(x[0], x[1]);
            if r > 1.0 && r < 4.5 {
                let v = n2.values()[p];
                assert!((v[0] - x[0] / r).abs() < 0.01 && (v[1] - x[1] / r).abs() < 0.01, "r {r}");
            }
        }

        let (z, flags) = unit_normal(&ScalarField::constant(g2, 1.0));
        assert!(z.values().iter().all(|v| *v == [0.0, 0.0]));
        assert!(flags.iter().all(|f| *f));
    }

    #[test]
    fn godunov_norm_is_one_on_medial_axis() {
        let g = Grid::line(101, 10.0).unwrap();
        // distance to the boundary of [2, 8], positive inside: ridge at x = 5
        let phi = ScalarField::from_fn(g, |x| (x[0] - 2.0).min(8.0 - x[0]));
        for p in 5..96 {
            let n = godunov_gradient_norm_at(&g, phi.values(), p);
            assert!((n - 1.0).abs() < 1e-9, "p {p} n {n}");
        }
    }

    #[test]
    fn quadrant_norm_is_one_on_oblique_ridge() {
        let g = Grid::square(41, 10.0).unwrap();
        // distance inside a 120° wedge: ridge along the bisector, which no
        // grid axis or diagonal follows
        let n1 = [math::sqrt(3.0) / 2.0, 0.5];
        let n2 = [-math::sqrt(3.0) / 2.0, 0.5];
        let phi = ScalarField::from_fn(g, |x| {
            let (a, b) = (x[0] - 5.1, x[1] - 2.3);
            (n1[0] * a + n1[1] * b).min(n2[0] * a + n2[1] * b)
        });
        let mut godunov_worst: f64 = 0.0;
        for j in 1..40 {
            for i in 1..40 {
                let p = g.index(i, j);
                let q = quadrant_gradient_norm_at(&g, phi.values(), p);
                assert!((q - 1.0).abs() < 1e-9, "({i},{j}) {q}");
                godunov_worst = godunov_worst.max((godunov_gradient_norm_at(&g, phi.values(), p) - 1.0).abs());
            }
        }
        assert!(godunov_worst > 0.05);
        let steep = phi.map(|v| 1.3 * v);
        let p = g.index(20, 20);
        assert!((quadrant_gradient_norm_at(&g, steep.values(), p) - 1.3).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn operators_are_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, s in 0.1..2.0f64) {
            let g = Grid::new_2d(17, 13, [0.3, 0.4], [0.0, 0.0]).unwrap();
            let f = ScalarField::from_fn(g, |x| libm::sin(s * x[0]) * x[1]);
            let h = ScalarField::from_fn(g, |x| x[0] * x[0] - s * x[1]);
            let combo = f.axpby(a, &h, b).unwrap();
            let lc = laplacian(&combo);
            let lf = laplacian(&f);
            let lh = laplacian(&h);
            let gc = gradient(&combo);
            let gf = gradient(&f);
            let gh = gradient(&h);
            for p in 0..g.len() {
                let expect = a * lf.values()[p] + b * lh.values()[p];
                prop_assert!((lc.values()[p] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
                for k in 0..2 {
                    let e = a * gf.values()[p][k] + b * gh.values()[p][k];
                    prop_assert!((gc.values()[p][k] - e).abs() < 1e-10 * (1.0 + e.abs()));
                }
            }
        }
    }
}
