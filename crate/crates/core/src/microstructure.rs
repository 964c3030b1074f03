//! Initial polycrystals: Voronoi austenite grains, ferrite nuclei on grain
//! boundaries, and morphology statistics.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::invalid;
use crate::grid::{Grid, ScalarField};
use crate::levelset::{color_grains, reinitialize_tagged, GrainRecord, LevelSetEnsemble, Phase, NO_TAG};
use crate::math;
use crate::{Error, Result};

/// Edge label for a polygon edge lying on the domain boundary.
const DOMAIN_EDGE: usize = usize::MAX;

/// Convex cell; `edges[k]` labels the edge from `vertices[k]` to
/// `vertices[k+1]` with the neighbouring cell, or [`DOMAIN_EDGE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: Vec<[f64; 2]>,
    pub edges: Vec<usize>,
}

impl Cell {
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for k in 0..n {
            let (a, b) = (self.vertices[k], self.vertices[(k + 1) % n]);
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s
    }

    fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    fn edge(&self, k: usize) -> ([f64; 2], [f64; 2]) {
        (self.vertices[k], self.vertices[(k + 1) % self.vertices.len()])
    }

    fn contains(&self, x: [f64; 2]) -> bool {
        (0..self.vertices.len()).all(|k| {
            let (a, b) = self.edge(k);
            (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) >= 0.0
        })
    }

    /// Distance from `x` to the nearest edge shared with another cell.
    fn distance_to_grain_boundary(&self, x: [f64; 2]) -> f64 {
        (0..self.vertices.len())
            .filter(|&k| self.edges[k] != DOMAIN_EDGE)
            .map(|k| {
                let (a, b) = self.edge(k);
                segment_distance(a, b, x)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn distance_to_polygon(&self, x: [f64; 2]) -> f64 {
        (0..self.vertices.len())
            .map(|k| {
                let (a, b) = self.edge(k);
                segment_distance(a, b, x)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

fn segment_distance(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    math::hypot(x[0] - a[0] - t * d[0], x[1] - a[1] - t * d[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tessellation {
    /// Domain `[0, L_x] × [0, L_y]`.
    pub domain: [f64; 2],
    pub seeds: Vec<[f64; 2]>,
    pub cells: Vec<Cell>,
    /// Cells sharing an edge of positive length.
    pub adjacency: Vec<Vec<usize>>,
}

/// Keeps the part of `cell` on the side of `x·normal <= offset`; the new
/// edge carries `label`.
fn clip(cell: &Cell, normal: [f64; 2], offset: f64, label: usize) -> Cell {
    let n = cell.vertices.len();
    let side = |p: [f64; 2]| p[0] * normal[0] + p[1] * normal[1] - offset;
    let mut out = Cell { vertices: Vec::with_capacity(n + 1), edges: Vec::with_capacity(n + 1) };
    for k in 0..n {
        let (p, q) = cell.edge(k);
        let (sp, sq) = (side(p), side(q));
        let lab = cell.edges[k];
        let cut = || {
            let t = sp / (sp - sq);
            [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
        };
        match (sp <= 0.0, sq <= 0.0) {
            (true, true) => {
                out.vertices.push(p);
                out.edges.push(lab);
            }
            (true, false) => {
                out.vertices.push(p);
                out.edges.push(lab);
                out.vertices.push(cut());
                out.edges.push(label);
            }
            (false, true) => {
                out.vertices.push(cut());
                out.edges.push(lab);
            }
            (false, false) => {}
        }
    }
    // drop zero-length edges left by vertices lying on the clip line
    let tol = 1e-12 * (1.0 + offset.abs());
    let mut k = 0;
    while out.vertices.len() > 2 && k < out.vertices.len() {
        let next = (k + 1) % out.vertices.len();
        let (a, b) = (out.vertices[k], out.vertices[next]);
        if math::hypot(b[0] - a[0], b[1] - a[1]) <= tol {
            out.vertices.remove(k);
            out.edges.remove(k);
        } else {
            k += 1;
        }
    }
    out
}

/// Voronoi cells of `seeds` clipped to the rectangle `[0, L_x] × [0, L_y]`.
pub fn tessellate(seeds: Vec<[f64; 2]>, domain: [f64; 2]) -> Result<Tessellation> {
    if seeds.is_empty() {
        return Err(invalid("n_grains", "must be at least 1"));
    }
    if !(domain[0] > 0.0 && domain[1] > 0.0) {
        return Err(invalid("domain", "side lengths must be positive"));
    }
    let rect = Cell {
        vertices: vec![[0.0, 0.0], [domain[0], 0.0], [domain[0], domain[1]], [0.0, domain[1]]],
        edges: vec![DOMAIN_EDGE; 4],
    };
    let mut cells = Vec::with_capacity(seeds.len());
    for (i, &s) in seeds.iter().enumerate() {
        let mut order: Vec<(f64, usize)> = seeds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, t)| (dist2(*t, s), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cell = rect.clone();
        for (d2, j) in order {
            if d2 == 0.0 {
                return Err(Error::DegenerateGeometry("coincident seeds"));
            }
            // a seed farther than twice the cell's reach cannot cut it
            let reach2 = cell.vertices.iter().map(|v| dist2(*v, s)).fold(0.0, f64::max);
            if d2 > 4.0 * reach2 {
                break;
            }
            let t = seeds[j];
            let normal = [t[0] - s[0], t[1] - s[1]];
            let mid = [0.5 * (s[0] + t[0]), 0.5 * (s[1] + t[1])];
            cell = clip(&cell, normal, mid[0] * normal[0] + mid[1] * normal[1], j);
        }
        cells.push(cell);
    }
    let mut adjacency = vec![Vec::new(); seeds.len()];
    for (i, c) in cells.iter().enumerate() {
        for &e in &c.edges {
            if e != DOMAIN_EDGE && !adjacency[i].contains(&e) {
                adjacency[i].push(e);
            }
        }
    }
    // keep only mutual edges so the relation is symmetric
    let snapshot = adjacency.clone();
    for (i, list) in adjacency.iter_mut().enumerate() {
        list.retain(|j| snapshot[*j].contains(&i));
        list.sort_unstable();
    }
    Ok(Tessellation { domain, seeds, cells, adjacency })
}

/// Voronoi tessellation of `n_grains` uniformly sampled seeds.
pub fn generate_polycrystal(n_grains: usize, domain: [f64; 2], rng_seed: u64) -> Result<Tessellation> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds = (0..n_grains)
        .map(|_| [rng.random::<f64>() * domain[0], rng.random::<f64>() * domain[1]])
        .collect();
    tessellate(seeds, domain)
}

impl Tessellation {
    /// Shared grain-boundary edges, once each, as `(cell, cell, a, b)`.
    pub fn interior_edges(&self) -> Vec<(usize, usize, [f64; 2], [f64; 2])> {
        let mut out = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            for k in 0..c.vertices.len() {
                let j = c.edges[k];
                if j != DOMAIN_EDGE && i < j {
                    let (a, b) = c.edge(k);
                    out.push((i, j, a, b));
                }
            }
        }
        out
    }

    /// Signed distance to the grain boundary of cell `i`, positive inside.
    pub fn signed_distance(&self, i: usize, x: [f64; 2]) -> f64 {
        let c = &self.cells[i];
        if c.contains(x) {
            c.distance_to_grain_boundary(x)
        } else {
            -c.distance_to_polygon(x)
        }
    }

    /// Smallest distance between two cells (0 when they touch).
    fn cell_gap(&self, i: usize, j: usize) -> f64 {
        if self.adjacency[i].contains(&j) {
            return 0.0;
        }
        let (a, b) = (&self.cells[i], &self.cells[j]);
        let from_a = a.vertices.iter().map(|v| b.distance_to_polygon(*v)).fold(f64::INFINITY, f64::min);
        let from_b = b.vertices.iter().map(|v| a.distance_to_polygon(*v)).fold(f64::INFINITY, f64::min);
        from_a.min(from_b)
    }
}

/// A circular ferrite nucleus sitting on a grain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nucleus {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Places `n_nuclei` disks of `radius` at random points of random grain
/// boundary edges (weighted by length), keeping centres `2·radius + 2h`
/// apart and disks inside the domain.
pub fn seed_nuclei(tess: &Tessellation, n_nuclei: usize, radius: f64, h: f64, rng_seed: u64) -> Result<Vec<Nucleus>> {
    if !(radius > 0.0) {
        return Err(invalid("nucleus_radius", "must be positive"));
    }
    if n_nuclei == 0 {
        return Ok(Vec::new());
    }
    let edges = tess.interior_edges();
    let cumulative: Vec<f64> = edges
        .iter()
        .scan(0.0, |acc, e| {
            *acc += math::hypot(e.3[0] - e.2[0], e.3[1] - e.2[1]);
            Some(*acc)
        })
        .collect();
    let total = cumulative.last().copied().unwrap_or(0.0);
    if total == 0.0 {
        return Err(Error::PlacementFailed { requested: n_nuclei, placed: 0 });
    }
    let sep = 2.0 * radius + 2.0 * h;
    let sep2 = sep * sep;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut placed: Vec<Nucleus> = Vec::with_capacity(n_nuclei);
    let max_attempts = 1000 * n_nuclei + 1000;
    for _ in 0..max_attempts {
        if placed.len() == n_nuclei {
            break;
        }
        let pick = rng.random::<f64>() * total;
        let e = cumulative.partition_point(|c| *c < pick).min(edges.len() - 1);
        let t = rng.random::<f64>();
        let (a, b) = (edges[e].2, edges[e].3);
        let c = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        if c[0] < radius || c[1] < radius || c[0] > tess.domain[0] - radius || c[1] > tess.domain[1] - radius {
            continue;
        }
        if placed.iter().all(|n| dist2(n.center, c) >= sep2) {
            placed.push(Nucleus { center: c, radius });
        }
    }
    if placed.len() < n_nuclei {
        return Err(Error::PlacementFailed { requested: n_nuclei, placed: placed.len() });
    }
    Ok(placed)
}

/// Axis-aligned node ranges covering `[lo, hi]`.
fn node_box(grid: &Grid, lo: [f64; 2], hi: [f64; 2]) -> (core::ops::RangeInclusive<usize>, core::ops::RangeInclusive<usize>) {
    let [hx, hy] = grid.spacing();
    let [ox, oy] = grid.origin();
    let r = |l: f64, u: f64, o: f64, h: f64, n: usize| {
        let a = math::floor((l - o) / h).max(0.0) as usize;
        let b = (math::ceil((u - o) / h).max(0.0) as usize).min(n - 1);
        a.min(n - 1)..=b
    };
    (r(lo[0], hi[0], ox, hx, grid.nx()), r(lo[1], hi[1], oy, hy, grid.ny()))
}

/// Level-set ensemble for a tessellation whose cells carry `phases`, with
/// `nuclei` carved out of the cells as additional α grains.
///
/// Grains are colored so that no two grains closer than `2ε` share a field.
pub fn build_ensemble(
    grid: Grid,
    tess: &Tessellation,
    phases: &[Phase],
    nuclei: &[Nucleus],
    epsilon: f64,
    eta: f64,
) -> Result<LevelSetEnsemble> {
    if grid.dims() != 2 {
        return Err(invalid("grid", "polycrystals need a 2D grid"));
    }
    let n_cells = tess.cells.len();
    if phases.len() != n_cells {
        return Err(invalid("phases", "need one phase per cell"));
    }
    let n = n_cells + nuclei.len();
    let halo = 2.0 * epsilon;

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    let boxes: Vec<_> = tess.cells.iter().map(Cell::bbox).collect();
    for i in 0..n_cells {
        for j in i + 1..n_cells {
            let (a, b) = (boxes[i], boxes[j]);
            let apart = a.0[0] - b.1[0] > halo || b.0[0] - a.1[0] > halo || a.0[1] - b.1[1] > halo || b.0[1] - a.1[1] > halo;
            if !apart && tess.cell_gap(i, j) <= halo {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    for (k, nu) in nuclei.iter().enumerate() {
        let u = n_cells + k;
        for i in 0..n_cells {
            if tess.cells[i].contains(nu.center) || tess.cells[i].distance_to_polygon(nu.center) <= nu.radius + halo {
                adjacency[u].push(i);
                adjacency[i].push(u);
            }
        }
        for (l, other) in nuclei.iter().enumerate().skip(k + 1) {
            let d = math::hypot(other.center[0] - nu.center[0], other.center[1] - nu.center[1]);
            if d <= nu.radius + other.radius + halo {
                adjacency[u].push(n_cells + l);
                adjacency[n_cells + l].push(u);
            }
        }
    }
    let coloring = color_grains(&adjacency);

    let mut grains: Vec<GrainRecord> = (0..n_cells)
        .map(|i| GrainRecord { id: i as u32, phase: phases[i], color: coloring.colors[i] })
        .collect();
    grains.extend(
        (0..nuclei.len()).map(|k| GrainRecord { id: (n_cells + k) as u32, phase: Phase::Alpha, color: coloring.colors[n_cells + k] }),
    );

    let mut fields: Vec<Vec<f64>> = vec![vec![-epsilon; grid.len()]; coloring.count];
    let mut tags: Vec<Vec<u32>> = vec![vec![NO_TAG; grid.len()]; coloring.count];
    for (i, cell) in tess.cells.iter().enumerate() {
        let (lo, hi) = cell.bbox();
        let (ri, rj) = node_box(&grid, [lo[0] - epsilon, lo[1] - epsilon], [hi[0] + epsilon, hi[1] + epsilon]);
        let c = coloring.colors[i];
        for j in rj {
            for ii in ri.clone() {
                let p = grid.index(ii, j);
                let d = tess.signed_distance(i, grid.coords(p)).clamp(-epsilon, epsilon);
                if d > fields[c][p] || (tags[c][p] == NO_TAG && d >= fields[c][p]) {
                    fields[c][p] = d;
                    tags[c][p] = i as u32;
                }
            }
        }
    }
    for (k, nu) in nuclei.iter().enumerate() {
        let g = (n_cells + k) as u32;
        let c = coloring.colors[n_cells + k];
        let reach = nu.radius + epsilon;
        let (ri, rj) = node_box(&grid, [nu.center[0] - reach, nu.center[1] - reach], [nu.center[0] + reach, nu.center[1] + reach]);
        for j in rj {
            for ii in ri.clone() {
                let p = grid.index(ii, j);
                let x = grid.coords(p);
                let d = (nu.radius - math::hypot(x[0] - nu.center[0], x[1] - nu.center[1])).clamp(-epsilon, epsilon);
                if d > fields[c][p] {
                    fields[c][p] = d;
                    tags[c][p] = g;
                }
                // carve the disk out of every host field
                for (cc, f) in fields.iter_mut().enumerate() {
                    if cc != c && f[p] > -d {
                        f[p] = -d;
                    }
                }
            }
        }
    }
    let fields = fields.into_iter().map(|v| ScalarField::new(grid, v)).collect::<Result<Vec<_>>>()?;
    let mut ens = LevelSetEnsemble::new(grid, grains, fields, tags, epsilon, eta)?;
    if ens.color_count() >= 2 {
        ens.maintain()?;
    }
    Ok(ens)
}

/// 1D two-grain fixture: α on `[origin, x0)`, γ beyond.
pub fn planar_ensemble(grid: Grid, x0: f64, epsilon: f64, eta: f64) -> Result<LevelSetEnsemble> {
    if grid.dims() != 1 {
        return Err(invalid("grid", "the planar fixture is one-dimensional"));
    }
    let f0 = ScalarField::from_fn(grid, |x| (x0 - x[0]).clamp(-epsilon, epsilon));
    let f1 = f0.map(|v| -v);
    let grains = vec![
        GrainRecord { id: 0, phase: Phase::Alpha, color: 0 },
        GrainRecord { id: 1, phase: Phase::Gamma, color: 1 },
    ];
    let mut e = LevelSetEnsemble::new(grid, grains, vec![f0, f1], vec![vec![0; grid.len()], vec![1; grid.len()]], epsilon, eta)?;
    e.maintain()?;
    Ok(e)
}

/// A single disk grain inside a matrix grain. With equal phases only
/// capillarity moves the boundary.
pub fn disk_ensemble(
    grid: Grid,
    center: [f64; 2],
    radius: f64,
    [inner, outer]: [Phase; 2],
    epsilon: f64,
    eta: f64,
) -> Result<LevelSetEnsemble> {
    let f0 = ScalarField::from_fn(grid, |x| (radius - math::hypot(x[0] - center[0], x[1] - center[1])).clamp(-epsilon, epsilon));
    let f1 = f0.map(|v| -v);
    let grains = vec![
        GrainRecord { id: 0, phase: inner, color: 0 },
        GrainRecord { id: 1, phase: outer, color: 1 },
    ];
    let mut e = LevelSetEnsemble::new(grid, grains, vec![f0, f1], vec![vec![0; grid.len()], vec![1; grid.len()]], epsilon, eta)?;
    e.maintain()?;
    Ok(e)
}

/// Rebuilds an ensemble from a per-node grain map: each color field gets its
/// zero set halfway between nodes of different owners.
pub fn ensemble_from_labels(
    grid: Grid,
    grains: Vec<GrainRecord>,
    labels: &[u32],
    epsilon: f64,
    eta: f64,
) -> Result<LevelSetEnsemble> {
    if labels.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if let Some(bad) = labels.iter().find(|l| **l as usize >= grains.len()) {
        return Err(invalid("labels", alloc::format!("node refers to unknown grain {bad}")));
    }
    let n_colors = grains.iter().map(|g| g.color + 1).max().unwrap_or(1);
    let half = 0.5 * grid.h_min();
    let mut fields = Vec::with_capacity(n_colors);
    let mut tags = Vec::with_capacity(n_colors);
    for c in 0..n_colors {
        let raw: Vec<f64> = labels.iter().map(|l| if grains[*l as usize].color == c { half } else { -half }).collect();
        let t: Vec<u32> = labels.iter().map(|l| if grains[*l as usize].color == c { *l } else { NO_TAG }).collect();
        let raw = ScalarField::new(grid, raw)?;
        match reinitialize_tagged(&raw, epsilon, &t) {
            Ok((f, t)) => {
                fields.push(f);
                tags.push(t);
            }
            Err(Error::NoInterface) => {
                fields.push(raw.map(|v| if v > 0.0 { epsilon } else { -epsilon }));
                tags.push(t);
            }
            Err(e) => return Err(e),
        }
    }
    let mut e = LevelSetEnsemble::new(grid, grains, fields, tags, epsilon, eta)?;
    if e.color_count() >= 2 {
        e.maintain()?;
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrainSize {
    pub id: u32,
    pub phase: Phase,
    /// Area in 2D, length in 1D.
    pub measure: f64,
    /// `sqrt(area/π)` in 2D, half the length in 1D.
    pub equivalent_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphologyStats {
    pub alpha_fraction: f64,
    pub gamma_fraction: f64,
    /// Grains with non-zero measure.
    pub grains: Vec<GrainSize>,
    pub mean_radius_alpha: f64,
    pub mean_radius_gamma: f64,
}

impl MorphologyStats {
    pub fn radii(&self, phase: Phase) -> impl Iterator<Item = f64> + '_ {
        self.grains.iter().filter(move |g| g.phase == phase).map(|g| g.equivalent_radius)
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.radii(phase).count()
    }
}

/// Counts of `values` in bins `[k·width, (k+1)·width)`; the last bin also
/// takes everything above.
pub fn histogram(values: impl Iterator<Item = f64>, width: f64, bins: usize) -> Vec<usize> {
    let mut out = vec![0; bins];
    if bins == 0 {
        return out;
    }
    for v in values {
        let k = ((v / width).max(0.0) as usize).min(bins - 1);
        out[k] += 1;
    }
    out
}

/// Per-grain areas by nodal counting of the owning grain, equivalent radii
/// and phase fractions.
pub fn compute_stats(ens: &LevelSetEnsemble, labels: &[u32]) -> MorphologyStats {
    let measures = ens.grain_measures(labels);
    let total: f64 = measures.iter().sum();
    let two_d = ens.grid().dims() == 2;
    let mut alpha = 0.0;
    let mut grains = Vec::new();
    for (g, m) in ens.grains().iter().zip(&measures) {
        if g.phase == Phase::Alpha {
            alpha += m;
        }
        if *m > 0.0 {
            let r = if two_d { math::sqrt(m / core::f64::consts::PI) } else { 0.5 * m };
            grains.push(GrainSize { id: g.id, phase: g.phase, measure: *m, equivalent_radius: r });
        }
    }
    let mean = |p: Phase| {
        let (s, n) = grains.iter().filter(|g| g.phase == p).fold((0.0, 0usize), |a, g| (a.0 + g.equivalent_radius, a.1 + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    };
    let alpha_fraction = if total > 0.0 { alpha / total } else { 0.0 };
    MorphologyStats {
        alpha_fraction,
        gamma_fraction: if total > 0.0 { 1.0 - alpha_fraction } else { 0.0 },
        mean_radius_alpha: mean(Phase::Alpha),
        mean_radius_gamma: mean(Phase::Gamma),
        grains,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::is_valid_coloring;

    #[test]
    fn full_scale_coloring_is_valid() {
        let t = generate_polycrystal(492, [1000.0, 1000.0], 17).unwrap();
        let c = color_grains(&t.adjacency);
        assert!(is_valid_coloring(&t.adjacency, &c.colors));
        // exhaustive scan: every pair of cells sharing an edge differs in color
        for (i, j, _, _) in t.interior_edges() {
            assert_ne!(c.colors[i], c.colors[j]);
        }
    }

    #[test]
    fn single_seed_fills_domain() {
        let t = tessellate(vec![[3.0, 4.0]], [10.0, 8.0]).unwrap();
        assert!((t.cells[0].area() - 80.0).abs() < 1e-12);
        assert!(t.adjacency[0].is_empty());
        assert!(generate_polycrystal(0, [1.0, 1.0], 1).is_err());
    }

    #[test]
    fn quarter_point_seeds_give_equal_cells() {
        let l = 4.0;
        let seeds = vec![[1.0, 1.0], [3.0, 1.0], [1.0, 3.0], [3.0, 3.0]];
        let t = tessellate(seeds, [l, l]).unwrap();
        for c in &t.cells {
            assert!((c.area() - 0.25 * l * l).abs() < 1e-12);
        }
        assert_eq!(t.adjacency[0], vec![1, 2]);
        assert_eq!(t.adjacency[3], vec![1, 2]);
    }

    #[test]
    fn cells_partition_the_domain() {
        let t = generate_polycrystal(60, [100.0, 50.0], 7).unwrap();
        let area: f64 = t.cells.iter().map(Cell::area).sum();
        assert!((area - 5000.0).abs() < 1e-8);
        for (i, list) in t.adjacency.iter().enumerate() {
            for j in list {
                assert!(t.adjacency[*j].contains(&i));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_polycrystal(30, [50.0, 50.0], 42).unwrap();
        let b = generate_polycrystal(30, [50.0, 50.0], 42).unwrap();
        assert_eq!(a, b);
        let c = generate_polycrystal(30, [50.0, 50.0], 43).unwrap();
        assert_ne!(a.seeds, c.seeds);
        let na = seed_nuclei(&a, 5, 1.0, 0.5, 3).unwrap();
        let nb = seed_nuclei(&b, 5, 1.0, 0.5, 3).unwrap();
        assert_eq!(na, nb);
    }

    #[test]
    fn full_scale_mean_grain_radius() {
        let t = generate_polycrystal(492, [1000.0, 1000.0], 2024).unwrap();
        let mean: f64 = t.cells.iter().map(|c| math::sqrt(c.area() / core::f64::consts::PI)).sum::<f64>() / 492.0;
        let expect = math::sqrt(1e6 / (492.0 * core::f64::consts::PI));
        assert!((expect - 25.44).abs() < 0.01);
        assert!((mean - expect).abs() / expect < 0.05, "mean {mean}");
    }

    #[test]
    fn nuclei_respect_spacing_and_sit_on_boundaries() {
        let t = generate_polycrystal(492, [1000.0, 1000.0], 5).unwrap();
        let nuclei = seed_nuclei(&t, 450, 6.0, 1.0, 9).unwrap();
        assert_eq!(nuclei.len(), 450);
        let ideal: f64 = nuclei.iter().map(|n| core::f64::consts::PI * n.radius * n.radius).sum::<f64>() / 1e6;
        assert!((ideal - 0.0509).abs() < 1e-4);
        for (k, a) in nuclei.iter().enumerate() {
            for b in &nuclei[k + 1..] {
                assert!(math::hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) >= 14.0 - 1e-9);
            }
            let on_edge = t.interior_edges().iter().any(|e| segment_distance(e.2, e.3, a.center) < 1e-9);
            assert!(on_edge);
        }
        assert!(seed_nuclei(&t, 0, 6.0, 1.0, 9).unwrap().is_empty());
        assert_eq!(
            seed_nuclei(&tessellate(vec![[1.0, 1.0], [3.0, 1.0]], [4.0, 2.0]).unwrap(), 3, 0.5, 0.1, 1),
            Err(Error::PlacementFailed { requested: 3, placed: 1 })
        );
    }

    #[test]
    fn disk_equivalent_radius() {
        let h = 0.25;
        let g = Grid::new_2d(121, 121, [h, h], [-15.0, -15.0]).unwrap();
        let e = disk_ensemble(g, [0.0, 0.0], 10.0, [Phase::Alpha, Phase::Gamma], 2.0, 1.0).unwrap();
        let s = compute_stats(&e, &e.labels());
        let r = s.grains.iter().find(|x| x.id == 0).unwrap().equivalent_radius;
        assert!((r - 10.0).abs() < 0.3, "r {r}");
        assert!((s.alpha_fraction + s.gamma_fraction - 1.0).abs() < 1e-12);
        let chi = e.chi_alpha(&e.labels());
        assert!((chi.integrate() / g.measure() - s.alpha_fraction).abs() < 1e-12);
    }

    #[test]
    fn two_phase_fractions_are_exact_on_aligned_split() {
        let g = Grid::square(41, 40.0).unwrap();
        let t = tessellate(vec![[10.0, 20.0], [30.0, 20.0]], [40.0, 40.0]).unwrap();
        let e = build_ensemble(g, &t, &[Phase::Alpha, Phase::Gamma], &[], 4.0, 2.0).unwrap();
        let s = compute_stats(&e, &e.labels());
        // the node column on x = 20 is a tie; it goes to the lower id
        let expect = (20.0 + 0.5) * 40.0 / 1600.0;
        assert!((s.alpha_fraction - expect).abs() < 1e-12, "{}", s.alpha_fraction);
    }

    #[test]
    fn polycrystal_ensemble_is_consistent() {
        let h = 1.0;
        let g = Grid::square(101, 100.0).unwrap();
        let t = generate_polycrystal(12, [100.0, 100.0], 11).unwrap();
        let nuclei = seed_nuclei(&t, 6, 3.0, h, 12).unwrap();
        let phases = vec![Phase::Gamma; 12];
        let e = build_ensemble(g, &t, &phases, &nuclei, 8.0, 4.0).unwrap();
        assert_eq!(e.overlap_count(), 0);
        assert!(e.close_same_color_pairs(4.0 * h).is_empty());
        let s = compute_stats(&e, &e.labels());
        let ideal = 6.0 * core::f64::consts::PI * 9.0 / 1e4;
        assert!((s.alpha_fraction - ideal).abs() / ideal < 0.1, "{} vs {ideal}", s.alpha_fraction);
        assert_eq!(s.count(Phase::Alpha), 6);
        assert_eq!(s.count(Phase::Gamma), 12);
        // the 2ε halo keeps same-colored bands from meeting
        assert!(e.close_same_color_pairs(2.0 * 8.0 - 2.0 * h).is_empty());
    }

    #[test]
    fn labels_round_trip() {
        let g = Grid::square(61, 60.0).unwrap();
        let t = generate_polycrystal(8, [60.0, 60.0], 3).unwrap();
        let e = build_ensemble(g, &t, &[Phase::Gamma; 8], &[], 6.0, 3.0).unwrap();
        let labels = e.labels();
        let back = ensemble_from_labels(g, e.grains().to_vec(), &labels, 6.0, 3.0).unwrap();
        let again = back.labels();
        let same = labels.iter().zip(&again).filter(|(a, b)| a == b).count();
        assert!(same as f64 / labels.len() as f64 > 0.99);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram([0.5, 1.5, 1.7, 9.0].into_iter(), 1.0, 3);
        assert_eq!(h, vec![1, 2, 1]);
    }
}
