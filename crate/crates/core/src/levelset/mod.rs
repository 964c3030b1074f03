//! Colored multi-level-set representation of a two-phase polycrystal.
//!
//! Each color hosts several non-touching grains in a single signed-distance
//! field. A parallel tag array per color records which grain a node belongs
//! to (positive side) or is nearest to (negative side, within the band), so
//! grain identity survives transport and reinitialization.

mod coloring;
mod reinit;

pub use coloring::{color_grains, is_valid_coloring, Coloring};
pub use reinit::{
    contour_length, extract_zero_set, positive_measure, reinitialize, reinitialize_tagged, zero_crossings_1d,
    Segment, NO_TAG,
};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::grid::{Grid, ScalarField};
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Alpha,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrainRecord {
    /// Equal to the grain's index in the grain table.
    pub id: u32,
    pub phase: Phase,
    /// Index of the level-set field hosting the grain.
    pub color: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetEnsemble {
    grid: Grid,
    fields: Vec<ScalarField>,
    tags: Vec<Vec<u32>>,
    grains: Vec<GrainRecord>,
    epsilon: f64,
    eta: f64,
}

/// Quantities rebuilt from the ensemble after every transport step.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    /// Owning grain per node (`NO_TAG` only in unrepaired vacuum).
    pub labels: Vec<u32>,
    pub phi_max: ScalarField,
    pub chi_alpha: ScalarField,
    pub phi_alpha_zone: ScalarField,
    pub phase_field: ScalarField,
    pub chi_ag: ScalarField,
    pub chi_aa: ScalarField,
    pub chi_gg: ScalarField,
}

impl LevelSetEnsemble {
    /// Assembles an ensemble from per-color fields and tag arrays.
    pub fn new(
        grid: Grid,
        grains: Vec<GrainRecord>,
        fields: Vec<ScalarField>,
        tags: Vec<Vec<u32>>,
        epsilon: f64,
        eta: f64,
    ) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(invalid("eta", "must be positive"));
        }
        if !(epsilon >= 2.0 * eta * (1.0 - 1e-12)) {
            return Err(invalid("epsilon", format!("{epsilon} is below twice eta ({eta})")));
        }
        if fields.is_empty() || fields.len() != tags.len() {
            return Err(invalid("fields", "need at least one field and one tag array per field"));
        }
        for (f, t) in fields.iter().zip(&tags) {
            if *f.grid() != grid || t.len() != grid.len() {
                return Err(Error::GridMismatch);
            }
        }
        for (k, g) in grains.iter().enumerate() {
            if g.id as usize != k {
                return Err(invalid("grains", "ids must equal table positions"));
            }
            if g.color >= fields.len() {
                return Err(invalid("grains", format!("grain {k} has color {} without a field", g.color)));
            }
        }
        Ok(Self { grid, fields, tags, grains, epsilon, eta })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    /// Mutable access for transport; callers must run [`Self::maintain`] afterwards.
    pub fn fields_mut(&mut self) -> &mut [ScalarField] {
        &mut self.fields
    }

    pub fn tags(&self) -> &[Vec<u32>] {
        &self.tags
    }

    pub fn grains(&self) -> &[GrainRecord] {
        &self.grains
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn color_count(&self) -> usize {
        self.fields.len()
    }

    pub fn phase_of(&self, grain: u32) -> Option<Phase> {
        self.grains.get(grain as usize).map(|g| g.phase)
    }

    pub fn phi_max(&self) -> ScalarField {
        let mut out = self.fields[0].clone();
        for f in &self.fields[1..] {
            for (o, v) in out.values_mut().iter_mut().zip(f.values()) {
                *o = o.max(*v);
            }
        }
        out
    }

    /// Grain achieving the largest field value at each node; ties go to the
    /// lowest grain id.
    pub fn labels(&self) -> Vec<u32> {
        (0..self.grid.len())
            .map(|p| {
                let mut best = (f64::NEG_INFINITY, NO_TAG);
                for (f, t) in self.fields.iter().zip(&self.tags) {
                    let (v, tag) = (f.values()[p], t[p]);
                    if tag == NO_TAG {
                        continue;
                    }
                    if v > best.0 || (v == best.0 && tag < best.1) {
                        best = (v, tag);
                    }
                }
                best.1
            })
            .collect()
    }

    pub fn chi_alpha(&self, labels: &[u32]) -> ScalarField {
        let values = labels
            .iter()
            .map(|&l| if self.phase_of(l) == Some(Phase::Alpha) { 1.0 } else { 0.0 })
            .collect();
        ScalarField::new(self.grid, values).expect("indicator values are finite")
    }

    /// Nodewise `φ̂_i = ½(φ_i − max_{j≠i} φ_j)`: removes overlaps and fills
    /// vacuum between level sets.
    pub fn junction_repair(&mut self) -> Result<()> {
        if self.fields.len() < 2 {
            return Err(invalid("fields", "junction repair needs at least two level sets"));
        }
        let n = self.fields.len();
        let mut vals = vec![0.0; n];
        for p in 0..self.grid.len() {
            let (mut top, mut second, mut arg) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for (i, f) in self.fields.iter().enumerate() {
                let v = f.values()[p];
                vals[i] = v;
                if v > top {
                    second = top;
                    top = v;
                    arg = i;
                } else if v > second {
                    second = v;
                }
            }
            for (i, f) in self.fields.iter_mut().enumerate() {
                let other = if i == arg { second } else { top };
                f.values_mut()[p] = 0.5 * (vals[i] - other);
            }
        }
        Ok(())
    }

    /// Reinitializes every field on the ε band and refreshes tags. A field
    /// left without any interface is cleared to `−ε`.
    pub fn reinitialize_all(&mut self) -> Result<()> {
        let eps = self.epsilon;
        for (f, t) in self.fields.iter_mut().zip(self.tags.iter_mut()) {
            match reinitialize_tagged(f, eps, t) {
                Ok((nf, nt)) => {
                    *f = nf;
                    *t = nt;
                }
                Err(Error::NoInterface) => {
                    f.values_mut().iter_mut().for_each(|v| *v = if *v > 0.0 { eps } else { -eps });
                    if f.values().iter().all(|v| *v < 0.0) {
                        t.iter_mut().for_each(|x| *x = NO_TAG);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Junction repair, reinitialization and re-coloration, in that order.
    /// Returns the number of grains moved to another color.
    pub fn maintain(&mut self) -> Result<usize> {
        if self.fields.len() >= 2 {
            self.junction_repair()?;
        }
        self.reinitialize_all()?;
        self.recolor_close_grains()
    }

    /// Nodes where more than one field is positive.
    pub fn overlap_count(&self) -> usize {
        (0..self.grid.len())
            .filter(|&p| self.fields.iter().filter(|f| f.values()[p] > 0.0).count() > 1)
            .count()
    }

    /// Pairs of distinct same-colored grains closer than `gap`, as
    /// `(color, grain, grain)`, found by scanning neighbouring nodes whose
    /// tags differ.
    pub fn close_same_color_pairs(&self, gap: f64) -> Vec<(usize, u32, u32)> {
        let g = self.grid;
        let mut out: Vec<(usize, u32, u32)> = Vec::new();
        let steps: &[(usize, usize)] = if g.dims() == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1), (1, 1)] };
        for (c, (f, t)) in self.fields.iter().zip(&self.tags).enumerate() {
            let v = f.values();
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let p = g.index(i, j);
                    if t[p] == NO_TAG || v[p] <= -0.5 * gap {
                        continue;
                    }
                    for &(di, dj) in steps {
                        if i + di >= g.nx() || j + dj >= g.ny() {
                            continue;
                        }
                        let q = g.index(i + di, j + dj);
                        if t[q] == NO_TAG || t[q] == t[p] {
                            continue;
                        }
                        if -v[p] - v[q] < gap {
                            let pair = (c, t[p].min(t[q]), t[p].max(t[q]));
                            if !out.contains(&pair) {
                                out.push(pair);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Moves the smaller grain of every same-colored pair closer than `4h`
    /// to a compatible color (or a new field).
    pub fn recolor_close_grains(&mut self) -> Result<usize> {
        let gap = 4.0 * self.grid.h_min();
        let mut moved = 0;
        for _ in 0..=self.grains.len() {
            let pairs = self.close_same_color_pairs(gap);
            let Some(&(_, a, b)) = pairs.first() else { break };
            let labels = self.labels();
            let area = |g: u32| labels.iter().filter(|l| **l == g).count();
            let g = if area(a) <= area(b) { a } else { b };
            self.move_grain(g, &labels)?;
            moved += 1;
        }
        Ok(moved)
    }

    fn move_grain(&mut self, g: u32, labels: &[u32]) -> Result<()> {
        let eps = self.epsilon;
        let from = self.grains[g as usize].color;
        let required = (8.0 * self.grid.h_min()).max(0.5 * eps).min(eps);
        let target = (0..self.fields.len()).find(|&c| {
            c != from
                && labels
                    .iter()
                    .zip(self.fields[c].values())
                    .all(|(l, v)| *l != g || *v <= -required)
        });
        let target = match target {
            Some(c) => c,
            None => {
                self.fields.push(ScalarField::constant(self.grid, -eps));
                self.tags.push(vec![NO_TAG; self.grid.len()]);
                self.fields.len() - 1
            }
        };

        let src_tags = &self.tags[from];
        let src = self.fields[from].values();
        let isolated: Vec<f64> =
            src.iter().zip(src_tags).map(|(v, t)| if *t == g { *v } else { -eps }).collect();
        let own: Vec<u32> = isolated.iter().map(|v| if *v > 0.0 { g } else { NO_TAG }).collect();
        let (dist, _) = reinitialize_tagged(&ScalarField::new(self.grid, isolated)?, eps, &own)?;

        for (p, d) in dist.values().iter().enumerate() {
            let dst = &mut self.fields[target].values_mut()[p];
            if *d > *dst {
                *dst = *d;
                self.tags[target][p] = g;
            }
        }
        for p in 0..self.grid.len() {
            if self.tags[from][p] == g {
                self.fields[from].values_mut()[p] = -eps;
                self.tags[from][p] = NO_TAG;
            }
        }
        match reinitialize_tagged(&self.fields[from], eps, &self.tags[from]) {
            Ok((f, t)) => {
                self.fields[from] = f;
                self.tags[from] = t;
            }
            Err(Error::NoInterface) => {}
            Err(e) => return Err(e),
        }
        self.grains[g as usize].color = target;
        Ok(())
    }

    /// Area (or length in 1D) of each grain by nodal counting of labels.
    pub fn grain_measures(&self, labels: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.grains.len()];
        for (p, &l) in labels.iter().enumerate() {
            if l != NO_TAG {
                out[l as usize] += self.grid.node_weight(p);
            }
        }
        out
    }

    /// Labels, indicators, ferrite-zone distance, phase field and interface
    /// characteristic functions for the current fields.
    pub fn derive(&self) -> Result<DerivedFields> {
        let labels = self.labels();
        let phi_max = self.phi_max();
        let chi_alpha = self.chi_alpha(&labels);
        let phi_alpha_zone = match alpha_zone_from(&chi_alpha, &phi_max, self.epsilon) {
            Ok(f) => f,
            Err(Error::NoInterface) => chi_alpha.map(|c| if c > 0.5 { self.epsilon } else { -self.epsilon }),
            Err(e) => return Err(e),
        };
        let phase_field = compute_phase_field(&phi_alpha_zone, self.eta);
        let [chi_ag, chi_aa, chi_gg] =
            compute_interface_characteristics(&phi_alpha_zone, &chi_alpha, &phi_max, self.epsilon)?;
        Ok(DerivedFields { labels, phi_max, chi_alpha, phi_alpha_zone, phase_field, chi_ag, chi_aa, chi_gg })
    }
}

fn alpha_zone_from(chi_alpha: &ScalarField, phi_max: &ScalarField, band: f64) -> Result<ScalarField> {
    // Exact zeros of φ_max would otherwise read as sign changes across α/α boundaries.
    let floor = 1e-9 * chi_alpha.grid().h_min();
    let values = chi_alpha
        .values()
        .iter()
        .zip(phi_max.values())
        .map(|(c, m)| (2.0 * c - 1.0) * m.max(floor))
        .collect();
    reinitialize(&ScalarField::new(*chi_alpha.grid(), values)?, band)
}

/// Signed distance to the α/γ phase boundaries, positive in ferrite.
pub fn compute_alpha_zone(ensemble: &LevelSetEnsemble) -> Result<ScalarField> {
    let labels = ensemble.labels();
    alpha_zone_from(&ensemble.chi_alpha(&labels), &ensemble.phi_max(), ensemble.epsilon)
}

/// `φ_pf = ½ tanh(3φ/η) + ½`.
pub fn phase_field_value(phi: f64, eta: f64) -> f64 {
    0.5 * math::tanh(3.0 * phi / eta) + 0.5
}

pub fn compute_phase_field(phi_alpha_zone: &ScalarField, eta: f64) -> ScalarField {
    phi_alpha_zone.map(|v| phase_field_value(v, eta))
}

/// `[χ_αγ, χ_αα, χ_γγ]`.
pub fn compute_interface_characteristics(
    phi_alpha_zone: &ScalarField,
    chi_alpha: &ScalarField,
    phi_max: &ScalarField,
    epsilon: f64,
) -> Result<[ScalarField; 3]> {
    let grid = *phi_alpha_zone.grid();
    if *chi_alpha.grid() != grid || *phi_max.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.len();
    let (mut ag, mut aa, mut gg) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for p in 0..n {
        let x_ag = if phi_alpha_zone.values()[p].abs() < epsilon { 1.0 } else { 0.0 };
        ag[p] = x_ag;
        if phi_max.values()[p] < epsilon {
            aa[p] = (1.0 - x_ag) * chi_alpha.values()[p];
            gg[p] = 1.0 - x_ag - aa[p];
        }
    }
    Ok([ScalarField::new(grid, ag)?, ScalarField::new(grid, aa)?, ScalarField::new(grid, gg)?])
}
