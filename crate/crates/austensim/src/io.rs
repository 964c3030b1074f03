//! Legacy VTK snapshots and the microstructure text format.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use austensim_core::grid::Grid;
use austensim_core::levelset::{GrainRecord, LevelSetEnsemble, Phase, NO_TAG};
use austensim_core::microstructure::ensemble_from_labels;
use austensim_core::sim::SimState;

fn scalars<T: Display>(out: &mut impl Write, name: &str, ty: &str, values: impl Iterator<Item = T>) -> Result<()> {
    writeln!(out, "SCALARS {name} {ty} 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

fn phase_id(ens: &LevelSetEnsemble, label: u32) -> i32 {
    match ens.phase_of(label) {
        Some(Phase::Alpha) => 0,
        Some(Phase::Gamma) => 1,
        None => -1,
    }
}

/// ASCII structured-points file with grain id, phase id (0 = α, 1 = γ),
/// phase field, the three interface characteristic functions and C.
pub fn write_vtk(path: &Path, state: &SimState) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let g = state.ensemble.grid();
    let [hx, hy] = g.spacing();
    let [ox, oy] = g.origin();
    let hy = if g.dims() == 1 { hx } else { hy };
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "austensim t={} s T={} K", state.t, state.temperature)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} 1", g.nx(), g.ny())?;
    writeln!(out, "ORIGIN {ox} {oy} 0")?;
    writeln!(out, "SPACING {hx} {hy} {hx}")?;
    writeln!(out, "POINT_DATA {}", g.len())?;
    let d = &state.derived;
    let labels = d.labels.iter().map(|&l| if l == NO_TAG { -1 } else { l as i64 });
    scalars(&mut out, "grain_id", "int", labels)?;
    scalars(&mut out, "phase_id", "int", d.labels.iter().map(|&l| phase_id(&state.ensemble, l)))?;
    scalars(&mut out, "phi_pf", "double", d.phase_field.values().iter())?;
    scalars(&mut out, "chi_alpha_gamma", "double", d.chi_ag.values().iter())?;
    scalars(&mut out, "chi_alpha_alpha", "double", d.chi_aa.values().iter())?;
    scalars(&mut out, "chi_gamma_gamma", "double", d.chi_gg.values().iter())?;
    scalars(&mut out, "C", "double", state.concentration.values().iter())?;
    out.flush()?;
    Ok(())
}

/// A microstructure as stored on disk: grid, grain table and owning grain
/// per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Microstructure {
    pub grid: Grid,
    pub eta: f64,
    pub epsilon: f64,
    pub grains: Vec<GrainRecord>,
    pub labels: Vec<u32>,
}

impl Microstructure {
    pub fn from_ensemble(ens: &LevelSetEnsemble) -> Self {
        Self {
            grid: *ens.grid(),
            eta: ens.eta(),
            epsilon: ens.epsilon(),
            grains: ens.grains().to_vec(),
            labels: ens.labels(),
        }
    }

    pub fn to_ensemble(&self) -> Result<LevelSetEnsemble> {
        Ok(ensemble_from_labels(self.grid, self.grains.clone(), &self.labels, self.epsilon, self.eta)?)
    }

    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        let g = &self.grid;
        let [hx, hy] = g.spacing();
        let [ox, oy] = g.origin();
        let [lx, ly] = g.extent();
        writeln!(out, "# austensim microstructure")?;
        writeln!(out, "nodes {} {}", g.nx(), g.ny())?;
        writeln!(out, "h {hx} {hy}")?;
        writeln!(out, "origin {ox} {oy}")?;
        writeln!(out, "domain {lx} {ly}")?;
        writeln!(out, "eta {}", self.eta)?;
        writeln!(out, "epsilon {}", self.epsilon)?;
        writeln!(out, "grains {}", self.grains.len())?;
        for gr in &self.grains {
            let phase = if gr.phase == Phase::Alpha { "alpha" } else { "gamma" };
            writeln!(out, "{} {} {}", gr.id, phase, gr.color)?;
        }
        writeln!(out, "labels")?;
        for row in self.labels.chunks(g.nx()) {
            let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self> {
        let mut r = LineReader { lines: Box::new(input.lines().enumerate()), line: 0 };
        let w = r.keyed("nodes", 2)?;
        let (nx, ny): (usize, usize) = (r.num(&w[0])?, r.num(&w[1])?);
        let w = r.keyed("h", 2)?;
        let (hx, hy): (f64, f64) = (r.num(&w[0])?, r.num(&w[1])?);
        let w = r.keyed("origin", 2)?;
        let (ox, oy): (f64, f64) = (r.num(&w[0])?, r.num(&w[1])?);
        let w = r.keyed("domain", 2)?;
        let domain: [f64; 2] = [r.num(&w[0])?, r.num(&w[1])?];
        let w = r.keyed("eta", 1)?;
        let eta: f64 = r.num(&w[0])?;
        let w = r.keyed("epsilon", 1)?;
        let epsilon: f64 = r.num(&w[0])?;
        let w = r.keyed("grains", 1)?;
        let count: usize = r.num(&w[0])?;
        let grid = if ny == 1 { Grid::new_1d(nx, hx, ox)? } else { Grid::new_2d(nx, ny, [hx, hy], [ox, oy])? };
        let extent = grid.extent();
        if (extent[0] - domain[0]).abs() > 1e-9 * domain[0] || (extent[1] - domain[1]).abs() > 1e-9 * domain[1].max(1.0) {
            bail!("domain {domain:?} does not match nodes and h ({extent:?})");
        }
        let mut grains = Vec::with_capacity(count);
        for k in 0..count {
            let w = r.next("grain row")?;
            if w.len() != 3 {
                bail!("line {}: grain rows are `id phase color`", r.line);
            }
            let id: u32 = r.num(&w[0])?;
            if id as usize != k {
                bail!("line {}: grain ids must run 0, 1, 2, ... (found {id})", r.line);
            }
            let phase = match w[1].as_str() {
                "alpha" => Phase::Alpha,
                "gamma" => Phase::Gamma,
                other => bail!("line {}: unknown phase `{other}`", r.line),
            };
            grains.push(GrainRecord { id, phase, color: r.num(&w[2])? });
        }
        r.keyed("labels", 0)?;
        let mut labels = Vec::with_capacity(grid.len());
        for _ in 0..ny {
            let w = r.next("label row")?;
            if w.len() != nx {
                bail!("line {}: expected {nx} labels, found {}", r.line, w.len());
            }
            for s in &w {
                labels.push(r.num::<u32>(s)?);
            }
        }
        Ok(Self { grid, eta, epsilon, grains, labels })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(BufReader::new(f)).with_context(|| format!("in microstructure {}", path.display()))
    }
}

/// Non-blank, non-comment lines split into words, with line numbers for errors.
struct LineReader<'a> {
    lines: Box<dyn Iterator<Item = (usize, std::io::Result<String>)> + 'a>,
    line: usize,
}

impl LineReader<'_> {
    fn next(&mut self, what: &str) -> Result<Vec<String>> {
        loop {
            let (n, l) = self.lines.next().ok_or_else(|| anyhow!("unexpected end of file, expected {what}"))?;
            let l = l?;
            self.line = n + 1;
            if !l.trim().is_empty() && !l.starts_with('#') {
                return Ok(l.split_whitespace().map(str::to_string).collect());
            }
        }
    }

    fn keyed(&mut self, key: &str, count: usize) -> Result<Vec<String>> {
        let words = self.next(&format!("`{key}`"))?;
        if words.first().map(String::as_str) != Some(key) || words.len() != count + 1 {
            bail!("line {}: expected `{key}` followed by {count} value(s)", self.line);
        }
        Ok(words[1..].to_vec())
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| anyhow!("line {}: cannot parse `{s}`", self.line))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use austensim_core::microstructure::{build_ensemble, generate_polycrystal, seed_nuclei};

    #[test]
    fn microstructure_round_trip() {
        let grid = Grid::square(81, 64.0).unwrap();
        let tess = generate_polycrystal(6, [64.0, 64.0], 3).unwrap();
        let nuclei = seed_nuclei(&tess, 3, 3.0, grid.h_min(), 4).unwrap();
        let ens = build_ensemble(grid, &tess, &[Phase::Gamma; 6], &nuclei, 8.0, 2.0).unwrap();
        let m = Microstructure::from_ensemble(&ens);
        let mut text = Vec::new();
        m.write(&mut text).unwrap();
        let back = Microstructure::read(&text[..]).unwrap();
        assert_eq!(back, m);
        let rebuilt = back.to_ensemble().unwrap();
        let mismatched = rebuilt.labels().iter().zip(&m.labels).filter(|(a, b)| a != b).count();
        // only nodes sitting exactly on a boundary may change owner
        assert!(mismatched * 100 < m.labels.len(), "{mismatched} labels changed");
    }

    #[test]
    fn truncated_file_is_an_error() {
        let text = "nodes 3 1\nh 0.5 0.5\norigin 0 0\ndomain 1 0\neta 1\nepsilon 2\ngrains 1\n0 gamma 0\nlabels\n0 0\n";
        let err = Microstructure::read(text.as_bytes()).unwrap_err();
        assert!(format!("{err:#}").contains("expected 3 labels"), "{err:#}");
    }
}
