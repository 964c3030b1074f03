//! Scenario runner: builds the initial state, steps the coupled solver and
//! writes the output files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use austensim_core::grid::{Grid, ScalarField};
use austensim_core::kinetics::StoredEnergyInput;
use austensim_core::levelset::{LevelSetEnsemble, Phase};
use austensim_core::microstructure::{
    build_ensemble, compute_stats, disk_ensemble, generate_polycrystal, histogram, planar_ensemble, seed_nuclei,
    MorphologyStats,
};
use austensim_core::sim::{
    interface_concentrations_1d, interface_position_1d, lever_rule_fraction, partitioned_concentration, Plateaus,
    SimConfig, SimState, Simulation, StepDiagnostics, Termination,
};
use austensim_core::thermo::{EquilibriumPair, Material};

use crate::config::{InitialSpec, Scenario};
use crate::io::{write_vtk, Microstructure};

/// Initial ensemble and carbon field of a scenario.
pub fn initial_state(scn: &Scenario) -> Result<(LevelSetEnsemble, ScalarField)> {
    let ens = match &scn.file.initial {
        InitialSpec::Planar { length_um, nodes, interface_um, eta_um, epsilon_um } => {
            planar_ensemble(Grid::line(*nodes, *length_um)?, *interface_um, *epsilon_um, *eta_um)?
        }
        InitialSpec::Polycrystal { side_um, nodes, grains, nuclei, nucleus_radius_um, eta_um, epsilon_um, seed } => {
            let grid = Grid::square(*nodes, *side_um)?;
            let tess = generate_polycrystal(*grains, [*side_um, *side_um], *seed)?;
            let nuclei = seed_nuclei(&tess, *nuclei, *nucleus_radius_um, grid.h_min(), seed.wrapping_add(1))?;
            build_ensemble(grid, &tess, &vec![Phase::Gamma; *grains], &nuclei, *epsilon_um, *eta_um)?
        }
        InitialSpec::Disk { side_um, nodes, radius_um, inner_phase, outer_phase, eta_um, epsilon_um } => {
            let grid = Grid::square(*nodes, *side_um)?;
            let c = 0.5 * side_um;
            disk_ensemble(grid, [c, c], *radius_um, [(*inner_phase).into(), (*outer_phase).into()], *epsilon_um, *eta_um)?
        }
        InitialSpec::File { path } => {
            let m = Microstructure::load(&scn.base_dir.join(path))?;
            let h = m.grid.h_min();
            crate::config::check_resolution(h, m.eta, m.epsilon).context("loaded microstructure")?;
            m.to_ensemble()?
        }
    };
    let pf = ens.derive()?.phase_field;
    let c = &scn.file.concentration;
    let conc = partitioned_concentration(&pf, c.c_alpha_wtpct, c.c_gamma_wtpct)?;
    Ok((ens, conc))
}

pub fn sim_config(scn: &Scenario, ens: &LevelSetEnsemble) -> Result<SimConfig> {
    let f = &scn.file;
    let stored_energy = match f.stored_energy {
        Some(s) => {
            let per_grain = ens
                .grains()
                .iter()
                .map(|g| if g.phase == Phase::Alpha { s.alpha_J_per_um3 } else { s.gamma_J_per_um3 })
                .collect();
            Some(StoredEnergyInput::new(per_grain, None)?)
        }
        None => None,
    };
    Ok(SimConfig {
        material: scn.material.clone(),
        schedule: scn.schedule(),
        dt: f.time.dt_s,
        t_end: f.time.t_end_s,
        steady: scn.steady_rule(),
        capillarity: f.physics.capillarity,
        stored_energy,
        beta: f.physics.beta_per_um,
        solver: scn.solver(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub temperature: f64,
    pub alpha_fraction: f64,
    /// 1D only.
    pub interface: Option<f64>,
    /// 1D only: `(C_α^int, C_γ^int)`.
    pub interface_concentrations: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub termination: Termination,
    pub steps: usize,
    pub t: f64,
    pub temperature: f64,
    /// Mean carbon content of the initial state, wt%.
    pub c0: f64,
    pub alpha_fraction: f64,
    pub equilibrium: EquilibriumPair,
    /// Lever-rule fraction at the final temperature from `c0`.
    pub lever_fraction: f64,
    pub plateaus: Plateaus,
    pub interface: Option<f64>,
    pub max_abs_drift: f64,
    pub wall_seconds: f64,
    /// Every step, starting with the initial state.
    pub trajectory: Vec<TrajectoryPoint>,
    pub stats: MorphologyStats,
}

impl RunReport {
    /// First time at which the transformed fraction reaches `share` of its
    /// final increment.
    pub fn time_to_share(&self, share: f64) -> Option<f64> {
        let f0 = self.trajectory.first()?.alpha_fraction;
        let f1 = self.trajectory.last()?.alpha_fraction;
        let target = f0 + share * (f1 - f0);
        let rising = f1 >= f0;
        self.trajectory
            .iter()
            .find(|p| if rising { p.alpha_fraction >= target } else { p.alpha_fraction <= target })
            .map(|p| p.t)
    }

    pub fn render(&self, scn: &Scenario) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.8}"));
        let term = match self.termination {
            Termination::EndTime => "end time",
            Termination::SteadyState => "steady state",
        };
        s += &format!("termination = {term}\n");
        s += &format!("steps = {}\n", self.steps);
        s += &format!("final_time_s = {}\n", self.t);
        s += &format!("final_temperature_K = {}\n", self.temperature);
        s += &format!("initial_mean_carbon_wtpct = {:.8}\n", self.c0);
        s += &format!("ferrite_fraction = {:.6}\n", self.alpha_fraction);
        s += &format!("austenite_fraction = {:.6}\n", 1.0 - self.alpha_fraction);
        s += &format!("lever_rule_ferrite_fraction = {:.6}\n", self.lever_fraction);
        s += &format!("plateau_c_alpha_wtpct = {}\n", opt(self.plateaus.alpha));
        s += &format!("plateau_c_gamma_wtpct = {}\n", opt(self.plateaus.gamma));
        s += &format!("equilibrium_c_alpha_wtpct = {:.8}\n", self.equilibrium.c_alpha);
        s += &format!("equilibrium_c_gamma_wtpct = {:.8}\n", self.equilibrium.c_gamma);
        s += &format!("interface_position_um = {}\n", opt(self.interface));
        s += &format!("max_abs_mass_drift = {:.3e}\n", self.max_abs_drift);
        s += &format!("alpha_grains = {}\n", self.stats.count(Phase::Alpha));
        s += &format!("gamma_grains = {}\n", self.stats.count(Phase::Gamma));
        s += &format!("wall_time_s = {:.2}\n", self.wall_seconds);
        s += "\n# scenario\n";
        s += &scn.source;
        s
    }
}

fn lever(material: &Material, t: f64, c0: f64) -> Result<(EquilibriumPair, f64)> {
    let eq = material.diagram.select(t)?.equilibrium_concentrations(t);
    Ok((eq, lever_rule_fraction(c0, eq.c_alpha, eq.c_gamma)))
}

fn point(state: &SimState, alpha_fraction: f64, material: &Material) -> TrajectoryPoint {
    let interface = interface_position_1d(&state.derived);
    let k = material
        .diagram
        .select(state.temperature)
        .and_then(|s| s.partition_ratio(state.temperature))
        .ok();
    TrajectoryPoint {
        t: state.t,
        temperature: state.temperature,
        alpha_fraction,
        interface,
        interface_concentrations: k.and_then(|k| interface_concentrations_1d(state, k)),
    }
}

struct Outputs {
    dir: PathBuf,
    trajectory: csv::Writer<File>,
    diagnostics: csv::Writer<File>,
    vtk_every: usize,
    csv_every: usize,
    vtk_count: usize,
}

impl Outputs {
    fn create(dir: &Path, scn: &Scenario) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut trajectory = csv::Writer::from_path(dir.join("trajectory.csv"))?;
        trajectory.write_record(["t", "T", "alpha_fraction", "interface_um", "c_alpha_int", "c_gamma_int"])?;
        let mut diagnostics = csv::Writer::from_path(dir.join("diagnostics.csv"))?;
        diagnostics.write_record(["t", "T", "mass", "drift", "minC", "maxC"])?;
        let o = scn.output();
        Ok(Self {
            dir: dir.to_path_buf(),
            trajectory,
            diagnostics,
            vtk_every: o.vtk_every_steps,
            csv_every: o.csv_every_steps,
            vtk_count: 0,
        })
    }

    fn record(&mut self, step: usize, p: &TrajectoryPoint, d: &StepDiagnostics, force: bool) -> Result<()> {
        if step % self.csv_every != 0 && !force {
            return Ok(());
        }
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        self.trajectory.write_record([
            p.t.to_string(),
            p.temperature.to_string(),
            p.alpha_fraction.to_string(),
            opt(p.interface),
            opt(p.interface_concentrations.map(|c| c.0)),
            opt(p.interface_concentrations.map(|c| c.1)),
        ])?;
        self.diagnostics.write_record([d.t, d.temperature, d.mass, d.drift, d.min_c, d.max_c].map(|v| v.to_string()))?;
        Ok(())
    }

    fn snapshot(&mut self, state: &SimState, force: bool) -> Result<()> {
        let due = self.vtk_every > 0 && state.step % self.vtk_every == 0;
        if due || force {
            write_vtk(&self.dir.join(format!("fields_{:04}.vtk", self.vtk_count)), state)?;
            self.vtk_count += 1;
        }
        Ok(())
    }

    fn finish(mut self, report: &RunReport, initial: &MorphologyStats, scn: &Scenario, state: &SimState) -> Result<()> {
        self.trajectory.flush()?;
        self.diagnostics.flush()?;
        write_stats(&self.dir.join("stats.csv"), initial, &report.stats)?;
        Microstructure::from_ensemble(&state.ensemble).save(&self.dir.join("microstructure_final.txt"))?;
        fs::write(self.dir.join("report.txt"), report.render(scn))?;
        Ok(())
    }
}

/// Equivalent-radius histograms of both phases, initial and final.
fn write_stats(path: &Path, initial: &MorphologyStats, fin: &MorphologyStats) -> Result<()> {
    const BINS: usize = 20;
    let largest = [initial, fin]
        .iter()
        .flat_map(|s| s.grains.iter().map(|g| g.equivalent_radius))
        .fold(0.0f64, f64::max);
    let width = if largest > 0.0 { largest * (1.0 + 1e-9) / BINS as f64 } else { 1.0 };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stage", "bin_lo_um", "bin_hi_um", "alpha_grains", "gamma_grains"])?;
    for (stage, s) in [("initial", initial), ("final", fin)] {
        let a = histogram(s.radii(Phase::Alpha), width, BINS);
        let g = histogram(s.radii(Phase::Gamma), width, BINS);
        for k in 0..BINS {
            w.write_record([
                stage.to_string(),
                (k as f64 * width).to_string(),
                ((k + 1) as f64 * width).to_string(),
                a[k].to_string(),
                g[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs a scenario to completion, writing output files into `out` when given.
pub fn run(scn: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    let wall = Instant::now();
    let (ens, conc) = initial_state(scn)?;
    let config = sim_config(scn, &ens)?;
    let c0 = conc.integrate() / conc.grid().measure();
    let mut sim = Simulation::new(config, ens, conc)?;
    let material = scn.material.clone();
    let initial_stats = compute_stats(&sim.state().ensemble, &sim.state().derived.labels);

    let mut outputs = out.map(|d| Outputs::create(d, scn)).transpose()?;
    let first = point(sim.state(), sim.alpha_fraction(), &material);
    let mut trajectory = vec![first];
    let mut max_abs_drift = 0.0f64;
    if let Some(o) = outputs.as_mut() {
        o.record(0, &first, &sim.snapshot(), true)?;
        o.snapshot(sim.state(), true)?;
    }

    let termination = if sim.finished() {
        Termination::EndTime
    } else {
        loop {
            let step = sim.state().step + 1;
            let (d, stop) = match sim.advance() {
                Ok(r) => r,
                Err(e) => {
                    if let Some(dir) = out {
                        let _ = write_vtk(&dir.join("failed_state.vtk"), sim.state());
                    }
                    return Err(e).with_context(|| format!("step {step} (t = {} s)", sim.state().t));
                }
            };
            max_abs_drift = max_abs_drift.max(d.drift.abs());
            let p = point(sim.state(), d.alpha_fraction, &material);
            trajectory.push(p);
            if let Some(o) = outputs.as_mut() {
                o.record(step, &p, &d, stop.is_some())?;
                o.snapshot(sim.state(), stop.is_some())?;
            }
            if let Some(t) = stop {
                break t;
            }
        }
    };

    let state = sim.state();
    let (equilibrium, lever_fraction) = lever(&material, state.temperature, c0)?;
    let report = RunReport {
        termination,
        steps: state.step,
        t: state.t,
        temperature: state.temperature,
        c0,
        alpha_fraction: sim.alpha_fraction(),
        equilibrium,
        lever_fraction,
        plateaus: sim.plateaus(),
        interface: interface_position_1d(&state.derived),
        max_abs_drift,
        wall_seconds: wall.elapsed().as_secs_f64(),
        trajectory,
        stats: compute_stats(&state.ensemble, &state.derived.labels),
    };
    if let Some(o) = outputs {
        o.finish(&report, &initial_stats, scn, state)?;
    }
    Ok(report)
}

/// Writes rows of named columns to a CSV file.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?));
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            bail!("row of {} values for {} columns", r.len(), header.len());
        }
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
