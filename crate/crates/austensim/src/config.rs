//! Material and scenario files.
//!
//! Both are TOML. Every key carries its unit as a suffix (`_K`, `_um`, `_s`,
//! `_wtpct`, ...). Required keys have no defaults: a missing key is reported
//! by name. Optional sections (`steady`, `solver`, `output`, `oracle`,
//! `stored_energy`, `full_scale`) either appear complete or not at all.

// Field names mirror the keys, units and all.
#![allow(non_snake_case)]

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use austensim_core::levelset::Phase;
use austensim_core::linalg::SolverSettings;
use austensim_core::sim::SteadyRule;
use austensim_core::thermo::{
    ArrheniusLaw, CoolingSchedule, Diffusivities, InterfaceClass, InterfaceProperties, LinearizedPhaseDiagram,
    Material, ReferenceState, TemperatureRange,
};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceStateEntry {
    t_ref_K: f64,
    c_alpha_ref_wtpct: f64,
    c_gamma_ref_wtpct: f64,
    m_alpha_K_per_wtpct: f64,
    m_gamma_K_per_wtpct: f64,
    delta_s_J_per_K_um3: f64,
    valid_from_K: f64,
    valid_to_K: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterfaceEntry {
    mobility_prefactor_um4_per_J_s: f64,
    mobility_activation_J_per_mol: f64,
    energy_J_per_um2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterfaceTable {
    alpha_gamma: InterfaceEntry,
    alpha_alpha: InterfaceEntry,
    gamma_gamma: InterfaceEntry,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffusivityEntry {
    prefactor_um2_per_s: f64,
    activation_J_per_mol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffusivityTable {
    alpha: DiffusivityEntry,
    gamma: DiffusivityEntry,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialFile {
    reference_state: Vec<ReferenceStateEntry>,
    interfaces: InterfaceTable,
    diffusivity: DiffusivityTable,
}

fn interface_class(e: &InterfaceEntry, name: &str) -> Result<InterfaceClass> {
    let mobility = ArrheniusLaw::new(e.mobility_prefactor_um4_per_J_s, e.mobility_activation_J_per_mol)
        .with_context(|| format!("interfaces.{name}"))?;
    Ok(InterfaceClass { mobility, energy: e.energy_J_per_um2 })
}

pub fn parse_material(text: &str) -> Result<Material> {
    let file: MaterialFile = toml::from_str(text)?;
    let states = file
        .reference_state
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let range = TemperatureRange::new(s.valid_from_K, s.valid_to_K)?;
            ReferenceState::new(
                s.t_ref_K,
                s.c_alpha_ref_wtpct,
                s.c_gamma_ref_wtpct,
                s.m_alpha_K_per_wtpct,
                s.m_gamma_K_per_wtpct,
                s.delta_s_J_per_K_um3,
                range,
            )
            .with_context(|| format!("reference_state #{}", i + 1))
            .map_err(Into::into)
        })
        .collect::<Result<Vec<_>>>()?;
    let diagram = LinearizedPhaseDiagram::new(states)?;
    let t = &file.interfaces;
    let interfaces = InterfaceProperties::new(
        interface_class(&t.alpha_gamma, "alpha_gamma")?,
        interface_class(&t.alpha_alpha, "alpha_alpha")?,
        interface_class(&t.gamma_gamma, "gamma_gamma")?,
    )?;
    let d = &file.diffusivity;
    let diffusivity = Diffusivities {
        alpha: ArrheniusLaw::new(d.alpha.prefactor_um2_per_s, d.alpha.activation_J_per_mol).context("diffusivity.alpha")?,
        gamma: ArrheniusLaw::new(d.gamma.prefactor_um2_per_s, d.gamma.activation_J_per_mol).context("diffusivity.gamma")?,
    };
    Ok(Material { diagram, interfaces, diffusivity })
}

pub fn load_material(path: &Path) -> Result<Material> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_material(&text).with_context(|| format!("in material file {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseName {
    Alpha,
    Gamma,
}

impl From<PhaseName> for Phase {
    fn from(p: PhaseName) -> Phase {
        match p {
            PhaseName::Alpha => Phase::Alpha,
            PhaseName::Gamma => Phase::Gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    /// 1D: ferrite on `[0, interface_um)`, austenite beyond.
    Planar { length_um: f64, nodes: usize, interface_um: f64, eta_um: f64, epsilon_um: f64 },
    /// 2D: Voronoi austenite grains with ferrite nuclei on their boundaries.
    Polycrystal {
        side_um: f64,
        nodes: usize,
        grains: usize,
        nuclei: usize,
        nucleus_radius_um: f64,
        eta_um: f64,
        epsilon_um: f64,
        seed: u64,
    },
    /// 2D: one disk grain centred in a square matrix grain.
    Disk {
        side_um: f64,
        nodes: usize,
        radius_um: f64,
        inner_phase: PhaseName,
        outer_phase: PhaseName,
        eta_um: f64,
        epsilon_um: f64,
    },
    /// A microstructure saved by an earlier run.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSpec {
    pub c_alpha_wtpct: f64,
    pub c_gamma_wtpct: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSpec {
    Instantaneous { initial_K: f64, final_K: f64 },
    Linear { initial_K: f64, final_K: f64, rate_K_per_s: f64 },
    Piecewise { knots_s_K: Vec<[f64; 2]> },
}

impl ScheduleSpec {
    pub fn to_schedule(&self) -> CoolingSchedule {
        match self {
            ScheduleSpec::Instantaneous { initial_K, final_K } => {
                CoolingSchedule::Instantaneous { t_initial: *initial_K, t_final: *final_K }
            }
            ScheduleSpec::Linear { initial_K, final_K, rate_K_per_s } => {
                CoolingSchedule::Linear { t_initial: *initial_K, t_final: *final_K, rate: *rate_K_per_s }
            }
            ScheduleSpec::Piecewise { knots_s_K } => CoolingSchedule::Piecewise(knots_s_K.iter().map(|k| (k[0], k[1])).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt_s: f64,
    pub t_end_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySpec {
    /// Allowed total mean interface displacement over the window, in units of h.
    pub fraction_of_h: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredEnergySpec {
    pub alpha_J_per_um3: f64,
    pub gamma_J_per_um3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    pub capillarity: bool,
    /// Decay rate of the velocity extension away from the interface; 3/η when absent.
    pub beta_per_um: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Field snapshots every this many steps; 0 writes only the first and last.
    pub vtk_every_steps: usize,
    pub csv_every_steps: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { vtk_every_steps: 0, csv_every_steps: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub dt_s: f64,
    pub record_every_steps: usize,
    pub steady_speed_um_per_s: f64,
    pub steady_window_s: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { dt_s: 2e-4, record_every_steps: 50, steady_speed_um_per_s: 1e-4, steady_window_s: 1.0 }
    }
}

/// Replaces the polycrystal geometry and the time step under `--full-scale`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullScaleSpec {
    pub side_um: f64,
    pub nodes: usize,
    pub grains: usize,
    pub nuclei: usize,
    pub dt_s: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub material: PathBuf,
    pub initial: InitialSpec,
    pub concentration: ConcentrationSpec,
    pub schedule: ScheduleSpec,
    pub time: TimeSpec,
    pub physics: PhysicsSpec,
    pub steady: Option<SteadySpec>,
    pub stored_energy: Option<StoredEnergySpec>,
    pub solver: Option<SolverSpec>,
    pub output: Option<OutputSpec>,
    pub oracle: Option<OracleSpec>,
    pub full_scale: Option<FullScaleSpec>,
}

/// A parsed scenario with its material resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub material: Material,
    /// Directory relative paths in the file are resolved against.
    pub base_dir: PathBuf,
    pub source: String,
}

/// Node spacing, η and ε of a generated initial state.
pub fn check_resolution(h: f64, eta: f64, epsilon: f64) -> Result<()> {
    if !(h > 0.0 && eta > 0.0) {
        bail!("grid spacing and eta_um must be positive");
    }
    if h > eta / 6.0 * (1.0 + 1e-12) {
        bail!("grid spacing {h} µm exceeds eta/6 = {} µm", eta / 6.0);
    }
    if epsilon < 2.0 * eta * (1.0 - 1e-12) {
        bail!("epsilon_um {epsilon} is below 2·eta = {}", 2.0 * eta);
    }
    if epsilon < 8.0 * h * (1.0 - 1e-12) {
        bail!("epsilon_um {epsilon} spans fewer than 8 nodes (h = {h} µm)");
    }
    Ok(())
}

impl Scenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        let material = load_material(&base_dir.join(&file.material))?;
        let s = Self { file, material, base_dir: base_dir.to_path_buf(), source: text.to_string() };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in scenario {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        let f = &self.file;
        if !(f.time.dt_s > 0.0) {
            bail!("time.dt_s must be positive");
        }
        if !(f.time.t_end_s > 0.0) {
            bail!("time.t_end_s must be positive");
        }
        match &f.initial {
            InitialSpec::Planar { length_um, nodes, interface_um, eta_um, epsilon_um } => {
                if *nodes < 3 || !(*interface_um > 0.0 && interface_um < length_um) {
                    bail!("initial: need nodes >= 3 and 0 < interface_um < length_um");
                }
                check_resolution(length_um / (*nodes - 1) as f64, *eta_um, *epsilon_um)?;
            }
            InitialSpec::Polycrystal { side_um, nodes, eta_um, epsilon_um, .. }
            | InitialSpec::Disk { side_um, nodes, eta_um, epsilon_um, .. } => {
                if *nodes < 3 {
                    bail!("initial.nodes must be at least 3");
                }
                check_resolution(side_um / (*nodes - 1) as f64, *eta_um, *epsilon_um)?;
            }
            InitialSpec::File { .. } => {}
        }
        if let Some(o) = &f.output {
            if o.csv_every_steps == 0 {
                bail!("output.csv_every_steps must be at least 1");
            }
        }
        self.file.schedule.to_schedule().validate()?;
        Ok(())
    }

    /// The scenario with its `[full_scale]` geometry swapped in.
    pub fn full_scale(&self) -> Result<Self> {
        let Some(fs) = self.file.full_scale else {
            bail!("scenario has no [full_scale] section");
        };
        let mut out = self.clone();
        match &mut out.file.initial {
            InitialSpec::Polycrystal { side_um, nodes, grains, nuclei, .. } => {
                *side_um = fs.side_um;
                *nodes = fs.nodes;
                *grains = fs.grains;
                *nuclei = fs.nuclei;
            }
            _ => bail!("[full_scale] applies only to polycrystal scenarios"),
        }
        out.file.time.dt_s = fs.dt_s;
        out.validate()?;
        Ok(out)
    }

    pub fn schedule(&self) -> CoolingSchedule {
        self.file.schedule.to_schedule()
    }

    pub fn steady_rule(&self) -> Option<SteadyRule> {
        self.file.steady.map(|s| SteadyRule { fraction: s.fraction_of_h, steps: s.steps })
    }

    pub fn solver(&self) -> SolverSettings {
        self.file
            .solver
            .map(|s| SolverSettings { relative_tolerance: s.relative_tolerance, max_iterations: s.max_iterations })
            .unwrap_or_default()
    }

    pub fn output(&self) -> OutputSpec {
        self.file.output.unwrap_or_default()
    }

    pub fn oracle(&self) -> OracleSpec {
        self.file.oracle.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MATERIAL: &str = r#"
[[reference_state]]
t_ref_K = 1160.0
c_alpha_ref_wtpct = 0.0029083
c_gamma_ref_wtpct = 0.054289
m_alpha_K_per_wtpct = -8746.564
m_gamma_K_per_wtpct = -416.959
delta_s_J_per_K_um3 = 2.8481175e-13
valid_from_K = 1125.0
valid_to_K = 1175.0

[interfaces.alpha_gamma]
mobility_prefactor_um4_per_J_s = 6e17
mobility_activation_J_per_mol = 140000.0
energy_J_per_um2 = 0.0
[interfaces.alpha_alpha]
mobility_prefactor_um4_per_J_s = 6e17
mobility_activation_J_per_mol = 140000.0
energy_J_per_um2 = 0.0
[interfaces.gamma_gamma]
mobility_prefactor_um4_per_J_s = 6e17
mobility_activation_J_per_mol = 140000.0
energy_J_per_um2 = 0.0

[diffusivity.alpha]
prefactor_um2_per_s = 2.2e8
activation_J_per_mol = 122500.0
[diffusivity.gamma]
prefactor_um2_per_s = 1.5e7
activation_J_per_mol = 142100.0
"#;

    #[test]
    fn material_round_trip() {
        let m = parse_material(MATERIAL).unwrap();
        assert_eq!(m.diagram.states().len(), 1);
        assert_eq!(m.diagram.states()[0].t_ref, 1160.0);
        assert_eq!(m.diffusivity.gamma.activation_energy, 142100.0);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MATERIAL.replace("prefactor_um2_per_s = 1.5e7\n", "");
        let err = format!("{:#}", parse_material(&text).unwrap_err());
        assert!(err.contains("prefactor_um2_per_s"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MATERIAL.replace("valid_to_K = 1175.0", "valid_to_K = 1175.0\nvalid_to_C = 900.0");
        let err = format!("{:#}", parse_material(&text).unwrap_err());
        assert!(err.contains("valid_to_C"), "{err}");
    }

    fn scenario(initial: &str) -> Result<Scenario> {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.toml"), MATERIAL).unwrap();
        let text = format!(
            r#"
material = "m.toml"
{initial}
[concentration]
c_alpha_wtpct = 0.0014022
c_gamma_wtpct = 0.024575
[schedule]
kind = "instantaneous"
initial_K = 1173.0
final_K = 1140.0
[time]
dt_s = 0.001
t_end_s = 10.0
[physics]
capillarity = false
"#
        );
        Scenario::parse(&text, dir.path())
    }

    #[test]
    fn planar_scenario_parses() {
        let s = scenario(
            "[initial]\nkind = \"planar\"\nlength_um = 6.0\nnodes = 241\ninterface_um = 1.1838\neta_um = 0.5\nepsilon_um = 1.0",
        )
        .unwrap();
        assert!(matches!(s.file.initial, InitialSpec::Planar { nodes: 241, .. }));
        assert_eq!(s.schedule().final_temperature(), 1140.0);
        assert!(s.steady_rule().is_none());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let err = scenario(
            "[initial]\nkind = \"planar\"\nlength_um = 6.0\nnodes = 61\ninterface_um = 1.1838\neta_um = 0.5\nepsilon_um = 1.0",
        )
        .unwrap_err();
        assert!(format!("{err:#}").contains("eta/6"), "{err:#}");
    }

    #[test]
    fn missing_scenario_key_is_named() {
        let err = scenario("[initial]\nkind = \"planar\"\nlength_um = 6.0\nnodes = 241\neta_um = 0.5\nepsilon_um = 1.0")
            .unwrap_err();
        assert!(format!("{err:#}").contains("interface_um"), "{err:#}");
    }
}
