//! Sharp-interface reference runs for planar scenarios and their
//! comparison with the level-set solution.

use std::path::Path;

use anyhow::{bail, Result};
use austensim_core::oracle::{OracleModel, OracleRecord, OracleRun, OracleSetup, SteadyCriterion};

use crate::config::{InitialSpec, Scenario};
use crate::run::{run, write_table, RunReport};

pub fn oracle_model(scn: &Scenario) -> Result<OracleModel> {
    let InitialSpec::Planar { length_um, interface_um, .. } = scn.file.initial else {
        bail!("the sharp-interface model needs a planar scenario");
    };
    let c = scn.file.concentration;
    let setup = OracleSetup {
        length: length_um,
        gamma0: interface_um,
        c_alpha_initial: c.c_alpha_wtpct,
        c_gamma_initial: c.c_gamma_wtpct,
    };
    Ok(OracleModel::new(scn.material.clone(), scn.schedule(), setup)?)
}

/// Runs the model with the scenario's `[oracle]` settings; `stride`
/// overrides the recording interval.
pub fn run_oracle(scn: &Scenario, stride: Option<usize>) -> Result<OracleRun> {
    let o = scn.oracle();
    let steady = SteadyCriterion { speed: o.steady_speed_um_per_s, window: o.steady_window_s };
    let model = oracle_model(scn)?;
    Ok(model.run(o.dt_s, scn.file.time.t_end_s, Some(steady), stride.unwrap_or(o.record_every_steps))?)
}

pub const ORACLE_COLUMNS: [&str; 8] =
    ["t", "T", "gamma_um", "c_gamma_int", "c_alpha_int", "c_gamma_0", "v_n", "mass_residual"];

pub fn write_oracle_csv(path: &Path, records: &[OracleRecord]) -> Result<()> {
    write_table(
        path,
        &ORACLE_COLUMNS,
        records.iter().map(|r| {
            vec![r.t, r.temperature, r.gamma, r.c_gamma_int, r.c_alpha_int, r.c_gamma_0, r.velocity, r.mass_residual]
        }),
    )
}

/// Record at time `t`, linearly interpolated; the last record holds after
/// the model stopped.
fn record_at(records: &[OracleRecord], t: f64) -> OracleRecord {
    let k = records.partition_point(|r| r.t < t);
    if k == 0 {
        return records[0];
    }
    if k >= records.len() {
        return records[records.len() - 1];
    }
    let (a, b) = (records[k - 1], records[k]);
    let w = (t - a.t) / (b.t - a.t);
    let mix = |x: f64, y: f64| x + w * (y - x);
    OracleRecord {
        t,
        temperature: mix(a.temperature, b.temperature),
        gamma: mix(a.gamma, b.gamma),
        c_gamma_int: mix(a.c_gamma_int, b.c_gamma_int),
        c_alpha_int: mix(a.c_alpha_int, b.c_alpha_int),
        c_gamma_0: mix(a.c_gamma_0, b.c_gamma_0),
        velocity: mix(a.velocity, b.velocity),
        mass_residual: mix(a.mass_residual, b.mass_residual),
        flux_residual: mix(a.flux_residual, b.flux_residual),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub gamma_ls: f64,
    pub gamma_oracle: f64,
    pub c_gamma_int_ls: f64,
    pub c_gamma_int_oracle: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub length: f64,
    pub rows: Vec<ComparisonRow>,
    /// Largest `|Γ_LS − Γ_oracle|`, µm.
    pub sup_gamma_difference: f64,
    /// First time at which the austenite diffusion length `sqrt(D_γ t)`
    /// reaches the remaining austenite length `X − Γ`: the far-field
    /// concentration starts to rise and the profiles are established.
    pub transient_end: f64,
    /// Largest relative `C_γ^int` difference after `transient_end`.
    pub max_relative_c_gamma_int: f64,
}

/// Level-set run and sharp-interface model on the same planar scenario.
pub fn compare(scn: &Scenario, out: Option<&Path>) -> Result<(RunReport, Comparison)> {
    let InitialSpec::Planar { length_um, .. } = scn.file.initial else {
        bail!("comparison needs a planar scenario");
    };
    let oracle = run_oracle(scn, Some(1))?;
    let report = run(scn, out)?;
    let d_gamma = scn.material.diffusivity.gamma;
    let mut rows = Vec::with_capacity(report.trajectory.len());
    let mut transient_end = f64::INFINITY;
    for p in &report.trajectory {
        let (Some(x), Some((_, c))) = (p.interface, p.interface_concentrations) else { continue };
        let o = record_at(&oracle.records, p.t);
        if transient_end.is_infinite() && p.t > 0.0 && (d_gamma.eval(p.temperature) * p.t).sqrt() >= length_um - o.gamma {
            transient_end = p.t;
        }
        rows.push(ComparisonRow { t: p.t, gamma_ls: x, gamma_oracle: o.gamma, c_gamma_int_ls: c, c_gamma_int_oracle: o.c_gamma_int });
    }
    let sup_gamma_difference = rows.iter().map(|r| (r.gamma_ls - r.gamma_oracle).abs()).fold(0.0, f64::max);
    let max_relative_c_gamma_int = rows
        .iter()
        .filter(|r| r.t >= transient_end)
        .map(|r| ((r.c_gamma_int_ls - r.c_gamma_int_oracle) / r.c_gamma_int_oracle).abs())
        .fold(0.0, f64::max);
    if let Some(dir) = out {
        write_oracle_csv(&dir.join("oracle.csv"), &oracle.records)?;
        write_table(
            &dir.join("comparison.csv"),
            &["t", "gamma_ls_um", "gamma_oracle_um", "c_gamma_int_ls", "c_gamma_int_oracle"],
            rows.iter().map(|r| vec![r.t, r.gamma_ls, r.gamma_oracle, r.c_gamma_int_ls, r.c_gamma_int_oracle]),
        )?;
    }
    Ok((report, Comparison { length: length_um, rows, sup_gamma_difference, transient_end, max_relative_c_gamma_int }))
}
