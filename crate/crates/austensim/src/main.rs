use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use austensim::config::{load_material, Scenario};
use austensim::oracle::{compare, run_oracle, write_oracle_csv};
use austensim::run::run;
use austensim::validate::{run_suite, Suite};
use austensim_core::sim::lever_rule_fraction;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "austensim", version, about = "Austenite to ferrite transformation in two-phase polycrystals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report, CSV and VTK files.
    Run {
        scenario: PathBuf,
        /// Use the scenario's [full_scale] geometry.
        #[arg(long)]
        full_scale: bool,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sharp-interface reference solution of a planar scenario.
    Oracle {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the level-set solver and write both trajectories side by side.
        #[arg(long)]
        compare: bool,
    },
    /// Equilibrium concentrations, partition ratio and lever-rule fraction.
    Equilibrium {
        material: PathBuf,
        /// Temperature, K.
        #[arg(long = "T")]
        temperature: f64,
        /// Overall carbon content, wt%.
        #[arg(long = "C0")]
        c0: f64,
    },
    /// Run a property suite; exits non-zero on failure.
    Validate {
        #[arg(value_enum)]
        suite: Suite,
        /// Directory holding the shipped scenarios and materials.
        #[arg(long, default_value = "scenarios")]
        dir: PathBuf,
    },
}

fn default_out(scenario: &Path) -> PathBuf {
    let stem = scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    Path::new("out").join(stem)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { scenario, full_scale, out } => {
            let mut scn = Scenario::load(&scenario)?;
            if full_scale {
                scn = scn.full_scale()?;
            }
            let out = out.unwrap_or_else(|| default_out(&scenario));
            let report = run(&scn, Some(&out))?;
            print!("{}", report.render(&scn).split("\n# scenario").next().unwrap_or_default());
            println!("outputs in {}", out.display());
        }
        Command::Oracle { scenario, out, compare: side_by_side } => {
            let scn = Scenario::load(&scenario)?;
            let out = out.unwrap_or_else(|| default_out(&scenario));
            std::fs::create_dir_all(&out)?;
            if side_by_side {
                let (_, cmp) = compare(&scn, Some(&out))?;
                println!("sup |Gamma_LS - Gamma_oracle| = {:.4} um ({:.2}% of X)", cmp.sup_gamma_difference, 100.0 * cmp.sup_gamma_difference / cmp.length);
                println!("transient ends at t = {:.3} s", cmp.transient_end);
                println!("max relative C_gamma^int difference afterwards = {:.2}%", 100.0 * cmp.max_relative_c_gamma_int);
            } else {
                let r = run_oracle(&scn, None)?;
                write_oracle_csv(&out.join("oracle.csv"), &r.records)?;
                let last = r.last();
                println!("termination = {:?}", r.termination);
                println!("t = {} s, Gamma = {:.6} um, C_gamma^int = {:.6} wt%", last.t, last.gamma, last.c_gamma_int);
            }
            println!("outputs in {}", out.display());
        }
        Command::Equilibrium { material, temperature, c0 } => {
            let m = load_material(&material)?;
            let state = m.diagram.select(temperature)?;
            let eq = state.equilibrium_concentrations(temperature);
            let k = state.partition_ratio(temperature)?;
            println!("T = {temperature} K (reference state {} K)", state.t_ref);
            println!("c_alpha_eq = {:.7} wt%", eq.c_alpha);
            println!("c_gamma_eq = {:.7} wt%", eq.c_gamma);
            println!("k = {k:.6}");
            println!("lever-rule ferrite fraction at C0 = {c0} wt%: {:.5}", lever_rule_fraction(c0, eq.c_alpha, eq.c_gamma));
        }
        Command::Validate { suite, dir } => {
            let report = run_suite(suite, &dir)?;
            for c in &report.checks {
                println!("{c}");
            }
            if !report.passed() {
                println!("suite {suite:?} FAILED");
                return Ok(ExitCode::FAILURE);
            }
            println!("suite {suite:?} passed");
        }
    }
    Ok(ExitCode::SUCCESS)
}
