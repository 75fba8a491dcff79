use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mlheat_cli::{commands, load_config, presets, CliError};

#[derive(Parser)]
#[command(name = "mlheat", version, about = "Mass-lumped FEM experiments for the radial semilinear heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error convergence against a fine reference mesh.
    Converge(Common),
    /// Per-step energy functionals along a time-controlled run.
    Energy(Common),
    /// Truncated blow-up times per case, mesh and time control.
    Blowup(Common),
    /// Smallest eigenvalues of the lumped and consistent problems.
    Eigen(Common),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled experiment, see `mlheat presets`.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for the CSV file.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    let (which, common) = match command {
        Command::Presets => {
            for (name, _) in presets::PRESETS {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Converge(c) => ("converge", c),
        Command::Energy(c) => ("energy", c),
        Command::Blowup(c) => ("blowup", c),
        Command::Eigen(c) => ("eigen", c),
    };
    let cfg = load_config(common.preset.as_deref(), common.config.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .context("building thread pool")?;
    let (name, csv) = pool.install(|| -> mlheat_cli::Result<(String, String)> {
        Ok(match which {
            "converge" => {
                let plan = cfg.converge_plan()?;
                (plan.name.clone(), commands::cmd_converge(&plan)?)
            }
            "energy" => {
                let plan = cfg.energy_plan()?;
                (plan.name.clone(), commands::cmd_energy(&plan)?)
            }
            "blowup" => {
                let plan = cfg.blowup_plan()?;
                (plan.name.clone(), commands::cmd_blowup(&plan)?)
            }
            _ => {
                let plan = cfg.eigen_plan()?;
                (plan.name.clone(), commands::cmd_eigen(&plan)?)
            }
        })
    })?;
    write_output(&common.out, &name, &csv)
}

fn write_output(dir: &Path, name: &str, csv: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{name}.csv"));
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    for line in csv.lines().filter(|l| l.starts_with('#')) {
        println!("{line}");
    }
    println!("wrote {}", path.display());
    Ok(())
}
