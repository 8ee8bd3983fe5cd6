use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use noma_ee::config::{AccessMode, CsiMode, SolverKind};
use noma_ee::experiment::{self, Overrides, SweepSpec};
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "noma-ee", version, about = "EE optimization for WPT massive MIMO-NOMA networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repetitions (seeds) per sweep point.
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true, value_enum)]
    csi: Option<Csi>,
    #[arg(long = "sigma-e2", global = true)]
    sigma_e2: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    #[arg(long, global = true, value_enum)]
    solver: Option<Solver>,
    /// Write seed-averaged rows instead of one row per seed.
    #[arg(long, global = true)]
    aggregate: bool,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write report.csv plus both traces.
    Run { config: PathBuf },
    /// Run a parameter sweep and write sweep.csv.
    Sweep { sweepspec: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Csi {
    Perfect,
    Imperfect,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Noma,
    Oma,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Admm,
    Oracle,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let o = Overrides {
        seed: cli.seed,
        reps: cli.reps,
        rho: cli.rho,
        epsilon: cli.epsilon,
        csi: cli.csi.map(|c| match c {
            Csi::Perfect => CsiMode::Perfect,
            Csi::Imperfect => CsiMode::Imperfect,
        }),
        sigma_e2: cli.sigma_e2,
        mode: cli.mode.map(|m| match m {
            Mode::Noma => AccessMode::Noma,
            Mode::Oma => AccessMode::Oma,
        }),
        solver: cli.solver.map(|s| match s {
            Solver::Admm => SolverKind::Admm,
            Solver::Oracle => SolverKind::Oracle,
        }),
    };
    match cli.command {
        Command::Run { config } => {
            let run = experiment::run_scenario(&config, &o)
                .with_context(|| format!("running {}", config.display()))?;
            let files = experiment::write_run(&run, &cli.out)?;
            println!(
                "ee={:.6e} bits/J  throughput={:.6e} bits  energy={:.6e} J  outer={} converged={}",
                run.report.ee,
                run.report.total_throughput,
                run.report.total_energy,
                run.dinkelbach.state.iteration,
                run.dinkelbach.state.converged,
            );
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep { sweepspec } => {
            let mut spec = SweepSpec::load(&sweepspec)
                .with_context(|| format!("loading {}", sweepspec.display()))?;
            spec.apply(&o);
            let rows = experiment::run_sweep(&spec, cli.workers)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("sweep.csv");
            let w = BufWriter::new(File::create(&path)?);
            if cli.aggregate {
                experiment::write_aggregate_csv(&spec, &experiment::aggregate(&rows), w)?;
            } else {
                experiment::write_sweep_csv(&spec, &rows, w)?;
            }
            let failed = rows.iter().filter(|r| r.result.is_err()).count();
            println!("{} points, {} failed; wrote {}", rows.len(), failed, path.display());
        }
    }
    Ok(())
}
