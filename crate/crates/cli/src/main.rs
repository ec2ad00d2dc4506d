use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stakeurn::harness::csvio::{write_analytic, write_sweep, write_trajectory};
use stakeurn::{
    analytic_report, run_direct, run_sweep, Error, FileConfig, Result, Sim3Config, SimKind,
    SweepSpec,
};

const FULL_SCALE_H_MAX: u64 = 200_000;
const FULL_SCALE_TRAJECTORIES: u32 = 100;

#[derive(Parser)]
#[command(
    name = "stakeurn",
    version,
    about = "Staking-derivative risk model simulations and sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    trajectories: Option<u32>,
    #[arg(long = "h-max", global = true)]
    h_max: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Paper scale: 200,000 blocks and 100 trajectories unless overridden.
    #[arg(long = "full-scale", global = true)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form ruin, terminal-law and safe-borrow table.
    Analytic {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0])]
        k: Vec<f64>,
        #[arg(long = "sigma2", value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        sigma2: Vec<f64>,
    },
    /// Two-component trajectories, one CSV per trajectory.
    Sim2,
    /// Three-component trajectories, one CSV per trajectory.
    Sim3,
    /// Two-component parameter sweep.
    Sweep2,
    /// Three-component parameter sweep.
    Sweep3,
}

impl Common {
    fn file(&self) -> Result<FileConfig> {
        match &self.config {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }

    fn apply(&self, cfg: &mut Sim3Config) {
        if self.full_scale {
            cfg.sim.h_max = FULL_SCALE_H_MAX;
            cfg.sim.trajectories = FULL_SCALE_TRAJECTORIES;
        }
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        if let Some(t) = self.trajectories {
            cfg.sim.trajectories = t;
        }
        if let Some(h) = self.h_max {
            cfg.sim.h_max = h;
        }
    }

    fn threads(&self) -> usize {
        self.threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Error::io_with(self.out.display().to_string(), e))?;
        Ok(&self.out)
    }
}

fn simulate(common: &Common, kind: SimKind, name: &str) -> Result<()> {
    let mut cfg = common.file()?.sim3();
    common.apply(&mut cfg);
    let runs = run_direct(kind, &cfg, common.threads())?;
    let out = common.out_dir()?;
    for (t, rows) in runs.iter().enumerate() {
        write_trajectory(&out.join(format!("{name}_t{t:03}.csv")), rows)?;
    }
    log::info!("wrote {} trajectories to {}", runs.len(), out.display());
    Ok(())
}

fn sweep(common: &Common, kind: SimKind, name: &str) -> Result<()> {
    let mut spec: SweepSpec = common.file()?.sweep(kind);
    common.apply(&mut spec.base);
    let out = common.out_dir()?;
    let grid = run_sweep(
        &spec,
        common.threads(),
        Some(&out.join(format!("{name}.manifest.json"))),
    )?;
    write_sweep(&out.join(format!("{name}.csv")), &grid)
}

fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Analytic { p, k, sigma2 } => {
            let rows = analytic_report(p, k, sigma2)?;
            write_analytic(&c.out_dir()?.join("analytic.csv"), &rows)
        }
        Command::Sim2 => simulate(c, SimKind::Sim2, "sim2"),
        Command::Sim3 => simulate(c, SimKind::Sim3, "sim3"),
        Command::Sweep2 => sweep(c, SimKind::Sim2, "sweep2"),
        Command::Sweep3 => sweep(c, SimKind::Sim3, "sweep3"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stakeurn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
