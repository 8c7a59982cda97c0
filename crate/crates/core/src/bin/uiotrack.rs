use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uiotrack::config::{ExperimentConfig, Mode};
use uiotrack::experiment::{demo_config, run_experiment_with, RunOptions, RunReport};
use uiotrack::poly::Poly;
use uiotrack::Error;

#[derive(Parser)]
#[command(
    name = "uiotrack",
    version,
    about = "Unknown-input observers, delayed inversion and preview tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Observer gains, partition and zero dynamics.
    Synthesize(RunArgs),
    /// Estimate states and input from simulated output.
    Reconstruct(RunArgs),
    /// Track a desired output with preview.
    Track(RunArgs),
    /// Track a SISO plant that has zeros on the unit circle.
    TrackUc(RunArgs),
    /// Error bound against the FIR delay.
    BoundCurve(RunArgs),
    /// Run one of the built-in examples.
    Demo {
        #[arg(value_parser = ["case1", "case2", "case3", "case4"])]
        case: String,
        #[command(flatten)]
        common: Overrides,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (`key = value` lines).
    config: PathBuf,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// FIR delay.
    #[arg(long)]
    nd: Option<usize>,
    /// Order of a pure-delay controller `z^-nc`, replacing any configured one.
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(nd) = self.nd {
            cfg.n_d = nd;
        }
        if let Some(nc) = self.nc {
            let mut den = vec![0.0; nc + 1];
            den[0] = 1.0;
            cfg.controller = Some((Poly::constant(1.0), Poly::new(den)));
            cfg.n_c = Some(nc);
        }
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
    }
}

fn load(path: &PathBuf, mode: Mode) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    cfg.mode = mode;
    Ok(cfg)
}

fn print(report: &RunReport) {
    for c in &report.checks {
        let verdict = if c.passed { "ok  " } else { "FAIL" };
        match c.limit {
            Some(l) => println!("{verdict} {:<28} {:.3e} <= {:.3e}", c.name, c.value, l),
            None => println!("{verdict} {:<28} {:.3e}", c.name, c.value),
        }
    }
    println!(
        "{} files written, {}",
        report.manifest.len(),
        if report.passed { "passed" } else { "FAILED" }
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, common) = match &cli.command {
        Command::Synthesize(a) => (load(&a.config, Mode::Synthesize), &a.common),
        Command::Reconstruct(a) => (load(&a.config, Mode::Reconstruct), &a.common),
        Command::Track(a) => (load(&a.config, Mode::Track), &a.common),
        Command::TrackUc(a) => (load(&a.config, Mode::TrackUc), &a.common),
        Command::BoundCurve(a) => (load(&a.config, Mode::BoundCurve), &a.common),
        Command::Demo { case, common } => (demo_config(case), common),
    };
    let result = cfg.and_then(|mut cfg| {
        common.apply(&mut cfg);
        run_experiment_with(&cfg, RunOptions { plot: common.plot })
    });
    match result {
        Ok(report) => {
            print(&report);
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code().clamp(2, 255) as u8)
        }
    }
}
