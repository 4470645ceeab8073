use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liegen_cli::{run_experiment, EpsSpec, Experiment, ExperimentConfig, RunError, System};

#[derive(Parser)]
#[command(name = "liegen", version, about = "Magnus and averaging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Van der Pol stroboscopic averaging (`vdp-averaging`).
    Vdp(Common),
    /// Refined Van der Pol limit cycle (`vdp-limit-cycle`).
    LimitCycle(Common),
    /// Averaging of the spectral NLS toy (`nls-averaging`).
    Nls(Common),
    /// Linear Magnus order scaling (`magnus-linear-order`).
    MagnusLinear(Common),
    /// Nonlinear Magnus reconstruction (`magnus-nonlinear`).
    MagnusNonlinear {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_system)]
        system: Option<System>,
    },
    /// Four-route linear Magnus cross-check (`oracle-crosscheck`).
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// One value or a comma-separated sweep.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    quad_nodes: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_system(s: &str) -> Result<System, String> {
    match s {
        "vdp" => Ok(System::Vdp),
        "nls1d" => Ok(System::Nls1d),
        _ => Err(format!("unknown system `{s}` (expected vdp or nls1d)")),
    }
}

impl Common {
    fn into_config(self, experiment: Experiment) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(experiment);
        c.eps = match self.eps.len() {
            0 => None,
            1 => Some(EpsSpec::Scalar(self.eps[0])),
            _ => Some(EpsSpec::List(self.eps)),
        };
        c.order = self.order;
        c.t_end = self.t_end;
        c.quad_nodes = self.quad_nodes;
        c.tol = self.tol;
        c.seed = self.seed;
        c.out_dir = self.out;
        c
    }
}

fn config(cmd: Command) -> Result<ExperimentConfig, RunError> {
    Ok(match cmd {
        Command::Run { config } => ExperimentConfig::from_path(&config)?,
        Command::Vdp(c) => c.into_config(Experiment::VdpAveraging),
        Command::LimitCycle(c) => c.into_config(Experiment::VdpLimitCycle),
        Command::Nls(c) => c.into_config(Experiment::NlsAveraging),
        Command::MagnusLinear(c) => c.into_config(Experiment::MagnusLinearOrder),
        Command::MagnusNonlinear { common, system } => {
            let mut c = common.into_config(Experiment::MagnusNonlinear);
            c.system = system;
            c
        }
        Command::Oracle(c) => c.into_config(Experiment::OracleCrosscheck),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config(cli.command).and_then(|c| run_experiment(&c));
    match result {
        Ok(outcome) => {
            for c in &outcome.report.checks {
                let status = if c.pass { "ok  " } else { "FAIL" };
                println!("{status} {} = {:e}", c.name, c.value);
            }
            println!(
                "{}: {} ({})",
                outcome.config.experiment,
                if outcome.pass() { "pass" } else { "tolerance violated" },
                outcome.config.out_dir.display()
            );
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("liegen: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
