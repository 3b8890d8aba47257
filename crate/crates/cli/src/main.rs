use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dglm_cli::commands;
use dglm_cli::config::RunConfig;
use dglm_cli::data::read_text;
use dglm_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "dglm",
    version,
    about = "Conjugate filtering for dynamic generalized linear models"
)]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true, env = "DGLM_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Input series (`-` for stdin).
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    /// `discount` or `state-space`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// `random-walk`, `linear-trend`, `trend-harmonics`, `custom`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    p0_scale: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// `exact`, `paper` or `matched`.
    #[arg(long)]
    approx: Option<String>,
    /// `error` or `log`.
    #[arg(long)]
    clamp: Option<String>,
    /// `mean` or `harmonic`.
    #[arg(long)]
    plug_in: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            input: self.input.clone(),
            output: self.output.clone(),
            family: self.family.clone(),
            mode: self.mode.clone(),
            delta: self.delta,
            model: self.model.clone(),
            omega: self.omega,
            r0: self.r0,
            s0: self.s0,
            p0_scale: self.p0_scale,
            n: self.n,
            v: self.v,
            alpha: self.alpha,
            nu: self.nu,
            lambda: self.lambda,
            approx: self.approx.clone(),
            clamp: self.clamp.clone(),
            plug_in: self.plug_in.clone(),
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Filter a series and print one record per step plus a summary.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Print `t,y,forecast_mean,lower,upper` instead of JSON.
        #[arg(long)]
        plot_data: bool,
    },
    /// Filter, then forecast `horizon` steps ahead.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        plot_data: bool,
    },
    /// Bayes factors of the configured model against a second one.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Config file for the alternative model.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Alternative model: same config with this delta.
        #[arg(long)]
        delta_b: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        plot_data: bool,
    },
    /// Generate a synthetic series.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        eta0: Option<f64>,
        #[arg(long)]
        lambda0: Option<f64>,
    },
    /// Evaluate a grid of discount factors.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        /// `lo:hi[:step]` or a comma-separated list.
        #[arg(long, default_value = "0.5:0.99")]
        grid: String,
        #[arg(long)]
        likelihood_omega: Option<f64>,
    },
    /// Survivor probabilities from `r,s,gap,nu` rows, or a fitted survival model
    /// from `id,time,event[,covariates]` records.
    Survival {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        boundaries: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gaps: Option<Vec<f64>>,
        #[arg(long)]
        censored_exposure: bool,
    },
}

fn input_text(cfg: &RunConfig) -> Result<String, CliError> {
    let path = cfg.input.clone().unwrap_or_else(|| PathBuf::from("-"));
    read_text(&path)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let base = RunConfig::resolve(cli.config.as_deref())?;
    let merged = |common: &Common, extra: RunConfig| {
        let mut cfg = base.clone();
        cfg.overlay(&common.to_config());
        cfg.overlay(&extra);
        cfg
    };
    let (cfg, job): (
        RunConfig,
        Box<dyn FnOnce(&RunConfig, &mut dyn Write) -> Result<(), CliError>>,
    ) = match cli.command {
        Command::Fit { common, plot_data } => (
            merged(&common, RunConfig::default()),
            Box::new(move |c, out| commands::fit(c, &input_text(c)?, plot_data, out)),
        ),
        Command::Forecast {
            common,
            horizon,
            plot_data,
        } => (
            merged(
                &common,
                RunConfig {
                    horizon,
                    ..Default::default()
                },
            ),
            Box::new(move |c, out| commands::forecast(c, &input_text(c)?, plot_data, out)),
        ),
        Command::Compare {
            common,
            against,
            delta_b,
            window,
            plot_data,
        } => {
            let a = merged(
                &common,
                RunConfig {
                    window,
                    ..Default::default()
                },
            );
            let mut b = match &against {
                Some(p) => {
                    let mut b = RunConfig::load(p)?;
                    // the data source and family come from model A unless B sets them
                    let mut filled = a.clone();
                    filled.overlay(&b);
                    b = filled;
                    b
                }
                None => a.clone(),
            };
            if let Some(d) = delta_b {
                b.delta = Some(d);
            }
            if against.is_none() && delta_b.is_none() {
                return Err(CliError::Config(
                    "compare needs --against or --delta-b".into(),
                ));
            }
            (
                a,
                Box::new(move |c, out| commands::compare(c, &b, &input_text(c)?, plot_data, out)),
            )
        }
        Command::Simulate {
            common,
            length,
            eta0,
            lambda0,
        } => (
            merged(
                &common,
                RunConfig {
                    length,
                    eta0,
                    lambda0,
                    ..Default::default()
                },
            ),
            Box::new(commands::simulate),
        ),
        Command::Gridsearch {
            common,
            grid,
            likelihood_omega,
        } => {
            let grid = commands::parse_grid(&grid)?;
            (
                merged(
                    &common,
                    RunConfig {
                        likelihood_omega,
                        ..Default::default()
                    },
                ),
                Box::new(move |c, out| commands::gridsearch(c, &grid, &input_text(c)?, out)),
            )
        }
        Command::Survival {
            common,
            boundaries,
            gaps,
            censored_exposure,
        } => (
            merged(
                &common,
                RunConfig {
                    boundaries,
                    gaps,
                    censored_exposure: censored_exposure.then_some(true),
                    ..Default::default()
                },
            ),
            Box::new(move |c, out| commands::survival(c, &input_text(c)?, out)),
        ),
    };
    let mut out: Box<dyn Write> = match &cfg.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    job(&cfg, &mut *out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream reader closed early (`| head`)
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dglm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
