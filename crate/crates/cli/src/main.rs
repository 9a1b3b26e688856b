//! `innervar`: solve for good-solution families and verify the quantitative
//! estimates on gallery maps or CF64 fields.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage, 3 I/O,
//! 4 no convergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "innervar", version, about = "Good solutions and estimates for h_zbar = H(z, h_z)")]
struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Structure address, e.g. `rational:a=6,b=-2` or `hopf:phi=const:-1`.
    #[arg(long)]
    structure: Option<String>,
    /// Grid half width A.
    #[arg(long)]
    a: Option<f64>,
    /// Samples per axis (power of two).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `auto` or a radius.
    #[arg(long)]
    rho: Option<String>,
    /// Family size on the circle.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transform identities, gallery derivative and claim checks, structure sampling.
    Selftest {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write selftest.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale the transform multipliers by 1 + EPS (fault injection).
        #[arg(long, hide = true)]
        perturb_multiplier: Option<f64>,
    },
    /// Solve the good-solution family on |lambda| = rho.
    Solve(RunArgs),
    /// Check certificates, distortion, degree and injectivity for a map h.
    Verify {
        /// `gallery:<name>` or a CF64 file.
        #[arg(long)]
        h: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Summarize report CSVs of one run, or compare several runs.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Emit CSV instead of a text table.
        #[arg(long)]
        csv: bool,
        /// Also write the summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form example maps.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
}

#[derive(Subcommand, Debug)]
enum GalleryAction {
    List,
    /// Write `<name>.cf64` and `<name>_claims.csv`.
    Dump {
        name: String,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run_config(cli_config: Option<&PathBuf>, command: &str, h: Option<String>, args: RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match cli_config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            config::ConfigError::Usage(m) => Failure::Usage(m),
            config::ConfigError::Io(m) => Failure::Io(m),
        })?,
        None => RunConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(Failure::Usage(format!("the config file is for `{c}`, not `{command}`")));
        }
    }
    cfg.command = Some(command.to_string());
    if let Some(v) = args.structure {
        cfg.structure = Some(v);
    }
    if let Some(v) = h {
        cfg.h = Some(v);
    }
    if let Some(v) = args.a {
        cfg.a = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.tol {
        cfg.tol = Some(v);
    }
    if let Some(v) = args.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = args.rho {
        cfg.rho = config::parse_rho(&v).map_err(Failure::Usage)?;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.out {
        cfg.out = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn run(cli: Cli) -> commands::CmdResult {
    match cli.command {
        Command::Selftest { n, seed, out, perturb_multiplier } => {
            commands::selftest(n, perturb_multiplier, seed, out.as_deref())
        }
        Command::Solve(args) => commands::solve(&run_config(cli.config.as_ref(), "solve", None, args)?),
        Command::Verify { h, run } => commands::verify(&run_config(cli.config.as_ref(), "verify", h, run)?),
        Command::Report { dirs, csv, out } => commands::report(&dirs, csv, out.as_deref()),
        Command::Gallery { action } => match action {
            GalleryAction::List => commands::gallery_list(),
            GalleryAction::Dump { name, n, seed, out } => commands::gallery_dump(&name, n, seed, &out),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("innervar: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
