use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use floqmem::config::{InitialState, Solver};
use floqmem::RunConfig;
use floqmem_cli::{
    cmd_coefficients, cmd_crossings, cmd_evolve, cmd_quasienergies, cmd_sweep, plot, Status,
};

#[derive(Parser)]
#[command(
    name = "floqmem",
    version,
    about = "Driven spin-boson qubit: Floquet, Lindblad and HEOM dynamics"
)]
struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "FLOQMEM_JOBS")]
    jobs: Option<usize>,
    /// Seed for the random state-pair search.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More logging (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasienergies over the amplitude range.
    Quasienergies,
    /// Floquet Fourier coefficients over the amplitude range.
    Coefficients,
    /// Single trajectory at the configured amplitude.
    Evolve {
        #[arg(long, value_parser = ["heom", "lindblad"])]
        solver: Option<String>,
        /// e, g, +x, -x, +y, -y or `bx,by,bz`.
        #[arg(long, allow_hyphen_values = true)]
        rho0: Option<String>,
    },
    /// Non-Markovianity and relaxation-time sweep.
    Sweep,
    /// Refined quasienergy crossings.
    Crossings,
    /// SVG plots of the tables already in the output directory.
    Plot,
}

fn parse_rho0(s: &str) -> Result<InitialState, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() == 3 {
        let mut v = [0.0; 3];
        for (x, p) in v.iter_mut().zip(&parts) {
            *x = p
                .trim()
                .parse()
                .map_err(|_| format!("bad Bloch component '{p}'"))?;
        }
        Ok(InitialState::Bloch(v))
    } else {
        Ok(InitialState::Named(s.to_string()))
    }
}

fn resolve(cli: &Cli) -> floqmem::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.analysis.seed = seed;
    }
    if let Command::Evolve { solver, rho0 } = &cli.command {
        if let Some(s) = solver {
            cfg.evolve.solver = if s == "heom" {
                Solver::Heom
            } else {
                Solver::Lindblad
            };
        }
        if let Some(r) = rho0 {
            cfg.evolve.rho0 = parse_rho0(r).map_err(floqmem::Error::Config)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("floqmem: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("floqmem: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool: {e}");
        }
    }
    // The output location stays out of the embedded config so runs that differ
    // only in --out produce identical files.
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let result = match cli.command {
        Command::Quasienergies => cmd_quasienergies(&cfg, &out),
        Command::Coefficients => cmd_coefficients(&cfg, &out),
        Command::Evolve { .. } => cmd_evolve(&cfg, &out),
        Command::Sweep => cmd_sweep(&cfg, &out),
        Command::Crossings => cmd_crossings(&cfg, &out),
        Command::Plot => plot::render(&out).map(|files| {
            for f in files {
                println!("{}", out.join(f).display());
            }
            Status::Ok
        }),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::PartialFailure) => {
            eprintln!("floqmem: some sweep points failed, see failures.json");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("floqmem: {e}");
            ExitCode::from(1)
        }
    }
}
