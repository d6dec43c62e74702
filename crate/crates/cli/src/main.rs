use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use idstab::encirclement::CountingRule;
use idstab_cli::{
    emit_band, emit_roots, parse_config, render_oracle_text, render_text, run_check, run_oracle,
    to_structured, CliError, ConfigError, OutputFormat, RunConfig, MIN_GRID_POINTS,
};

#[derive(Parser)]
#[command(
    name = "idstab",
    version,
    about = "Robust stability certificates for integral delay systems with spline-bounded kernels"
)]
struct Cli {
    /// JSON config with `system`, `tolerances`, `grid_points`, `cluster`, `seed`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Frequencies on the exclusion grid over [0, ω̄].
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Use raw eigenvalues instead of clustering repeated roots.
    #[arg(long, global = true)]
    no_cluster: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Crossover counting rule.
    #[arg(long, global = true, value_enum)]
    rule: Option<Rule>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Distinct,
    Literal,
}

#[derive(Subcommand)]
enum Command {
    /// Run the certification chain and report the verdict.
    Check,
    /// Write inclusion rectangles over a frequency range as CSV.
    Band {
        #[arg(long, default_value_t = 0.1)]
        omega_min: f64,
        #[arg(long, default_value_t = 60.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 600)]
        samples: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the crossover roots in [0, π] and their values as CSV.
    Roots {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-check with the winding count, a simulation and Monte Carlo inclusions.
    Oracle {
        #[arg(long, default_value_t = 200)]
        kernels: usize,
        #[arg(long, default_value_t = 20)]
        frequencies: usize,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("--config PATH is required".into()))?;
    let mut cfg = parse_config(path)?;
    if let Some(g) = cli.grid_points {
        if g < MIN_GRID_POINTS {
            return Err(ConfigError::Invalid(format!(
                "--grid-points must be at least {MIN_GRID_POINTS}"
            ))
            .into());
        }
        cfg.grid_points = g;
    }
    if cli.no_cluster {
        cfg.cluster = false;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.format {
        Some(Format::Text) => cfg.output_format = OutputFormat::Text,
        Some(Format::Structured) => cfg.output_format = OutputFormat::Structured,
        None => {}
    }
    match cli.rule {
        Some(Rule::Distinct) => cfg.rule = CountingRule::Distinct,
        Some(Rule::Literal) => cfg.rule = CountingRule::Literal,
        None => {}
    }
    Ok(cfg)
}

fn sink(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = load(cli)?;
    match &cli.command {
        Command::Check => {
            let (report, code) = run_check(&cfg)?;
            match cfg.output_format {
                OutputFormat::Text => print!("{}", render_text(&report)),
                OutputFormat::Structured => println!("{}", to_structured(&report)),
            }
            Ok(code)
        }
        Command::Band {
            omega_min,
            omega_max,
            samples,
            output,
        } => {
            let mut w = sink(output)?;
            emit_band(&cfg, *omega_min, *omega_max, *samples, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Roots { output } => {
            let mut w = sink(output)?;
            emit_roots(&cfg, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Oracle {
            kernels,
            frequencies,
        } => {
            let (report, code) = run_oracle(&cfg, *kernels, *frequencies)?;
            match cfg.output_format {
                OutputFormat::Text => print!("{}", render_oracle_text(&report)),
                OutputFormat::Structured => println!("{}", to_structured(&report)),
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
