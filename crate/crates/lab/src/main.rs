use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcrystal::commands;
use qcrystal::{CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "qcrystal",
    version,
    about = "Quantum anharmonic crystals: spectra, thresholds, bounds and PIMC"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file (missing keys take their defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports, tables and the manifest.
    #[arg(long, global = true, default_value = "qcrystal-out")]
    out: PathBuf,
    /// Seed of the Monte Carlo streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Numerical tolerance of the selected command.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override any configuration key, e.g. `--set lattice.j=0.5`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Low-lying spectrum, gap, rigidity and the Matsubara table at `lattice.beta`.
    Spectrum {
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Anharmonicity parameter θ*.
    ThetaStar,
    /// Lattice Green's function J(d).
    Green {
        /// Dimension(s); repeat for several.
        #[arg(long = "d")]
        dims: Vec<usize>,
        /// Also evaluate by direct Brillouin-zone quadrature.
        #[arg(long)]
        cross_check: bool,
    },
    /// Stability / transition classification of the lattice model.
    Classify {
        #[arg(long)]
        j: Option<f64>,
        #[arg(long = "d")]
        dimension: Option<usize>,
    },
    /// Table of correlation upper bounds Y(offset, dtau).
    CorrBound {
        #[arg(long)]
        max_offset: Option<i64>,
        /// Evaluate on the torus of side `lattice.box_size`.
        #[arg(long)]
        finite_box: bool,
        #[arg(long)]
        j: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Path-integral Monte Carlo run with analytic cross-checks.
    Simulate {
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long)]
        slices: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        j: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Run the acceptance suite; nonzero exit on any failure.
    Verify {
        /// Restrict to these criteria (1-12); repeatable.
        #[arg(long)]
        only: Vec<usize>,
    },
}

fn set(sets: &mut Vec<String>, key: &str, v: Option<impl ToString>) {
    if let Some(v) = v {
        sets.push(format!("{key}={}", v.to_string()));
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut sets = cli.common.sets.clone();
    let tol = cli.common.tol;
    set(&mut sets, "simulate.seed", cli.common.seed);
    match &cli.command {
        Command::Spectrum { levels, beta } => {
            set(&mut sets, "spectrum.n_levels", *levels);
            set(&mut sets, "lattice.beta", *beta);
            set(&mut sets, "spectrum.tol", tol);
        }
        Command::ThetaStar | Command::Verify { .. } => {}
        Command::Green { dims, cross_check } => {
            if !dims.is_empty() {
                let list: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
                sets.push(format!("green.dimensions=[{}]", list.join(",")));
            }
            if *cross_check {
                sets.push("green.cross_check=true".into());
            }
            set(&mut sets, "green.tol", tol);
        }
        Command::Classify { j, dimension } => {
            set(&mut sets, "lattice.j", *j);
            set(&mut sets, "lattice.dimension", *dimension);
            set(&mut sets, "classify.beta_star_tol", tol);
        }
        Command::CorrBound {
            max_offset,
            finite_box,
            j,
            beta,
        } => {
            set(&mut sets, "corr_bound.max_offset", *max_offset);
            if *finite_box {
                sets.push("corr_bound.finite_box=true".into());
            }
            set(&mut sets, "lattice.j", *j);
            set(&mut sets, "lattice.beta", *beta);
            set(&mut sets, "corr_bound.tol", tol);
        }
        Command::Simulate {
            sweeps,
            slices,
            chains,
            j,
            beta,
        } => {
            set(&mut sets, "simulate.sweeps", *sweeps);
            set(&mut sets, "simulate.slices", *slices);
            set(&mut sets, "simulate.chains", *chains);
            set(&mut sets, "lattice.j", *j);
            set(&mut sets, "lattice.beta", *beta);
        }
    }
    cfg.apply_overrides(&sets)?;
    let out = cli.common.out.as_path();
    match cli.command {
        Command::Spectrum { .. } => commands::spectrum(cfg, out),
        Command::ThetaStar => commands::theta_star(cfg, out),
        Command::Green { .. } => commands::green(cfg, out),
        Command::Classify { .. } => commands::classify(cfg, out),
        Command::CorrBound { .. } => commands::corr_bound(cfg, out),
        Command::Simulate { .. } => commands::simulate(cfg, out),
        Command::Verify { only } => commands::verify(cfg, out, &only),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qcrystal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
