mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Overrides;

/// Design permanent-magnet arrays that hold a magnetic robot in a 2D force trap.
///
/// All lengths on the command line are in mm and all angles in degrees.
#[derive(Debug, Parser)]
#[command(name = "magtrap", version, about)]
struct Cli {
    /// Log progress (repeat for more detail)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat TOML file with any `RunConfig` keys; flags override it
    #[arg(long, short)]
    pub config: Option<PathBuf>,

    /// Worker threads for field evaluation (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,

    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the magnet angles for the configured trap
    Optimize {
        #[command(flatten)]
        common: Common,
        /// JSON report path (default: stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the optimized force field over the trap area as CSV
        #[arg(long)]
        field_csv: Option<PathBuf>,
    },
    /// Dump force and flux density on a plane for given angles
    Field {
        #[command(flatten)]
        common: Common,
        /// Magnet angles in degrees, top magnet first (default: all 0)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Option<Vec<f64>>,
        /// Plane to sample
        #[arg(long, value_enum, default_value_t = PlaneArg::Xy)]
        plane: PlaneArg,
        /// Plane offset in mm (z for xy, x for yz)
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_mm: f64,
        /// In-plane bounds `u_min:u_max:v_min:v_max` in mm (u = x or y, v = y or z)
        #[arg(long, allow_hyphen_values = true)]
        bounds_mm: Option<String>,
        /// Samples along u
        #[arg(long)]
        nu: Option<usize>,
        /// Samples along v
        #[arg(long)]
        nv: Option<usize>,
        /// CSV path (default: stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Optimize and characterize traps over a range of distances
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Trap distances `start:stop:count` in mm
        #[arg(long, default_value = "20:130:100")]
        distances: String,
        /// Magnet counts
        #[arg(long, value_delimiter = ',', default_value = "2")]
        counts: Vec<usize>,
        /// Low-force threshold for the aspect ratio in mN
        #[arg(long, default_value_t = 0.1)]
        threshold_mn: f64,
        /// Radius for the average force in mm
        #[arg(long, default_value_t = 10.0)]
        radius_mm: f64,
        /// Moving-average window for the aspect ratio
        #[arg(long, default_value_t = 5)]
        window: usize,
        /// Samples per axis of the analysis map
        #[arg(long, default_value_t = 81)]
        map_resolution: usize,
        /// Start every distance from random angles only
        #[arg(long)]
        no_continuation: bool,
        /// CSV table path (default: stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the full table with the config as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Characterize the trap formed by given angles
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Magnet angles in degrees, top magnet first
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        angles: Vec<f64>,
        /// Low-force threshold for the aspect ratio in mN
        #[arg(long, default_value_t = 0.1)]
        threshold_mn: f64,
        /// Radius for the average force in mm
        #[arg(long, default_value_t = 10.0)]
        radius_mm: f64,
        /// Samples per axis of the analysis map
        #[arg(long, default_value_t = 81)]
        map_resolution: usize,
        /// Range `y_min:y_max` in mm scanned for the B_z sign change
        #[arg(long, default_value = "1:300")]
        bz_range_mm: String,
        /// JSON path (default: stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare the analytic gradient with central finite differences
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Random angle vectors to test
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Finite-difference step in degrees
        #[arg(long, default_value_t = 1e-5)]
        h_deg: f64,
        /// Maximum accepted relative error
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        /// JSON path (default: stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Exhaustive direction-loss surface for two magnets
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Angle step in degrees; must divide 360
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        /// CSV path for the full loss surface
        #[arg(long)]
        surface_csv: Option<PathBuf>,
        /// JSON summary path (default: stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlaneArg {
    /// z = offset, u = x, v = y
    Xy,
    /// x = offset, u = y, v = z
    Yz,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli.command) {
        Ok(code) => code,
        // a closed stdout (e.g. piped into `head`) is not a failure
        Err(e) if e.chain().any(is_broken_pipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    let io = e.downcast_ref::<std::io::Error>().or_else(|| {
        e.downcast_ref::<csv::Error>().and_then(|c| match c.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        })
    });
    io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}
