//! `slitcpw`: field maps, depth sweeps, ODMR/Rabi synthesis and fitting,
//! and profile comparison from the command line.

mod commands;
mod error;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use slitcpw::emfield::Grid;
use slitcpw::geometry::Section;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "slitcpw", version, about = "Slit-loaded coplanar waveguide field and spin-resonance toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct DriveArgs {
    /// Geometry file of `key = value` lines; omitted keys take reference values
    #[arg(long, value_name = "PATH")]
    pub geometry: Option<PathBuf>,
    /// Input microwave power
    #[arg(long, default_value_t = 1.0, value_name = "W")]
    pub power_w: f64,
    /// Drive frequency (bookkeeping only; the field model is quasi-static)
    #[arg(long, default_value_t = 70.0, value_name = "MHZ")]
    pub freq_mhz: f64,
}

#[derive(Args, Clone)]
pub struct SpinArgs {
    /// Zero-field splitting D/h
    #[arg(long, default_value_t = 35.0, value_name = "MHZ")]
    pub d_mhz: f64,
    #[arg(long, default_value_t = 2.0)]
    pub g_factor: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic impedance and mismatch against the reference impedance
    Impedance {
        #[command(flatten)]
        drive: DriveArgs,
    },
    /// Field map over an x-z grid
    FieldMap {
        #[command(flatten)]
        drive: DriveArgs,
        #[arg(long, default_value = "with-slit")]
        section: Section,
        /// x0,x1,dx,z0,z1,dz in um
        #[arg(long, default_value = "-200,200,2,1,100,1", allow_hyphen_values = true, value_parser = parse_grid)]
        grid: Grid,
        /// Check Bx even / Bz odd in x and report gap field direction
        #[arg(long)]
        verify: bool,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Field along x at a fixed depth
    LineScan {
        #[command(flatten)]
        drive: DriveArgs,
        #[arg(long, default_value = "with-slit")]
        section: Section,
        #[arg(long, value_name = "UM")]
        z_um: f64,
        /// x0,x1,dx in um
        #[arg(long, default_value = "-100,100,1", allow_hyphen_values = true)]
        x_range: String,
        /// Write `x_um,value` with value = Bx instead of full samples
        #[arg(long)]
        profile: bool,
        /// Divide the profile by its value at x = 0 (implies --profile)
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Bx(0, z) for each slit width; 0 means no slit
    DepthSweep {
        #[command(flatten)]
        drive: DriveArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40,80", value_name = "UM,...")]
        slit_widths: Vec<f64>,
        /// z0,z1,dz in um
        #[arg(long, default_value = "0.5,200,0.5", allow_hyphen_values = true)]
        z_range: String,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Synthesize or fit CW-ODMR spectra
    Odmr(OdmrArgs),
    /// Synthesize or fit Rabi traces
    Rabi(RabiArgs),
    /// Compare a measured profile against a simulated one
    Compare {
        #[arg(long, value_name = "CSV")]
        measured: PathBuf,
        #[arg(long, value_name = "CSV")]
        simulated: PathBuf,
        /// Normalize both profiles at x = 0 first
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run the reference pipelines and print a pass/fail table
    ReproducePaper {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["synth", "fit"])))]
pub struct OdmrArgs {
    #[arg(long)]
    pub synth: bool,
    /// Spectrum CSV (`freq_MHz,contrast`) to fit
    #[arg(long, value_name = "CSV")]
    pub fit: Option<PathBuf>,
    /// Append both (B0, D) candidates from the fitted pair
    #[arg(long, requires = "fit")]
    pub estimate_b0: bool,
    #[command(flatten)]
    pub spin: SpinArgs,
    /// Axial static field
    #[arg(long, default_value_t = 97.0, value_name = "G")]
    pub b0_g: f64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub peaks: u8,
    /// Peak contrast
    #[arg(long, default_value_t = 0.004)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 3.0, value_name = "MHZ")]
    pub sigma_mhz: f64,
    #[arg(long, default_value_t = 2.0, value_name = "MHZ")]
    pub gamma_mhz: f64,
    /// f0,f1,df in MHz
    #[arg(long, default_value = "150,400,0.5", allow_hyphen_values = true)]
    pub freq_range: String,
    /// Gaussian contrast noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["synth", "fit"])))]
pub struct RabiArgs {
    #[arg(long)]
    pub synth: bool,
    /// Trace CSV (`t_us,contrast`) to fit
    #[arg(long, value_name = "CSV")]
    pub fit: Option<PathBuf>,
    /// Convert the fitted Rabi frequency to the in-plane drive field
    #[arg(long, requires = "fit")]
    pub to_field: bool,
    #[command(flatten)]
    pub spin: SpinArgs,
    /// Rabi contrast A
    #[arg(long, default_value_t = 0.01)]
    pub a_rabi: f64,
    #[arg(long, value_name = "MHZ", conflicts_with = "b_ac_g")]
    pub f_rabi_mhz: Option<f64>,
    /// Drive field; sets the Rabi frequency
    #[arg(long, value_name = "G")]
    pub b_ac_g: Option<f64>,
    #[arg(long, default_value_t = 2.0, value_name = "US")]
    pub t2_star_us: f64,
    /// t0,t1,dt in us
    #[arg(long, default_value = "0,4,0.02", allow_hyphen_values = true)]
    pub t_range: String,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn parse_grid(text: &str) -> Result<Grid, String> {
    Grid::parse(text).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Impedance { drive } => commands::impedance(&drive),
        Command::FieldMap { drive, section, grid, verify, out } => {
            commands::field_map(&drive, section, &grid, verify, out)
        }
        Command::LineScan { drive, section, z_um, x_range, profile, normalize, out } => {
            commands::line_scan(&drive, section, z_um, &x_range, profile || normalize, normalize, out)
        }
        Command::DepthSweep { drive, slit_widths, z_range, out } => {
            commands::depth_sweep(&drive, &slit_widths, &z_range, out)
        }
        Command::Odmr(args) => commands::odmr(&args),
        Command::Rabi(args) => commands::rabi(&args),
        Command::Compare { measured, simulated, normalize, out } => {
            commands::compare(&measured, &simulated, normalize, out)
        }
        Command::ReproducePaper { seed, out } => reproduce::run(seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
