use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qpm_core::{ErrorKind, QpmError};

mod commands;
mod manifest;

use manifest::{write_atomic, Inputs, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "qpm", version, about = "Quantum-photonic electro-optic simulator")]
pub struct Cli {
    /// Configuration file; the bundled NPP configuration when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides simulation.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides simulation.trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file; a `<out>.manifest.toml` is written beside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Refractive indices and retardation over a wavelength range.
    Dispersion(DispersionArgs),
    /// Retardation versus applied field at fixed angle.
    EoScan(EoScanArgs),
    /// Field-induced retardation versus field angle.
    AngleScan(AngleScanArgs),
    /// Fit (ε, u, Z) to index targets and/or κ to an EO coefficient.
    Calibrate(CalibrateArgs),
    /// Hückel orbitals of a π-system.
    Huckel(HuckelArgs),
    /// Classical modulator retardation.
    Classical(ClassicalArgs),
    /// Photon flux and per-molecule interaction interval.
    Flux(FluxArgs),
    /// Re-run a command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct DispersionArgs {
    #[arg(long, default_value_t = 600.0)]
    from_nm: f64,
    #[arg(long, default_value_t = 1100.0)]
    to_nm: f64,
    #[arg(long, default_value_t = 100.0)]
    step_nm: f64,
}

#[derive(Debug, Args)]
struct EoScanArgs {
    /// Field magnitudes in V/µm; must include 0.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
    fields: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    psi_deg: f64,
    /// Overrides orbit.kappa_per_v_um.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Debug, Args)]
struct AngleScanArgs {
    /// Field magnitude in V/µm.
    #[arg(long, default_value_t = 1.0)]
    field: f64,
    #[arg(long, default_value_t = 0.0)]
    psi_from: f64,
    #[arg(long, default_value_t = 90.0)]
    psi_to: f64,
    #[arg(long, default_value_t = 15.0)]
    psi_step: f64,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// CSV with columns wavelength_nm, polarization, n_target.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Fit κ to this effective EO coefficient (pm/V).
    #[arg(long)]
    r_eff_pm_v: Option<f64>,
    /// Wavelength for the κ fit; defaults to beam.wavelength_nm.
    #[arg(long)]
    wavelength_nm: Option<f64>,
    /// Trials per objective evaluation during the shape fit.
    #[arg(long, default_value_t = 500)]
    fit_trials: usize,
    /// Trials for the final residual.
    #[arg(long, default_value_t = 5000)]
    final_trials: usize,
    #[arg(long, default_value_t = 500)]
    max_evaluations: usize,
}

#[derive(Debug, Args)]
struct HuckelArgs {
    /// π-system description; the bundled NPP ring when omitted.
    #[arg(long)]
    system: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CrystalKind {
    Npp,
    Mna,
}

#[derive(Debug, Args)]
struct ClassicalArgs {
    #[arg(long, value_enum, default_value_t = CrystalKind::Npp)]
    crystal: CrystalKind,
    /// Transverse field in V/µm (E_y for NPP, E_x for MNA).
    #[arg(long, default_value_t = 1.0)]
    field: f64,
    #[arg(long, default_value_t = 3.0)]
    length_um: f64,
    #[arg(long, default_value_t = 1064.0)]
    wavelength_nm: f64,
    /// Principal indices; taken from the material Sellmeier set when omitted.
    #[arg(long)]
    nx: Option<f64>,
    #[arg(long)]
    ny: Option<f64>,
    /// Coefficients in pm/V; override the material file.
    #[arg(long)]
    r11: Option<f64>,
    #[arg(long)]
    r12: Option<f64>,
    #[arg(long)]
    r21: Option<f64>,
    #[arg(long)]
    r22: Option<f64>,
    /// Material data file; defaults to the one named in the configuration.
    #[arg(long)]
    material: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FluxArgs {
    #[arg(long)]
    wavelength_nm: Option<f64>,
    #[arg(long)]
    power_mw: Option<f64>,
    #[arg(long)]
    beamwidth_um: Option<f64>,
    /// Per-molecule cross-section in Å²; a·c·sin β of the configured cell when omitted.
    #[arg(long)]
    cross_section: Option<f64>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    manifest: PathBuf,
}

/// Result of one command: the output body and an optional stderr summary.
pub struct Output {
    pub body: Vec<u8>,
    pub summary: Option<String>,
    /// Set when the command completed but did not converge.
    pub not_converged: bool,
    pub seed: u64,
    pub trials: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<QpmError>().map(QpmError::kind) {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Physics) => 3,
        Some(ErrorKind::Numerical) => 4,
        None => 1,
    }
}

fn execute(cli: Cli, argv: Vec<String>, mut inputs: Inputs) -> Result<u8> {
    let out_path = cli.out.clone();
    let output = commands::dispatch(&cli, &mut inputs)?;
    match &out_path {
        Some(path) => {
            write_atomic(path, &output.body)?;
            let manifest = RunManifest {
                command_line: argv,
                engine_version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                seed: output.seed,
                trials: output.trials,
                output: path.display().to_string(),
                inputs: inputs.into_recorded(),
            };
            write_atomic(&RunManifest::manifest_path(path), manifest.to_toml()?.as_bytes())?;
        }
        None => std::io::stdout().write_all(&output.body)?,
    }
    if let Some(summary) = &output.summary {
        eprintln!("{summary}");
    }
    Ok(if output.not_converged { 4 } else { 0 })
}

fn run() -> Result<u8> {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    if let Command::Replay(replay) = &cli.command {
        let manifest = RunManifest::load(&replay.manifest)?;
        let mut recorded = Cli::try_parse_from(&manifest.command_line)?;
        if matches!(recorded.command, Command::Replay(_)) {
            anyhow::bail!(QpmError::InvalidParameter {
                key: "manifest.command_line".into(),
                reason: "cannot replay a replay".into(),
            });
        }
        recorded.out = cli.out.clone();
        return execute(recorded, manifest.command_line.clone(), Inputs::replaying(manifest.inputs));
    }
    execute(cli, argv, Inputs::live())
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
