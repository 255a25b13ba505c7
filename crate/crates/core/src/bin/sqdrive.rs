use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sqdrive::inference::SsimWindow;
use sqdrive::io::{Mode, RunConfig};
use sqdrive::pipeline::{self, Context};
use sqdrive::spin::Transition;
use sqdrive::{Error, Result};

/// Dual-field Rabi spectroscopy simulation and SQ spin-stress inference.
///
/// Every global flag can also be set through an environment variable with the
/// `SQDRIVE_` prefix (e.g. `SQDRIVE_OUT_DIR`). Precedence: flag, environment,
/// `--config` file, built-in default.
///
/// Exit codes: 0 success, 2 invalid input, 3 fit or scan failure, 4 I/O error.
#[derive(Parser)]
#[command(name = "sqdrive", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, env = "SQDRIVE_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for synthetic noise.
    #[arg(long, global = true, env = "SQDRIVE_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "SQDRIVE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SQDRIVE_THREADS")]
    threads: Option<usize>,
    /// 3.132GHz, 2.732GHz or custom.
    #[arg(long, global = true, env = "SQDRIVE_MODE")]
    mode: Option<String>,
    /// plus or minus; overrides the mode preset.
    #[arg(long, global = true, env = "SQDRIVE_TRANSITION")]
    transition: Option<String>,
    /// Acoustic wavelength, um; overrides the mode preset.
    #[arg(long, global = true, env = "SQDRIVE_WAVELENGTH_UM")]
    wavelength_um: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Global,
    Gaussian,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the circuit to lead-SQ and resonator-DQ Rabi-field spectra.
    FitMbvd {
        #[arg(long)]
        lead_sq: Option<PathBuf>,
        #[arg(long)]
        resonator_dq: Option<PathBuf>,
        /// Fit window LO HI, GHz.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        window: Option<Vec<f64>>,
    },
    /// Simulate a Rabi spectrogram and its FFT.
    Simulate {
        /// Circuit parameters JSON (default: mode preset).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        alpha: f64,
        /// Degrees.
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
    },
    /// SSIM grid search for (alpha, phi) and the resulting b'.
    Scan {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        alpha_steps: Option<usize>,
        #[arg(long)]
        phi_steps: Option<usize>,
        #[arg(long, value_enum)]
        ssim_window: Option<WindowArg>,
        #[arg(long)]
        no_refine: bool,
    },
    /// Write a synthetic dataset with seeded noise and its truth manifest.
    Synth {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        /// Relative amplitude noise (phases: same level in rad).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Map stress susceptibilities to strain susceptibilities.
    MapStrain {
        /// Susceptibility set JSON.
        #[arg(long, conflicts_with = "row")]
        input: Option<PathBuf>,
        /// Built-in catalog row: barson, barfuss or theory.
        #[arg(long)]
        row: Option<String>,
    },
    /// Render every figure of a plot manifest to SVG.
    Plot {
        /// Default: plots.json in the output directory.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &cli.mode {
        cfg.mode = m.parse::<Mode>()?;
    }
    if let Some(t) = &cli.transition {
        cfg.transition = Some(t.parse::<Transition>()?);
    }
    if let Some(w) = cli.wavelength_um {
        cfg.wavelength_um = Some(w);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::Scan {
        alpha_steps,
        phi_steps,
        ssim_window,
        no_refine,
        ..
    } = &cli.command
    {
        if let Some(n) = alpha_steps {
            cfg.scan.alpha_steps = *n;
        }
        if let Some(n) = phi_steps {
            cfg.scan.phi_steps = *n;
        }
        match ssim_window {
            Some(WindowArg::Global) => cfg.scan.ssim.window = SsimWindow::Global,
            Some(WindowArg::Gaussian) => cfg.scan.ssim.window = SsimWindow::gaussian_default(),
            None => {}
        }
        if *no_refine {
            cfg.scan.refine = false;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    let config = build_config(&cli)?;
    let ctx = Context {
        config,
        out_dir: cli.out_dir.clone(),
    };
    match cli.command {
        Command::FitMbvd {
            lead_sq,
            resonator_dq,
            window,
        } => pipeline::cmd_fit_mbvd(
            &ctx,
            &pipeline::FitArgs {
                lead_sq,
                resonator_dq,
                window_ghz: window.map(|w| [w[0], w[1]]),
            },
        ),
        Command::Simulate { params, alpha, phi } => pipeline::cmd_simulate(
            &ctx,
            &pipeline::SimulateArgs {
                params,
                alpha,
                phi_deg: phi,
            },
        ),
        Command::Scan { data, params, .. } => {
            pipeline::cmd_scan(&ctx, &pipeline::ScanArgs { data, params })
        }
        Command::Synth {
            params,
            alpha,
            phi,
            noise,
        } => pipeline::cmd_synth(
            &ctx,
            &pipeline::SynthArgs {
                params,
                alpha,
                phi_deg: phi,
                noise,
            },
        ),
        Command::MapStrain { input, row } => {
            pipeline::cmd_map_strain(&ctx, &pipeline::MapStrainArgs { input, row })
        }
        Command::Plot { manifest } => pipeline::cmd_plot(&ctx, manifest.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
