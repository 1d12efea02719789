//! `famsim`: constraint analysis, angular-momentum spectra, classical
//! trajectories and the verification suite for the trapped-dipole model.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error,
//! 3 numeric error.

mod manifest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fam_core::constraints::analyze;
use fam_core::dynamics::{
    integrate, reduction_probe, IntegrationOptions,
};
use fam_core::expr::PhasePoint;
use fam_core::models::{build_model, FieldSelection, ModelConfig, ReductionMode};
use fam_core::quantum::{fam_spectrum, full_model_angular_spectrum, SpectrumResult};
use fam_core::verification::{run_all_with, VerifyOptions};
use serde::Serialize;

use manifest::{ConfigFile, RunManifest};

const EXIT_VERIFICATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Tolerance on |eigenvalue - closed-form value| for trusted rows of the
/// spectrum report.
const SPECTRUM_REPORT_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "famsim", version, about)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file (TOML, or JSON with a .json extension). Flags win
    /// over file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Field selection: both | e1 | e2
    #[arg(long, global = true)]
    selection: Option<String>,
    /// Reduction mode: full | reduced
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Seed for sample-point generation; recorded in every output.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long = "B", global = true)]
    b: Option<f64>,
    #[arg(long, global = true)]
    k: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long = "K", global = true)]
    trap: Option<f64>,
    #[arg(long, global = true)]
    hbar: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Dirac-Bergmann constraint analysis of the reduced model (JSON).
    Analyze,
    /// Angular-momentum spectrum vs the closed-form formula (CSV).
    Spectrum {
        /// Truncation dimension (reduced mode) or grid size (full mode).
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        trusted_fraction: f64,
    },
    /// Integrate a full-model trajectory and log invariants (CSV).
    Evolve {
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 1.5)]
        x1: f64,
        #[arg(long, default_value_t = 0.0)]
        x2: f64,
        #[arg(long, default_value_t = 0.0)]
        p1: f64,
        #[arg(long, default_value_t = 1.0)]
        p2: f64,
        /// Comma-separated masses; runs the reduction probe instead of a
        /// single trajectory and emits a JSON report.
        #[arg(long)]
        m_sweep: Option<String>,
    },
    /// Run the verification suite; exit 0 iff every criterion passes.
    Verify {
        /// Negative control: offset the plane's theta to demonstrate
        /// that the mismatch is caught.
        #[arg(long, default_value_t = 0.0)]
        perturb_theta: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(AppError { message, code }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct AppError {
    message: String,
    code: u8,
}

fn usage_err(message: impl Into<String>) -> AppError {
    AppError {
        message: message.into(),
        code: EXIT_USAGE,
    }
}

fn numeric_err(message: impl Into<String>) -> AppError {
    AppError {
        message: message.into(),
        code: EXIT_NUMERIC,
    }
}

fn resolve_manifest(
    common: &CommonArgs,
    default_mode: ReductionMode,
) -> Result<RunManifest, AppError> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path).map_err(|e| usage_err(e.to_string()))?,
        None => ConfigFile::default(),
    };
    let defaults = ModelConfig::default();
    let config = ModelConfig {
        m: common.m.or(file.m).unwrap_or(defaults.m),
        alpha: common.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        b: common.b.or(file.b).unwrap_or(defaults.b),
        k: common.k.or(file.k).unwrap_or(defaults.k),
        rho: common.rho.or(file.rho).unwrap_or(defaults.rho),
        trap: common.trap.or(file.trap).unwrap_or(defaults.trap),
        hbar: common.hbar.or(file.hbar).unwrap_or(defaults.hbar),
    };
    config.validate().map_err(|e| usage_err(e.to_string()))?;
    let selection = match common.selection.as_deref() {
        Some("both") => FieldSelection::Both,
        Some("e1") => FieldSelection::E1Only,
        Some("e2") => FieldSelection::E2Only,
        Some(other) => return Err(usage_err(format!("unknown selection '{other}'"))),
        None => file.selection.unwrap_or(FieldSelection::Both),
    };
    let mode = match common.mode.as_deref() {
        Some("full") => ReductionMode::Full,
        Some("reduced") => ReductionMode::Reduced,
        Some(other) => return Err(usage_err(format!("unknown mode '{other}'"))),
        None => file.mode.unwrap_or(default_mode),
    };
    Ok(RunManifest {
        config,
        selection,
        mode,
        seed: common.seed,
    })
}

fn emit(common: &CommonArgs, content: &str) -> Result<(), AppError> {
    match &common.out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| numeric_err(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, AppError> {
    match &cli.command {
        Command::Analyze => cmd_analyze(&cli.common),
        Command::Spectrum {
            n,
            trusted_fraction,
        } => cmd_spectrum(&cli.common, *n, *trusted_fraction),
        Command::Evolve {
            dt,
            steps,
            x1,
            x2,
            p1,
            p2,
            m_sweep,
        } => cmd_evolve(
            &cli.common,
            *dt,
            *steps,
            PhasePoint::new([*x1, *x2], [*p1, *p2]),
            m_sweep.as_deref(),
        ),
        Command::Verify { perturb_theta } => cmd_verify(&cli.common, *perturb_theta),
    }
}

#[derive(Serialize)]
struct AnalyzeOutput {
    manifest: RunManifest,
    #[serde(flatten)]
    report: fam_core::constraints::AnalysisReport,
}

fn cmd_analyze(common: &CommonArgs) -> Result<ExitCode, AppError> {
    let manifest = resolve_manifest(common, ReductionMode::Reduced)?;
    if manifest.mode != ReductionMode::Reduced {
        return Err(usage_err("analyze requires --mode reduced"));
    }
    let system = build_model(&manifest.config, manifest.selection, manifest.mode)
        .map_err(|e| usage_err(e.to_string()))?;
    let analysis = analyze(&system, 3, manifest.seed).map_err(|e| numeric_err(e.to_string()))?;
    let output = AnalyzeOutput {
        manifest,
        report: analysis.report(),
    };
    let json =
        serde_json::to_string_pretty(&output).map_err(|e| numeric_err(e.to_string()))?;
    emit(common, &format!("{json}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn spectrum_rows(
    manifest: &RunManifest,
    n: usize,
    trusted_fraction: f64,
) -> Result<(SpectrumResult, Vec<f64>), AppError> {
    let c = &manifest.config;
    match manifest.mode {
        ReductionMode::Full => {
            let s = full_model_angular_spectrum(n, c.hbar)
                .map_err(|e| numeric_err(e.to_string()))?;
            let formula = (0..n)
                .map(|i| c.hbar * (i as f64 - n as f64 / 2.0))
                .collect();
            Ok((s, formula))
        }
        ReductionMode::Reduced => {
            if manifest.selection == FieldSelection::E1Only {
                eprintln!(
                    "warning: E1-only reduced model has 0 degrees of freedom; \
                     the spectrum is the constant alpha*B*k"
                );
            }
            let s = fam_spectrum(c, manifest.selection, n, trusted_fraction)
                .map_err(|e| numeric_err(e.to_string()))?;
            let abk = c.alpha * c.b * c.k;
            let formula = (0..s.eigenvalues.len())
                .map(|i| match manifest.selection {
                    FieldSelection::Both => abk + (i as f64 + 0.5) * c.hbar,
                    FieldSelection::E2Only => (i as f64 + 0.5) * c.hbar,
                    FieldSelection::E1Only => abk,
                })
                .collect();
            Ok((s, formula))
        }
    }
}

fn cmd_spectrum(
    common: &CommonArgs,
    n: usize,
    trusted_fraction: f64,
) -> Result<ExitCode, AppError> {
    let manifest = resolve_manifest(common, ReductionMode::Reduced)?;
    let (s, formula) = spectrum_rows(&manifest, n, trusted_fraction)?;
    let mut csv = manifest.csv_header();
    csv.push_str(&format!(
        "# truncation_dim={} trusted_count={}\n",
        s.truncation_dim, s.trusted_count
    ));
    csv.push_str("n,eigenvalue,formulaValue,absError\n");
    let trusted = if manifest.mode == ReductionMode::Full {
        s.eigenvalues.len()
    } else {
        s.trusted_count
    };
    let mut worst: f64 = 0.0;
    for i in 0..trusted {
        let err = (s.eigenvalues[i] - formula[i]).abs();
        worst = worst.max(err);
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            s.eigenvalues[i], formula[i], err
        ));
    }
    emit(common, &csv)?;
    if worst > SPECTRUM_REPORT_TOL {
        eprintln!("spectrum deviates from the closed form by {worst:.3e}");
        return Ok(ExitCode::from(EXIT_VERIFICATION));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SweepOutput {
    manifest: RunManifest,
    #[serde(flatten)]
    report: fam_core::dynamics::ProbeReport,
}

fn cmd_evolve(
    common: &CommonArgs,
    dt: f64,
    steps: usize,
    initial: PhasePoint,
    m_sweep: Option<&str>,
) -> Result<ExitCode, AppError> {
    let manifest = resolve_manifest(common, ReductionMode::Full)?;
    if manifest.mode != ReductionMode::Full {
        return Err(usage_err("evolve requires --mode full"));
    }
    let opts = IntegrationOptions::new(dt, steps);

    if let Some(sweep) = m_sweep {
        let masses: Result<Vec<f64>, _> =
            sweep.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let masses = masses.map_err(|e| usage_err(format!("bad --m-sweep: {e}")))?;
        let configs: Vec<ModelConfig> = masses
            .iter()
            .map(|&m| ModelConfig {
                m,
                ..manifest.config
            })
            .collect();
        let report = reduction_probe(&configs, manifest.selection, initial.x, opts)
            .map_err(|e| numeric_err(e.to_string()))?;
        let output = SweepOutput { manifest, report };
        let json =
            serde_json::to_string_pretty(&output).map_err(|e| numeric_err(e.to_string()))?;
        emit(common, &format!("{json}\n"))?;
        return Ok(ExitCode::SUCCESS);
    }

    let system = build_model(&manifest.config, manifest.selection, manifest.mode)
        .map_err(|e| usage_err(e.to_string()))?;
    let traj = integrate(&system, initial, opts).map_err(|e| numeric_err(e.to_string()))?;
    let mut csv = manifest.csv_header();
    csv.push_str("t,x1,x2,p1,p2,J,H,phi1,phi2\n");
    for i in 0..traj.len() {
        let s = &traj.states[i];
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            traj.times[i],
            s.x[0],
            s.x[1],
            s.p[0],
            s.p[1],
            traj.j_series[i],
            traj.h_series[i],
            traj.phi_series[0][i],
            traj.phi_series[1][i],
        ));
    }
    csv.push_str(&format!(
        "# max_rel_drift_J={:e} max_rel_drift_H={:e}\n",
        fam_core::dynamics::Trajectory::max_relative_drift(&traj.j_series),
        fam_core::dynamics::Trajectory::max_relative_drift(&traj.h_series),
    ));
    emit(common, &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(common: &CommonArgs, perturb_theta: f64) -> Result<ExitCode, AppError> {
    let manifest = resolve_manifest(common, ReductionMode::Reduced)?;
    let results = run_all_with(
        manifest.seed,
        VerifyOptions {
            theta_perturbation: perturb_theta,
        },
    );
    let mut out = String::new();
    out.push_str(&manifest.csv_header());
    let mut all_passed = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status} {:<20} {}\n", r.name, r.detail));
        eprintln!("{:<20} {:?}", r.name, r.elapsed);
        all_passed &= r.passed;
    }
    out.push_str(if all_passed {
        "RESULT: all criteria passed\n"
    } else {
        "RESULT: verification FAILED\n"
    });
    emit(common, &out)?;
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFICATION)
    })
}
