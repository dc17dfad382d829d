//! `infotherm`: verification suites, two-box sweeps and Langevin erasure runs.
//!
//! Exit codes: 0 success, 1 a scientific check failed, 2 bad input or usage.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use infotherm::langevin::{self, analyze_erasure, presets, EnsembleParams, ProtocolSchedule};
use infotherm::measurement::{qc_mutual_information, MeasurementModel};
use infotherm::memory::suite::{run_classical_suite, run_seeds, two_box_engine_pair};
use infotherm::memory::{reconcile_demon, BoundReport};
use infotherm::twobox::{self, TwoBoxParams};
use infotherm::{DensityOperator, Error, Temperature, VERSION};

use config::{Format, Settings};
use output::{emit, f17, to_json};

/// Minimum margin the bound suite accepts.
const SUITE_MARGIN: f64 = -1e-6;

#[derive(Debug, Parser)]
#[command(name = "infotherm", version, about = "Thermodynamics of measurement and erasure")]
struct Cli {
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Shannon and QC-mutual information of a state under a measurement.
    Qcmi,
    /// Randomized measurement, erasure, sum and demon bound checks.
    VerifyBounds,
    /// Stage works of the two-box memory at one volume fraction.
    Twobox,
    /// Two-box works over a grid of volume fractions.
    Sweep,
    /// Overdamped Langevin erasure ensemble.
    Langevin,
}

#[derive(Debug)]
enum Failure {
    /// Bad input or usage; exit 2.
    Input(String),
    /// A scientific check failed; exit 1.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IdentityViolated(_) | Error::NonFiniteTrajectory { .. } => Failure::Check(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn io_failure(path: Option<&Path>) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| {
        let target = path.map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
        Failure::Input(format!("cannot write {target}: {e}"))
    }
}

fn json_failure(e: serde_json::Error) -> Failure {
    Failure::Input(format!("cannot serialize report: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => Settings::load(path).map_err(Failure::Input)?,
        None => Settings::default(),
    };
    let s = file.overlay(cli.settings.clone());
    match cli.command {
        Command::Qcmi => cmd_qcmi(&s),
        Command::VerifyBounds => cmd_verify_bounds(&s),
        Command::Twobox => cmd_twobox(&s),
        Command::Sweep => cmd_sweep(&s),
        Command::Langevin => cmd_langevin(&s),
    }
}

fn temperature(s: &Settings) -> Result<Temperature, Failure> {
    Ok(Temperature::new(s.temperature.unwrap_or(1.0))?)
}

fn require_seed(s: &Settings, command: &str) -> Result<u64, Failure> {
    s.seed
        .ok_or_else(|| Failure::Input(format!("{command} is randomized and needs --seed")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: Option<&PathBuf>, flag: &str) -> Result<T, Failure> {
    let path = path.ok_or_else(|| Failure::Input(format!("missing --{flag}")))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a Settings,
    #[serde(flatten)]
    body: T,
}

fn write_report<T: Serialize>(s: &Settings, command: &'static str, body: T) -> Result<(), Failure> {
    let text = to_json(&Report {
        version: VERSION,
        command,
        config: s,
        body,
    })
    .map_err(json_failure)?;
    emit(s.out.as_deref(), &text).map_err(io_failure(s.out.as_deref()))
}

fn cmd_qcmi(s: &Settings) -> Result<(), Failure> {
    let rho: DensityOperator = read_json(s.state.as_ref(), "state")?;
    let m: MeasurementModel = read_json(s.povm.as_ref(), "povm")?;
    let q = qc_mutual_information(&rho, &m)?;
    let resolved = Settings {
        temperature: None,
        ..s.clone()
    };
    write_report(
        &resolved,
        "qcmi",
        json!({
            "H": q.shannon,
            "I": q.value,
            "I_alternative": q.alternative,
            "state_entropy": q.state_entropy,
            "p_k": q.probabilities,
            "checks": {
                "identity_gap": (q.value - q.alternative).abs(),
                "nonnegative": q.value >= -infotherm::policy::COMPLETENESS,
                "at_most_shannon": q.value <= q.shannon + infotherm::policy::COMPLETENESS,
                "passed": true,
            },
        }),
    )
}

#[derive(Serialize)]
struct SzilardRow {
    t: f64,
    w_meas: f64,
    w_eras: f64,
    w_ext: f64,
    report: BoundReport,
}

fn cmd_verify_bounds(s: &Settings) -> Result<(), Failure> {
    let seed = require_seed(s, "verify-bounds")?;
    let n_steps = s.n_steps.unwrap_or(1000);
    let instances = s.instances.unwrap_or(100);
    if n_steps == 0 || instances == 0 {
        return Err(Failure::Input("--n-steps and --instances must be positive".into()));
    }
    let t = Temperature::default();
    let suite = match s.replay {
        Some(r) => run_seeds(seed, &[r], n_steps),
        None => run_classical_suite(seed, instances, n_steps),
    }
    .map_err(|e| Failure::Check(e.to_string()))?;

    // Szilard engine on the two-box memory: extracts T ln 2, system free energy unchanged.
    let mut szilard = Vec::new();
    for t_box in [0.5, 0.8] {
        let (meas, eras) = two_box_engine_pair(t_box, n_steps).map_err(|e| Failure::Check(e.to_string()))?;
        let w_ext = t.value() * std::f64::consts::LN_2;
        szilard.push(SzilardRow {
            t: t_box,
            w_meas: meas.work,
            w_eras: eras.work,
            w_ext,
            report: reconcile_demon(w_ext, 0.0, &meas, &eras),
        });
    }

    let resolved = Settings {
        seed: Some(seed),
        n_steps: Some(n_steps),
        instances: if s.replay.is_some() { None } else { Some(instances) },
        ..s.clone()
    };
    let format = s.format.unwrap_or(Format::Json);
    match format {
        Format::Json => write_report(
            &resolved,
            "verify-bounds",
            json!({
                "instances": suite.instances,
                "szilard": szilard,
                "summary": {
                    "count": suite.instances.len(),
                    "min_margin": suite.min_margin,
                    "worst_seed": suite.worst_seed,
                    "all_satisfied": suite.all_satisfied,
                },
            }),
        )?,
        Format::Csv => {
            let mut text = String::from("seed,H,I,dF,eq2_margin,eq3_margin,eq4_margin\n");
            for i in &suite.instances {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    i.seed,
                    f17(i.shannon),
                    f17(i.mutual_information),
                    f17(i.delta_f),
                    f17(i.measurement.margin),
                    f17(i.erasure.margin),
                    f17(i.sum.margin)
                ));
            }
            emit(s.out.as_deref(), &text).map_err(io_failure(s.out.as_deref()))?;
        }
    }

    if suite.min_margin < SUITE_MARGIN {
        return Err(Failure::Check(format!(
            "min margin {:.3e} below {SUITE_MARGIN:e}; replay with --seed {seed} --replay {}",
            suite.min_margin, suite.worst_seed
        )));
    }
    if let Some(row) = szilard.iter().find(|r| !r.report.satisfied) {
        return Err(Failure::Check(format!(
            "demon reconciliation violated at t = {}: lhs {}",
            row.t, row.report.lhs
        )));
    }
    Ok(())
}

fn cmd_twobox(s: &Settings) -> Result<(), Failure> {
    let t = temperature(s)?;
    let t_box = s
        .t
        .ok_or_else(|| Failure::Input("twobox needs --t".into()))?;
    let params = TwoBoxParams::new(t_box, s.volume.unwrap_or(1.0), t)?;
    let stages = twobox::stage_works(&params);
    let delta_f = twobox::delta_free_energy(&params)?;
    let temp = t.value();
    let ln2 = std::f64::consts::LN_2;
    let eq3_margin = stages.w_eras - (temp * ln2 - delta_f);
    let eq2_margin = stages.w_meas - delta_f;
    let resolved = Settings {
        temperature: Some(temp),
        volume: Some(params.volume),
        ..s.clone()
    };
    write_report(
        &resolved,
        "twobox",
        json!({
            "stages": stages,
            "W_eras": stages.w_eras,
            "W_meas": stages.w_meas,
            "sum": stages.sum,
            "dF": delta_f,
            "eq3_margin": eq3_margin,
            "eq2_margin": eq2_margin,
            "entropy_balance": twobox::entropy_balance(&params),
        }),
    )?;
    if eq3_margin.abs() > 1e-12 || eq2_margin.abs() > 1e-12 {
        return Err(Failure::Check(format!(
            "closed forms do not saturate the bounds: eq3 margin {eq3_margin:e}, eq2 margin {eq2_margin:e}"
        )));
    }
    Ok(())
}

fn cmd_sweep(s: &Settings) -> Result<(), Failure> {
    let t = temperature(s)?;
    let grid_spec = s.grid.clone().unwrap_or_else(|| "0.01:0.99:0.01".into());
    let grid = twobox::parse_grid(&grid_spec)?;
    let rows = twobox::sweep(&grid, t)?;
    let resolved = Settings {
        temperature: Some(t.value()),
        grid: Some(grid_spec),
        ..s.clone()
    };
    match s.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut text = twobox::SWEEP_HEADER.join(",");
            text.push('\n');
            for r in &rows {
                let cells = [r.t, r.w_eras, r.w_meas, r.sum, r.delta_f, r.eq3_margin, r.eq2_margin];
                text.push_str(&cells.map(f17).join(","));
                text.push('\n');
            }
            emit(s.out.as_deref(), &text).map_err(io_failure(s.out.as_deref()))
        }
        Format::Json => write_report(&resolved, "sweep", json!({ "rows": rows })),
    }
}

fn cmd_langevin(s: &Settings) -> Result<(), Failure> {
    let seed = require_seed(s, "langevin")?;
    let t = temperature(s)?;
    let n_traj = s.n_traj.unwrap_or(10_000);
    let dt = s.dt.unwrap_or(presets::DT);
    let residual = s.residual.unwrap_or(presets::RESIDUAL);
    let t_box = s.t.unwrap_or(0.5);
    let c0 = if t_box == 0.5 {
        0.0
    } else {
        presets::tilt_for_fraction(t_box, t)?
    };
    let mut schedule = match &s.schedule {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            ProtocolSchedule::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        None if s.frozen == Some(true) => {
            ProtocolSchedule::frozen(presets::potential(c0)?.lambda, s.tau.unwrap_or(1.0))?
        }
        None => presets::erasure(c0, residual, t, s.tau.unwrap_or(presets::TAU))?,
    };
    if let Some(tau) = s.tau {
        schedule.duration = tau;
        schedule.validate()?;
    }
    let mut params = EnsembleParams::new(n_traj, seed, dt);
    params.temperature = t;
    let pot = presets::potential(c0)?;
    let ensemble = langevin::simulate_erasure(&pot, &schedule, &params)?;
    let analysis = analyze_erasure(&ensemble)?;

    let resolved = Settings {
        seed: Some(seed),
        temperature: Some(t.value()),
        t: Some(t_box),
        n_traj: Some(n_traj),
        dt: Some(dt),
        tau: Some(schedule.duration),
        residual: if s.schedule.is_some() { None } else { Some(residual) },
        ..s.clone()
    };
    let csv_path = match s.format {
        Some(Format::Csv) => s.out.as_deref(),
        _ => s.csv.as_deref(),
    };
    if let Some(path) = csv_path {
        emit(Some(path), &ensemble.to_csv()).map_err(io_failure(Some(path)))?;
    }
    let body = json!({
        "schedule": schedule,
        "n_steps": ensemble.n_steps,
        "dt_used": ensemble.dt_used,
        "mean": analysis.summary.mean,
        "stderr": analysis.summary.stderr,
        "success_fraction": analysis.summary.success_fraction,
        "analysis": analysis,
        "passed": analysis.passes(),
    });
    if s.format == Some(Format::Csv) {
        let text = to_json(&Report {
            version: VERSION,
            command: "langevin",
            config: &resolved,
            body,
        })
        .map_err(json_failure)?;
        eprint!("{text}");
    } else {
        write_report(&resolved, "langevin", body)?;
    }

    if !analysis.passes() {
        let z = analysis.jarzynski.as_ref().map_or(0.0, |j| j.z_score);
        return Err(Failure::Check(format!(
            "erasure checks failed: reached-bound margin {:.4} (stderr {:.4}), Jarzynski z {z:.2}",
            analysis.reached_margin, analysis.summary.stderr
        )));
    }
    Ok(())
}
