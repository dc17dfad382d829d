//! Run settings. Command-line flags override the config file, which
//! overrides built-in defaults.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Every setting any subcommand reads. `None` means unset at this layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Base seed for randomized subcommands.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Temperature in units where k_B = 1.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,

    /// Left-box volume fraction (twobox) or basin ratio analog (langevin).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,

    /// Total two-box volume.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,

    /// Sweep grid as start:stop:step.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,

    /// Ramp steps per protocol stage in the bound suites.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,

    /// Number of random instances in the bound suite.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,

    /// Rerun a single bound-suite instance by its seed.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<u64>,

    /// Number of Langevin trajectories.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,

    /// Langevin time step.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,

    /// Langevin protocol duration.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,

    /// Fraction of failed erasures the protocol aims for (langevin).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,

    /// Hold the potential fixed for the whole run.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frozen: Option<bool>,

    /// Density operator JSON file (qcmi).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,

    /// Measurement JSON file (qcmi).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub povm: Option<PathBuf>,

    /// Protocol schedule JSON file (langevin).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,

    /// Per-trajectory CSV output path (langevin).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,

    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    /// `top` wins wherever it is set.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay_fields!(base, top; seed, temperature, t, volume, grid, n_steps, instances, replay,
            n_traj, dt, tau, residual, frozen, state, povm, schedule, csv, format, out)
    }

    pub fn load(path: &Path) -> Result<Settings, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
