//! Measurement and erasure processes on a memory, and the four inequalities
//! relating their work to information:
//!
//! - measurement: `W_meas ≥ -T (H - I) + ΔF^M`
//! - erasure: `W_eras ≥ T H - ΔF^M`
//! - sum: `W_meas + W_eras ≥ T I`
//! - demon: `W_ext^S - W_meas - W_eras ≤ -ΔF^S`

use serde::{Deserialize, Serialize};

use super::protocol::{measurement_schedule, run_protocol, ProtocolRecord, Step};
use super::{free_energies, MemoryLayout};
use crate::error::{Error, Result};
use crate::measurement::{qc_mutual_information, shannon, MeasurementModel};
use crate::operator::{DensityOperator, Temperature};
use crate::policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Measurement,
    Erasure,
    Sum,
    Reconciliation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `lhs ≥ rhs`
    AtLeast,
    /// `lhs ≤ rhs`
    AtMost,
}

/// One side-by-side evaluation of an inequality.
///
/// `margin` is the slack in the direction of the inequality (`lhs - rhs` for
/// lower bounds, `rhs - lhs` for upper bounds), so a satisfied bound always has
/// `margin ≥ -tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub direction: Direction,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn at_least(kind: BoundKind, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(kind, Direction::AtLeast, lhs, rhs, lhs - rhs, tolerance)
    }

    pub fn at_most(kind: BoundKind, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(kind, Direction::AtMost, lhs, rhs, rhs - lhs, tolerance)
    }

    fn build(kind: BoundKind, direction: Direction, lhs: f64, rhs: f64, margin: f64, tolerance: f64) -> Self {
        Self {
            kind,
            direction,
            lhs,
            rhs,
            margin,
            tolerance,
            satisfied: margin >= -tolerance,
        }
    }
}

/// Anything with an ensemble-averaged work value.
pub trait AveragedWork {
    fn average_work(&self) -> f64;
}

impl AveragedWork for f64 {
    fn average_work(&self) -> f64 {
        *self
    }
}

impl AveragedWork for ProtocolRecord {
    fn average_work(&self) -> f64 {
        self.work
    }
}

impl AveragedWork for MeasurementRecord {
    fn average_work(&self) -> f64 {
        self.work
    }
}

fn ensure_restored(layout: &MemoryLayout, record: &ProtocolRecord) -> Result<()> {
    let restored = record
        .final_energies
        .iter()
        .zip(layout.energies())
        .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    if restored {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(
            "schedule must return the memory to its original energies".into(),
        ))
    }
}

/// Runs an erasure from `Σ_k p_k ρ_k,can` and checks the erasure bound.
///
/// The schedule must leave at most `residual` probability outside branch 0 and
/// must restore the original level energies.
pub fn run_erasure_protocol(
    layout: &MemoryLayout,
    t: Temperature,
    p_init: &[f64],
    schedule: &[Step],
    residual: f64,
) -> Result<(ProtocolRecord, BoundReport)> {
    let initial = layout.branch_mixture(p_init, t)?;
    let record = run_protocol(layout, t, &initial, schedule)?;
    ensure_restored(layout, &record)?;
    let outside = 1.0 - record.final_branch_weights()[0];
    if outside > residual {
        return Err(Error::NotAnErasure {
            outside,
            allowed: residual,
        });
    }
    let h = shannon(p_init)?;
    let delta_f = free_energies(layout, t, p_init)?.delta_f;
    let report = BoundReport::at_least(
        BoundKind::Erasure,
        record.work,
        t.value() * h - delta_f,
        policy::PROTOCOL_BOUND,
    );
    Ok((record, report))
}

/// Memory protocol run while the system is in basis state `system_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRecord {
    pub system_state: usize,
    pub probability: f64,
    /// Readout probabilities `P(k | s)` the schedule had to realise.
    pub branch_weights: Vec<f64>,
    pub record: ProtocolRecord,
}

/// Classical measurement: one memory protocol per system state, averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub temperature: f64,
    pub conditional: Vec<ConditionalRecord>,
    /// `W_meas = Σ_s q_s W_s`
    pub work: f64,
    pub outcome_probabilities: Vec<f64>,
    pub shannon: f64,
    pub mutual_information: f64,
    pub delta_f: f64,
}

/// Tolerance on how closely a conditional schedule must realise `P(k | s)`.
const READOUT_TOLERANCE: f64 = 1e-6;

/// Runs a classical measurement and checks the measurement bound.
///
/// `rho_s` and the effects of `m` must be diagonal. For each system basis state
/// `s` with `q_s > 0`, `schedules[s]` is run on the memory starting from the
/// canonical state of branch 0 and must end with branch weights equal to
/// `P(k | s) = ⟨s|E_k|s⟩`. Energy exchanged with the system while the memory
/// is being driven counts as work.
pub fn run_measurement_process(
    layout: &MemoryLayout,
    t: Temperature,
    m: &MeasurementModel,
    rho_s: &DensityOperator,
    schedules: &[Vec<Step>],
) -> Result<(MeasurementRecord, BoundReport)> {
    if !rho_s.is_diagonal() || !m.is_classical() {
        return Err(Error::NonClassical(
            "measurement engine needs a diagonal system state and diagonal effects".into(),
        ));
    }
    if m.outcome_count() != layout.outcome_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurement outcomes for {} memory branches",
            m.outcome_count(),
            layout.outcome_count()
        )));
    }
    if m.dim() != rho_s.dim() || schedules.len() != rho_s.dim() {
        return Err(Error::DimensionMismatch(format!(
            "system dim {}, measurement dim {}, {} schedules",
            rho_s.dim(),
            m.dim(),
            schedules.len()
        )));
    }
    let q = rho_s.diagonal_probabilities();
    let channel = m.readout_channel();
    let start = layout.canonical_in_branch(0, t);
    let mut conditional = Vec::new();
    for (s, schedule) in schedules.iter().enumerate() {
        if q[s] <= 0.0 {
            continue;
        }
        let record = run_protocol(layout, t, &start, schedule)?;
        ensure_restored(layout, &record)?;
        let realised = record.final_branch_weights();
        let worst = realised
            .iter()
            .zip(&channel[s])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if worst > READOUT_TOLERANCE {
            return Err(Error::InvalidSchedule(format!(
                "schedule for system state {s} realises branch weights {realised:?}, expected {:?}",
                channel[s]
            )));
        }
        conditional.push(ConditionalRecord {
            system_state: s,
            probability: q[s],
            branch_weights: channel[s].clone(),
            record,
        });
    }
    let work = conditional.iter().map(|c| c.probability * c.record.work).sum();
    let info = qc_mutual_information(rho_s, m)?;
    let delta_f = free_energies(layout, t, &info.probabilities)?.delta_f;
    let rhs = -t.value() * (info.shannon - info.value) + delta_f;
    let record = MeasurementRecord {
        temperature: t.value(),
        conditional,
        work,
        outcome_probabilities: info.probabilities,
        shannon: info.shannon,
        mutual_information: info.value,
        delta_f,
    };
    let report = BoundReport::at_least(BoundKind::Measurement, work, rhs, policy::PROTOCOL_BOUND);
    Ok((record, report))
}

/// Per-state schedules from [`measurement_schedule`] with `n_steps` ramp steps.
pub fn default_measurement_schedules(
    layout: &MemoryLayout,
    t: Temperature,
    m: &MeasurementModel,
    n_steps: usize,
) -> Result<Vec<Vec<Step>>> {
    m.readout_channel()
        .iter()
        .map(|row| measurement_schedule(layout, t, row, n_steps))
        .collect()
}

/// `W_meas + W_eras ≥ T I` for a measurement followed by erasure of its record.
pub fn verify_sum_bound(
    meas: &MeasurementRecord,
    eras: &ProtocolRecord,
    mutual_information: f64,
    t: Temperature,
) -> Result<BoundReport> {
    if meas.temperature != t.value() || eras.temperature != t.value() {
        return Err(Error::Inconsistent(format!(
            "temperatures differ: measurement {}, erasure {}, requested {}",
            meas.temperature,
            eras.temperature,
            t.value()
        )));
    }
    let erased_from = eras.initial_branch_weights();
    if erased_from.len() != meas.outcome_probabilities.len()
        || erased_from
            .iter()
            .zip(&meas.outcome_probabilities)
            .any(|(a, b)| (a - b).abs() > READOUT_TOLERANCE)
    {
        return Err(Error::Inconsistent(format!(
            "erasure starts from branch weights {erased_from:?}, measurement produced {:?}",
            meas.outcome_probabilities
        )));
    }
    if (mutual_information - meas.mutual_information).abs() > policy::IDENTITY {
        return Err(Error::Inconsistent(format!(
            "mutual information {mutual_information} differs from the measurement's {}",
            meas.mutual_information
        )));
    }
    Ok(BoundReport::at_least(
        BoundKind::Sum,
        meas.work + eras.work,
        t.value() * mutual_information,
        policy::PROTOCOL_BOUND,
    ))
}

/// Net work extracted by a feedback engine together with its memory:
/// `W_ext^S - W_meas - W_eras ≤ -ΔF^S`.
pub fn reconcile_demon(
    extracted_work: f64,
    system_delta_f: f64,
    meas: &impl AveragedWork,
    eras: &impl AveragedWork,
) -> BoundReport {
    BoundReport::at_most(
        BoundKind::Reconciliation,
        extracted_work - meas.average_work() - eras.average_work(),
        -system_delta_f,
        policy::BOUND,
    )
}
