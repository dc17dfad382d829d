//! Closed forms for the single-molecule two-box memory.
//!
//! The memory is a box of volume `V` split by a partition into a left part
//! `t V` (outcome 0, the standard state) and a right part `(1 - t) V`
//! (outcome 1). All stages are quasi-static and isothermal: moving a wall so
//! the molecule's accessible volume goes from `a` to `b` costs `-T ln(b / a)`,
//! and removing the partition is a free expansion costing nothing.
//!
//! Outcome priors are fixed at `(1/2, 1/2)` in the headline results; the
//! per-outcome stage primitives are exposed separately.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{free_energies, MemoryLayout};
use crate::operator::Temperature;

const PRIOR: [f64; 2] = [0.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBoxParams {
    /// Volume fraction of the left box.
    pub t: f64,
    pub volume: f64,
    pub temperature: Temperature,
}

impl TwoBoxParams {
    pub fn new(t: f64, volume: f64, temperature: Temperature) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!("t must lie strictly inside (0, 1), got {t}")));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::InvalidParameter(format!("V must be positive, got {volume}")));
        }
        Ok(Self { t, volume, temperature })
    }

    /// `t` with `V = 1` and `T = 1`.
    pub fn unit(t: f64) -> Result<Self> {
        Self::new(t, 1.0, Temperature::default())
    }

    fn box_volumes(&self) -> [f64; 2] {
        [self.t * self.volume, (1.0 - self.t) * self.volume]
    }
}

/// Quasi-static isothermal work to take the molecule's volume from `from` to `to`.
pub fn isothermal_work(from: f64, to: f64, temperature: Temperature) -> f64 {
    -temperature.value() * (to / from).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErasureStages {
    /// Partition moved to the centre, averaged over outcomes.
    pub partition_move: f64,
    /// Partition removed (free expansion).
    pub removal: f64,
    /// Whole box compressed back into the left part.
    pub compression: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStages {
    /// Outcome 0 leaves the memory untouched.
    pub outcome0: f64,
    /// Outcome 1: left box expands to the whole volume.
    pub expansion: f64,
    /// Outcome 1: compression from the left down to the right box.
    pub compression: f64,
    pub outcome1: f64,
    /// Average over outcomes.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageWorkReport {
    pub params: TwoBoxParams,
    pub erasure: ErasureStages,
    pub measurement: MeasurementStages,
    pub w_eras: f64,
    pub w_meas: f64,
    pub sum: f64,
}

pub fn erasure_works(params: &TwoBoxParams) -> ErasureStages {
    let temp = params.temperature;
    let half = params.volume / 2.0;
    let vols = params.box_volumes();
    let partition_move = PRIOR
        .iter()
        .zip(vols)
        .map(|(p, v)| p * isothermal_work(v, half, temp))
        .sum();
    let removal = 0.0;
    let compression = isothermal_work(params.volume, vols[0], temp);
    ErasureStages {
        partition_move,
        removal,
        compression,
        total: partition_move + removal + compression,
    }
}

pub fn measurement_works(params: &TwoBoxParams) -> MeasurementStages {
    let temp = params.temperature;
    let vols = params.box_volumes();
    let expansion = isothermal_work(vols[0], params.volume, temp);
    let compression = isothermal_work(params.volume, vols[1], temp);
    let outcome1 = expansion + compression;
    MeasurementStages {
        outcome0: 0.0,
        expansion,
        compression,
        outcome1,
        total: PRIOR[0] * 0.0 + PRIOR[1] * outcome1,
    }
}

pub fn stage_works(params: &TwoBoxParams) -> StageWorkReport {
    let erasure = erasure_works(params);
    let measurement = measurement_works(params);
    StageWorkReport {
        params: *params,
        erasure,
        measurement,
        w_eras: erasure.total,
        w_meas: measurement.total,
        sum: erasure.total + measurement.total,
    }
}

/// `T ln 2 - (T/2) ln(t / (1 - t))`
pub fn closed_form_erasure(params: &TwoBoxParams) -> f64 {
    let temp = params.temperature.value();
    temp * LN_2 - 0.5 * temp * (params.t / (1.0 - params.t)).ln()
}

/// `(T/2) ln(t / (1 - t))`
pub fn closed_form_measurement(params: &TwoBoxParams) -> f64 {
    0.5 * params.temperature.value() * (params.t / (1.0 - params.t)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBalance {
    pub physical_initial: f64,
    pub physical_final: f64,
    pub shannon_initial: f64,
    pub shannon_final: f64,
    /// `[S_final + H_final] - [S_initial + H_initial]`
    pub total_change: f64,
}

pub fn entropy_balance(params: &TwoBoxParams) -> EntropyBalance {
    let [left, right] = params.box_volumes();
    let physical_initial = PRIOR[0] * left.ln() + PRIOR[1] * right.ln();
    let physical_final = left.ln();
    let shannon_initial = LN_2;
    let shannon_final = 0.0;
    EntropyBalance {
        physical_initial,
        physical_final,
        shannon_initial,
        shannon_final,
        total_change: (physical_final + shannon_final) - (physical_initial + shannon_initial),
    }
}

/// `ΔF^M` of the two-box memory via [`free_energies`] with `Z_k ∝ V_k`.
pub fn delta_free_energy(params: &TwoBoxParams) -> Result<f64> {
    let layout = MemoryLayout::two_box(params.t, params.volume)?;
    Ok(free_energies(&layout, params.temperature, &PRIOR)?.delta_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub w_eras: f64,
    pub w_meas: f64,
    pub sum: f64,
    pub delta_f: f64,
    /// `W_eras - [T ln 2 - ΔF^M]`
    pub eq3_margin: f64,
    /// `W_meas - [-T (H - I) + ΔF^M]` with `H = I = ln 2`
    pub eq2_margin: f64,
}

pub const SWEEP_HEADER: [&str; 7] = ["t", "W_eras", "W_meas", "sum", "dF", "eq3_margin", "eq2_margin"];

pub fn sweep(grid: &[f64], temperature: Temperature) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&t| {
            let params = TwoBoxParams::new(t, 1.0, temperature)?;
            let report = stage_works(&params);
            let delta_f = delta_free_energy(&params)?;
            let temp = temperature.value();
            // One bit, read without error: H = I = ln 2.
            let (shannon, info) = (LN_2, LN_2);
            Ok(SweepRow {
                t,
                w_eras: report.w_eras,
                w_meas: report.w_meas,
                sum: report.sum,
                delta_f,
                eq3_margin: report.w_eras - (temp * shannon - delta_f),
                eq2_margin: report.w_meas - (-temp * (shannon - info) + delta_f),
            })
        })
        .collect()
}

/// Parses `start:stop:step` into an inclusive grid. The endpoint is kept when
/// it is within a millionth of a step of the last point.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidParameter(format!("grid must be start:stop:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-6).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Bisection for the `t` at which the closed-form erasure work vanishes.
pub fn zero_cost_erasure_t(temperature: Temperature) -> f64 {
    let w = |t: f64| closed_form_erasure(&TwoBoxParams::new(t, 1.0, temperature).expect("t in (0, 1)"));
    let (mut lo, mut hi) = (0.5, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
