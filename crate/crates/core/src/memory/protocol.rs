//! Quench-and-thermalize protocol engine.
//!
//! A quench replaces the level energies while populations stay frozen and
//! charges work `Σ_s p(s) [E_new(s) - E_old(s)]`. A thermalization relaxes the
//! populations to the canonical form at fixed energies and charges heat
//! `Σ_s [p_new(s) - p_old(s)] E(s)`. Thermalizing within branches keeps each
//! branch weight (barrier up); thermalizing across branches lets weight flow
//! between them (barrier removed).

use serde::{Deserialize, Serialize};

use super::{log_partition, MemoryLayout};
use crate::error::{Error, Result};
use crate::measurement::validate_distribution;
use crate::operator::Temperature;
use crate::policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    WithinBranch,
    AcrossBranches,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Quench { energies: Vec<f64> },
    Thermalize { scope: Scope },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Quench,
    ThermalizeWithin,
    ThermalizeAcross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLedger {
    pub kind: StepKind,
    pub work: f64,
    pub heat: f64,
}

/// Outcome of running a schedule: per-step ledger, totals, and the end states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRecord {
    pub temperature: f64,
    pub branch_sizes: Vec<usize>,
    pub initial_distribution: Vec<f64>,
    pub final_distribution: Vec<f64>,
    pub initial_energies: Vec<f64>,
    pub final_energies: Vec<f64>,
    pub steps: Vec<StepLedger>,
    pub work: f64,
    pub heat: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weights_by_branch(sizes: &[usize], populations: &[f64]) -> Vec<f64> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&n| {
            let w = populations[start..start + n].iter().sum();
            start += n;
            w
        })
        .collect()
}

impl ProtocolRecord {
    pub fn internal_energy_change(&self) -> f64 {
        dot(&self.final_distribution, &self.final_energies) - dot(&self.initial_distribution, &self.initial_energies)
    }

    /// `ΔE - (W + Q)`; zero up to round-off.
    pub fn first_law_residual(&self) -> f64 {
        self.internal_energy_change() - (self.work + self.heat)
    }

    pub fn initial_branch_weights(&self) -> Vec<f64> {
        weights_by_branch(&self.branch_sizes, &self.initial_distribution)
    }

    pub fn final_branch_weights(&self) -> Vec<f64> {
        weights_by_branch(&self.branch_sizes, &self.final_distribution)
    }

    pub fn quench_count(&self) -> usize {
        self.steps.iter().filter(|s| s.kind == StepKind::Quench).count()
    }
}

struct Engine<'a> {
    layout: &'a MemoryLayout,
    degeneracies: Vec<f64>,
    t: f64,
    populations: Vec<f64>,
    energies: Vec<f64>,
    steps: Vec<StepLedger>,
}

impl Engine<'_> {
    fn quench(&mut self, energies: &[f64]) -> Result<()> {
        if energies.len() != self.energies.len() {
            return Err(Error::InvalidSchedule(format!(
                "quench has {} energies, memory has {} levels",
                energies.len(),
                self.energies.len()
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSchedule("quench energy is not finite".into()));
        }
        let work = self
            .populations
            .iter()
            .zip(energies.iter().zip(&self.energies))
            .map(|(p, (new, old))| p * (new - old))
            .sum();
        self.energies.copy_from_slice(energies);
        self.steps.push(StepLedger {
            kind: StepKind::Quench,
            work,
            heat: 0.0,
        });
        Ok(())
    }

    fn relax(&mut self, range: std::ops::Range<usize>) -> f64 {
        let mass: f64 = self.populations[range.clone()].iter().sum();
        if mass <= 0.0 {
            return 0.0;
        }
        let e = &self.energies[range.clone()];
        let g = &self.degeneracies[range.clone()];
        let log_z = log_partition(e, g, self.t);
        let mut heat = 0.0;
        for (idx, (&e, &g)) in range.zip(e.iter().zip(g)) {
            let new = mass * g * (-e / self.t - log_z).exp();
            heat += (new - self.populations[idx]) * e;
            self.populations[idx] = new;
        }
        heat
    }

    fn thermalize(&mut self, scope: Scope) {
        let (kind, heat) = match scope {
            Scope::WithinBranch => {
                let heat = (0..self.layout.outcome_count())
                    .map(|k| self.relax(self.layout.branch_range(k)))
                    .sum();
                (StepKind::ThermalizeWithin, heat)
            }
            Scope::AcrossBranches => (StepKind::ThermalizeAcross, self.relax(0..self.energies.len())),
        };
        self.steps.push(StepLedger { kind, work: 0.0, heat });
    }
}

/// Runs `schedule` on `layout` starting from level populations `initial` at
/// the layout's own energies.
pub fn run_protocol(layout: &MemoryLayout, t: Temperature, initial: &[f64], schedule: &[Step]) -> Result<ProtocolRecord> {
    if initial.len() != layout.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} populations for {} levels",
            initial.len(),
            layout.total_dim()
        )));
    }
    validate_distribution(initial)?;
    let mut engine = Engine {
        layout,
        degeneracies: layout.degeneracies(),
        t: t.value(),
        populations: initial.to_vec(),
        energies: layout.energies(),
        steps: Vec::with_capacity(schedule.len()),
    };
    for step in schedule {
        match step {
            Step::Quench { energies } => engine.quench(energies)?,
            Step::Thermalize { scope } => engine.thermalize(*scope),
        }
    }
    let work = engine.steps.iter().map(|s| s.work).sum();
    let heat = engine.steps.iter().map(|s| s.heat).sum();
    Ok(ProtocolRecord {
        temperature: t.value(),
        branch_sizes: layout.branch_sizes(),
        initial_distribution: initial.to_vec(),
        final_distribution: engine.populations,
        initial_energies: layout.energies(),
        final_energies: engine.energies,
        steps: engine.steps,
        work,
        heat,
    })
}

/// Energies with each branch `k` shifted uniformly by `offsets[k]`.
pub fn shifted_energies(layout: &MemoryLayout, offsets: &[f64]) -> Vec<f64> {
    let mut e = layout.energies();
    for (k, off) in offsets.iter().enumerate() {
        for idx in layout.branch_range(k) {
            e[idx] += off;
        }
    }
    e
}

/// `n` equal quenches from `from` to `to`, each followed by a thermalization.
///
/// Equal energy increments make the Boltzmann factor of each level change by a
/// constant ratio per step, i.e. a geometric ramp in occupation weight.
pub fn ramp(from: &[f64], to: &[f64], n_steps: usize, scope: Scope) -> Vec<Step> {
    let mut steps = Vec::with_capacity(2 * n_steps);
    for j in 1..=n_steps {
        let f = j as f64 / n_steps as f64;
        let energies = from.iter().zip(to).map(|(a, b)| a + (b - a) * f).collect();
        steps.push(Step::Quench { energies });
        steps.push(Step::Thermalize { scope });
    }
    steps
}

/// Branch offsets that make the branch free energies `F_k + c_k` equal
/// `reference - T ln(w_k / w_max)`, capped at `reference + cap`. Branches with
/// zero weight sit at the cap.
fn offsets_for_weights(layout: &MemoryLayout, t: Temperature, weights: &[f64], reference: f64, cap: f64) -> Vec<f64> {
    let w_max = weights.iter().copied().fold(0.0, f64::max);
    (0..layout.outcome_count())
        .map(|k| {
            let target = if weights[k] > 0.0 {
                (reference - t.value() * (weights[k] / w_max).ln()).min(reference + cap)
            } else {
                reference + cap
            };
            target - layout.free_energy(k, t)
        })
        .collect()
}

/// Energies that hold every non-standard branch `cap` above branch 0 in free
/// energy, with branch 0 at its own energies.
pub fn erased_energies(layout: &MemoryLayout, t: Temperature, cap: f64) -> Vec<f64> {
    let f0 = layout.free_energy(0, t);
    let offsets: Vec<f64> = (0..layout.outcome_count())
        .map(|k| if k == 0 { 0.0 } else { f0 + cap - layout.free_energy(k, t) })
        .collect();
    shifted_energies(layout, &offsets)
}

/// Erasure that is quasi-static as `n_steps → ∞`.
///
/// 1. With the barrier up, shift each branch so its canonical weight equals
///    its current weight `p_k` (uniform shift: work `Σ p_k c_k`, speed
///    independent).
/// 2. Remove the barrier and ramp every non-standard branch up to
///    [`policy::ENERGY_CAP`] above branch 0, thermalizing across branches.
/// 3. Restore the barrier and quench back to the original energies.
pub fn erasure_schedule(layout: &MemoryLayout, t: Temperature, p: &[f64], n_steps: usize) -> Result<Vec<Step>> {
    layout.check_weights(p)?;
    if n_steps == 0 {
        return Err(Error::InvalidSchedule("at least one ramp step is required".into()));
    }
    let cap = policy::ENERGY_CAP * t.value();
    let balanced = shifted_energies(layout, &offsets_for_weights(layout, t, p, layout.free_energy(0, t), cap));
    let mut steps = vec![
        Step::Quench {
            energies: balanced.clone(),
        },
        Step::Thermalize {
            scope: Scope::WithinBranch,
        },
    ];
    steps.extend(erasure_tail(layout, t, &balanced, n_steps));
    Ok(steps)
}

/// Ramp from `from` to the erased configuration with the barrier removed,
/// then restore the barrier and the original energies.
pub fn erasure_tail(layout: &MemoryLayout, t: Temperature, from: &[f64], n_steps: usize) -> Vec<Step> {
    let target = erased_energies(layout, t, policy::ENERGY_CAP * t.value());
    let mut steps = ramp(from, &target, n_steps, Scope::AcrossBranches);
    steps.push(Step::Quench {
        energies: layout.energies(),
    });
    steps.push(Step::Thermalize {
        scope: Scope::WithinBranch,
    });
    steps
}

/// Schedule that drives the memory from the canonical state of branch 0 to
/// branch weights `weights`, each branch canonical. Used per system state in a
/// classical measurement.
///
/// 1. Raise the empty branches to the cap (no work: no population there).
/// 2. Remove the barrier and ramp the branch free energies to
///    `F_0 - T ln(w_k / w_max)`, thermalizing across branches.
/// 3. Restore the barrier and quench back to the original energies.
pub fn measurement_schedule(layout: &MemoryLayout, t: Temperature, weights: &[f64], n_steps: usize) -> Result<Vec<Step>> {
    layout.check_weights(weights)?;
    if n_steps == 0 {
        return Err(Error::InvalidSchedule("at least one ramp step is required".into()));
    }
    let cap = policy::ENERGY_CAP * t.value();
    let raised = erased_energies(layout, t, cap);
    let target = shifted_energies(layout, &offsets_for_weights(layout, t, weights, layout.free_energy(0, t), cap));
    let mut steps = vec![Step::Quench {
        energies: raised.clone(),
    }];
    steps.extend(ramp(&raised, &target, n_steps, Scope::AcrossBranches));
    steps.push(Step::Quench {
        energies: layout.energies(),
    });
    steps.push(Step::Thermalize {
        scope: Scope::WithinBranch,
    });
    Ok(steps)
}
