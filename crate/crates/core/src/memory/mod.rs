//! Memory layouts, per-outcome free energies, and the work bounds for
//! measurement and erasure.
//!
//! A memory is a direct sum of branches, one per outcome `k`. Branch `k` has
//! levels with energies `ε_ki` and optional degeneracies `g_ki`, so that
//! `Z_k = Σ_i g_ki exp(-ε_ki / T)`. Degeneracies let a single level stand in
//! for a phase-space volume (the two-box memory uses `g = V_k`).
//!
//! Processes on the memory are classical: populations over levels evolve by
//! quenches (energies change, populations frozen, work is charged) and
//! thermalizations (populations relax to the canonical form, heat is charged).
//! See [`protocol`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::validate_distribution;
use crate::operator::{HermitianOperator, Temperature};

pub mod bounds;
pub mod protocol;
pub mod suite;

pub use bounds::{
    reconcile_demon, run_erasure_protocol, run_measurement_process, verify_sum_bound, AveragedWork, BoundKind,
    BoundReport, MeasurementRecord,
};
pub use protocol::{run_protocol, ProtocolRecord, Scope, Step};

/// `ln Σ g exp(-e / T)`, computed with the minimum energy factored out.
pub(crate) fn log_partition(energies: &[f64], degeneracies: &[f64], t: f64) -> f64 {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = energies
        .iter()
        .zip(degeneracies)
        .map(|(e, g)| g * (-(e - e_min) / t).exp())
        .sum();
    sum.ln() - e_min / t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub energies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracies: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutJson {
    branches: Vec<BranchSpec>,
}

/// Orthogonal-subspace decomposition of a memory with per-branch level
/// energies. Branch 0 is the standard state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutJson", into = "LayoutJson")]
pub struct MemoryLayout {
    energies: Vec<Vec<f64>>,
    degeneracies: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    level_branch: Vec<usize>,
}

impl MemoryLayout {
    pub fn new(energies: Vec<Vec<f64>>) -> Result<Self> {
        let degeneracies = energies.iter().map(|b| vec![1.0; b.len()]).collect();
        Self::with_degeneracies(energies, degeneracies)
    }

    pub fn with_degeneracies(energies: Vec<Vec<f64>>, degeneracies: Vec<Vec<f64>>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidLayout("at least one branch is required".into()));
        }
        if energies.len() != degeneracies.len() {
            return Err(Error::InvalidLayout("one degeneracy list per branch is required".into()));
        }
        let mut offsets = Vec::with_capacity(energies.len() + 1);
        let mut level_branch = Vec::new();
        offsets.push(0);
        for (k, (e, g)) in energies.iter().zip(&degeneracies).enumerate() {
            if e.is_empty() {
                return Err(Error::InvalidLayout(format!("branch {k} has no levels")));
            }
            if e.len() != g.len() {
                return Err(Error::InvalidLayout(format!("branch {k}: {} energies, {} degeneracies", e.len(), g.len())));
            }
            if e.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidLayout(format!("branch {k} has a non-finite energy")));
            }
            if g.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidLayout(format!("branch {k} has a non-positive degeneracy")));
            }
            level_branch.extend(std::iter::repeat_n(k, e.len()));
            offsets.push(offsets[k] + e.len());
        }
        Ok(Self {
            energies,
            degeneracies,
            offsets,
            level_branch,
        })
    }

    /// Two-box single-molecule memory: one level per box at zero energy,
    /// weighted by the box volume (`t V` for outcome 0, `(1 - t) V` for outcome 1).
    pub fn two_box(t: f64, volume: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) || !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::InvalidParameter(format!("two-box needs 0 < t < 1 and V > 0, got t = {t}, V = {volume}")));
        }
        Self::with_degeneracies(vec![vec![0.0], vec![0.0]], vec![vec![t * volume], vec![(1.0 - t) * volume]])
    }

    pub fn outcome_count(&self) -> usize {
        self.energies.len()
    }

    pub fn total_dim(&self) -> usize {
        self.level_branch.len()
    }

    pub fn branch_dim(&self, k: usize) -> usize {
        self.energies[k].len()
    }

    pub fn branch_sizes(&self) -> Vec<usize> {
        self.energies.iter().map(Vec::len).collect()
    }

    /// Flat level indices of branch `k`.
    pub fn branch_range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Branch that flat level `level` belongs to.
    pub fn branch_of(&self, level: usize) -> usize {
        self.level_branch[level]
    }

    pub fn branch_energies(&self, k: usize) -> &[f64] {
        &self.energies[k]
    }

    /// All level energies, flattened in branch order.
    pub fn energies(&self) -> Vec<f64> {
        self.energies.concat()
    }

    pub fn degeneracies(&self) -> Vec<f64> {
        self.degeneracies.concat()
    }

    pub fn partition_function(&self, k: usize, t: Temperature) -> f64 {
        self.log_partition_function(k, t).exp()
    }

    pub fn log_partition_function(&self, k: usize, t: Temperature) -> f64 {
        log_partition(&self.energies[k], &self.degeneracies[k], t.value())
    }

    /// `F_k = -T ln Z_k`.
    pub fn free_energy(&self, k: usize, t: Temperature) -> f64 {
        -t.value() * self.log_partition_function(k, t)
    }

    /// Level populations of the canonical state confined to branch `k`.
    pub fn canonical_in_branch(&self, k: usize, t: Temperature) -> Vec<f64> {
        self.branch_mixture(&one_hot(self.outcome_count(), k), t)
            .expect("one-hot weights are a distribution")
    }

    /// `Σ_k p_k ρ_k,can` as level populations.
    pub fn branch_mixture(&self, p: &[f64], t: Temperature) -> Result<Vec<f64>> {
        self.check_weights(p)?;
        let mut out = vec![0.0; self.total_dim()];
        for (k, &pk) in p.iter().enumerate() {
            let log_z = self.log_partition_function(k, t);
            for (i, idx) in self.branch_range(k).enumerate() {
                let e = self.energies[k][i];
                let g = self.degeneracies[k][i];
                out[idx] = pk * g * (-e / t.value() - log_z).exp();
            }
        }
        Ok(out)
    }

    /// Total population of each branch.
    pub fn branch_weights(&self, populations: &[f64]) -> Vec<f64> {
        (0..self.outcome_count())
            .map(|k| self.branch_range(k).map(|i| populations[i]).sum())
            .collect()
    }

    /// `H^M = ⊕_k H_k` as a diagonal operator over levels (degeneracies are
    /// not expanded).
    pub fn hamiltonian(&self) -> HermitianOperator {
        HermitianOperator::diagonal(&self.energies()).expect("diagonal matrices are Hermitian")
    }

    pub(crate) fn check_weights(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.outcome_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} branch weights for {} branches",
                p.len(),
                self.outcome_count()
            )));
        }
        validate_distribution(p)
    }
}

fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

impl TryFrom<LayoutJson> for MemoryLayout {
    type Error = Error;
    fn try_from(json: LayoutJson) -> Result<Self> {
        let energies = json.branches.iter().map(|b| b.energies.clone()).collect();
        let degeneracies = json
            .branches
            .iter()
            .map(|b| b.degeneracies.clone().unwrap_or_else(|| vec![1.0; b.energies.len()]))
            .collect();
        Self::with_degeneracies(energies, degeneracies)
    }
}

impl From<MemoryLayout> for LayoutJson {
    fn from(layout: MemoryLayout) -> Self {
        let branches = layout
            .energies
            .into_iter()
            .zip(layout.degeneracies)
            .map(|(energies, g)| BranchSpec {
                degeneracies: g.iter().any(|x| *x != 1.0).then_some(g),
                energies,
            })
            .collect();
        Self { branches }
    }
}

/// Per-outcome partition functions and free energies, and `ΔF^M` for a given
/// outcome distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyReport {
    pub temperature: f64,
    pub partition_functions: Vec<f64>,
    pub free_energies: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `ΔF^M = Σ_k p_k F_k - F_0`
    pub delta_f: f64,
}

pub fn free_energies(layout: &MemoryLayout, t: Temperature, p: &[f64]) -> Result<FreeEnergyReport> {
    layout.check_weights(p)?;
    let free: Vec<f64> = (0..layout.outcome_count()).map(|k| layout.free_energy(k, t)).collect();
    let delta_f = p.iter().zip(&free).map(|(p, f)| p * f).sum::<f64>() - free[0];
    Ok(FreeEnergyReport {
        temperature: t.value(),
        partition_functions: (0..layout.outcome_count()).map(|k| layout.partition_function(k, t)).collect(),
        free_energies: free,
        probabilities: p.to_vec(),
        delta_f,
    })
}
