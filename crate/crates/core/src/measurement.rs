//! POVM statistics, Shannon and QC-mutual information, and the measurement
//! operators induced by a classical coupling between system and memory.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::MemoryLayout;
use crate::operator::{
    entropy_of_spectrum, hermitian_eigen, is_diagonal, max_abs_diff, psd_sqrt, real_trace, tensor, x_ln_x_trace,
    CMatrix, DensityOperator, MatrixJson,
};
use crate::policy;

/// Shannon entropy `-Σ p ln p` in nats.
pub fn shannon(p: &[f64]) -> Result<f64> {
    validate_distribution(p)?;
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>())
}

pub(crate) fn validate_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if let Some(bad) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidDistribution(format!("entry {bad} is not a probability")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > policy::COMPLETENESS {
        return Err(Error::InvalidDistribution(format!("sums to {total}")));
    }
    Ok(())
}

/// A measurement given by operators `M_ki` grouped by outcome `k`.
///
/// Effects `E_k = Σ_i M_ki† M_ki` are derived on construction and must form a
/// POVM. An outcome may carry no operators, in which case its effect is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasurementJson", into = "MeasurementJson")]
pub struct MeasurementModel {
    dim: usize,
    operators: Vec<Vec<CMatrix>>,
    effects: Vec<CMatrix>,
}

impl MeasurementModel {
    pub fn new(dim: usize, operators: Vec<Vec<CMatrix>>) -> Result<Self> {
        if dim == 0 || operators.is_empty() {
            return Err(Error::InvalidPovm("needs a positive dimension and at least one outcome".into()));
        }
        for (k, ops) in operators.iter().enumerate() {
            for m in ops {
                if m.shape() != (dim, dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "operator for outcome {k} is {:?}, expected {dim}x{dim}",
                        m.shape()
                    )));
                }
            }
        }
        let effects: Vec<CMatrix> = operators
            .iter()
            .map(|ops| {
                let sum = ops.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m.adjoint() * m);
                (&sum + sum.adjoint()).map(|z| z * 0.5)
            })
            .collect();
        for (k, e) in effects.iter().enumerate() {
            let min = hermitian_eigen(e).0[0];
            if min < -policy::VALIDATION {
                return Err(Error::InvalidPovm(format!("effect {k} has eigenvalue {min:.3e}")));
            }
        }
        let total = effects.iter().fold(CMatrix::zeros(dim, dim), |acc, e| acc + e);
        let deviation = max_abs_diff(&total, &CMatrix::identity(dim, dim));
        if deviation > policy::COMPLETENESS {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {deviation:.3e}"
            )));
        }
        Ok(Self { dim, operators, effects })
    }

    /// One operator `√E_k` per outcome.
    pub fn from_effects(effects: Vec<CMatrix>) -> Result<Self> {
        let dim = effects.first().map_or(0, |e| e.nrows());
        let ops = effects.iter().map(|e| vec![psd_sqrt(e)]).collect();
        Self::new(dim, ops)
    }

    /// Rank-one projective measurement in the computational basis.
    pub fn computational_basis(dim: usize) -> Result<Self> {
        let effects = (0..dim)
            .map(|k| {
                let mut p = CMatrix::zeros(dim, dim);
                p[(k, k)] = Complex64::new(1.0, 0.0);
                p
            })
            .collect();
        Self::from_effects(effects)
    }

    /// Classical noisy readout: outcome `k` given basis state `s` with
    /// probability `channel[s][k]`. Effects are diagonal.
    pub fn classical_channel(channel: &[Vec<f64>]) -> Result<Self> {
        let dim = channel.len();
        let outcomes = channel.first().map_or(0, Vec::len);
        for (s, row) in channel.iter().enumerate() {
            if row.len() != outcomes {
                return Err(Error::DimensionMismatch(format!("channel row {s} has {} outcomes", row.len())));
            }
            validate_distribution(row)?;
        }
        let effects = (0..outcomes)
            .map(|k| {
                CMatrix::from_fn(dim, dim, |r, c| {
                    if r == c {
                        Complex64::new(channel[r][k], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Self::from_effects(effects)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcome_count(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self, k: usize) -> &[CMatrix] {
        &self.operators[k]
    }

    pub fn effect(&self, k: usize) -> &CMatrix {
        &self.effects[k]
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    /// Whether every effect is diagonal in the computational basis.
    pub fn is_classical(&self) -> bool {
        self.effects.iter().all(|e| is_diagonal(e, policy::SUPPORT))
    }

    /// `P(k | s) = ⟨s|E_k|s⟩`, indexed `[s][k]`.
    pub fn readout_channel(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|s| self.effects.iter().map(|e| e[(s, s)].re.max(0.0)).collect())
            .collect()
    }

    /// Relabels outcomes: new outcome `j` is old outcome `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let ops = order.iter().map(|&k| self.operators[k].clone()).collect();
        Self::new(self.dim, ops)
    }

    /// `M_ki -> M_ki V` for every operator.
    pub fn right_multiplied(&self, v: &CMatrix) -> Result<Self> {
        let ops = self
            .operators
            .iter()
            .map(|ops| ops.iter().map(|m| m * v).collect())
            .collect();
        Self::new(self.dim, ops)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OutcomeJson {
    k: usize,
    operators: Vec<MatrixJson>,
}

/// `{ "outcomes": [ { "k": 0, "operators": [matrix, ...] }, ... ] }`
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeasurementJson {
    outcomes: Vec<OutcomeJson>,
}

impl TryFrom<MeasurementJson> for MeasurementModel {
    type Error = Error;

    fn try_from(json: MeasurementJson) -> Result<Self> {
        let n = json.outcomes.len();
        let mut slots: Vec<Option<Vec<CMatrix>>> = vec![None; n];
        let mut dim = None;
        for outcome in json.outcomes {
            if outcome.k >= n || slots[outcome.k].is_some() {
                return Err(Error::InvalidPovm(format!(
                    "outcome labels must be 0..{n} without repeats, got {}",
                    outcome.k
                )));
            }
            let mats = outcome
                .operators
                .iter()
                .map(MatrixJson::to_matrix)
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = mats.first() {
                dim.get_or_insert(first.nrows());
            }
            slots[outcome.k] = Some(mats);
        }
        let dim = dim.ok_or_else(|| Error::InvalidPovm("no operators".into()))?;
        Self::new(dim, slots.into_iter().map(Option::unwrap_or_default).collect())
    }
}

impl From<MeasurementModel> for MeasurementJson {
    fn from(m: MeasurementModel) -> Self {
        let outcomes = m
            .operators
            .iter()
            .enumerate()
            .map(|(k, ops)| OutcomeJson {
                k,
                operators: ops.iter().map(MatrixJson::from_matrix).collect(),
            })
            .collect();
        Self { outcomes }
    }
}

/// Outcome probabilities and post-measurement conditional states.
#[derive(Debug, Clone)]
pub struct OutcomeStatistics {
    /// `p_k = tr(E_k ρ)`
    pub probabilities: Vec<f64>,
    /// `p_ki = tr(M_ki† M_ki ρ)`
    pub sub_probabilities: Vec<Vec<f64>>,
    /// Unnormalised `σ_k = √E_k ρ √E_k`, with `tr σ_k = p_k`.
    pub conditional: Vec<CMatrix>,
}

fn check_dims(rho: &DensityOperator, m: &MeasurementModel) -> Result<()> {
    if rho.dim() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has dim {}, measurement acts on dim {}",
            rho.dim(),
            m.dim()
        )));
    }
    Ok(())
}

pub fn outcome_statistics(rho: &DensityOperator, m: &MeasurementModel) -> Result<OutcomeStatistics> {
    check_dims(rho, m)?;
    let r = rho.entries();
    let sub_probabilities: Vec<Vec<f64>> = (0..m.outcome_count())
        .map(|k| {
            m.operators(k)
                .iter()
                .map(|op| real_trace(&(op * r * op.adjoint())).max(0.0))
                .collect()
        })
        .collect();
    let probabilities = sub_probabilities.iter().map(|row| row.iter().sum()).collect();
    let conditional = m
        .effects()
        .iter()
        .map(|e| {
            let root = psd_sqrt(e);
            let s = &root * r * &root;
            (&s + s.adjoint()).map(|z| z * 0.5)
        })
        .collect();
    Ok(OutcomeStatistics {
        probabilities,
        sub_probabilities,
        conditional,
    })
}

/// QC-mutual information and the quantities it is assembled from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QcMutualInformation {
    /// `I` from the defining formula.
    pub value: f64,
    /// `I` from the alternative route `S(ρ) - Σ p_k S(√ρ E_k √ρ / p_k)`.
    pub alternative: f64,
    /// Shannon information `H` of the outcomes.
    pub shannon: f64,
    /// `S(ρ)`.
    pub state_entropy: f64,
    pub probabilities: Vec<f64>,
}

/// `I = S(ρ) + H + Σ_k tr[σ_k ln σ_k]` with `σ_k = √E_k ρ √E_k`.
///
/// The value is cross-checked against `S(ρ) - Σ_k p_k S(τ_k)`, where
/// `τ_k = √ρ E_k √ρ / p_k` has the same nonzero spectrum as `σ_k / p_k` but is
/// built from a different matrix product. Disagreement beyond
/// [`policy::IDENTITY`], or a value outside `[0, H]`, is an error.
pub fn qc_mutual_information(rho: &DensityOperator, m: &MeasurementModel) -> Result<QcMutualInformation> {
    let stats = outcome_statistics(rho, m)?;
    let total: f64 = stats.probabilities.iter().sum();
    let probabilities: Vec<f64> = stats.probabilities.iter().map(|p| p / total).collect();
    let h = shannon(&probabilities)?;
    let s_rho = entropy_of_spectrum(&rho.eigenvalues());

    let defining = s_rho
        + h
        + stats
            .conditional
            .iter()
            .map(|sigma| x_ln_x_trace(&hermitian_eigen(sigma).0))
            .sum::<f64>();

    let sqrt_rho = psd_sqrt(rho.entries());
    let mut alternative = s_rho;
    for (k, e) in m.effects().iter().enumerate() {
        let p = probabilities[k];
        if p <= policy::EIGEN_CLAMP {
            continue;
        }
        let tau = &sqrt_rho * e * &sqrt_rho;
        let tau = (&tau + tau.adjoint()).map(|z| z * (0.5 / p));
        alternative -= p * entropy_of_spectrum(&hermitian_eigen(&tau).0);
    }

    if (defining - alternative).abs() > policy::IDENTITY {
        return Err(Error::IdentityViolated(format!(
            "QC-mutual information: defining formula {defining} vs alternative {alternative}"
        )));
    }
    if defining < -policy::COMPLETENESS || defining > h + policy::COMPLETENESS {
        return Err(Error::IdentityViolated(format!(
            "QC-mutual information {defining} outside [0, H = {h}]"
        )));
    }
    Ok(QcMutualInformation {
        value: defining,
        alternative,
        shannon: h,
        state_entropy: s_rho,
        probabilities,
    })
}

/// One measurement operator produced by [`classical_decompose`].
#[derive(Debug, Clone)]
pub struct ClassicalKraus {
    /// Outcome (memory branch) the target label belongs to.
    pub outcome: usize,
    /// Target memory+bath basis index `(k, i)`, flattened over the whole MB space.
    pub target: usize,
    /// Source memory+bath basis index `(l, j)` whose initial weight feeds this operator.
    pub source: usize,
    pub operator: CMatrix,
}

/// Measurement operators induced by a permutation coupling.
#[derive(Debug, Clone)]
pub struct ClassicalDecomposition {
    pub model: MeasurementModel,
    pub kraus: Vec<ClassicalKraus>,
    /// Max entry deviation between the reconstructed and the true
    /// post-projection state.
    pub max_deviation: f64,
    /// Operators summed over sources, one per target label:
    /// `⟨s|M_ki|s'⟩ = Σ_{lj} √r_lj ⟨s,k,i|U|s',l,j⟩`.
    pub single_operator_form: Vec<Vec<CMatrix>>,
    /// Reconstruction error of the single-operator form. Nonzero exactly when
    /// two sources sharing a system state `s'` feed the same target label.
    pub single_operator_deviation: f64,
}

fn check_permutation(u: &CMatrix) -> Result<()> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::NotPermutation(format!("{}x{} is not square", n, u.ncols())));
    }
    for z in u.iter() {
        let is_zero = z.norm() <= policy::SUPPORT;
        let is_one = (z - Complex64::new(1.0, 0.0)).norm() <= policy::SUPPORT;
        if !(is_zero || is_one) {
            return Err(Error::NotPermutation(format!("entry {z} is neither 0 nor 1")));
        }
    }
    for i in 0..n {
        let row = (0..n).filter(|&j| u[(i, j)].re > 0.5).count();
        let col = (0..n).filter(|&j| u[(j, i)].re > 0.5).count();
        if row != 1 || col != 1 {
            return Err(Error::NotPermutation(format!("row/column {i} has {row}/{col} ones")));
        }
    }
    Ok(())
}

/// Post-projection state `Σ_k P_k U (ρ_S ⊗ ρ_MB) U† P_k`, with `P_k` acting on
/// the memory branch of the MB factor.
pub fn post_projection_state(
    u: &CMatrix,
    rho_s: &DensityOperator,
    rho_mb: &DensityOperator,
    layout: &MemoryLayout,
    bath_dim: usize,
) -> CMatrix {
    let evolved = u * tensor(rho_s, rho_mb).entries() * u.adjoint();
    let d_mb = rho_mb.dim();
    let n = evolved.nrows();
    let branch = |idx: usize| layout.branch_of((idx % d_mb) / bath_dim);
    CMatrix::from_fn(n, n, |r, c| {
        if branch(r) == branch(c) {
            evolved[(r, c)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn reconstruct<'a>(
    rho_s: &CMatrix,
    d_mb: usize,
    terms: impl Iterator<Item = (usize, &'a CMatrix)>,
) -> CMatrix {
    let d_s = rho_s.nrows();
    let mut out = CMatrix::zeros(d_s * d_mb, d_s * d_mb);
    for (target, m) in terms {
        let block = m * rho_s * m.adjoint();
        for a in 0..d_s {
            for b in 0..d_s {
                out[(a * d_mb + target, b * d_mb + target)] += block[(a, b)];
            }
        }
    }
    out
}

/// Builds measurement operators for a classical coupling.
///
/// `u` is a permutation on `S ⊗ M ⊗ B` (system index slowest, bath fastest);
/// `rho_s` and `rho_mb` must be diagonal. The MB basis label `m * bath_dim + b`
/// belongs to outcome `layout.branch_of(m)`.
///
/// For every target `(s, k, i)` the permutation has a unique preimage
/// `(s', l, j)`; the operator attached to the pair (target `ki`, source `lj`)
/// is `√r_lj |s⟩⟨s'|`. These operators reproduce the post-projection state as
/// `Σ M ρ_S M† ⊗ |ki⟩⟨ki|` exactly. Sources with zero initial weight are
/// dropped.
pub fn classical_decompose(
    u: &CMatrix,
    rho_s: &DensityOperator,
    rho_mb: &DensityOperator,
    layout: &MemoryLayout,
    bath_dim: usize,
) -> Result<ClassicalDecomposition> {
    if !rho_s.is_diagonal() {
        return Err(Error::NonClassical("system state has off-diagonal entries".into()));
    }
    if !rho_mb.is_diagonal() {
        return Err(Error::NonClassical("memory+bath state has off-diagonal entries".into()));
    }
    if bath_dim == 0 || layout.total_dim() * bath_dim != rho_mb.dim() {
        return Err(Error::DimensionMismatch(format!(
            "memory dim {} x bath dim {bath_dim} does not match MB state dim {}",
            layout.total_dim(),
            rho_mb.dim()
        )));
    }
    let d_s = rho_s.dim();
    let d_mb = rho_mb.dim();
    if u.nrows() != d_s * d_mb {
        return Err(Error::DimensionMismatch(format!(
            "coupling has dim {}, expected {}",
            u.nrows(),
            d_s * d_mb
        )));
    }
    check_permutation(u)?;

    let r = rho_mb.diagonal_probabilities();
    let n = d_s * d_mb;
    let mut preimage = vec![0usize; n];
    for col in 0..n {
        let row = (0..n).find(|&row| u[(row, col)].re > 0.5).expect("checked permutation");
        preimage[row] = col;
    }

    let mut grouped: BTreeMap<(usize, usize), CMatrix> = BTreeMap::new();
    for (row, &col) in preimage.iter().enumerate() {
        let (s, target) = (row / d_mb, row % d_mb);
        let (s_src, source) = (col / d_mb, col % d_mb);
        let weight = r[source];
        if weight <= 0.0 {
            continue;
        }
        let m = grouped
            .entry((target, source))
            .or_insert_with(|| CMatrix::zeros(d_s, d_s));
        m[(s, s_src)] += Complex64::new(weight.sqrt(), 0.0);
    }

    let outcome_of = |target: usize| layout.branch_of(target / bath_dim);
    let kraus: Vec<ClassicalKraus> = grouped
        .into_iter()
        .map(|((target, source), operator)| ClassicalKraus {
            outcome: outcome_of(target),
            target,
            source,
            operator,
        })
        .collect();

    let mut by_outcome = vec![Vec::new(); layout.outcome_count()];
    for kr in &kraus {
        by_outcome[kr.outcome].push(kr.operator.clone());
    }
    let model = MeasurementModel::new(d_s, by_outcome)?;

    let exact = post_projection_state(u, rho_s, rho_mb, layout, bath_dim);
    let rebuilt = reconstruct(rho_s.entries(), d_mb, kraus.iter().map(|k| (k.target, &k.operator)));
    let max_deviation = max_abs_diff(&exact, &rebuilt);
    if max_deviation > policy::COMPLETENESS {
        return Err(Error::ReconstructionFailed { max_deviation });
    }

    let mut summed: BTreeMap<usize, CMatrix> = BTreeMap::new();
    for kr in &kraus {
        *summed.entry(kr.target).or_insert_with(|| CMatrix::zeros(d_s, d_s)) += &kr.operator;
    }
    let single_rebuilt = reconstruct(rho_s.entries(), d_mb, summed.iter().map(|(t, m)| (*t, m)));
    let single_operator_deviation = max_abs_diff(&exact, &single_rebuilt);
    let mut single_operator_form = vec![Vec::new(); layout.outcome_count()];
    for (target, m) in summed {
        single_operator_form[outcome_of(target)].push(m);
    }

    Ok(ClassicalDecomposition {
        model,
        kraus,
        max_deviation,
        single_operator_form,
        single_operator_deviation,
    })
}

/// Classical mutual information of the joint distribution
/// `p(k, s) = q_s ⟨s|E_k|s⟩` for a diagonal state and diagonal effects.
pub fn classical_mutual_information(rho: &DensityOperator, m: &MeasurementModel) -> Result<f64> {
    check_dims(rho, m)?;
    if !rho.is_diagonal() || !m.is_classical() {
        return Err(Error::NonClassical("state and effects must be diagonal".into()));
    }
    let q = rho.diagonal_probabilities();
    let channel = m.readout_channel();
    let p_k: Vec<f64> = (0..m.outcome_count())
        .map(|k| (0..m.dim()).map(|s| q[s] * channel[s][k]).sum())
        .collect();
    let mut info = 0.0;
    for s in 0..m.dim() {
        for k in 0..m.outcome_count() {
            let joint = q[s] * channel[s][k];
            if joint > 0.0 {
                info += joint * (joint / (q[s] * p_k[k])).ln();
            }
        }
    }
    Ok(info)
}
