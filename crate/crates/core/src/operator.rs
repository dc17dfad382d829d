//! Finite-dimensional Hermitian operator algebra.
//!
//! Every matrix function goes through the Hermitian eigendecomposition, so
//! `ln`, `sqrt` and `exp` are only ever applied to real spectra. Rank-deficient
//! states are common (projected and canonical states with frozen levels), so
//! `0 ln 0` is taken as zero by clamping eigenvalues at
//! [`policy::EIGEN_CLAMP`](crate::policy::EIGEN_CLAMP).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy;

pub type CMatrix = DMatrix<Complex64>;

/// Largest absolute entry of `m - m†`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest absolute entry of `a - b`. Panics on shape mismatch.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn ensure_square(m: &CMatrix) -> Result<usize> {
    let (rows, cols) = m.shape();
    if rows != cols || rows == 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `V f(Λ) V†` for a Hermitian `m = V Λ V†`.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let scaled = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| vectors[(r, c)] * f(values[c]));
    &scaled * vectors.adjoint()
}

/// Square root of a positive semidefinite matrix; negative eigenvalues from
/// round-off are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_function(m, |x| x.max(0.0).sqrt())
}

/// `-Σ λ ln λ` over a spectrum, with `0 ln 0 = 0`.
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    -values
        .iter()
        .filter(|&&x| x > policy::EIGEN_CLAMP)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `Σ λ ln λ` over a spectrum that need not be normalised.
pub fn x_ln_x_trace(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&x| x > policy::EIGEN_CLAMP)
        .map(|&x| x * x.ln())
        .sum()
}

pub fn real_trace(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `Re tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Whether every off-diagonal entry is below `tol` in magnitude.
pub fn is_diagonal(m: &CMatrix, tol: f64) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].norm() <= tol))
}

fn real_diagonal(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Thermodynamic temperature in energy units (`k_B = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidTemperature(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn beta(self) -> f64 {
        1.0 / self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self(1.0)
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// JSON wire form of a complex square matrix: `{ "dim": n, "re": [[..]], "im": [[..]] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        let check = |rows: &Vec<Vec<f64>>, part: &str| -> Result<()> {
            if rows.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "\"{part}\" has {} rows, expected {n}",
                    rows.len()
                )));
            }
            for (r, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "\"{part}\" row {r} has {} entries, expected {n}",
                        row.len()
                    )));
                }
            }
            Ok(())
        };
        check(&self.re, "re")?;
        if let Some(im) = &self.im {
            check(im, "im")?;
        }
        Ok(CMatrix::from_fn(n, n, |r, c| {
            let im = self.im.as_ref().map_or(0.0, |im| im[r][c]);
            Complex64::new(self.re[r][c], im)
        }))
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect())
                .collect()
        };
        Self {
            dim: m.nrows(),
            re: rows(|z| z.re),
            im: Some(rows(|z| z.im)),
        }
    }
}

/// A Hermitian matrix, e.g. a memory or bath Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianOperator {
    entries: CMatrix,
}

impl HermitianOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        ensure_square(&entries)?;
        let deviation = hermiticity_deviation(&entries);
        if deviation > policy::VALIDATION {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { entries })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(real_diagonal(values))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }
}

impl TryFrom<MatrixJson> for HermitianOperator {
    type Error = Error;
    fn try_from(json: MatrixJson) -> Result<Self> {
        Self::new(json.to_matrix()?)
    }
}

impl From<HermitianOperator> for MatrixJson {
    fn from(op: HermitianOperator) -> Self {
        MatrixJson::from_matrix(&op.entries)
    }
}

/// A positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityOperator {
    entries: CMatrix,
}

impl DensityOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        ensure_square(&entries)?;
        let deviation = hermiticity_deviation(&entries);
        if deviation > policy::VALIDATION {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = real_trace(&entries);
        if (trace - 1.0).abs() > policy::VALIDATION {
            return Err(Error::InvalidDensity(format!("trace is {trace}, expected 1")));
        }
        let min = hermitian_eigen(&entries).0[0];
        if min < -policy::VALIDATION {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { entries })
    }

    /// Normalises a positive semidefinite matrix by its trace.
    pub fn from_unnormalized(entries: CMatrix) -> Result<Self> {
        let trace = real_trace(&entries);
        if !(trace > 0.0) {
            return Err(Error::InvalidDensity(format!("trace is {trace}, cannot normalise")));
        }
        Self::new(entries.map(|z| z / trace))
    }

    pub fn from_diagonal(probabilities: &[f64]) -> Result<Self> {
        Self::new(real_diagonal(probabilities))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        Self::from_diagonal(&vec![1.0 / dim as f64; dim])
    }

    /// `|ψ⟩⟨ψ|` for a normalised copy of `psi`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || norm < 1e-15 {
            return Err(Error::InvalidDensity("zero state vector".into()));
        }
        let n = psi.len();
        let m = CMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj() / (norm * norm));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }

    /// Diagonal in the computational basis, as real probabilities.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.entries, policy::SUPPORT)
    }

    /// `⟨O⟩ = Re tr(ρ O)`.
    pub fn expectation(&self, observable: &HermitianOperator) -> f64 {
        trace_product(&self.entries, observable.entries())
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, unitary: &CMatrix) -> Result<Self> {
        if unitary.shape() != self.entries.shape() {
            return Err(Error::DimensionMismatch(format!(
                "unitary {:?} vs state {:?}",
                unitary.shape(),
                self.entries.shape()
            )));
        }
        Self::new(unitary * &self.entries * unitary.adjoint())
    }
}

impl TryFrom<MatrixJson> for DensityOperator {
    type Error = Error;
    fn try_from(json: MatrixJson) -> Result<Self> {
        Self::new(json.to_matrix()?)
    }
}

impl From<DensityOperator> for MatrixJson {
    fn from(op: DensityOperator) -> Self {
        MatrixJson::from_matrix(&op.entries)
    }
}

/// `S(ρ) = -tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    let s = entropy_of_spectrum(&rho.eigenvalues());
    s.clamp(0.0, (rho.dim() as f64).ln())
}

/// Canonical state `exp(-H/T)/Z` and its free energy `-T ln Z`.
///
/// The spectrum is shifted by its minimum before exponentiating; the shift is
/// added back into the free energy.
pub fn canonical_state(h: &HermitianOperator, t: Temperature) -> (DensityOperator, f64) {
    let (values, vectors) = hermitian_eigen(h.entries());
    let e_min = values[0];
    let weights: Vec<f64> = values.iter().map(|e| (-(e - e_min) / t.value()).exp()).collect();
    let z_shifted: f64 = weights.iter().sum();
    let n = h.dim();
    let scaled = CMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * (weights[c] / z_shifted));
    let mut state = &scaled * vectors.adjoint();
    // Re-impose exact Hermiticity lost to round-off in the product.
    state = (&state + state.adjoint()).map(|z| z * 0.5);
    let free_energy = e_min - t.value() * z_shifted.ln();
    let state = DensityOperator::new(state).expect("canonical state is a valid density operator");
    (state, free_energy)
}

/// Quantum relative entropy `tr ρ (ln ρ - ln σ)`.
///
/// Fails when `ρ` has weight outside the support of `σ`.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy of dim {} against dim {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let (s_values, s_vectors) = hermitian_eigen(sigma.entries());
    let mut leak = 0.0;
    let mut cross = 0.0;
    for (idx, &lambda) in s_values.iter().enumerate() {
        let v = s_vectors.column(idx);
        let weight = (v.adjoint() * rho.entries() * v)[(0, 0)].re;
        if lambda <= policy::SUPPORT {
            leak += weight.max(0.0);
        } else {
            cross += weight * lambda.ln();
        }
    }
    if leak > policy::SUPPORT {
        return Err(Error::InfiniteRelativeEntropy { leak });
    }
    let neg_entropy = x_ln_x_trace(&rho.eigenvalues());
    Ok(neg_entropy - cross)
}

/// `ρ ⊗ σ`.
pub fn tensor(rho: &DensityOperator, sigma: &DensityOperator) -> DensityOperator {
    DensityOperator {
        entries: rho.entries().kronecker(sigma.entries()),
    }
}

/// Which factor of a bipartite `A ⊗ B` space to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    First,
    Second,
}

/// Partial trace of `rho_ab` over `which`, with `dims = (d_A, d_B)`.
pub fn partial_trace(rho_ab: &DensityOperator, which: Factor, dims: (usize, usize)) -> Result<DensityOperator> {
    let (da, db) = dims;
    if da == 0 || db == 0 || da * db != rho_ab.dim() {
        return Err(Error::DimensionMismatch(format!(
            "factor dims {da}x{db} do not match operator dim {}",
            rho_ab.dim()
        )));
    }
    let m = rho_ab.entries();
    let out = match which {
        Factor::Second => CMatrix::from_fn(da, da, |a, a2| (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()),
        Factor::First => CMatrix::from_fn(db, db, |b, b2| (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()),
    };
    Ok(DensityOperator { entries: out })
}

/// What [`random_instance`] draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomKind {
    State,
    Hermitian,
    Unitary,
    Permutation,
}

fn ginibre(rng: &mut impl Rng, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

fn haar_unitary(rng: &mut impl Rng, dim: usize) -> CMatrix {
    let qr = ginibre(rng, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column phases so the distribution is Haar.
    let phases: Vec<Complex64> = (0..dim)
        .map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    CMatrix::from_fn(dim, dim, |row, col| q[(row, col)] * phases[col])
}

fn permutation_matrix(rng: &mut impl Rng, dim: usize) -> CMatrix {
    let mut image: Vec<usize> = (0..dim).collect();
    image.shuffle(rng);
    let mut m = CMatrix::zeros(dim, dim);
    for (col, &row) in image.iter().enumerate() {
        m[(row, col)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Deterministic random operator for a given `(seed, dim, kind)`.
///
/// States are Hilbert–Schmidt distributed (`G G† / tr`), Hermitian matrices
/// are `(G + G†)/2`, unitaries are Haar, and permutations are uniform.
pub fn random_instance(seed: u64, dim: usize, kind: RandomKind) -> CMatrix {
    assert!(dim >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        RandomKind::State => {
            let g = ginibre(&mut rng, dim);
            let m = &g * g.adjoint();
            let trace = real_trace(&m);
            let m = m.map(|z| z / trace);
            (&m + m.adjoint()).map(|z| z * 0.5)
        }
        RandomKind::Hermitian => {
            let g = ginibre(&mut rng, dim);
            (&g + g.adjoint()).map(|z| z * 0.5)
        }
        RandomKind::Unitary => haar_unitary(&mut rng, dim),
        RandomKind::Permutation => permutation_matrix(&mut rng, dim),
    }
}

pub fn random_state(seed: u64, dim: usize) -> DensityOperator {
    DensityOperator::new(random_instance(seed, dim, RandomKind::State)).expect("random state is valid")
}

pub fn random_hermitian(seed: u64, dim: usize) -> HermitianOperator {
    HermitianOperator::new(random_instance(seed, dim, RandomKind::Hermitian)).expect("random hermitian is valid")
}

/// Random probability vector from a seeded RNG (flat Dirichlet).
pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}
