//! Seeded randomized instances for the bound checks, schedule fuzzing, and
//! convergence tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{
    default_measurement_schedules, run_erasure_protocol, run_measurement_process, verify_sum_bound, BoundReport,
    MeasurementRecord,
};
use super::protocol::{erasure_schedule, erasure_tail, ProtocolRecord, Scope, Step};
use super::MemoryLayout;
use crate::error::Result;
use crate::measurement::{shannon, MeasurementModel};
use crate::memory::free_energies;
use crate::operator::{random_simplex, DensityOperator, Temperature};
use crate::policy;

/// SplitMix64 step; derives independent child seeds from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A classical system + memory pair drawn from a seed.
#[derive(Debug, Clone)]
pub struct ClassicalInstance {
    pub seed: u64,
    pub temperature: Temperature,
    pub layout: MemoryLayout,
    pub system_state: DensityOperator,
    pub measurement: MeasurementModel,
}

/// Two or three branches of one to three levels, a system of dimension two to
/// four, and a noisy readout whose outcome distribution is not concentrated on
/// a single branch.
pub fn random_classical_instance(seed: u64) -> ClassicalInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let temperature = Temperature::new(rng.random_range(0.5..2.0)).expect("positive");
    let branches = rng.random_range(2..=3);
    let mut energies = Vec::with_capacity(branches);
    let mut degeneracies = Vec::with_capacity(branches);
    for _ in 0..branches {
        let levels = rng.random_range(1..=3);
        energies.push((0..levels).map(|_| rng.random_range(0.0..3.0)).collect());
        degeneracies.push((0..levels).map(|_| rng.random_range(0.5..2.0)).collect());
    }
    let layout = MemoryLayout::with_degeneracies(energies, degeneracies).expect("valid random layout");

    let dim = rng.random_range(2..=4);
    let q = random_simplex(&mut rng, dim);
    let channel = loop {
        let rows: Vec<Vec<f64>> = (0..dim)
            .map(|_| {
                if rng.random_bool(1.0 / 3.0) {
                    let mut row = vec![0.0; branches];
                    row[rng.random_range(0..branches)] = 1.0;
                    row
                } else {
                    random_simplex(&mut rng, branches)
                }
            })
            .collect();
        let p_max = (0..branches)
            .map(|k| (0..dim).map(|s| q[s] * rows[s][k]).sum::<f64>())
            .fold(0.0, f64::max);
        if p_max < 0.95 {
            break rows;
        }
    };
    ClassicalInstance {
        seed,
        temperature,
        layout,
        system_state: DensityOperator::from_diagonal(&q).expect("simplex draw is a distribution"),
        measurement: MeasurementModel::classical_channel(&channel).expect("simplex rows form a POVM"),
    }
}

/// Bound checks for one measurement-then-erasure instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceMargins {
    pub seed: u64,
    pub n_steps: usize,
    pub shannon: f64,
    pub mutual_information: f64,
    pub delta_f: f64,
    pub measurement: BoundReport,
    pub erasure: BoundReport,
    pub sum: BoundReport,
}

impl InstanceMargins {
    pub fn min_margin(&self) -> f64 {
        self.measurement.margin.min(self.erasure.margin).min(self.sum.margin)
    }

    pub fn all_satisfied(&self) -> bool {
        self.measurement.satisfied && self.erasure.satisfied && self.sum.satisfied
    }
}

/// Measures with default schedules of `n_steps` ramp steps, erases the
/// resulting record, and checks the measurement, erasure and sum bounds.
pub fn run_instance(instance: &ClassicalInstance, n_steps: usize) -> Result<InstanceMargins> {
    let t = instance.temperature;
    let schedules = default_measurement_schedules(&instance.layout, t, &instance.measurement, n_steps)?;
    let (meas, meas_report) =
        run_measurement_process(&instance.layout, t, &instance.measurement, &instance.system_state, &schedules)?;
    let p = meas.outcome_probabilities.clone();
    let schedule = erasure_schedule(&instance.layout, t, &p, n_steps)?;
    let (eras, eras_report) = run_erasure_protocol(&instance.layout, t, &p, &schedule, policy::PROTOCOL_BOUND)?;
    let sum = verify_sum_bound(&meas, &eras, meas.mutual_information, t)?;
    Ok(InstanceMargins {
        seed: instance.seed,
        n_steps,
        shannon: meas.shannon,
        mutual_information: meas.mutual_information,
        delta_f: meas.delta_f,
        measurement: meas_report,
        erasure: eras_report,
        sum,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub base_seed: u64,
    pub instances: Vec<InstanceMargins>,
    pub min_margin: f64,
    /// Seed of the instance with the smallest margin, for replay.
    pub worst_seed: u64,
    pub all_satisfied: bool,
}

/// Runs `count` instances with seeds `derive_seed(base_seed, i)`.
pub fn run_classical_suite(base_seed: u64, count: usize, n_steps: usize) -> Result<SuiteReport> {
    let seeds: Vec<u64> = (0..count as u64).map(|i| derive_seed(base_seed, i)).collect();
    run_seeds(base_seed, &seeds, n_steps)
}

/// Runs exactly the given instance seeds.
pub fn run_seeds(base_seed: u64, seeds: &[u64], n_steps: usize) -> Result<SuiteReport> {
    let instances = seeds
        .iter()
        .map(|&seed| run_instance(&random_classical_instance(seed), n_steps))
        .collect::<Result<Vec<_>>>()?;
    let (min_margin, worst_seed) = instances
        .iter()
        .map(|i| (i.min_margin(), i.seed))
        .fold((f64::INFINITY, base_seed), |acc, x| if x.0 < acc.0 { x } else { acc });
    let all_satisfied = instances.iter().all(InstanceMargins::all_satisfied);
    Ok(SuiteReport {
        base_seed,
        instances,
        min_margin,
        worst_seed,
        all_satisfied,
    })
}

/// Erasure with a random prefix of quenches and thermalizations before the
/// standard tail. The prefix draws energies within `±3 T` of the layout's and
/// the tail uses between 1 and 400 ramp steps.
pub fn fuzzed_erasure(seed: u64) -> Result<(ProtocolRecord, BoundReport)> {
    let instance = random_classical_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xE5A5));
    let t = instance.temperature;
    let layout = &instance.layout;
    let p = random_simplex(&mut rng, layout.outcome_count());
    let base = layout.energies();
    let mut current = base.clone();
    let mut schedule = Vec::new();
    for _ in 0..rng.random_range(1..=6) {
        match rng.random_range(0..3) {
            0 => {
                current = base
                    .iter()
                    .map(|e| e + rng.random_range(-3.0..3.0) * t.value())
                    .collect();
                schedule.push(Step::Quench {
                    energies: current.clone(),
                });
            }
            1 => schedule.push(Step::Thermalize {
                scope: Scope::WithinBranch,
            }),
            _ => schedule.push(Step::Thermalize {
                scope: Scope::AcrossBranches,
            }),
        }
    }
    schedule.extend(erasure_tail(layout, t, &current, rng.random_range(1..=400)));
    run_erasure_protocol(layout, t, &p, &schedule, policy::PROTOCOL_BOUND)
}

/// Quasi-static measurement and erasure on the two-box memory, with an
/// error-free copy of an unbiased bit.
pub fn two_box_engine_pair(t_box: f64, n_steps: usize) -> Result<(MeasurementRecord, ProtocolRecord)> {
    let temperature = Temperature::default();
    let layout = MemoryLayout::two_box(t_box, 1.0)?;
    let m = MeasurementModel::computational_basis(2)?;
    let rho = DensityOperator::maximally_mixed(2)?;
    let schedules = default_measurement_schedules(&layout, temperature, &m, n_steps)?;
    let (meas, _) = run_measurement_process(&layout, temperature, &m, &rho, &schedules)?;
    let schedule = erasure_schedule(&layout, temperature, &meas.outcome_probabilities, n_steps)?;
    let (eras, _) = run_erasure_protocol(
        &layout,
        temperature,
        &meas.outcome_probabilities,
        &schedule,
        policy::PROTOCOL_BOUND,
    )?;
    Ok((meas, eras))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub work: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Erasure work against `T H - ΔF^M` for each ramp length in `ns`.
pub fn erasure_convergence(layout: &MemoryLayout, t: Temperature, p: &[f64], ns: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let bound = t.value() * shannon(p)? - free_energies(layout, t, p)?.delta_f;
    ns.iter()
        .map(|&n| {
            let schedule = erasure_schedule(layout, t, p, n)?;
            let (record, report) = run_erasure_protocol(layout, t, p, &schedule, policy::PROTOCOL_BOUND)?;
            Ok(ConvergenceRow {
                n_steps: n,
                work: record.work,
                bound,
                margin: report.margin,
            })
        })
        .collect()
}
