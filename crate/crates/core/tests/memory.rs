use infotherm::memory::protocol::{run_protocol, Scope, Step, StepKind};
use infotherm::memory::suite::{erasure_convergence, fuzzed_erasure, run_classical_suite, two_box_engine_pair};
use infotherm::memory::{reconcile_demon, MemoryLayout};
use infotherm::Temperature;
use proptest::prelude::*;
use std::f64::consts::LN_2;

#[test]
fn fuzzed_erasures_respect_the_bound() {
    for seed in 0..200u64 {
        let (record, report) = fuzzed_erasure(seed).unwrap();
        assert!(report.margin >= -1e-6, "seed {seed}: {report:?}");
        assert!(record.first_law_residual().abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn classical_suite_holds() {
    let report = run_classical_suite(2024, 100, 200).unwrap();
    assert_eq!(report.instances.len(), 100);
    assert!(report.min_margin >= -1e-6, "worst seed {}", report.worst_seed);
    assert!(report.all_satisfied);
}

#[test]
fn erasure_excess_falls_as_one_over_n() {
    let layout = MemoryLayout::new(vec![vec![0.0], vec![0.0]]).unwrap();
    let rows = erasure_convergence(&layout, Temperature::default(), &[0.5, 0.5], &[100, 1000, 10_000]).unwrap();
    for r in &rows {
        assert!(r.margin > 0.0);
        assert!((r.bound - LN_2).abs() < 1e-12);
    }
    for pair in rows.windows(2) {
        let ratio = pair[0].margin / pair[1].margin;
        println!("n {} -> {}: ratio {ratio}", pair[0].n_steps, pair[1].n_steps);
        assert!((7.0..13.0).contains(&ratio), "ratio {ratio}");
    }
    assert!((rows[2].work - LN_2) / LN_2 < 0.01);
}

#[test]
fn szilard_composite_never_gains() {
    for t_box in [0.5, 0.8] {
        let (meas, eras) = two_box_engine_pair(t_box, 1000).unwrap();
        let report = reconcile_demon(LN_2, 0.0, &meas, &eras);
        assert!(report.lhs <= 0.0, "t = {t_box}: {report:?}");
        assert!(report.satisfied);
    }
}

fn layout_strategy() -> impl Strategy<Value = MemoryLayout> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..3), 2..4)
        .prop_map(|e| MemoryLayout::new(e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn steps_split_energy_into_work_and_heat(
        layout in layout_strategy(),
        shifts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 12), 1..6),
        across in prop::collection::vec(any::<bool>(), 6),
    ) {
        let t = Temperature::default();
        let start = layout.canonical_in_branch(0, t);
        let base = layout.energies();
        let mut schedule = Vec::new();
        for (i, s) in shifts.iter().enumerate() {
            schedule.push(Step::Quench { energies: base.iter().zip(s).map(|(e, d)| e + d).collect() });
            let scope = if across[i] { Scope::AcrossBranches } else { Scope::WithinBranch };
            schedule.push(Step::Thermalize { scope });
        }
        let record = run_protocol(&layout, t, &start, &schedule).unwrap();
        prop_assert!(record.first_law_residual().abs() < 1e-9);
        for step in &record.steps {
            match step.kind {
                StepKind::Quench => prop_assert_eq!(step.heat, 0.0),
                _ => prop_assert_eq!(step.work, 0.0),
            }
        }

        let quenches: Vec<Step> = schedule.iter().filter(|s| matches!(s, Step::Quench { .. })).cloned().collect();
        let frozen = run_protocol(&layout, t, &start, &quenches).unwrap();
        prop_assert_eq!(&frozen.final_distribution, &frozen.initial_distribution);
        prop_assert_eq!(frozen.heat, 0.0);
    }
}
