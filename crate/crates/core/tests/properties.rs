use num_bigint::BigInt;
use num_rational::BigRational;
use optimal_adaboost::datagen::{dataset_hash, read_csv, write_csv};
use optimal_adaboost::dynamics::{detect_cycle, recurrence_norm, time_averages};
use optimal_adaboost::engine::{boost_round, run_boost, InitMode, RunConfig};
use optimal_adaboost::stumps::{class_size_bound, fast_errors, naive_errors, select_optimal};
use optimal_adaboost::{
    mistake_vector, weighted_error, Backend, Dataset, Exact, Float, HypothesisInventory, Num,
    WeightState,
};
use proptest::prelude::*;

/// Features on a coarse grid so that duplicates and equal values occur.
fn dataset(max_m: usize, max_n: usize) -> impl Strategy<Value = Dataset> {
    (2..=max_m, 1..=max_n).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..=20, n), m),
            prop::collection::vec(prop::bool::ANY, m),
        )
            .prop_map(|(rows, labels)| {
                let rows = rows
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| f64::from(v) / 20.0).collect())
                    .collect();
                let labels: Vec<i64> = labels.into_iter().map(|b| if b { 1 } else { -1 }).collect();
                Dataset::from_rows(rows, &labels).unwrap()
            })
    })
}

fn inventory(data: &Dataset) -> Option<HypothesisInventory> {
    HypothesisInventory::build(data).ok()
}

fn exact_weights(masses: &[u32]) -> WeightState<Exact> {
    let total: u64 = masses.iter().map(|&v| u64::from(v)).sum();
    let w: Vec<BigRational> = masses
        .iter()
        .map(|&v| BigRational::new(BigInt::from(v), BigInt::from(total)))
        .collect();
    WeightState::from_rationals(&w).unwrap()
}

fn data_and_masses() -> impl Strategy<Value = (Dataset, Vec<u32>)> {
    dataset(12, 3).prop_flat_map(|d| {
        let m = d.m();
        (Just(d), prop::collection::vec(1u32..1000, m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn negation_complements_mistakes(data in dataset(12, 3)) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let class = inv.generated();
        for (h, mv) in class.stumps().iter().zip(class.mistakes()) {
            let neg = h.negate();
            prop_assert_eq!(&mistake_vector(&neg, &data), &mv.complement());
            prop_assert!(inv.rank_of(&neg).is_some(), "{} missing its negation", h);
        }
    }

    #[test]
    fn dominance_preserves_the_minimum((data, masses) in data_and_masses()) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let w = exact_weights(&masses);
        let over_h = inv
            .generated()
            .mistakes()
            .iter()
            .map(|mv| weighted_error(mv, &w).unwrap())
            .min_by(|a, b| a.as_exact().unwrap().cmp(b.as_exact().unwrap()))
            .unwrap();
        let sel = select_optimal(&inv, &w, 0.0).unwrap();
        prop_assert_eq!(sel.epsilon, over_h);
    }

    #[test]
    fn every_stump_has_a_dominating_representative(data in dataset(12, 3)) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let reps: Vec<_> = (0..inv.effective_len()).map(|p| inv.effective_mistakes(p)).collect();
        for mv in inv.generated().mistakes() {
            prop_assert!(reps.iter().any(|r| r.is_subset_of(mv)));
        }
        for p in 0..inv.effective_len() {
            let rank = inv.effective_rank(p);
            prop_assert_eq!(inv.stump(rank), Some(inv.effective_stump(p)));
            prop_assert_eq!(inv.mistakes(rank), Some(inv.effective_mistakes(p)));
        }
    }

    #[test]
    fn fast_errors_match_naive((data, masses) in data_and_masses()) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let w = exact_weights(&masses);
        prop_assert_eq!(fast_errors(&inv, &w), naive_errors(&inv, &w));

        let total: f64 = masses.iter().map(|&v| f64::from(v)).sum();
        let wf = WeightState::<Float>::from_f64(&masses.iter().map(|&v| f64::from(v) / total).collect::<Vec<_>>()).unwrap();
        for (a, b) in fast_errors(&inv, &wf).iter().zip(naive_errors(&inv, &wf)) {
            prop_assert!((a.to_f64() - b.to_f64()).abs() <= 1e-12);
        }
    }

    #[test]
    fn chosen_stump_has_half_error_after_update((data, masses) in data_and_masses()) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let mut w = exact_weights(&masses);
        for _ in 0..6 {
            let Ok(round) = boost_round(&inv, &w, 0.0).unwrap() else { break };
            let mv = inv.effective_mistakes(round.selection.chosen);
            prop_assert_eq!(weighted_error(mv, &round.next).unwrap(), Num::ratio(1, 2));
            w = round.next;
        }
    }

    #[test]
    fn no_immediate_repetition(data in dataset(30, 4), seed in 0u64..1000) {
        let config = RunConfig { rounds: 60, backend: Backend::Float, seed, ..RunConfig::default() };
        let run = run_boost(&data, &config).unwrap();
        for pair in run.records.windows(2) {
            prop_assert_ne!(pair[0].stump_id, pair[1].stump_id);
        }
        if run.summary.rounds_completed >= 2 {
            prop_assert!(run.summary.unique_count >= 2);
        }
    }

    #[test]
    fn bound_chain(data in dataset(30, 4), seed in 0u64..1000) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let config = RunConfig { rounds: 40, backend: Backend::Float, seed, ..RunConfig::default() };
        let run = run_boost(&data, &config).unwrap();
        let u = run.summary.unique_count;
        prop_assert!(1 <= u);
        prop_assert!(u <= inv.effective_len());
        prop_assert!(inv.effective_len() <= inv.generated_len());
        prop_assert!(inv.generated_len() <= class_size_bound(data.n(), data.m()));
        let mut last = 0;
        for r in &run.records {
            prop_assert!(r.unique_count >= last);
            last = r.unique_count;
        }
    }

    #[test]
    fn running_mean_is_exact_cesaro(data in dataset(8, 2)) {
        let config = RunConfig { rounds: 8, init: InitMode::UniformPoint, ..RunConfig::default() };
        let run = run_boost(&data, &config).unwrap();
        if run.records.is_empty() { return Ok(()) }
        let avg = time_averages(&run.records, None, 1e-4).unwrap();
        let mut sum = BigRational::from_integer(0.into());
        for (k, r) in run.records.iter().enumerate() {
            sum += r.epsilon.as_exact().unwrap();
            let want = &sum / BigRational::from_integer(BigInt::from(k + 1));
            prop_assert_eq!(avg.epsilon_running[k].as_exact().unwrap(), &want);
        }
    }

    #[test]
    fn detected_period_recurs_at_double(period in 1usize..6, m in 2usize..6, burn in 0usize..20, seed in 0u64..100) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let orbit: Vec<Vec<f64>> = (0..period)
            .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
            .collect();
        let mut snaps: Vec<Vec<f64>> = Vec::new();
        for _ in 0..burn {
            snaps.push((0..m).map(|_| rng.random::<f64>() + 2.0).collect());
        }
        for k in 0..120 {
            snaps.push(orbit[k % period].iter().map(|v| v + 1e-9 * rng.random::<f64>()).collect());
        }
        let tau = 1e-6;
        let report = detect_cycle(&snaps, 1, tau, 12, 40).unwrap();
        prop_assert!(report.detected);
        let p = report.period.unwrap();
        prop_assert!(report.recurrence_norm < tau);
        if let Some(norm2) = recurrence_norm(&snaps, 2 * p, 40) {
            prop_assert!(norm2 < 2.0 * tau);
        }
    }

    #[test]
    fn float_follows_rational_on_clear_rounds(data in dataset(15, 3)) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let mut we = WeightState::<Exact>::uniform(data.m()).unwrap();
        let mut wf = WeightState::<Float>::uniform(data.m()).unwrap();
        for _ in 0..40 {
            if we.denominator_bits() > 4096 { break }
            let errors = fast_errors(&inv, &we);
            let Ok(re) = boost_round(&inv, &we, 0.0).unwrap() else { break };
            let Ok(rf) = boost_round(&inv, &wf, 1e-12).unwrap() else { break };
            let min = re.selection.epsilon.to_f64();
            let gap = errors
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != re.selection.chosen)
                .map(|(_, e)| e.to_f64() - min)
                .fold(f64::INFINITY, f64::min);
            if re.selection.tie_set.len() > 1 || gap <= 1e-9 { break }
            prop_assert_eq!(re.selection.chosen, rf.selection.chosen);
            we = re.next;
            wf = rf.next;
        }
    }

    #[test]
    fn csv_round_trip(data in dataset(20, 4)) {
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), std::path::Path::new("mem.csv")).unwrap();
        prop_assert_eq!(&back, &data);
        prop_assert_eq!(dataset_hash(&back), dataset_hash(&data));
    }

    #[test]
    fn prediction_flips_under_negation(data in dataset(6, 3), x in prop::collection::vec(0.0f64..=1.0, 3)) {
        let Some(inv) = inventory(&data) else { return Ok(()) };
        let x = &x[..data.n()];
        for h in inv.generated().stumps() {
            prop_assert_eq!(h.negate().predict(x).unwrap(), h.predict(x).unwrap().flip());
            prop_assert_eq!(&h.negate().negate(), h);
        }
    }
}
