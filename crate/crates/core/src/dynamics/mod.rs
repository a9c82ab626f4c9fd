//! Detectors computed from run traces: ties, unique-stump growth, time
//! averages and margins, weight-orbit cycles, and decision-boundary mass.
//!
//! All of these measure finite-horizon behaviour only.

mod averages;
mod boundary;
mod cycle;
mod growth;
mod ties;

pub use averages::{margins_at, time_averages, TimeAverages, Verdict, DEFAULT_CONVERGENCE_DELTA};
pub use boundary::{
    boundary_report, vote, BoundaryMethod, BoundaryOptions, BoundaryReport, Cell, Census,
    WeightedStump, DEFAULT_RELATIVE_TAU, MAX_EXACT_CELLS,
};
pub use cycle::{detect_cycle, l1_distance, recurrence_norm, CycleReport};
pub use growth::{
    fit_log_growth, log_growth_regression, unique_growth_curve, write_curve_csv, GrowthFit,
    GrowthPoint, Regression,
};
pub use ties::{classify, tie_report, TieClass, TieReport, TiedRound};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Dataset, Sign, Stump};
    use crate::engine::{run_boost, BoostRun, InitMode, RoundRecord, RunConfig};
    use crate::num::Num;
    use crate::stumps::HypothesisInventory;
    use crate::weights::Backend;

    fn d3() -> Dataset {
        Dataset::from_rows(vec![vec![0.1], vec![0.5], vec![0.9]], &[1, -1, 1]).unwrap()
    }

    fn d3_run(rounds: u64, backend: Backend) -> BoostRun {
        let config = RunConfig {
            rounds,
            backend,
            init: InitMode::UniformPoint,
            ..RunConfig::default()
        };
        run_boost(&d3(), &config).unwrap()
    }

    fn record(t: u64, stump_id: usize) -> RoundRecord {
        RoundRecord {
            t,
            stump_id,
            epsilon: Num::Float(0.25),
            alpha: 0.5,
            tie_size: 1,
            tie_agreement: true,
            disagreement_mass: Num::Float(0.0),
            unique_count: 0,
            weights: None,
        }
    }

    #[test]
    fn d3_tie_classes() {
        let run = d3_run(3, Backend::Rational);
        let report = tie_report(&run.records).unwrap();
        assert_eq!(report.disagreeing_tie_rounds, 2);
        assert_eq!(report.no_tie_rounds, 1);
        assert_eq!(report.tied_rounds[0].tie_size, 3);
        assert_eq!(report.tied_rounds[0].disagreement_mass, Num::ratio(2, 3));
        assert_eq!(report.tied_rounds[1].tie_size, 2);
        assert_eq!(report.tied_rounds[1].disagreement_mass, Num::ratio(1, 2));
        assert_eq!(classify(&run.records[2]), TieClass::NoTie);
        assert!(run.records[2].disagreement_mass.is_zero());
        assert_eq!(report.last_disagreeing_round, Some(2));
        assert!(!report.tolerance_qualified);
    }

    #[test]
    fn tie_report_rejects_empty_and_inconsistent() {
        assert!(tie_report(&[]).is_err());
        let mut r = record(1, 0);
        r.disagreement_mass = Num::Float(0.1);
        assert!(tie_report(&[r]).is_err());
    }

    #[test]
    fn d3_unique_growth() {
        let run = d3_run(6, Backend::Rational);
        let curve = unique_growth_curve(&run.records, &[1, 2, 3, 6]).unwrap();
        let counts: Vec<usize> = curve.iter().map(|p| p.unique_count).collect();
        assert_eq!(counts, vec![1, 2, 3, 3]);
        assert_eq!(
            curve.last().unwrap().unique_count,
            run.summary.selected.len()
        );

        let one = d3_run(1, Backend::Rational);
        let curve = unique_growth_curve(&one.records, &[1]).unwrap();
        assert_eq!(
            curve,
            vec![GrowthPoint {
                t: 1,
                unique_count: 1
            }]
        );
        assert!(unique_growth_curve(&one.records, &[2]).is_err());
    }

    #[test]
    fn exact_power_law_fit() {
        let curve: Vec<GrowthPoint> = (0..8)
            .map(|k| {
                let t = 10u64 << k;
                let u = ((t as f64).ln() + 1.0).powi(2);
                GrowthPoint {
                    t,
                    unique_count: u.round() as usize,
                }
            })
            .collect();
        // Rounding to integers perturbs the fit slightly; check the shape.
        let fit = fit_log_growth(&curve, None).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.05, "c = {}", fit.exponent);
        assert!(!fit.degenerate);
    }

    #[test]
    fn real_valued_power_law_is_recovered() {
        let points: Vec<(u64, f64)> = (0..10)
            .map(|k| {
                let t = 10u64.pow(k + 1);
                (t, ((t as f64).ln() + 1.0).powf(1.5) * 3.0)
            })
            .collect();
        let reg = log_growth_regression(&points).unwrap();
        assert!((reg.exponent - 1.5).abs() < 1e-12);
        assert!((reg.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(reg.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn constant_curve_is_degenerate() {
        let curve: Vec<GrowthPoint> = [10, 20, 40, 80]
            .iter()
            .map(|&t| GrowthPoint { t, unique_count: 3 })
            .collect();
        let fit = fit_log_growth(&curve, Some(3)).unwrap();
        assert!(fit.degenerate);
        assert!(fit.saturated);
        assert_eq!(fit.exponent, 0.0);
        assert!(fit_log_growth(&curve[..3], None).is_err());
    }

    #[test]
    fn d3_curve_saturates() {
        let run = d3_run(80, Backend::Rational);
        let curve = unique_growth_curve(&run.records, &[1, 10, 20, 40, 80]).unwrap();
        let fit = fit_log_growth(&curve, Some(3)).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
        assert!(fit.saturated && fit.degenerate);
    }

    #[test]
    fn curve_csv() {
        let mut out = Vec::new();
        write_curve_csv(
            &[
                GrowthPoint {
                    t: 1,
                    unique_count: 1,
                },
                GrowthPoint {
                    t: 2,
                    unique_count: 2,
                },
            ],
            &mut out,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "T,unique_count\n1,1\n2,2\n"
        );
    }

    #[test]
    fn d3_time_averages() {
        let run = d3_run(3, Backend::Rational);
        let inv = HypothesisInventory::build(&d3()).unwrap();
        let avg = time_averages(&run.records, Some(&inv), DEFAULT_CONVERGENCE_DELTA).unwrap();
        assert_eq!(avg.epsilon_mean(), &Num::ratio(1, 4));
        let margins = avg.margins.as_ref().unwrap();
        let ln30 = 30f64.ln();
        let expected = [
            (6.0f64 / 5.0).ln() / ln30,
            7.5f64.ln() / ln30,
            (10.0f64 / 3.0).ln() / ln30,
        ];
        for (got, want) in margins.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(margins.iter().all(|m| (-1.0..=1.0).contains(m) && *m > 0.0));
    }

    #[test]
    fn time_averages_need_complete_trace() {
        assert!(time_averages(&[], None, 1e-4).is_err());
        assert!(time_averages(&[record(2, 0)], None, 1e-4).is_err());
    }

    #[test]
    fn d3_float_orbit_has_period_three() {
        let config = RunConfig {
            rounds: 1000,
            backend: Backend::Float,
            init: InitMode::UniformPoint,
            snapshot_tail: 200,
            ..RunConfig::default()
        };
        let run = run_boost(&d3(), &config).unwrap();
        let snaps: Vec<Vec<f64>> = run
            .records
            .iter()
            .filter_map(|r| r.weights.clone())
            .collect();
        assert_eq!(snaps.len(), 200);
        let report = detect_cycle(&snaps, 801, 1e-6, 10, 50).unwrap();
        assert!(report.detected);
        assert_eq!(report.period, Some(3));
        assert!(report.recurrence_norm < 1e-6);
    }

    #[test]
    fn constant_snapshots_have_period_one() {
        let snaps = vec![vec![0.5, 0.5]; 20];
        let report = detect_cycle(&snaps, 1, 1e-9, 5, 10).unwrap();
        assert_eq!(report.period, Some(1));
        assert_eq!(report.burn_in, Some(1));
    }

    #[test]
    fn noise_has_no_cycle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let snaps: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let report = detect_cycle(&snaps, 1, 1e-6, 20, 50).unwrap();
        assert!(!report.detected);
        assert!(detect_cycle(&snaps[..10], 1, 1e-6, 20, 50).is_err());
    }

    fn d3_boundary_stumps() -> Vec<WeightedStump> {
        vec![
            WeightedStump::constant(Sign::Pos, 0.5 * 2f64.ln()),
            WeightedStump::new(Stump::threshold(0, 0.3, Sign::Neg), 0.5 * 3f64.ln()),
            WeightedStump::new(Stump::threshold(0, 0.7, Sign::Pos), 0.5 * 5f64.ln()),
        ]
    }

    #[test]
    fn d3_exact_cells() {
        let opts = BoundaryOptions {
            method: BoundaryMethod::ExactCells,
            tau_f: Some(1e-9),
            samples: 0,
            seed: 0,
        };
        let report = boundary_report(&d3_boundary_stumps(), 1, &opts).unwrap();
        assert_eq!(report.cell_count, Some(3));
        assert_eq!(report.ambiguous_mass, 0.0);
        let cells = report.cells.unwrap();
        let signs: Vec<i8> = cells.iter().map(|c| c.sign).collect();
        assert_eq!(signs, vec![1, -1, 1]);
        let want = [
            0.5 * 1.2f64.ln(),
            0.5 * (2.0f64 / 15.0).ln(),
            0.5 * (10.0f64 / 3.0).ln(),
        ];
        for (c, w) in cells.iter().zip(want) {
            assert!((c.value - w).abs() < 1e-12);
        }
        let vol: f64 = cells.iter().map(|c| c.volume).sum();
        assert!((vol - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_stump_two_cells() {
        let opts = BoundaryOptions {
            method: BoundaryMethod::ExactCells,
            tau_f: None,
            samples: 0,
            seed: 0,
        };
        let report = boundary_report(
            &[WeightedStump::new(Stump::threshold(1, 0.4, Sign::Pos), 1.0)],
            2,
            &opts,
        )
        .unwrap();
        assert_eq!(report.cell_count, Some(2));
        assert_eq!(report.ambiguous_mass, 0.0);
    }

    #[test]
    fn cancelling_pair_is_fully_ambiguous() {
        let pair = [
            WeightedStump::new(Stump::threshold(0, 0.5, Sign::Pos), 1.0),
            WeightedStump::new(Stump::threshold(0, 0.5, Sign::Neg), 1.0),
        ];
        for method in [BoundaryMethod::ExactCells, BoundaryMethod::MonteCarlo] {
            let opts = BoundaryOptions {
                method,
                tau_f: None,
                samples: 1000,
                seed: 2,
            };
            assert_eq!(
                boundary_report(&pair, 1, &opts).unwrap().ambiguous_mass,
                1.0
            );
        }
    }

    #[test]
    fn exact_cells_rejects_high_dimension() {
        let opts = BoundaryOptions {
            method: BoundaryMethod::ExactCells,
            tau_f: None,
            samples: 0,
            seed: 0,
        };
        let s = [WeightedStump::new(Stump::threshold(0, 0.5, Sign::Pos), 1.0)];
        assert!(matches!(
            boundary_report(&s, 4, &opts),
            Err(crate::error::Error::ExactCellsUnsupported(4))
        ));
        assert!(boundary_report(&[], 1, &opts).is_err());
    }
}
