//! Property tests for the structural invariants: calendar partitions,
//! tariff-cost homogeneity, oracle equivalences, benchmark dominance and
//! the equal-share tie-break.

mod common;

use std::collections::BTreeSet;

use gridflex::cases::{run_case, solve_sor, CaseKind, CaseSpec};
use gridflex::model::{FlexibilityParams, LoadSeries, SpotPriceSeries};
use gridflex::response::{
    greedy_volumetric_oracle, optimal_subscription, solve_consumer, ConsumerProblem,
};
use gridflex::tariff::{grid_cost, select_peak_days, HourWindow, TariffSpec};
use gridflex::TimeIndex;
use proptest::prelude::*;

fn uniform_index(days: usize, hours_per_day: usize) -> TimeIndex {
    TimeIndex::uniform(days, hours_per_day).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn time_index_partitions_hours(day_offset in 0u32..2000, days in 1usize..500) {
        let start = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()
            + chrono::Duration::days(day_offset as i64);
        let idx = TimeIndex::calendar(start, days, &BTreeSet::new()).unwrap();
        prop_assert_eq!(idx.hour_count(), days * 24);
        prop_assert_eq!(idx.day_count(), days);
        // Days partition hours contiguously.
        let mut expected_day = 0usize;
        for t in 0..idx.hour_count() {
            if t > 0 && t % 24 == 0 {
                expected_day += 1;
            }
            prop_assert_eq!(idx.day_of_hour(t), expected_day);
        }
        // Months partition days contiguously and cover the horizon.
        let total: usize = idx.months().iter().map(|m| m.day_count).sum();
        prop_assert_eq!(total, days);
        let mut day = 0usize;
        for (m, span) in idx.months().iter().enumerate() {
            prop_assert_eq!(span.first_day, day);
            for d in span.first_day..span.first_day + span.day_count {
                for t in idx.hours_of_day(d) {
                    prop_assert_eq!(idx.month_of_hour(t), m);
                }
            }
            day += span.day_count;
        }
        // Weekdays advance by one per day.
        for d in 1..days {
            let prev = idx.weekday_of_day(d - 1);
            prop_assert_eq!(idx.weekday_of_day(d), prev.succ());
        }
    }

    #[test]
    fn volumetric_and_demand_charge_costs_scale_linearly(
        seed in 0u64..1000,
        factor in 0.1f64..10.0,
    ) {
        let inst = common::random_volumetric_instance(seed);
        let idx = &inst.index;
        let load = inst.load.values();
        let scaled: Vec<f64> = load.iter().map(|v| v * factor).collect();
        let dc = TariffSpec::DemandCharge { energy_rate: 0.3, peak_price: 40.0 };
        for tariff in [&inst.tariff, &dc] {
            let a = grid_cost(tariff, load, idx, None).unwrap();
            let b = grid_cost(tariff, &scaled, idx, None).unwrap();
            prop_assert!(
                (b - factor * a).abs() <= 1e-9 * (1.0 + b.abs()),
                "{} scaled {} vs {}", tariff.name(), b, factor * a
            );
        }
    }

    #[test]
    fn peak_day_selection_ignores_scaling(seed in 0u64..1000, factor in 0.01f64..100.0) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let days = rand::Rng::gen_range(&mut rng, 2usize..30);
        let idx = uniform_index(days, 24);
        let agg: Vec<f64> = (0..idx.hour_count())
            .map(|_| rand::Rng::gen_range(&mut rng, 0.0f64..50.0))
            .collect();
        let n = rand::Rng::gen_range(&mut rng, 1usize..=days);
        let base = select_peak_days(&agg, &idx, n).unwrap();
        let scaled: Vec<f64> = agg.iter().map(|v| v * factor).collect();
        prop_assert_eq!(select_peak_days(&scaled, &idx, n).unwrap(), base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn responding_never_costs_more_than_doing_nothing(seed in 0u64..10_000) {
        let inst = common::random_volumetric_instance(seed);
        let problem = ConsumerProblem {
            load: &inst.load,
            flexibility: inst.flexibility,
            tariff: &inst.tariff,
            spot: inst.spot.as_ref(),
            index: &inst.index,
            fixed_subscription: None,
        };
        let solved = solve_consumer(&problem).unwrap();
        let idle_grid = grid_cost(&inst.tariff, inst.load.values(), &inst.index, None).unwrap();
        let idle_spot = inst.spot.as_ref().map_or(0.0, |s| {
            inst.load.values().iter().zip(s.values()).map(|(l, p)| l * p).sum()
        });
        prop_assert!(
            solved.costs.total <= idle_grid + idle_spot + 1e-7 * (1.0 + solved.costs.total.abs())
        );
    }

    #[test]
    fn greedy_and_simplex_agree_on_volumetric_cost(seed in 10_000u64..20_000) {
        let inst = common::random_volumetric_instance(seed);
        let problem = ConsumerProblem {
            load: &inst.load,
            flexibility: inst.flexibility,
            tariff: &inst.tariff,
            spot: inst.spot.as_ref(),
            index: &inst.index,
            fixed_subscription: None,
        };
        let lp = solve_consumer(&problem).unwrap();
        let greedy = greedy_volumetric_oracle(&problem).unwrap();
        prop_assert!(
            (lp.costs.total - greedy.costs.total).abs()
                <= 1e-7 * (1.0 + greedy.costs.total.abs())
        );
    }

    #[test]
    fn stage_one_subscription_matches_variable_program(seed in 0u64..200) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let days = rand::Rng::gen_range(&mut rng, 1usize..6);
        let idx = uniform_index(days, 24);
        let values: Vec<f64> = (0..idx.hour_count())
            .map(|_| rand::Rng::gen_range(&mut rng, 0.0f64..6.0))
            .collect();
        let load = LoadSeries::new("s1", values.clone()).unwrap();
        let excess = rand::Rng::gen_range(&mut rng, 0.5f64..3.0);
        let tariff = TariffSpec::SubscribedCapacity {
            energy_rate: 0.25,
            excess_rate: 0.25 + excess,
            capacity_price: rand::Rng::gen_range(&mut rng, 0.0f64..3000.0),
        };
        let closed = optimal_subscription(&load, &tariff, &idx).unwrap();

        let fee = tariff.prorated_capacity_price(&idx);
        let mut lp = gridflex::lp::LinearProgram::new();
        let x = lp.add_var(fee, 0.0, f64::INFINITY);
        for &l in &values {
            let below = lp.add_var(0.25, 0.0, f64::INFINITY);
            let above = lp.add_var(0.25 + excess, 0.0, f64::INFINITY);
            lp.add_row(vec![(below, 1.0), (above, 1.0)], gridflex::lp::RowOp::Eq, l);
            lp.add_row(vec![(below, 1.0), (x, -1.0)], gridflex::lp::RowOp::Le, 0.0);
        }
        let sol = lp.solve().unwrap();
        prop_assert!(sol.is_optimal());
        // Compare program values; the argmin itself can be non-unique on
        // flat segments of the value function.
        let cost = |x: f64| -> f64 {
            values.iter().map(|&l| 0.25 * l.min(x) + (0.25 + excess) * (l - x).max(0.0)).sum::<f64>()
                + fee * x
        };
        prop_assert!((cost(closed) - sol.objective).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
        prop_assert!(cost(closed) <= cost(sol.primal[x]) + 1e-7);
    }

    #[test]
    fn coordinated_benchmark_dominates_price_signals(seed in 0u64..5_000) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let days = rand::Rng::gen_range(&mut rng, 1usize..4);
        let idx = uniform_index(days, 24);
        let consumers = rand::Rng::gen_range(&mut rng, 1usize..5);
        let fleet: Vec<LoadSeries> = (0..consumers)
            .map(|i| {
                let values: Vec<f64> = (0..idx.hour_count())
                    .map(|_| rand::Rng::gen_range(&mut rng, 0.0f64..4.0))
                    .collect();
                LoadSeries::new(format!("c{i}"), values).unwrap()
            })
            .collect();
        let spot_values: Vec<f64> = (0..idx.hour_count())
            .map(|_| rand::Rng::gen_range(&mut rng, 0.0f64..2.0))
            .collect();
        let spot = SpotPriceSeries::new(spot_values).unwrap();
        let flex = FlexibilityParams::new(0.25, 0.025, 0.35).unwrap();
        let sor = solve_sor(&fleet, &flex, &idx).unwrap();
        let sp = run_case(
            &CaseSpec {
                kind: CaseKind::SpotOnly,
                tariff: None,
                spot: Some(&spot),
                flexibility: flex,
                sp_energy_rate: 0.25,
            },
            &fleet,
            &idx,
        )
        .unwrap();
        let tou = TariffSpec::DynamicTou {
            energy_rate: 0.25,
            event_rate: 3.0,
            window: HourWindow::new(0, 24),
            active_days: (0..days).collect(),
        };
        let gt = run_case(
            &CaseSpec {
                kind: CaseKind::GridTariff,
                tariff: Some(&tou),
                spot: None,
                flexibility: flex,
                sp_energy_rate: 0.25,
            },
            &fleet,
            &idx,
        )
        .unwrap();
        prop_assert!(sor.reduction_fraction >= sp.reduction_fraction - 1e-9);
        prop_assert!(sor.reduction_fraction >= gt.reduction_fraction - 1e-9);
    }

    #[test]
    fn tied_hours_share_curtailment_equally(seed in 0u64..5_000) {
        // One day, a random group of equally priced expensive hours, budget
        // binding, caps slack: relative curtailment equal across the group.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let hours = 24usize;
        let idx = uniform_index(1, hours);
        let group_len = rand::Rng::gen_range(&mut rng, 2usize..10);
        let group_start = rand::Rng::gen_range(&mut rng, 0usize..hours - group_len);
        let values: Vec<f64> = (0..hours)
            .map(|_| rand::Rng::gen_range(&mut rng, 0.5f64..4.0))
            .collect();
        let load = LoadSeries::new("tied", values.clone()).unwrap();
        let tariff = TariffSpec::DynamicTou {
            energy_rate: 0.1,
            event_rate: 2.0,
            window: HourWindow::new(group_start as u32, (group_start + group_len) as u32),
            active_days: [0usize].into_iter().collect(),
        };
        let flex = FlexibilityParams::new(0.25, 0.02, 0.3).unwrap();
        let problem = ConsumerProblem {
            load: &load,
            flexibility: flex,
            tariff: &tariff,
            spot: None,
            index: &idx,
            fixed_subscription: None,
        };
        let result = solve_consumer(&problem).unwrap();
        let group = group_start..group_start + group_len;
        let group_cap: f64 = group.clone().map(|t| 0.25 * values[t]).sum();
        let budget = 0.02 * load.total_energy();
        if budget < group_cap * 0.999 {
            let shares: Vec<f64> =
                group.map(|t| result.reduction[t] / values[t]).collect();
            for w in shares.windows(2) {
                prop_assert!((w[0] - w[1]).abs() <= 1e-7, "shares {:?}", shares);
            }
        }
    }
}
