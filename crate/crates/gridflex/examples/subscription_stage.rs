//! The two-stage subscribed-capacity procedure: stage 1 picks the capacity
//! from the load-duration curve (the break-even exceedance count), stage 2
//! re-optimizes consumption with the subscription fixed.
//!
//! ```bash
//! cargo run --release --example subscription_stage
//! ```

use gridflex::data::{generate_fleet, SyntheticFleetConfig};
use gridflex::response::{exceedance_hours, optimal_subscription, solve_consumer, ConsumerProblem};
use gridflex::tariff::TariffSpec;
use gridflex::{FlexibilityParams, TimeIndex};

fn main() -> gridflex::Result<()> {
    let index = TimeIndex::calendar(
        chrono::NaiveDate::from_ymd_opt(2020, 11, 1).unwrap(),
        365,
        &Default::default(),
    )?;
    let (fleet, _) = generate_fleet(
        &SyntheticFleetConfig {
            consumer_count: 1,
            household_fraction: 1.0,
            seed: 42,
            ..Default::default()
        },
        &index,
    )?;
    let load = &fleet[0];
    let tariff = TariffSpec::SubscribedCapacity {
        energy_rate: 0.25,
        excess_rate: 1.65,
        capacity_price: 1000.0,
    };

    // Stage 1: the yearly capacity price divided by the excess-energy rate
    // gap gives a break-even hour count on the load-duration curve.
    let subscription = optimal_subscription(load, &tariff, &index)?;
    let count = exceedance_hours(load, subscription);
    let peak = load
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    println!("annual peak:          {peak:.3} kW");
    println!("chosen subscription:  {subscription:.3} kW");
    println!(
        "hours above it:       {count} (break-even 1000 / 1.4 = {:.1})",
        1000.0 / 1.4
    );

    // Stage 2: curtailment with the subscription fixed.
    let result = solve_consumer(&ConsumerProblem {
        load,
        flexibility: FlexibilityParams::default(),
        tariff: &tariff,
        spot: None,
        index: &index,
        fixed_subscription: Some(subscription),
    })?;
    let curtailed: f64 = result.reduction.iter().sum();
    let above_after = result
        .new_load
        .iter()
        .filter(|&&v| v > subscription + 1e-9)
        .count();
    println!();
    println!("stage-2 curtailment:  {curtailed:.2} kWh over the year");
    println!("hours above the subscription after response: {above_after}");
    println!(
        "bill: {:.2} NOK (grid {:.2}, discomfort {:.2})",
        result.costs.total, result.costs.grid, result.costs.flexibility
    );
    Ok(())
}
