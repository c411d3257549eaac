//! Solve one consumer's cost-minimizing curtailment under a static
//! time-of-use tariff, with and without a spot price, and show how the
//! spot price concentrates the same flexibility into fewer hours.
//!
//! ```bash
//! cargo run --release --example single_consumer
//! ```

use gridflex::response::{solve_consumer, ConsumerProblem};
use gridflex::tariff::{default_winter_months, HourWindow, TariffSpec};
use gridflex::{FlexibilityParams, LoadSeries, SpotPriceSeries, TimeIndex};

fn main() -> gridflex::Result<()> {
    // One winter weekday with a flat high plateau between 08 and 22.
    let index = TimeIndex::calendar(
        chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
        1,
        &Default::default(),
    )?;
    let values: Vec<f64> = (0..24)
        .map(|h| if (8..22).contains(&h) { 2.0 } else { 0.5 })
        .collect();
    let load = LoadSeries::new("demo", values)?;
    let tariff = TariffSpec::StaticTou {
        energy_rate: 0.25,
        peak_rate: 1.2,
        window: HourWindow::default_peak(),
        winter_months: default_winter_months(),
        weekends_and_holidays: false,
    };
    // Afternoon-peaking spot price.
    let spot = SpotPriceSeries::new(
        (0..24)
            .map(|h| 0.2 + 1.0 * (-((h as f64) - 17.0).powi(2) / 6.0).exp())
            .collect(),
    )?;
    let flexibility = FlexibilityParams::default();

    let without = solve_consumer(&ConsumerProblem {
        load: &load,
        flexibility,
        tariff: &tariff,
        spot: None,
        index: &index,
        fixed_subscription: None,
    })?;
    let with = solve_consumer(&ConsumerProblem {
        load: &load,
        flexibility,
        tariff: &tariff,
        spot: Some(&spot),
        index: &index,
        fixed_subscription: None,
    })?;

    println!("hour  load   curtail(tariff)  curtail(tariff+spot)  spot");
    for h in 0..24 {
        println!(
            "{h:>4}  {:>4.2}  {:>15.4}  {:>20.4}  {:>5.2}",
            load.values()[h],
            without.reduction[h],
            with.reduction[h],
            spot.values()[h]
        );
    }
    println!();
    println!(
        "tariff only:      {:.4} kWh curtailed, bill {:.2} NOK",
        without.reduction.iter().sum::<f64>(),
        without.costs.total
    );
    println!(
        "tariff plus spot: {:.4} kWh curtailed, bill {:.2} NOK",
        with.reduction.iter().sum::<f64>(),
        with.costs.total
    );
    println!();
    println!(
        "Without spot, every peak-window hour is equally priced and the daily \
         budget spreads evenly; with the spot overlay the same budget drains \
         into the few highest-priced afternoon hours."
    );
    Ok(())
}
