//! Price one load path under every tariff design and show the hourly
//! marginal price signals, including the capacity-based spike a demand
//! charge puts on the monthly peak hour.
//!
//! ```bash
//! cargo run --release --example tariff_costs
//! ```

use gridflex::response::optimal_subscription;
use gridflex::tariff::{
    default_winter_months, grid_cost, marginal_price_signal, HourWindow, TariffSpec,
};
use gridflex::{LoadSeries, TimeIndex};

fn main() -> gridflex::Result<()> {
    // One winter week, a household-like double-peak profile.
    let index = TimeIndex::calendar(
        chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
        7,
        &Default::default(),
    )?;
    let values: Vec<f64> = (0..index.hour_count())
        .map(|t| {
            let h = index.hour_of_day(t) as f64;
            let morning = (-(h - 7.5) * (h - 7.5) / 4.0).exp();
            let evening = (-(h - 18.0) * (h - 18.0) / 8.0).exp();
            0.4 + 1.1 * morning + 1.8 * evening
        })
        .collect();
    let load = LoadSeries::new("demo", values)?;

    let tariffs = vec![
        TariffSpec::FlatEnergy { energy_rate: 0.25 },
        TariffSpec::StaticTou {
            energy_rate: 0.25,
            peak_rate: 1.2,
            window: HourWindow::default_peak(),
            winter_months: default_winter_months(),
            weekends_and_holidays: false,
        },
        TariffSpec::DynamicTou {
            energy_rate: 0.25,
            event_rate: 4.5,
            window: HourWindow::default_peak(),
            active_days: [0usize, 3].into_iter().collect(),
        },
        TariffSpec::DemandCharge {
            energy_rate: 0.25,
            peak_price: 75.0,
        },
        TariffSpec::SubscribedCapacity {
            energy_rate: 0.25,
            excess_rate: 1.65,
            capacity_price: 1000.0,
        },
    ];

    println!(
        "{:<22} {:>12} {:>14} {:>18}",
        "tariff", "cost_nok", "max_signal", "signal_at_03:00"
    );
    for tariff in &tariffs {
        let subscription = match tariff {
            TariffSpec::SubscribedCapacity { .. } => {
                Some(optimal_subscription(&load, tariff, &index)?)
            }
            _ => None,
        };
        let cost = grid_cost(tariff, load.values(), &index, subscription)?;
        let signal = marginal_price_signal(tariff, load.values(), &index, subscription)?;
        let max = signal
            .values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{:<22} {:>12.2} {:>14.2} {:>18.2}",
            tariff.name(),
            cost,
            max,
            signal.values[3]
        );
    }

    // Where the demand charge signal lands: exactly one flagged hour per month.
    let dc = &tariffs[3];
    let signal = marginal_price_signal(dc, load.values(), &index, None)?;
    let flagged: Vec<usize> = (0..signal.values.len())
        .filter(|&t| signal.capacity_flag[t])
        .collect();
    println!("\ndemand-charge capacity signal lands on hours {flagged:?}");
    for t in flagged {
        println!(
            "  {} -> {:.2} NOK/kWh",
            index.timestamp(t),
            signal.values[t]
        );
    }
    Ok(())
}
