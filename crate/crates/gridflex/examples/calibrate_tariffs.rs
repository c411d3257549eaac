//! Revenue-neutral calibration: scale each design's distinctive parameter
//! so that baseline revenue matches a flat-energy reference, then verify
//! the match by re-pricing the fleet.
//!
//! ```bash
//! cargo run --release --example calibrate_tariffs
//! ```

use gridflex::data::{generate_fleet, SyntheticFleetConfig};
use gridflex::tariff::{
    calibrate, default_winter_months, fleet_revenue, select_peak_days, HourWindow, TariffSpec,
};
use gridflex::{LoadSeries, TimeIndex};

fn main() -> gridflex::Result<()> {
    let index = TimeIndex::calendar(
        chrono::NaiveDate::from_ymd_opt(2020, 11, 1).unwrap(),
        365,
        &Default::default(),
    )?;
    let (fleet, _) = generate_fleet(
        &SyntheticFleetConfig {
            consumer_count: 50,
            seed: 42,
            ..Default::default()
        },
        &index,
    )?;
    let mut aggregate = vec![0.0; index.hour_count()];
    for load in &fleet {
        for (a, v) in aggregate.iter_mut().zip(load.values()) {
            *a += v;
        }
    }
    let active = select_peak_days(&aggregate, &index, 20)?
        .into_iter()
        .collect();

    let reference = TariffSpec::FlatEnergy { energy_rate: 0.5 };
    let target = 0.5 * fleet.iter().map(LoadSeries::total_energy).sum::<f64>();
    println!("reference revenue: {target:.0} NOK\n");

    let designs = vec![
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
            active_days: active,
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
        "tariff", "parameter", "calibrated", "revenue_ratio"
    );
    for tariff in &designs {
        let calibrated = calibrate(tariff, &fleet, &index, &reference)?;
        let parameter = |t: &TariffSpec| match *t {
            TariffSpec::StaticTou { peak_rate, .. } => peak_rate,
            TariffSpec::DynamicTou { event_rate, .. } => event_rate,
            TariffSpec::DemandCharge { peak_price, .. } => peak_price,
            TariffSpec::SubscribedCapacity { capacity_price, .. } => capacity_price,
            TariffSpec::FlatEnergy { energy_rate } => energy_rate,
        };
        let revenue = fleet_revenue(&calibrated, &fleet, &index)?;
        println!(
            "{:<22} {:>12.4} {:>14.4} {:>18.12}",
            tariff.name(),
            parameter(tariff),
            parameter(&calibrated),
            revenue / target
        );
    }
    Ok(())
}
