//! The full comparison on a small synthetic fleet: the coordinated
//! benchmark, every grid tariff with and without the spot overlay, and the
//! spot price alone — the headline peak-reduction table.
//!
//! ```bash
//! cargo run --release --example four_cases
//! ```

use gridflex::cases::{run_case, CaseKind, CaseSpec};
use gridflex::data::{generate_fleet, SyntheticFleetConfig};
use gridflex::tariff::{default_winter_months, select_peak_days, HourWindow, TariffSpec};
use gridflex::{FlexibilityParams, TimeIndex};

fn main() -> gridflex::Result<()> {
    // Three winter weeks, 25 consumers.
    let index = TimeIndex::calendar(
        chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
        21,
        &Default::default(),
    )?;
    let (fleet, spot) = generate_fleet(
        &SyntheticFleetConfig {
            consumer_count: 25,
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
    let flexibility = FlexibilityParams::default();

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
            active_days: select_peak_days(&aggregate, &index, 5)?
                .into_iter()
                .collect(),
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
        "{:<8} {:<22} {:>12} {:>12} {:>10}",
        "case", "tariff", "baseline_kw", "new_kw", "cut_%"
    );
    let show = |kind: CaseKind, tariff: Option<&TariffSpec>| -> gridflex::Result<()> {
        let result = run_case(
            &CaseSpec {
                kind,
                tariff,
                spot: Some(&spot),
                flexibility,
                sp_energy_rate: 0.25,
            },
            &fleet,
            &index,
        )?;
        println!(
            "{:<8} {:<22} {:>12.2} {:>12.2} {:>10.3}",
            result.kind.as_str(),
            result.tariff_name,
            result.baseline_peak,
            result.new_peak,
            result.reduction_fraction * 100.0
        );
        Ok(())
    };

    show(CaseKind::SystemOptimal, None)?;
    for tariff in &designs {
        show(CaseKind::GridTariff, Some(tariff))?;
    }
    for tariff in &designs {
        show(CaseKind::GridTariffWithSpot, Some(tariff))?;
    }
    show(CaseKind::SpotOnly, None)?;
    Ok(())
}
