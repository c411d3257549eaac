//! Dynamic time-of-use event days: the days with the highest aggregate
//! hourly load, selected ex post, all landing in winter for a
//! winter-peaking fleet.
//!
//! ```bash
//! cargo run --release --example peak_days
//! ```

use gridflex::data::{generate_fleet, SyntheticFleetConfig};
use gridflex::tariff::select_peak_days;
use gridflex::TimeIndex;

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

    let days = select_peak_days(&aggregate, &index, 20)?;
    println!("top 20 aggregate peak days:");
    for &d in &days {
        let peak = index
            .hours_of_day(d)
            .map(|t| aggregate[t])
            .fold(f64::NEG_INFINITY, f64::max);
        println!("  {}  daily max {peak:.1} kW", index.date_of_day(d));
    }
    let winter = days
        .iter()
        .filter(|&&d| {
            let m = index.months()[index.month_of_hour(index.hours_of_day(d).start)].month;
            matches!(m, 11 | 12 | 1 | 2 | 3)
        })
        .count();
    println!(
        "\n{winter} of {} selected days fall in November-March",
        days.len()
    );
    Ok(())
}
