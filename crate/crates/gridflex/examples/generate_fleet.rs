//! Generate a reproducible synthetic fleet and spot price series, print a
//! few summary statistics and write the CSV files a run would ingest.
//!
//! ```bash
//! cargo run --release --example generate_fleet
//! ```

use gridflex::data::{generate_fleet, write_load_csv, write_spot_csv, SyntheticFleetConfig};
use gridflex::TimeIndex;

fn main() -> gridflex::Result<()> {
    let index = TimeIndex::calendar(
        chrono::NaiveDate::from_ymd_opt(2020, 11, 1).unwrap(),
        365,
        &Default::default(),
    )?;
    let config = SyntheticFleetConfig {
        consumer_count: 20,
        household_fraction: 0.8,
        seed: 42,
        ..Default::default()
    };
    let (fleet, spot) = generate_fleet(&config, &index)?;

    let mut aggregate = vec![0.0; index.hour_count()];
    for load in &fleet {
        for (a, v) in aggregate.iter_mut().zip(load.values()) {
            *a += v;
        }
    }
    let peak = aggregate.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let peak_hour = aggregate.iter().position(|&v| v == peak).unwrap();
    let energy: f64 = aggregate.iter().sum();
    let max_spot = spot
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    println!("consumers:        {}", fleet.len());
    println!(
        "households:       {}",
        fleet
            .iter()
            .filter(|l| l.consumer_id().starts_with('H'))
            .count()
    );
    println!(
        "horizon:          {} hours ({} days)",
        index.hour_count(),
        index.day_count()
    );
    println!("aggregate energy: {energy:.1} kWh");
    println!(
        "aggregate peak:   {peak:.2} kW at {}",
        index.timestamp(peak_hour)
    );
    println!("max spot price:   {max_spot:.3} NOK/kWh");

    let out = std::path::Path::new("target/example_data");
    std::fs::create_dir_all(out)?;
    let classes: Vec<_> = (0..fleet.len()).map(|i| config.class_of(i)).collect();
    write_load_csv(&fleet, &classes, &index, &out.join("loads.csv"))?;
    write_spot_csv(&spot, &index, &out.join("spot.csv"))?;
    println!("wrote {}/loads.csv and spot.csv", out.display());
    Ok(())
}
