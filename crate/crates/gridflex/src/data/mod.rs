//! Data in and out: CSV ingestion of metered loads and spot prices, a
//! seeded synthetic fleet generator standing in for proprietary metering
//! data, and emission of result tables and plot-data files.

mod files;
mod synth;

pub use files::{
    read_load_csv, read_results_csv, read_spot_csv, read_spot_csv_aligned, write_load_csv,
    write_results, write_spot_csv, PlotData, PlotSeries, ResultRow, ResultsTable, LOAD_CSV_HEADER,
    RESULTS_CSV_HEADER, SPOT_CSV_HEADER,
};
pub use synth::{generate_fleet, ConsumerClass, SyntheticFleetConfig};
