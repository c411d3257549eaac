//! CSV schemas and writers.
//!
//! Load file: `timestamp,consumer_id,consumer_type,load_kwh`; spot file:
//! `timestamp,price_nok_per_kwh`. Timestamps are ISO-8601 local naive
//! hours (`2020-11-01T00:00:00`); series must start at midnight, cover
//! whole days and have no gaps or duplicates. Floats use `.` decimals and
//! round-trip formatting, so written files re-read bit-identically.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};

use crate::cases::CaseKind;
use crate::error::{Error, Result};
use crate::model::{CostBreakdown, LoadSeries, SpotPriceSeries};
use crate::time::TimeIndex;

use super::ConsumerClass;

pub const LOAD_CSV_HEADER: [&str; 4] = ["timestamp", "consumer_id", "consumer_type", "load_kwh"];
pub const SPOT_CSV_HEADER: [&str; 2] = ["timestamp", "price_nok_per_kwh"];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

fn ingestion(line: u64, message: impl Into<String>) -> Error {
    Error::Ingestion {
        line,
        message: message.into(),
    }
}

fn parse_timestamp(s: &str, line: u64) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .map_err(|e| ingestion(line, format!("bad timestamp '{s}': {e}")))
}

fn check_header(got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_fields: Vec<&str> = got.iter().collect();
    if got_fields != want {
        return Err(ingestion(
            1,
            format!("header {got_fields:?} does not match expected {want:?}"),
        ));
    }
    Ok(())
}

/// Validates one consumer's (timestamp, value, line) triples: sorted
/// hourly coverage with no gaps or duplicates. Returns values in time order.
fn contiguous_hourly(
    id: &str,
    mut rows: Vec<(NaiveDateTime, f64, u64)>,
) -> Result<(NaiveDateTime, Vec<f64>)> {
    rows.sort_by_key(|r| r.0);
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let gap = b.0 - a.0;
        if gap == chrono::Duration::zero() {
            return Err(ingestion(
                b.2,
                format!("duplicate timestamp {} for consumer {id}", b.0),
            ));
        }
        if gap != chrono::Duration::hours(1) {
            return Err(ingestion(
                b.2,
                format!("consumer {id} is missing hours between {} and {}", a.0, b.0),
            ));
        }
    }
    let start = rows[0].0;
    Ok((start, rows.into_iter().map(|r| r.1).collect()))
}

/// Reads a load CSV into one series per consumer, all aligned to a common
/// hourly index covering whole days from midnight.
pub fn read_load_csv(path: &Path) -> Result<(Vec<LoadSeries>, TimeIndex)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    check_header(
        reader.headers().map_err(|e| ingestion(1, e.to_string()))?,
        &LOAD_CSV_HEADER,
    )?;

    let mut per_consumer: BTreeMap<String, Vec<(NaiveDateTime, f64, u64)>> = BTreeMap::new();
    let mut class_of: BTreeMap<String, String> = BTreeMap::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| ingestion(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(ingestion(
                line,
                format!("expected 4 fields, got {}", record.len()),
            ));
        }
        let ts = parse_timestamp(&record[0], line)?;
        let id = record[1].to_string();
        let class = record[2].to_string();
        let value: f64 = record[3]
            .parse()
            .map_err(|e| ingestion(line, format!("bad load value '{}': {e}", &record[3])))?;
        if !value.is_finite() || value < 0.0 {
            return Err(ingestion(
                line,
                format!("load {value} for consumer {id} must be finite and non-negative"),
            ));
        }
        match class_of.get(&id) {
            Some(existing) if existing != &class => {
                return Err(ingestion(
                    line,
                    format!("consumer {id} changes type from {existing} to {class}"),
                ));
            }
            None => {
                class_of.insert(id.clone(), class);
            }
            _ => {}
        }
        per_consumer.entry(id).or_default().push((ts, value, line));
    }
    if per_consumer.is_empty() {
        return Err(ingestion(1, "load file has no data rows"));
    }

    let mut fleet = Vec::with_capacity(per_consumer.len());
    let mut common: Option<(NaiveDateTime, usize)> = None;
    for (id, rows) in per_consumer {
        let (start, values) = contiguous_hourly(&id, rows)?;
        match &common {
            None => {
                if start.hour() != 0 || start.minute() != 0 {
                    return Err(ingestion(
                        2,
                        format!("series must start at midnight, got {start}"),
                    ));
                }
                if values.len() % 24 != 0 {
                    return Err(ingestion(
                        2,
                        format!("series length {} is not whole days", values.len()),
                    ));
                }
                common = Some((start, values.len()));
            }
            Some((s, n)) => {
                if start != *s || values.len() != *n {
                    return Err(ingestion(
                        2,
                        format!(
                            "consumer {id} covers {start} x{} but the file starts {s} x{n}",
                            values.len()
                        ),
                    ));
                }
            }
        }
        fleet.push(LoadSeries::new(id, values)?);
    }
    let (start, hours) = common.unwrap();
    let index = TimeIndex::calendar(start.date(), hours / 24, &Default::default())?;
    Ok((fleet, index))
}

fn read_spot_rows(path: &Path) -> Result<(NaiveDateTime, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    check_header(
        reader.headers().map_err(|e| ingestion(1, e.to_string()))?,
        &SPOT_CSV_HEADER,
    )?;
    let mut rows: Vec<(NaiveDateTime, f64, u64)> = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| ingestion(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(ingestion(
                line,
                format!("expected 2 fields, got {}", record.len()),
            ));
        }
        let ts = parse_timestamp(&record[0], line)?;
        let value: f64 = record[1]
            .parse()
            .map_err(|e| ingestion(line, format!("bad price '{}': {e}", &record[1])))?;
        if !value.is_finite() {
            return Err(ingestion(line, format!("price {value} must be finite")));
        }
        rows.push((ts, value, line));
    }
    if rows.is_empty() {
        return Err(ingestion(1, "spot file has no data rows"));
    }
    contiguous_hourly("spot", rows)
}

/// Reads a spot price CSV; negative prices are accepted.
pub fn read_spot_csv(path: &Path) -> Result<SpotPriceSeries> {
    let (_, values) = read_spot_rows(path)?;
    SpotPriceSeries::new(values)
}

/// Reads a spot price CSV and checks it covers exactly the same hours as
/// the load horizon, so a file of the right length but the wrong period
/// cannot slip through by position.
pub fn read_spot_csv_aligned(path: &Path, index: &TimeIndex) -> Result<SpotPriceSeries> {
    let (start, values) = read_spot_rows(path)?;
    if start != index.timestamp(0) {
        return Err(Error::Config(format!(
            "spot series starts {start} but the load horizon starts {}",
            index.timestamp(0)
        )));
    }
    if values.len() != index.hour_count() {
        return Err(Error::Config(format!(
            "spot series has {} hours but the load horizon has {}",
            values.len(),
            index.hour_count()
        )));
    }
    SpotPriceSeries::new(values)
}

pub fn write_load_csv(
    fleet: &[LoadSeries],
    classes: &[ConsumerClass],
    index: &TimeIndex,
    path: &Path,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    writer
        .write_record(LOAD_CSV_HEADER)
        .map_err(|e| Error::Config(e.to_string()))?;
    for (load, class) in fleet.iter().zip(classes) {
        for t in 0..index.hour_count() {
            writer
                .write_record([
                    index.timestamp(t).format(TIMESTAMP_FORMAT).to_string(),
                    load.consumer_id().to_string(),
                    class.as_str().to_string(),
                    format!("{}", load.values()[t]),
                ])
                .map_err(|e| Error::Config(e.to_string()))?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_spot_csv(spot: &SpotPriceSeries, index: &TimeIndex, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    writer
        .write_record(SPOT_CSV_HEADER)
        .map_err(|e| Error::Config(e.to_string()))?;
    for t in 0..index.hour_count() {
        writer
            .write_record([
                index.timestamp(t).format(TIMESTAMP_FORMAT).to_string(),
                format!("{}", spot.values()[t]),
            ])
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// One (case, tariff) outcome row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub case: CaseKind,
    pub tariff: String,
    pub baseline_peak_kw: f64,
    pub new_peak_kw: f64,
    pub reduction_pct: f64,
    pub costs: CostBreakdown,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

pub const RESULTS_CSV_HEADER: [&str; 9] = [
    "case",
    "tariff",
    "baseline_peak_kw",
    "new_peak_kw",
    "reduction_pct",
    "electricity_cost_nok",
    "grid_cost_nok",
    "flexibility_cost_nok",
    "total_cost_nok",
];

impl ResultsTable {
    /// Human-readable aligned rendering of the table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<6} {:<22} {:>14} {:>14} {:>12} {:>14}\n",
            "case", "tariff", "baseline_kw", "new_kw", "reduction_%", "total_nok"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<6} {:<22} {:>14.3} {:>14.3} {:>12.4} {:>14.2}\n",
                row.case.as_str(),
                row.tariff,
                row.baseline_peak_kw,
                row.new_peak_kw,
                row.reduction_pct,
                row.costs.total
            ));
        }
        out
    }
}

/// Full-horizon aggregate response of one executed (case, tariff) pair.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub case: CaseKind,
    pub tariff: String,
    pub aggregate_new: Vec<f64>,
}

impl PlotSeries {
    fn label(&self) -> String {
        if self.tariff == "-" {
            self.case.as_str().to_string()
        } else {
            format!("{}_{}", self.case.as_str(), self.tariff)
        }
    }
}

/// Everything the plot-data files are derived from.
#[derive(Debug, Clone)]
pub struct PlotData<'a> {
    pub index: &'a TimeIndex,
    pub aggregate_baseline: Vec<f64>,
    pub series: Vec<PlotSeries>,
    /// Aggregate-level marginal price signal per tariff design.
    pub price_signals: Vec<(String, Vec<f64>)>,
    pub spot: Option<Vec<f64>>,
}

fn peak_day(aggregate: &[f64], index: &TimeIndex) -> usize {
    let mut argmax = 0;
    for (t, &v) in aggregate.iter().enumerate() {
        if v > aggregate[argmax] {
            argmax = t;
        }
    }
    index.day_of_hour(argmax)
}

/// Writes `results.csv`, `peak_day_loads.csv` (hourly baseline/new pairs on
/// the highest-demand day), `price_signals.csv` (aggregate price signals on
/// that day) and `monthly_peaks.csv` (per-month peak diagnostics).
/// UTF-8, RFC-4180 quoting, `.` decimal separator, fixed column order.
pub fn write_results(table: &ResultsTable, plot: &PlotData, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;

    let mut results = csv::Writer::from_path(out_dir.join("results.csv"))
        .map_err(|e| Error::Config(format!("cannot create results.csv: {e}")))?;
    results
        .write_record(RESULTS_CSV_HEADER)
        .map_err(|e| Error::Config(e.to_string()))?;
    for row in &table.rows {
        results
            .write_record([
                row.case.as_str().to_string(),
                row.tariff.clone(),
                format!("{}", row.baseline_peak_kw),
                format!("{}", row.new_peak_kw),
                format!("{}", row.reduction_pct),
                format!("{}", row.costs.electricity),
                format!("{}", row.costs.grid),
                format!("{}", row.costs.flexibility),
                format!("{}", row.costs.total),
            ])
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    results.flush()?;

    let index = plot.index;
    let day = peak_day(&plot.aggregate_baseline, index);
    let day_hours = index.hours_of_day(day);

    let mut peak_file = csv::Writer::from_path(out_dir.join("peak_day_loads.csv"))
        .map_err(|e| Error::Config(format!("cannot create peak_day_loads.csv: {e}")))?;
    let mut header = vec!["hour".to_string()];
    for s in &plot.series {
        header.push(format!("{}_baseline", s.label()));
        header.push(format!("{}_new", s.label()));
    }
    peak_file
        .write_record(&header)
        .map_err(|e| Error::Config(e.to_string()))?;
    for (k, t) in day_hours.clone().enumerate() {
        let mut record = vec![format!("{k}")];
        for s in &plot.series {
            record.push(format!("{}", plot.aggregate_baseline[t]));
            record.push(format!("{}", s.aggregate_new[t]));
        }
        peak_file
            .write_record(&record)
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    peak_file.flush()?;

    let mut signals = csv::Writer::from_path(out_dir.join("price_signals.csv"))
        .map_err(|e| Error::Config(format!("cannot create price_signals.csv: {e}")))?;
    let mut header = vec!["hour".to_string()];
    if plot.spot.is_some() {
        header.push("spot".to_string());
    }
    for (name, _) in &plot.price_signals {
        header.push(name.clone());
    }
    signals
        .write_record(&header)
        .map_err(|e| Error::Config(e.to_string()))?;
    for (k, t) in day_hours.enumerate() {
        let mut record = vec![format!("{k}")];
        if let Some(spot) = &plot.spot {
            record.push(format!("{}", spot[t]));
        }
        for (_, sig) in &plot.price_signals {
            record.push(format!("{}", sig[t]));
        }
        signals
            .write_record(&record)
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    signals.flush()?;

    let mut monthly = csv::Writer::from_path(out_dir.join("monthly_peaks.csv"))
        .map_err(|e| Error::Config(format!("cannot create monthly_peaks.csv: {e}")))?;
    monthly
        .write_record(["case", "tariff", "month", "baseline_peak_kw", "new_peak_kw"])
        .map_err(|e| Error::Config(e.to_string()))?;
    for s in &plot.series {
        for m in 0..index.month_count() {
            let span = &index.months()[m];
            let hours = index.hours_of_month(m);
            let base = hours
                .clone()
                .map(|t| plot.aggregate_baseline[t])
                .fold(0.0f64, f64::max);
            let new = hours.map(|t| s.aggregate_new[t]).fold(0.0f64, f64::max);
            monthly
                .write_record([
                    s.case.as_str().to_string(),
                    s.tariff.clone(),
                    format!("{:04}-{:02}", span.year, span.month),
                    format!("{base}"),
                    format!("{new}"),
                ])
                .map_err(|e| Error::Config(e.to_string()))?;
        }
    }
    monthly.flush()?;
    Ok(())
}

/// Reads `results.csv` back (used by the report command).
pub fn read_results_csv(path: &Path) -> Result<ResultsTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    check_header(
        reader.headers().map_err(|e| ingestion(1, e.to_string()))?,
        &RESULTS_CSV_HEADER,
    )?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| ingestion(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != RESULTS_CSV_HEADER.len() {
            return Err(ingestion(
                line,
                format!(
                    "expected {} fields, got {}",
                    RESULTS_CSV_HEADER.len(),
                    record.len()
                ),
            ));
        }
        let number = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .map_err(|e| ingestion(line, format!("bad number '{}': {e}", &record[k])))
        };
        rows.push(ResultRow {
            case: CaseKind::parse(&record[0]).map_err(|e| ingestion(line, e.to_string()))?,
            tariff: record[1].to_string(),
            baseline_peak_kw: number(2)?,
            new_peak_kw: number(3)?,
            reduction_pct: number(4)?,
            costs: CostBreakdown {
                electricity: number(5)?,
                grid: number(6)?,
                flexibility: number(7)?,
                total: number(8)?,
            },
        });
    }
    Ok(ResultsTable { rows })
}
