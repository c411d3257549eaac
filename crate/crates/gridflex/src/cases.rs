//! Case runner: the grid-tariff case (with and without spot prices), the
//! spot-only benchmark, and the coordinated system-optimal response that
//! bounds what the available flexibility can do to the aggregate peak.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, RowOp};
use crate::model::{CostBreakdown, FlexibilityParams, LoadSeries, ResponseResult, SpotPriceSeries};
use crate::response::{solve_consumer, ConsumerProblem};
use crate::tariff::TariffSpec;
use crate::time::TimeIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseKind {
    /// Coordinated minimization of the aggregate peak.
    SystemOptimal,
    /// Each consumer minimizes their bill under a grid tariff alone.
    GridTariff,
    /// Grid tariff plus the spot price signal.
    GridTariffWithSpot,
    /// Spot price (plus the flat energy term) as the only signal.
    SpotOnly,
}

impl CaseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseKind::SystemOptimal => "sor",
            CaseKind::GridTariff => "gt",
            CaseKind::GridTariffWithSpot => "gt_sp",
            CaseKind::SpotOnly => "sp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sor" => Ok(CaseKind::SystemOptimal),
            "gt" => Ok(CaseKind::GridTariff),
            "gt_sp" | "gtsp" => Ok(CaseKind::GridTariffWithSpot),
            "sp" => Ok(CaseKind::SpotOnly),
            other => Err(Error::Config(format!(
                "unknown case '{other}' (expected sor, gt, gt_sp or sp)"
            ))),
        }
    }
}

impl std::fmt::Display for CaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to run: the case kind plus the inputs it needs.
#[derive(Debug, Clone)]
pub struct CaseSpec<'a> {
    pub kind: CaseKind,
    /// Required for the grid-tariff cases, ignored otherwise.
    pub tariff: Option<&'a TariffSpec>,
    /// Required when the case includes the spot signal.
    pub spot: Option<&'a SpotPriceSeries>,
    pub flexibility: FlexibilityParams,
    /// Flat energy term the spot-only case keeps for cost recovery; set to
    /// zero to expose consumers to the raw spot price alone.
    pub sp_energy_rate: f64,
}

/// Per-case outputs: everyone's response, the aggregates and peak metrics.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub kind: CaseKind,
    pub tariff_name: String,
    pub per_consumer: Vec<ResponseResult>,
    pub aggregate_baseline: Vec<f64>,
    pub aggregate_new: Vec<f64>,
    pub baseline_peak: f64,
    pub new_peak: f64,
    pub reduction_fraction: f64,
    pub costs: CostBreakdown,
}

/// Horizon peaks of the baseline and response aggregates plus the relative
/// reduction.
pub fn peak_metrics(baseline: &[f64], response: &[f64]) -> Result<(f64, f64, f64)> {
    if baseline.is_empty() || response.is_empty() {
        return Err(Error::InvalidInput(
            "peak metrics need non-empty series".into(),
        ));
    }
    if baseline.len() != response.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {}",
            baseline.len(),
            response.len()
        )));
    }
    let base = baseline.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let new = response.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let fraction = if base > 0.0 { (base - new) / base } else { 0.0 };
    Ok((base, new, fraction))
}

fn aggregate(fleet: &[LoadSeries]) -> Vec<f64> {
    let n = fleet[0].len();
    let mut agg = vec![0.0; n];
    for load in fleet {
        for (a, v) in agg.iter_mut().zip(load.values()) {
            *a += v;
        }
    }
    agg
}

fn assemble_result(
    kind: CaseKind,
    tariff_name: String,
    fleet: &[LoadSeries],
    per_consumer: Vec<ResponseResult>,
) -> Result<CaseResult> {
    let aggregate_baseline = aggregate(fleet);
    let mut aggregate_new = vec![0.0; aggregate_baseline.len()];
    let mut costs = CostBreakdown::default();
    for r in &per_consumer {
        for (a, v) in aggregate_new.iter_mut().zip(&r.new_load) {
            *a += v;
        }
        costs = costs.add(&r.costs);
    }
    let (baseline_peak, new_peak, reduction_fraction) =
        peak_metrics(&aggregate_baseline, &aggregate_new)?;
    Ok(CaseResult {
        kind,
        tariff_name,
        per_consumer,
        aggregate_baseline,
        aggregate_new,
        baseline_peak,
        new_peak,
        reduction_fraction,
        costs,
    })
}

fn check_fleet(fleet: &[LoadSeries], index: &TimeIndex) -> Result<()> {
    if fleet.is_empty() {
        return Err(Error::InvalidInput("fleet must not be empty".into()));
    }
    for load in fleet {
        if load.len() != index.hour_count() {
            return Err(Error::InvalidInput(format!(
                "consumer '{}' has {} hours, index has {}",
                load.consumer_id(),
                load.len(),
                index.hour_count()
            )));
        }
    }
    Ok(())
}

/// Runs one case over the fleet. Consumer problems are independent and are
/// solved in parallel; results merge in fleet order, so the outcome does
/// not depend on the degree of parallelism.
pub fn run_case(spec: &CaseSpec, fleet: &[LoadSeries], index: &TimeIndex) -> Result<CaseResult> {
    check_fleet(fleet, index)?;
    let sp_tariff;
    let (tariff, spot, tariff_name) = match spec.kind {
        CaseKind::SystemOptimal => {
            return solve_sor(fleet, &spec.flexibility, index);
        }
        CaseKind::GridTariff => {
            let t = spec
                .tariff
                .ok_or_else(|| Error::Config("the grid-tariff case needs a tariff".into()))?;
            (t, None, t.name().to_string())
        }
        CaseKind::GridTariffWithSpot => {
            let t = spec.tariff.ok_or_else(|| {
                Error::Config("the grid-tariff-plus-spot case needs a tariff".into())
            })?;
            let s = spec.spot.ok_or_else(|| {
                Error::Config("the grid-tariff-plus-spot case needs a spot series".into())
            })?;
            (t, Some(s), t.name().to_string())
        }
        CaseKind::SpotOnly => {
            let s = spec
                .spot
                .ok_or_else(|| Error::Config("the spot-price case needs a spot series".into()))?;
            sp_tariff = TariffSpec::FlatEnergy {
                energy_rate: spec.sp_energy_rate,
            };
            (&sp_tariff, Some(s), "-".to_string())
        }
    };

    let outcomes: Vec<Result<ResponseResult>> = fleet
        .par_iter()
        .map(|load| {
            let problem = ConsumerProblem {
                load,
                flexibility: spec.flexibility,
                tariff,
                spot,
                index,
                fixed_subscription: None,
            };
            solve_consumer(&problem)
        })
        .collect();
    let mut per_consumer = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        per_consumer.push(outcome?);
    }
    assemble_result(spec.kind, tariff_name, fleet, per_consumer)
}

/// Coordinated benchmark: minimize the aggregate peak over the whole
/// horizon subject to every consumer's flexibility envelope, then remove
/// gratuitous curtailment by minimizing total curtailment at that peak.
/// Days are independent, so both stages decompose per day.
pub fn solve_sor(
    fleet: &[LoadSeries],
    flexibility: &FlexibilityParams,
    index: &TimeIndex,
) -> Result<CaseResult> {
    check_fleet(fleet, index)?;
    flexibility.validate()?;
    let agg = aggregate(fleet);

    // Stage 1: the lowest reachable aggregate peak of each day; the horizon
    // optimum is the largest of them.
    let day_peaks: Vec<Result<f64>> = (0..index.day_count())
        .into_par_iter()
        .map(|d| sor_day_min_peak(fleet, flexibility, index, d, &agg))
        .collect();
    let mut peak_level = 0.0f64;
    for p in day_peaks {
        peak_level = peak_level.max(p?);
    }

    // Stage 2: per day, the least total curtailment that keeps the
    // aggregate under the horizon peak level. Stage 1 proved the level
    // reachable; the solver's feasibility tolerance covers the rounding.
    let day_reductions: Vec<Result<Vec<Vec<f64>>>> = (0..index.day_count())
        .into_par_iter()
        .map(|d| sor_day_min_curtailment(fleet, flexibility, index, d, &agg, peak_level))
        .collect();

    let hours = index.hour_count();
    let mut reductions: Vec<Vec<f64>> = fleet.iter().map(|_| vec![0.0; hours]).collect();
    for (d, day) in day_reductions.into_iter().enumerate() {
        let day = day?;
        let start = index.hours_of_day(d).start;
        for (i, consumer_day) in day.into_iter().enumerate() {
            for (k, q) in consumer_day.into_iter().enumerate() {
                reductions[i][start + k] = q;
            }
        }
    }

    let per_consumer: Vec<ResponseResult> = fleet
        .iter()
        .zip(reductions)
        .map(|(load, reduction)| {
            let new_load: Vec<f64> = load
                .values()
                .iter()
                .zip(&reduction)
                .map(|(l, q)| (l - q).max(0.0))
                .collect();
            let flexibility_cost = flexibility.discomfort_cost * reduction.iter().sum::<f64>();
            let r = ResponseResult {
                new_load,
                reduction,
                costs: CostBreakdown::new(0.0, 0.0, flexibility_cost),
                subscription: None,
                monthly_peaks: None,
            };
            r.validate(load, flexibility, index).map(|_| r)
        })
        .collect::<Result<_>>()?;

    assemble_result(
        CaseKind::SystemOptimal,
        "-".to_string(),
        fleet,
        per_consumer,
    )
}

fn sor_day_min_peak(
    fleet: &[LoadSeries],
    flex: &FlexibilityParams,
    index: &TimeIndex,
    day: usize,
    agg: &[f64],
) -> Result<f64> {
    let hours = index.hours_of_day(day);
    let hpd = hours.len();
    let mut lp = LinearProgram::new();
    // One curtailment variable per consumer and hour, then the peak.
    for load in fleet {
        for t in hours.clone() {
            lp.add_var(0.0, 0.0, flex.max_hourly_share * load.values()[t]);
        }
    }
    // The aggregate cannot drop below the hourly-cap floor anywhere.
    let peak_floor = hours
        .clone()
        .map(|t| (1.0 - flex.max_hourly_share) * agg[t])
        .fold(0.0f64, f64::max);
    let peak = lp.add_var(1.0, peak_floor, f64::INFINITY);

    for (k, t) in hours.clone().enumerate() {
        if agg[t] <= 0.0 {
            continue;
        }
        let mut coeffs: Vec<(usize, f64)> = (0..fleet.len()).map(|i| (i * hpd + k, 1.0)).collect();
        coeffs.push((peak, 1.0));
        lp.add_row(coeffs, RowOp::Ge, agg[t]);
    }
    for (i, load) in fleet.iter().enumerate() {
        let budget = flex.max_daily_share * load.daily_energy(index, day)?;
        let coeffs: Vec<(usize, f64)> = (0..hpd).map(|k| (i * hpd + k, 1.0)).collect();
        lp.add_row(coeffs, RowOp::Le, budget);
    }
    let sol = lp.solve()?;
    if !sol.is_optimal() {
        return Err(Error::Internal(format!(
            "system-optimal stage 1 on day {day} ended {:?}",
            sol.status
        )));
    }
    Ok(sol.primal[peak])
}

fn sor_day_min_curtailment(
    fleet: &[LoadSeries],
    flex: &FlexibilityParams,
    index: &TimeIndex,
    day: usize,
    agg: &[f64],
    peak_level: f64,
) -> Result<Vec<Vec<f64>>> {
    let hours = index.hours_of_day(day);
    let hpd = hours.len();
    let day_peak = hours.clone().map(|t| agg[t]).fold(0.0f64, f64::max);
    if day_peak <= peak_level {
        return Ok(fleet.iter().map(|_| vec![0.0; hpd]).collect());
    }
    let mut lp = LinearProgram::new();
    for load in fleet {
        for t in hours.clone() {
            lp.add_var(1.0, 0.0, flex.max_hourly_share * load.values()[t]);
        }
    }
    for (k, t) in hours.clone().enumerate() {
        if agg[t] > peak_level {
            let coeffs: Vec<(usize, f64)> = (0..fleet.len()).map(|i| (i * hpd + k, 1.0)).collect();
            lp.add_row(coeffs, RowOp::Ge, agg[t] - peak_level);
        }
    }
    for (i, load) in fleet.iter().enumerate() {
        let budget = flex.max_daily_share * load.daily_energy(index, day)?;
        let coeffs: Vec<(usize, f64)> = (0..hpd).map(|k| (i * hpd + k, 1.0)).collect();
        lp.add_row(coeffs, RowOp::Le, budget);
    }
    let sol = lp.solve()?;
    if !sol.is_optimal() {
        return Err(Error::Internal(format!(
            "system-optimal stage 2 on day {day} ended {:?}",
            sol.status
        )));
    }
    let mut out = Vec::with_capacity(fleet.len());
    for (i, load) in fleet.iter().enumerate() {
        let mut qs = Vec::with_capacity(hpd);
        for (k, t) in hours.clone().enumerate() {
            let cap = flex.max_hourly_share * load.values()[t];
            qs.push(sol.primal[i * hpd + k].clamp(0.0, cap));
        }
        out.push(qs);
    }
    Ok(out)
}
