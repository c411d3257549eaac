//! The five tariff designs and everything priced by them: exact grid cost
//! of a load path, hourly marginal price signals, selection of dynamic
//! time-of-use event days, and revenue-neutral calibration against a flat
//! energy reference.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LoadSeries;
use crate::response;
use crate::time::TimeIndex;

/// Hours in the nominal year used to prorate annual capacity fees.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Daily hour window, half-open: hour `h` is inside iff `start <= h < end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    pub start: u32,
    pub end: u32,
}

impl HourWindow {
    pub const fn new(start: u32, end: u32) -> Self {
        Self { start, end }
    }

    /// The 06-22 window used by both time-of-use designs (16 peak hours).
    pub const fn default_peak() -> Self {
        Self { start: 6, end: 22 }
    }

    pub fn contains(&self, hour_of_day: usize) -> bool {
        (hour_of_day as u32) >= self.start && (hour_of_day as u32) < self.end
    }
}

/// Months counted as winter for the static time-of-use peak rate
/// (November through March).
pub fn default_winter_months() -> BTreeSet<u32> {
    [11, 12, 1, 2, 3].into_iter().collect()
}

/// One grid tariff design with all of its cost parameters.
///
/// `energy_rate` is the undifferentiated volumetric term present in every
/// design; the other parameters are design-specific. All rates are NOK/kWh
/// except `peak_price` (NOK per kW of monthly peak) and `capacity_price`
/// (NOK per kW of subscribed capacity per year).
#[derive(Debug, Clone, PartialEq)]
pub enum TariffSpec {
    FlatEnergy {
        energy_rate: f64,
    },
    StaticTou {
        energy_rate: f64,
        peak_rate: f64,
        window: HourWindow,
        winter_months: BTreeSet<u32>,
        /// Apply the peak rate on weekends and holidays too (off by default).
        weekends_and_holidays: bool,
    },
    DynamicTou {
        energy_rate: f64,
        event_rate: f64,
        window: HourWindow,
        /// Day indices on which the event rate applies inside the window.
        active_days: BTreeSet<usize>,
    },
    DemandCharge {
        energy_rate: f64,
        peak_price: f64,
    },
    SubscribedCapacity {
        energy_rate: f64,
        excess_rate: f64,
        capacity_price: f64,
    },
}

impl TariffSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TariffSpec::FlatEnergy { .. } => "flat",
            TariffSpec::StaticTou { .. } => "static_tou",
            TariffSpec::DynamicTou { .. } => "dynamic_tou",
            TariffSpec::DemandCharge { .. } => "demand_charge",
            TariffSpec::SubscribedCapacity { .. } => "subscribed_capacity",
        }
    }

    pub fn energy_rate(&self) -> f64 {
        match *self {
            TariffSpec::FlatEnergy { energy_rate }
            | TariffSpec::StaticTou { energy_rate, .. }
            | TariffSpec::DynamicTou { energy_rate, .. }
            | TariffSpec::DemandCharge { energy_rate, .. }
            | TariffSpec::SubscribedCapacity { energy_rate, .. } => energy_rate,
        }
    }

    /// True for designs whose grid cost is a pure per-hour rate times load.
    pub fn is_volumetric(&self) -> bool {
        matches!(
            self,
            TariffSpec::FlatEnergy { .. }
                | TariffSpec::StaticTou { .. }
                | TariffSpec::DynamicTou { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            TariffSpec::FlatEnergy { energy_rate } => {
                if !nonneg(*energy_rate) {
                    return fail(format!("flat energy rate {energy_rate} must be >= 0"));
                }
            }
            TariffSpec::StaticTou {
                energy_rate,
                peak_rate,
                window,
                ..
            } => {
                if !nonneg(*energy_rate) || !nonneg(*peak_rate) || peak_rate < energy_rate {
                    return fail(format!(
                        "static time-of-use rates invalid: energy {energy_rate}, peak {peak_rate}"
                    ));
                }
                if window.start >= window.end {
                    return fail(format!(
                        "empty peak window {}..{}",
                        window.start, window.end
                    ));
                }
            }
            TariffSpec::DynamicTou {
                energy_rate,
                event_rate,
                window,
                ..
            } => {
                if !nonneg(*energy_rate) || !nonneg(*event_rate) || event_rate < energy_rate {
                    return fail(format!(
                        "dynamic time-of-use rates invalid: energy {energy_rate}, event {event_rate}"
                    ));
                }
                if window.start >= window.end {
                    return fail(format!(
                        "empty peak window {}..{}",
                        window.start, window.end
                    ));
                }
            }
            TariffSpec::DemandCharge {
                energy_rate,
                peak_price,
            } => {
                if !nonneg(*energy_rate) || !nonneg(*peak_price) {
                    return fail(format!(
                        "demand charge rates invalid: energy {energy_rate}, peak {peak_price}"
                    ));
                }
            }
            TariffSpec::SubscribedCapacity {
                energy_rate,
                excess_rate,
                capacity_price,
            } => {
                if !nonneg(*energy_rate) || !nonneg(*excess_rate) || !nonneg(*capacity_price) {
                    return fail(format!(
                        "subscribed capacity rates invalid: energy {energy_rate}, \
                         excess {excess_rate}, capacity {capacity_price}"
                    ));
                }
                if excess_rate <= energy_rate {
                    return fail(format!(
                        "excess rate {excess_rate} must exceed energy rate {energy_rate}, \
                         otherwise the below/above-subscription split is degenerate"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Per-hour rate of the volumetric designs; `None` for capacity-based
    /// ones (their marginal price depends on the load path).
    pub fn hourly_rate(&self, index: &TimeIndex, hour: usize) -> Option<f64> {
        match self {
            TariffSpec::FlatEnergy { energy_rate } => Some(*energy_rate),
            TariffSpec::StaticTou {
                energy_rate,
                peak_rate,
                window,
                winter_months,
                weekends_and_holidays,
            } => {
                let day = index.day_of_hour(hour);
                let month = index.months()[index.month_of_hour(hour)].month;
                let day_ok =
                    *weekends_and_holidays || (!index.is_weekend(day) && !index.is_holiday(day));
                let active = winter_months.contains(&month)
                    && window.contains(index.hour_of_day(hour))
                    && day_ok;
                Some(if active { *peak_rate } else { *energy_rate })
            }
            TariffSpec::DynamicTou {
                energy_rate,
                event_rate,
                window,
                active_days,
            } => {
                let active = active_days.contains(&index.day_of_hour(hour))
                    && window.contains(index.hour_of_day(hour));
                Some(if active { *event_rate } else { *energy_rate })
            }
            _ => None,
        }
    }

    /// Capacity fee for the horizon: the annual price prorated linearly to
    /// the horizon length.
    pub fn prorated_capacity_price(&self, index: &TimeIndex) -> f64 {
        match self {
            TariffSpec::SubscribedCapacity { capacity_price, .. } => {
                capacity_price * index.hour_count() as f64 / HOURS_PER_YEAR
            }
            _ => 0.0,
        }
    }
}

/// Hourly marginal prices of one additional kWh, with capacity-based
/// (non-volumetric) hours flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSignal {
    pub values: Vec<f64>,
    pub capacity_flag: Vec<bool>,
}

fn check_load_path(load: &[f64], index: &TimeIndex) -> Result<()> {
    if load.len() != index.hour_count() {
        return Err(Error::InvalidInput(format!(
            "load path has {} hours, index has {}",
            load.len(),
            index.hour_count()
        )));
    }
    for (t, &v) in load.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput(format!(
                "load path value {v} at hour {t} must be finite and non-negative"
            )));
        }
    }
    Ok(())
}

fn require_subscription(tariff: &TariffSpec, subscription: Option<f64>) -> Result<Option<f64>> {
    match (tariff, subscription) {
        (TariffSpec::SubscribedCapacity { .. }, None) => Err(Error::Config(
            "subscribed-capacity pricing needs a subscription level".into(),
        )),
        (TariffSpec::SubscribedCapacity { .. }, Some(x)) if !(x.is_finite() && x >= 0.0) => Err(
            Error::InvalidInput(format!("subscription level {x} must be finite and >= 0")),
        ),
        (_, s) => Ok(s),
    }
}

/// Exact grid cost of the given load path under a tariff.
///
/// Volumetric designs sum hourly rate times load; the demand charge adds the
/// peak price times each month's maximum hourly load; subscribed capacity
/// splits every hour into the part below the subscription (energy rate) and
/// the excess (excess rate), plus the prorated capacity fee.
pub fn grid_cost(
    tariff: &TariffSpec,
    load: &[f64],
    index: &TimeIndex,
    subscription: Option<f64>,
) -> Result<f64> {
    check_load_path(load, index)?;
    let subscription = require_subscription(tariff, subscription)?;
    let cost = match tariff {
        TariffSpec::FlatEnergy { energy_rate } => energy_rate * load.iter().sum::<f64>(),
        TariffSpec::StaticTou { .. } | TariffSpec::DynamicTou { .. } => (0..load.len())
            .map(|t| tariff.hourly_rate(index, t).unwrap() * load[t])
            .sum(),
        TariffSpec::DemandCharge {
            energy_rate,
            peak_price,
        } => {
            let volumetric: f64 = energy_rate * load.iter().sum::<f64>();
            let peaks: f64 = (0..index.month_count())
                .map(|m| {
                    index
                        .hours_of_month(m)
                        .map(|t| load[t])
                        .fold(0.0f64, f64::max)
                })
                .sum();
            volumetric + peak_price * peaks
        }
        TariffSpec::SubscribedCapacity {
            energy_rate,
            excess_rate,
            ..
        } => {
            let x = subscription.unwrap();
            let split: f64 = load
                .iter()
                .map(|&l| energy_rate * l.min(x) + excess_rate * (l - x).max(0.0))
                .sum();
            split + x * tariff.prorated_capacity_price(index)
        }
    };
    Ok(cost)
}

/// Hourly marginal grid cost of one extra kWh on top of `baseline_load`.
///
/// For the demand charge the capacity component lands on exactly one hour
/// per month: the month's load argmax, earliest on ties; those hours carry
/// the capacity flag. For subscribed capacity, hours at or above the
/// subscription price at the excess rate.
pub fn marginal_price_signal(
    tariff: &TariffSpec,
    baseline_load: &[f64],
    index: &TimeIndex,
    subscription: Option<f64>,
) -> Result<PriceSignal> {
    check_load_path(baseline_load, index)?;
    let subscription = require_subscription(tariff, subscription)?;
    let n = baseline_load.len();
    let mut values = vec![0.0; n];
    let mut capacity_flag = vec![false; n];
    match tariff {
        TariffSpec::FlatEnergy { .. }
        | TariffSpec::StaticTou { .. }
        | TariffSpec::DynamicTou { .. } => {
            for t in 0..n {
                values[t] = tariff.hourly_rate(index, t).unwrap();
            }
        }
        TariffSpec::DemandCharge {
            energy_rate,
            peak_price,
        } => {
            values.iter_mut().for_each(|v| *v = *energy_rate);
            for m in 0..index.month_count() {
                let hours = index.hours_of_month(m);
                let mut argmax = hours.start;
                for t in hours {
                    if baseline_load[t] > baseline_load[argmax] {
                        argmax = t;
                    }
                }
                values[argmax] += peak_price;
                capacity_flag[argmax] = true;
            }
        }
        TariffSpec::SubscribedCapacity {
            energy_rate,
            excess_rate,
            ..
        } => {
            let x = subscription.unwrap();
            for t in 0..n {
                values[t] = if baseline_load[t] >= x {
                    *excess_rate
                } else {
                    *energy_rate
                };
            }
        }
    }
    Ok(PriceSignal {
        values,
        capacity_flag,
    })
}

/// The `n_days` days with the highest daily maximum of the aggregate load,
/// ties broken toward the earlier day; returned sorted ascending.
pub fn select_peak_days(
    aggregate_load: &[f64],
    index: &TimeIndex,
    n_days: usize,
) -> Result<Vec<usize>> {
    if aggregate_load.len() != index.hour_count() {
        return Err(Error::InvalidInput(format!(
            "aggregate load has {} hours, index has {}",
            aggregate_load.len(),
            index.hour_count()
        )));
    }
    if n_days == 0 || n_days > index.day_count() {
        return Err(Error::InvalidInput(format!(
            "n_days {n_days} must be in 1..={}",
            index.day_count()
        )));
    }
    let mut daily_peaks: Vec<(usize, f64)> = (0..index.day_count())
        .map(|d| {
            let peak = index
                .hours_of_day(d)
                .map(|t| aggregate_load[t])
                .fold(f64::NEG_INFINITY, f64::max);
            (d, peak)
        })
        .collect();
    // Stable sort keeps earlier days first among equal peaks.
    daily_peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let mut selected: Vec<usize> = daily_peaks[..n_days].iter().map(|&(d, _)| d).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Total baseline (no-response) revenue a tariff collects from a fleet.
/// For subscribed capacity each consumer subscribes at their own optimum.
pub fn fleet_revenue(
    tariff: &TariffSpec,
    baseline_loads: &[LoadSeries],
    index: &TimeIndex,
) -> Result<f64> {
    let mut revenue = 0.0;
    for load in baseline_loads {
        let subscription = match tariff {
            TariffSpec::SubscribedCapacity { .. } => {
                Some(response::optimal_subscription(load, tariff, index)?)
            }
            _ => None,
        };
        revenue += grid_cost(tariff, load.values(), index, subscription)?;
    }
    Ok(revenue)
}

fn with_parameter(tariff: &TariffSpec, value: f64) -> TariffSpec {
    let mut out = tariff.clone();
    match &mut out {
        TariffSpec::FlatEnergy { .. } => {}
        TariffSpec::StaticTou { peak_rate, .. } => *peak_rate = value,
        TariffSpec::DynamicTou { event_rate, .. } => *event_rate = value,
        TariffSpec::DemandCharge { peak_price, .. } => *peak_price = value,
        TariffSpec::SubscribedCapacity { capacity_price, .. } => *capacity_price = value,
    }
    out
}

/// Rescales the design-specific parameter (peak rate, event rate, peak
/// price or capacity price — the energy rate is held fixed) so that
/// baseline revenue over the fleet matches the flat-energy reference.
///
/// The root is found by bisection on the parameter in [0, 1e6]; revenue is
/// monotone in the parameter for every design (for subscribed capacity each
/// consumer's optimal subscription is recomputed inside the loop). A flat
/// tariff is returned unchanged.
pub fn calibrate(
    tariff: &TariffSpec,
    baseline_loads: &[LoadSeries],
    index: &TimeIndex,
    reference: &TariffSpec,
) -> Result<TariffSpec> {
    let TariffSpec::FlatEnergy {
        energy_rate: reference_rate,
    } = reference
    else {
        return Err(Error::Config(
            "calibration reference must be a flat energy tariff".into(),
        ));
    };
    if baseline_loads.is_empty() {
        return Err(Error::InvalidInput(
            "calibration needs at least one baseline load".into(),
        ));
    }
    if !reference_rate.is_finite() || *reference_rate <= 0.0 {
        return Err(Error::Config(format!(
            "calibration reference rate {reference_rate} must be positive"
        )));
    }
    if matches!(tariff, TariffSpec::FlatEnergy { .. }) {
        return Ok(tariff.clone());
    }

    let total_energy: f64 = baseline_loads.iter().map(LoadSeries::total_energy).sum();
    let target = reference_rate * total_energy;
    let revenue_at = |theta: f64| -> Result<f64> {
        fleet_revenue(&with_parameter(tariff, theta), baseline_loads, index)
    };

    let (mut lo, mut hi) = (0.0f64, 1e6f64);
    let rev_lo = revenue_at(lo)?;
    if rev_lo > target {
        return Err(Error::Calibration {
            tariff: tariff.name().into(),
            gap: rev_lo - target,
        });
    }
    let rev_hi = revenue_at(hi)?;
    if rev_hi < target {
        return Err(Error::Calibration {
            tariff: tariff.name().into(),
            gap: rev_hi - target,
        });
    }
    // Bisect to a relative bracket width of 1e-12.
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if revenue_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    // A rate that lands within bracket tolerance of the energy rate is the
    // boundary root itself.
    let energy_rate = tariff.energy_rate();
    if matches!(
        tariff,
        TariffSpec::StaticTou { .. } | TariffSpec::DynamicTou { .. }
    ) && theta < energy_rate
        && energy_rate - theta <= 1e-9 * (1.0 + energy_rate)
    {
        theta = energy_rate;
    }
    let calibrated = with_parameter(tariff, theta);
    // A time-of-use rate calibrated below the energy rate would invert the
    // design; report it as a failed calibration instead.
    if let Err(e) = calibrated.validate() {
        return Err(Error::Calibration {
            tariff: tariff.name().into(),
            gap: match e {
                Error::Config(_) => reference_rate * total_energy - revenue_at(theta)?,
                _ => f64::NAN,
            },
        });
    }
    Ok(calibrated)
}
