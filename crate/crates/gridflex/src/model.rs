//! Shared domain types: load and price series, the flexibility envelope,
//! cost breakdowns and per-consumer response results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::TimeIndex;

/// Absolute tolerance (kWh) for feasibility checks on constraint residuals.
/// Well above solver tolerance, well below any physically meaningful load.
pub const FEASIBILITY_TOL_KWH: f64 = 1e-7;

/// Hourly metered consumption of one consumer, in kWh/h.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    consumer_id: String,
    values: Vec<f64>,
}

impl LoadSeries {
    pub fn new(consumer_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let consumer_id = consumer_id.into();
        for (t, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "load for consumer '{consumer_id}' at hour {t} is {v}; \
                     values must be finite and non-negative"
                )));
            }
        }
        Ok(Self {
            consumer_id,
            values,
        })
    }

    pub fn consumer_id(&self) -> &str {
        &self.consumer_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_energy(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Energy consumed during one day of the horizon, in kWh.
    pub fn daily_energy(&self, index: &TimeIndex, day: usize) -> Result<f64> {
        if day >= index.day_count() {
            return Err(Error::InvalidInput(format!(
                "day {day} out of range (horizon has {} days)",
                index.day_count()
            )));
        }
        Ok(index.hours_of_day(day).map(|t| self.values[t]).sum())
    }
}

/// Hourly electricity spot prices in NOK/kWh. Negative prices are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotPriceSeries {
    values: Vec<f64>,
}

impl SpotPriceSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (t, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "spot price at hour {t} is {v}; values must be finite"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Generic demand-response envelope: how much load a consumer can curtail
/// and how unpleasant curtailment is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityParams {
    /// Largest share of an hour's load that can be curtailed in that hour.
    pub max_hourly_share: f64,
    /// Largest share of a day's energy that can be curtailed over that day.
    pub max_daily_share: f64,
    /// Discomfort cost of curtailment, NOK/kWh. Not a monetary transfer.
    pub discomfort_cost: f64,
}

impl FlexibilityParams {
    pub fn new(max_hourly_share: f64, max_daily_share: f64, discomfort_cost: f64) -> Result<Self> {
        let p = Self {
            max_hourly_share,
            max_daily_share,
            discomfort_cost,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.max_hourly_share)
            && (0.0..=1.0).contains(&self.max_daily_share)
            && self.discomfort_cost >= 0.0
            && self.discomfort_cost.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "flexibility parameters out of range: {self:?}"
            )))
        }
    }
}

impl Default for FlexibilityParams {
    /// Hourly and daily curtailment shares of 25% and 2.5%, with a
    /// discomfort cost of 0.35 NOK/kWh: above the undifferentiated energy
    /// term (0.25) so that a flat tariff triggers no curtailment, and below
    /// every time-differentiated rate so all studied designs activate.
    fn default() -> Self {
        Self {
            max_hourly_share: 0.25,
            max_daily_share: 0.025,
            discomfort_cost: 0.35,
        }
    }
}

/// Cost split of a consumer bill (plus discomfort), all in NOK.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub electricity: f64,
    pub grid: f64,
    pub flexibility: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(electricity: f64, grid: f64, flexibility: f64) -> Self {
        Self {
            electricity,
            grid,
            flexibility,
            total: electricity + grid + flexibility,
        }
    }

    pub fn checked_total(&self) -> Result<f64> {
        let sum = self.electricity + self.grid + self.flexibility;
        if (self.total - sum).abs() <= 1e-9 * (1.0 + sum.abs()) {
            Ok(self.total)
        } else {
            Err(Error::Internal(format!(
                "cost breakdown total {} does not match component sum {}",
                self.total, sum
            )))
        }
    }

    pub fn add(&self, other: &CostBreakdown) -> CostBreakdown {
        CostBreakdown::new(
            self.electricity + other.electricity,
            self.grid + other.grid,
            self.flexibility + other.flexibility,
        )
    }
}

/// Outcome of one consumer's cost-minimizing demand response.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseResult {
    /// Post-response load, kWh/h.
    pub new_load: Vec<f64>,
    /// Curtailed energy per hour, kWh/h.
    pub reduction: Vec<f64>,
    pub costs: CostBreakdown,
    /// Chosen capacity subscription in kW, for the subscribed-capacity tariff.
    pub subscription: Option<f64>,
    /// Post-response monthly peak demand in kW, for the demand-charge tariff.
    pub monthly_peaks: Option<Vec<f64>>,
}

impl ResponseResult {
    /// Verifies the energy balance and the flexibility envelope against the
    /// original load. Run on every solver output.
    pub fn validate(
        &self,
        load: &LoadSeries,
        flex: &FlexibilityParams,
        index: &TimeIndex,
    ) -> Result<()> {
        let n = load.len();
        if self.new_load.len() != n || self.reduction.len() != n {
            return Err(Error::Internal(format!(
                "response length mismatch: load {n}, new {}, reduction {}",
                self.new_load.len(),
                self.reduction.len()
            )));
        }
        for t in 0..n {
            let l = load.values()[t];
            let q = self.reduction[t];
            if (self.new_load[t] - (l - q)).abs() > FEASIBILITY_TOL_KWH {
                return Err(Error::Internal(format!(
                    "energy balance violated at hour {t}: {} != {} - {}",
                    self.new_load[t], l, q
                )));
            }
            if q < -FEASIBILITY_TOL_KWH || q > flex.max_hourly_share * l + FEASIBILITY_TOL_KWH {
                return Err(Error::Internal(format!(
                    "hourly curtailment bound violated at hour {t}: q={q}, load={l}"
                )));
            }
        }
        for d in 0..index.day_count() {
            let cap = flex.max_daily_share * load.daily_energy(index, d)?;
            let used: f64 = index.hours_of_day(d).map(|t| self.reduction[t]).sum();
            if used > cap + FEASIBILITY_TOL_KWH {
                return Err(Error::Internal(format!(
                    "daily curtailment budget violated on day {d}: used {used}, cap {cap}"
                )));
            }
        }
        self.costs.checked_total()?;
        Ok(())
    }

    /// A response that changes nothing: zero curtailment, given costs.
    pub fn unchanged(load: &LoadSeries, costs: CostBreakdown) -> Self {
        Self {
            new_load: load.values().to_vec(),
            reduction: vec![0.0; load.len()],
            costs,
            subscription: None,
            monthly_peaks: None,
        }
    }
}
