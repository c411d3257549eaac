//! Reproducible synthetic consumer fleets and spot prices.
//!
//! The random source is ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//! the configured 64-bit seed; consumer `i` draws from stream `i + 1` and
//! the spot price from stream 0, so output is independent of evaluation
//! order and identical across platforms. Profiles are sums of smooth
//! bumps and a seasonal cosine rather than fitted models; the numbers are
//! synthetic and not calibrated to any metered dataset.

use chrono::Datelike;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LoadSeries, SpotPriceSeries};
use crate::time::TimeIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumerClass {
    Household,
    Commercial,
}

impl ConsumerClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConsumerClass::Household => "household",
            ConsumerClass::Commercial => "commercial",
        }
    }
}

/// Knobs of the synthetic fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFleetConfig {
    pub consumer_count: usize,
    /// Share of consumers that are households (the rest are commercial).
    pub household_fraction: f64,
    pub seed: u64,
    /// Relative winter amplification of demand (0 disables seasonality).
    pub seasonal_amplitude: f64,
    /// Mean scale of a household profile, kWh/h.
    pub household_base_kw: f64,
    /// Mean scale of a commercial profile, kWh/h.
    pub commercial_base_kw: f64,
    /// Multiplicative load noise level (standard deviation).
    pub noise_level: f64,
    /// How strongly the spot price follows the normalized aggregate load,
    /// in [-1, 1]; 0 decouples them.
    pub price_load_correlation: f64,
}

impl Default for SyntheticFleetConfig {
    fn default() -> Self {
        Self {
            consumer_count: 50,
            household_fraction: 0.85,
            seed: 42,
            seasonal_amplitude: 0.35,
            household_base_kw: 1.2,
            commercial_base_kw: 6.0,
            noise_level: 0.05,
            price_load_correlation: 0.8,
        }
    }
}

impl SyntheticFleetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.consumer_count == 0 {
            return Err(Error::Config("consumer_count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.household_fraction) {
            return Err(Error::Config(format!(
                "household_fraction {} must be in [0, 1]",
                self.household_fraction
            )));
        }
        if self.noise_level < 0.0 || self.seasonal_amplitude < 0.0 {
            return Err(Error::Config(
                "noise_level and seasonal_amplitude must be non-negative".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.price_load_correlation) {
            return Err(Error::Config(format!(
                "price_load_correlation {} must be in [-1, 1]",
                self.price_load_correlation
            )));
        }
        if self.household_base_kw < 0.0 || self.commercial_base_kw < 0.0 {
            return Err(Error::Config("base loads must be non-negative".into()));
        }
        Ok(())
    }

    pub fn household_count(&self) -> usize {
        ((self.consumer_count as f64) * self.household_fraction).round() as usize
    }

    pub fn class_of(&self, consumer: usize) -> ConsumerClass {
        if consumer < self.household_count() {
            ConsumerClass::Household
        } else {
            ConsumerClass::Commercial
        }
    }

    pub fn consumer_id(&self, consumer: usize) -> String {
        match self.class_of(consumer) {
            ConsumerClass::Household => format!("H{:04}", consumer + 1),
            ConsumerClass::Commercial => {
                format!("C{:04}", consumer + 1 - self.household_count())
            }
        }
    }
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    let d = hour - center;
    (-d * d / (2.0 * width * width)).exp()
}

/// Winter-peaking seasonal factor; day-of-year 15 (mid January) is the top.
fn seasonal(index: &TimeIndex, day: usize, amplitude: f64) -> f64 {
    let doy = index.date_of_day(day).ordinal() as f64;
    1.0 + amplitude * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.25).cos()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = rng.gen::<f64>().max(1e-12);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn household_shape(hour: usize) -> f64 {
    let h = hour as f64;
    0.35 + 0.55 * bump(h, 7.5, 1.6) + 0.85 * bump(h, 18.5, 2.4)
}

fn commercial_shape(hour: usize, weekend: bool) -> f64 {
    let h = hour as f64;
    let activity = if weekend { 0.25 } else { 1.0 };
    0.30 + 1.1 * activity * bump(h, 13.0, 3.6)
}

/// Generates the fleet and a spot price series over the index horizon.
/// Output is deterministic in the seed and loads are always non-negative.
pub fn generate_fleet(
    config: &SyntheticFleetConfig,
    index: &TimeIndex,
) -> Result<(Vec<LoadSeries>, SpotPriceSeries)> {
    config.validate()?;
    let hours = index.hour_count();
    let mut fleet = Vec::with_capacity(config.consumer_count);
    let mut aggregate = vec![0.0; hours];

    for i in 0..config.consumer_count {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64 + 1);
        let class = config.class_of(i);
        let scale_jitter = (0.40 * standard_normal(&mut rng)).exp();
        let phase_jitter: f64 = rng.gen_range(-1.2..1.2);
        let base = match class {
            ConsumerClass::Household => config.household_base_kw,
            ConsumerClass::Commercial => config.commercial_base_kw,
        };
        let mut values = Vec::with_capacity(hours);
        for t in 0..hours {
            let day = index.day_of_hour(t);
            let hod = index.hour_of_day(t);
            let shape = match class {
                ConsumerClass::Household => {
                    household_shape(((hod as f64 + phase_jitter).rem_euclid(24.0)) as usize % 24)
                }
                ConsumerClass::Commercial => {
                    commercial_shape(hod, index.is_weekend(day) || index.is_holiday(day))
                }
            };
            // Households feel the winter harder than commercial consumers.
            let season = match class {
                ConsumerClass::Household => seasonal(index, day, config.seasonal_amplitude),
                ConsumerClass::Commercial => seasonal(index, day, 0.5 * config.seasonal_amplitude),
            };
            let noise = 1.0 + config.noise_level * standard_normal(&mut rng);
            let v = (base * scale_jitter * shape * season * noise).max(0.0);
            values.push(v);
        }
        for (a, v) in aggregate.iter_mut().zip(&values) {
            *a += v;
        }
        fleet.push(LoadSeries::new(config.consumer_id(i), values)?);
    }

    // Spot price: winter-peaking base with morning/evening structure, plus
    // the correlation term on the standardized aggregate, plus noise.
    let mean = aggregate.iter().sum::<f64>() / hours as f64;
    let var = aggregate.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / hours as f64;
    let std = var.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let mut prices = Vec::with_capacity(hours);
    for t in 0..hours {
        let day = index.day_of_hour(t);
        let hod = index.hour_of_day(t) as f64;
        let base = 0.30
            + 0.22 * (seasonal(index, day, 1.0) - 1.0)
            + 0.10 * bump(hod, 9.0, 2.5)
            + 0.12 * bump(hod, 18.0, 2.5);
        let coupling = if config.price_load_correlation != 0.0 && std > 0.0 {
            config.price_load_correlation * 0.30 * (aggregate[t] - mean) / std
        } else {
            0.0
        };
        let noise = config.noise_level * 0.8 * standard_normal(&mut rng);
        prices.push(base + coupling + noise);
    }
    Ok((fleet, SpotPriceSeries::new(prices)?))
}
