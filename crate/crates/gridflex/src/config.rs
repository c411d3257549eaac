//! Run configuration: one TOML file describing data sources, tariff
//! parameters, flexibility, cases and output controls. Command-line flags
//! override file values, which override the built-in defaults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::cases::CaseKind;
use crate::data::SyntheticFleetConfig;
use crate::error::{Error, Result};
use crate::model::FlexibilityParams;
use crate::tariff::{HourWindow, TariffSpec};

/// The four studied designs plus the flat reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TariffDesign {
    Flat,
    StaticTou,
    DynamicTou,
    DemandCharge,
    SubscribedCapacity,
}

impl TariffDesign {
    pub const STUDIED: [TariffDesign; 4] = [
        TariffDesign::StaticTou,
        TariffDesign::DynamicTou,
        TariffDesign::DemandCharge,
        TariffDesign::SubscribedCapacity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TariffDesign::Flat => "flat",
            TariffDesign::StaticTou => "static_tou",
            TariffDesign::DynamicTou => "dynamic_tou",
            TariffDesign::DemandCharge => "demand_charge",
            TariffDesign::SubscribedCapacity => "subscribed_capacity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "flat" => Ok(TariffDesign::Flat),
            "static_tou" => Ok(TariffDesign::StaticTou),
            "dynamic_tou" => Ok(TariffDesign::DynamicTou),
            "demand_charge" => Ok(TariffDesign::DemandCharge),
            "subscribed_capacity" => Ok(TariffDesign::SubscribedCapacity),
            other => Err(Error::Config(format!(
                "unknown tariff design '{other}' (expected flat, static_tou, dynamic_tou, \
                 demand_charge or subscribed_capacity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FlatParams {
    pub energy_rate: f64,
}

impl Default for FlatParams {
    fn default() -> Self {
        Self { energy_rate: 0.25 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StaticTouParams {
    pub energy_rate: f64,
    pub peak_rate: f64,
    pub peak_start: u32,
    pub peak_end: u32,
    pub winter_months: Vec<u32>,
    pub weekends_and_holidays: bool,
}

impl Default for StaticTouParams {
    fn default() -> Self {
        Self {
            energy_rate: 0.25,
            peak_rate: 1.2,
            peak_start: 6,
            peak_end: 22,
            winter_months: vec![11, 12, 1, 2, 3],
            weekends_and_holidays: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicTouParams {
    pub energy_rate: f64,
    pub event_rate: f64,
    pub peak_start: u32,
    pub peak_end: u32,
}

impl Default for DynamicTouParams {
    fn default() -> Self {
        Self {
            energy_rate: 0.25,
            event_rate: 4.5,
            peak_start: 6,
            peak_end: 22,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DemandChargeParams {
    pub energy_rate: f64,
    pub peak_price: f64,
}

impl Default for DemandChargeParams {
    fn default() -> Self {
        Self {
            energy_rate: 0.25,
            peak_price: 75.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SubscribedCapacityParams {
    pub energy_rate: f64,
    pub excess_rate: f64,
    pub capacity_price: f64,
}

impl Default for SubscribedCapacityParams {
    fn default() -> Self {
        Self {
            energy_rate: 0.25,
            excess_rate: 1.65,
            capacity_price: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TariffTable {
    pub flat: FlatParams,
    pub static_tou: StaticTouParams,
    pub dynamic_tou: DynamicTouParams,
    pub demand_charge: DemandChargeParams,
    pub subscribed_capacity: SubscribedCapacityParams,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub days: usize,
    pub start_date: NaiveDate,
    #[serde(flatten)]
    pub fleet: SyntheticFleetConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            days: 365,
            start_date: NaiveDate::from_ymd_opt(2020, 11, 1).unwrap(),
            fleet: SyntheticFleetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Metered load CSV; when absent the synthetic generator is used.
    pub load_csv: Option<PathBuf>,
    /// Spot price CSV; required with `load_csv` when a case needs spot.
    pub spot_csv: Option<PathBuf>,
    pub generate: GeneratorConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub enabled: bool,
    /// Flat reference rate the designs are calibrated against, NOK/kWh.
    pub reference_energy_rate: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            reference_energy_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SpCaseConfig {
    /// Keep the flat energy term in the spot-only case (cost recovery);
    /// disable to expose consumers to the raw spot price alone.
    pub include_energy_term: bool,
}

impl Default for SpCaseConfig {
    fn default() -> Self {
        Self {
            include_energy_term: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; also drives the synthetic generator.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 picks the machine default. Results do not depend
    /// on this value.
    pub jobs: usize,
    pub cases: Vec<String>,
    /// Designs the grid-tariff cases iterate over.
    pub designs: Vec<String>,
    /// Number of event days for the dynamic time-of-use tariff (capped at
    /// the horizon length).
    pub peak_day_count: usize,
    pub holidays: Vec<NaiveDate>,
    pub data: DataConfig,
    pub flexibility: FlexibilityParams,
    pub tariffs: TariffTable,
    pub calibration: CalibrationConfig,
    pub sp_case: SpCaseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: PathBuf::from("out"),
            jobs: 0,
            cases: vec!["sor".into(), "gt".into(), "gt_sp".into(), "sp".into()],
            designs: TariffDesign::STUDIED
                .iter()
                .map(|d| d.as_str().into())
                .collect(),
            peak_day_count: 20,
            holidays: Vec::new(),
            data: DataConfig::default(),
            flexibility: FlexibilityParams::default(),
            tariffs: TariffTable::default(),
            calibration: CalibrationConfig::default(),
            sp_case: SpCaseConfig::default(),
        }
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub cases: Vec<String>,
    pub tariffs: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out_dir {
            self.out_dir = out.clone();
        }
        if let Some(jobs) = overrides.jobs {
            self.jobs = jobs;
        }
        if !overrides.cases.is_empty() {
            self.cases = overrides.cases.clone();
        }
        if !overrides.tariffs.is_empty() {
            self.designs = overrides.tariffs.clone();
        }
    }

    pub fn case_kinds(&self) -> Result<Vec<CaseKind>> {
        if self.cases.is_empty() {
            return Err(Error::Config("case list must not be empty".into()));
        }
        self.cases.iter().map(|s| CaseKind::parse(s)).collect()
    }

    pub fn design_list(&self) -> Result<Vec<TariffDesign>> {
        if self.designs.is_empty() {
            return Err(Error::Config("design list must not be empty".into()));
        }
        self.designs
            .iter()
            .map(|s| TariffDesign::parse(s))
            .collect()
    }

    pub fn holiday_set(&self) -> BTreeSet<NaiveDate> {
        self.holidays.iter().copied().collect()
    }

    /// Builds the tariff for a design; dynamic time-of-use event days are
    /// injected by the caller once the aggregate baseline is known.
    pub fn tariff_spec(&self, design: TariffDesign) -> TariffSpec {
        match design {
            TariffDesign::Flat => TariffSpec::FlatEnergy {
                energy_rate: self.tariffs.flat.energy_rate,
            },
            TariffDesign::StaticTou => {
                let p = &self.tariffs.static_tou;
                TariffSpec::StaticTou {
                    energy_rate: p.energy_rate,
                    peak_rate: p.peak_rate,
                    window: HourWindow::new(p.peak_start, p.peak_end),
                    winter_months: p.winter_months.iter().copied().collect(),
                    weekends_and_holidays: p.weekends_and_holidays,
                }
            }
            TariffDesign::DynamicTou => {
                let p = &self.tariffs.dynamic_tou;
                TariffSpec::DynamicTou {
                    energy_rate: p.energy_rate,
                    event_rate: p.event_rate,
                    window: HourWindow::new(p.peak_start, p.peak_end),
                    active_days: BTreeSet::new(),
                }
            }
            TariffDesign::DemandCharge => {
                let p = &self.tariffs.demand_charge;
                TariffSpec::DemandCharge {
                    energy_rate: p.energy_rate,
                    peak_price: p.peak_price,
                }
            }
            TariffDesign::SubscribedCapacity => {
                let p = &self.tariffs.subscribed_capacity;
                TariffSpec::SubscribedCapacity {
                    energy_rate: p.energy_rate,
                    excess_rate: p.excess_rate,
                    capacity_price: p.capacity_price,
                }
            }
        }
    }

    /// Writes the updated parameter back into the table (after calibration).
    pub fn set_design_parameter(&mut self, design: TariffDesign, spec: &TariffSpec) {
        match (design, spec) {
            (TariffDesign::StaticTou, TariffSpec::StaticTou { peak_rate, .. }) => {
                self.tariffs.static_tou.peak_rate = *peak_rate;
            }
            (TariffDesign::DynamicTou, TariffSpec::DynamicTou { event_rate, .. }) => {
                self.tariffs.dynamic_tou.event_rate = *event_rate;
            }
            (TariffDesign::DemandCharge, TariffSpec::DemandCharge { peak_price, .. }) => {
                self.tariffs.demand_charge.peak_price = *peak_price;
            }
            (
                TariffDesign::SubscribedCapacity,
                TariffSpec::SubscribedCapacity { capacity_price, .. },
            ) => {
                self.tariffs.subscribed_capacity.capacity_price = *capacity_price;
            }
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.case_kinds()?;
        self.design_list()?;
        self.flexibility.validate()?;
        for design in [
            TariffDesign::Flat,
            TariffDesign::StaticTou,
            TariffDesign::DynamicTou,
            TariffDesign::DemandCharge,
            TariffDesign::SubscribedCapacity,
        ] {
            self.tariff_spec(design).validate()?;
        }
        if self.peak_day_count == 0 {
            return Err(Error::Config("peak_day_count must be at least 1".into()));
        }
        for path in [&self.data.load_csv, &self.data.spot_csv]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "configured data file {} does not exist",
                    path.display()
                )));
            }
        }
        if self.data.load_csv.is_none() {
            self.data.generate.fleet.validate()?;
            if self.data.generate.days == 0 {
                return Err(Error::Config(
                    "generator horizon must be at least 1 day".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}
