//! Simulation of consumer demand response under grid tariff designs and
//! electricity spot prices, focused on aggregate peak-load reduction.
//!
//! Consumers hold a generic curtailment flexibility (an hourly power share
//! and a daily energy share, priced at a discomfort cost) and minimize their
//! own bill as a linear program. The crate compares four grid tariff
//! designs — static and dynamic time-of-use, demand charges and subscribed
//! capacity — with and without an overlaid spot price, against two
//! benchmarks: the spot price alone and a coordinated system-optimal
//! response that minimizes the aggregate peak directly.
//!
//! Highlights:
//! * [`lp`] — a dependency-free bounded-variable simplex with a
//!   lexicographic second stage used for equal-share tie-breaking.
//! * [`tariff`] — tariff evaluation, marginal price signals, peak-day
//!   selection and revenue-neutral calibration.
//! * [`response`] — per-consumer problem assembly and solving, including
//!   the two-stage capacity-subscription procedure.
//! * [`cases`] — the case runner and the coordinated benchmark.
//! * [`data`] — CSV ingestion, a seeded synthetic fleet generator and
//!   result/plot-data emission.
//!
//! The `examples/` directory shows one runnable program per capability;
//! the `gridflex` binary wires them into reproducible batch runs.

pub mod cases;
pub mod cli;
pub mod config;
pub mod data;
mod error;
pub mod lp;
pub mod model;
pub mod response;
pub mod tariff;
pub mod time;

pub use error::{Error, Result};
pub use model::{
    CostBreakdown, FlexibilityParams, LoadSeries, ResponseResult, SpotPriceSeries,
    FEASIBILITY_TOL_KWH,
};
pub use time::TimeIndex;
