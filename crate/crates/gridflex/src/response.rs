//! Per-consumer cost minimization: assembling the curtailment LP for a
//! tariff (with or without spot prices), the two-stage subscribed-capacity
//! procedure, and an independent greedy oracle for volumetric designs.
//!
//! Equal treatment of equally priced hours is enforced by a lexicographic
//! second stage: per day, an auxiliary variable bounds every hour's share
//! of its curtailment cap, and the stage minimizes the sum of those bounds
//! over the cost-optimal face. Hours with zero load are excluded and their
//! curtailment is pinned to zero.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpSolution, RowOp};
use crate::model::{CostBreakdown, FlexibilityParams, LoadSeries, ResponseResult, SpotPriceSeries};
use crate::tariff::{self, TariffSpec};
use crate::time::TimeIndex;

/// One consumer's optimization instance.
#[derive(Debug, Clone)]
pub struct ConsumerProblem<'a> {
    pub load: &'a LoadSeries,
    pub flexibility: FlexibilityParams,
    pub tariff: &'a TariffSpec,
    pub spot: Option<&'a SpotPriceSeries>,
    pub index: &'a TimeIndex,
    /// Capacity subscription fixed by stage 1; only meaningful (and then
    /// required) when building a subscribed-capacity program.
    pub fixed_subscription: Option<f64>,
}

impl ConsumerProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.load.len() != self.index.hour_count() {
            return Err(Error::InvalidInput(format!(
                "load series has {} hours, index has {}",
                self.load.len(),
                self.index.hour_count()
            )));
        }
        if let Some(spot) = self.spot {
            if spot.len() != self.index.hour_count() {
                return Err(Error::InvalidInput(format!(
                    "spot series has {} hours, index has {}",
                    spot.len(),
                    self.index.hour_count()
                )));
            }
        }
        if self.fixed_subscription.is_some()
            && !matches!(self.tariff, TariffSpec::SubscribedCapacity { .. })
        {
            return Err(Error::InvalidInput(
                "fixed_subscription is only meaningful for the subscribed-capacity tariff".into(),
            ));
        }
        self.flexibility.validate()?;
        self.tariff.validate()
    }

    fn spot_at(&self, t: usize) -> f64 {
        self.spot.map_or(0.0, |s| s.values()[t])
    }
}

/// Where each variable and constraint family sits inside a built program.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    /// Global hour range the program covers.
    pub hours: std::ops::Range<usize>,
    /// Curtailment variables, one per hour of the range.
    pub q: std::ops::Range<usize>,
    /// Consumption below the subscription (subscribed capacity only).
    pub below_subscription: Option<std::ops::Range<usize>>,
    /// Consumption above the subscription (subscribed capacity only).
    pub above_subscription: Option<std::ops::Range<usize>>,
    /// Monthly peak variables (demand charge only).
    pub monthly_peak: Option<std::ops::Range<usize>>,
    pub daily_budget_rows: std::ops::Range<usize>,
    pub balance_rows: Option<std::ops::Range<usize>>,
    pub peak_rows: Option<std::ops::Range<usize>>,
}

/// Builds the full-horizon program for a consumer. The curtailed load is
/// eliminated by substitution (`new load = load - curtailment`), so the
/// program has one curtailment variable per hour plus the design-specific
/// extras, one daily budget row per day, and for subscribed capacity /
/// demand charges the split or peak machinery.
pub fn build_problem(problem: &ConsumerProblem) -> Result<(LinearProgram, VariableLayout)> {
    problem.validate()?;
    let horizon = 0..problem.index.hour_count();
    let (mut lp, layout) = build_block(problem, horizon)?;
    if let Some(x) = problem.fixed_subscription {
        lp.add_objective_offset(x * problem.tariff.prorated_capacity_price(problem.index));
    }
    Ok((lp, layout))
}

/// Builds the program restricted to a contiguous block of whole days
/// (whole months for the demand charge). The capacity fee is not included;
/// callers add it once per horizon.
fn build_block(
    problem: &ConsumerProblem,
    hours: std::ops::Range<usize>,
) -> Result<(LinearProgram, VariableLayout)> {
    let index = problem.index;
    let load = problem.load.values();
    let flex = &problem.flexibility;
    let tariff = problem.tariff;

    debug_assert_eq!(hours.start % index.hours_per_day(), 0);
    debug_assert_eq!(hours.end % index.hours_per_day(), 0);
    let days = hours.start / index.hours_per_day()..hours.end / index.hours_per_day();
    let block_len = hours.len();

    let mut lp = LinearProgram::new();
    let mut offset = 0.0;

    // Curtailment variables. The objective carries the discomfort cost
    // minus whatever one curtailed kWh saves volumetrically.
    let q_start = 0;
    for t in hours.clone() {
        let cap = flex.max_hourly_share * load[t];
        let saving = match tariff {
            TariffSpec::FlatEnergy { .. }
            | TariffSpec::StaticTou { .. }
            | TariffSpec::DynamicTou { .. } => tariff.hourly_rate(index, t).unwrap(),
            TariffSpec::DemandCharge { energy_rate, .. } => *energy_rate,
            TariffSpec::SubscribedCapacity { .. } => 0.0,
        } + problem.spot_at(t);
        lp.add_var(flex.discomfort_cost - saving, 0.0, cap);
        if !matches!(tariff, TariffSpec::SubscribedCapacity { .. }) {
            offset += saving * load[t];
        }
    }
    let q = q_start..q_start + block_len;

    let (below, above) = if let TariffSpec::SubscribedCapacity {
        energy_rate,
        excess_rate,
        ..
    } = tariff
    {
        let subscription = problem.fixed_subscription.ok_or_else(|| {
            Error::InvalidInput(
                "building a subscribed-capacity program requires fixed_subscription".into(),
            )
        })?;
        let below_start = lp.num_vars();
        for _t in hours.clone() {
            lp.add_var(*energy_rate, 0.0, subscription);
        }
        let above_start = lp.num_vars();
        for _t in hours.clone() {
            lp.add_var(*excess_rate, 0.0, f64::INFINITY);
        }
        // Spot applies to the whole consumed volume, handled on q above.
        if problem.spot.is_some() {
            for t in hours.clone() {
                offset += problem.spot_at(t) * load[t];
            }
        }
        (
            Some(below_start..below_start + block_len),
            Some(above_start..above_start + block_len),
        )
    } else {
        (None, None)
    };

    let monthly_peak = if let TariffSpec::DemandCharge { peak_price, .. } = tariff {
        let months: Vec<usize> = block_months(index, &hours);
        let peak_start = lp.num_vars();
        for &m in &months {
            // The monthly peak can never fall below the largest hourly
            // load less its curtailment cap; the tightened bound is safe
            // and spares the solver a long feasibility phase.
            let floor = index
                .hours_of_month(m)
                .filter(|t| hours.contains(t))
                .map(|t| (1.0 - flex.max_hourly_share) * load[t])
                .fold(0.0f64, f64::max);
            lp.add_var(*peak_price, floor, f64::INFINITY);
        }
        Some(peak_start..peak_start + months.len())
    } else {
        None
    };

    // One budget row per day: total curtailment at most the daily share.
    let daily_start = lp.num_rows();
    for d in days.clone() {
        let day_hours = index.hours_of_day(d);
        let budget: f64 = flex.max_daily_share * day_hours.clone().map(|t| load[t]).sum::<f64>();
        let coeffs: Vec<(usize, f64)> = day_hours
            .map(|t| (q.start + (t - hours.start), 1.0))
            .collect();
        lp.add_row(coeffs, RowOp::Le, budget);
    }
    let daily_budget_rows = daily_start..lp.num_rows();

    let balance_rows = if let (Some(below), Some(above)) = (&below, &above) {
        let start = lp.num_rows();
        for (k, t) in hours.clone().enumerate() {
            lp.add_row(
                vec![
                    (q.start + k, 1.0),
                    (below.start + k, 1.0),
                    (above.start + k, 1.0),
                ],
                RowOp::Eq,
                load[t],
            );
        }
        Some(start..lp.num_rows())
    } else {
        None
    };

    let peak_rows = if let Some(peaks) = &monthly_peak {
        let months = block_months(index, &hours);
        let start = lp.num_rows();
        for (mi, &m) in months.iter().enumerate() {
            for t in index.hours_of_month(m) {
                if !hours.contains(&t) {
                    continue;
                }
                let k = t - hours.start;
                lp.add_row(
                    vec![(q.start + k, -1.0), (peaks.start + mi, -1.0)],
                    RowOp::Le,
                    -load[t],
                );
            }
        }
        Some(start..lp.num_rows())
    } else {
        None
    };

    lp.add_objective_offset(offset);
    Ok((
        lp,
        VariableLayout {
            hours,
            q,
            below_subscription: below,
            above_subscription: above,
            monthly_peak,
            daily_budget_rows,
            balance_rows,
            peak_rows,
        },
    ))
}

fn block_months(index: &TimeIndex, hours: &std::ops::Range<usize>) -> Vec<usize> {
    let mut months = Vec::new();
    for m in 0..index.month_count() {
        let span = index.hours_of_month(m);
        if span.start < hours.end && span.end > hours.start {
            months.push(m);
        }
    }
    months
}

/// Adds the equal-share tie-break machinery to a built program: one
/// headroom variable per day, with `q_t + cap_t * r_d <= cap_t` for every
/// positive-load hour. Maximizing total headroom is the same as minimizing
/// the per-day maximum curtailment share; the returned vector is the
/// secondary objective that does so.
fn augment_tie_break(
    lp: &mut LinearProgram,
    layout: &VariableLayout,
    problem: &ConsumerProblem,
) -> Vec<f64> {
    let index = problem.index;
    let load = problem.load.values();
    let q_cap = problem.flexibility.max_hourly_share;
    let mut secondary = vec![0.0; lp.num_vars()];
    if q_cap == 0.0 {
        return secondary;
    }
    let days = layout.hours.start / index.hours_per_day()..layout.hours.end / index.hours_per_day();
    for d in days {
        let positive: Vec<usize> = index.hours_of_day(d).filter(|&t| load[t] > 0.0).collect();
        if positive.is_empty() {
            continue;
        }
        let r = lp.add_var(0.0, 0.0, 1.0);
        secondary.push(-1.0);
        for t in positive {
            let cap = q_cap * load[t];
            let k = layout.q.start + (t - layout.hours.start);
            lp.add_row(vec![(k, 1.0), (r, cap)], RowOp::Le, cap);
        }
    }
    secondary
}

/// Stage 1 of the subscribed-capacity tariff: the cost-minimal subscription
/// for the inflexible load, read off the load-duration curve.
///
/// The yearly capacity price, prorated to the horizon and divided by the
/// excess-over-energy rate difference, gives a break-even exceedance hour
/// count; the optimal subscription is the smallest load value exceeded in
/// at most that many hours. Verified against a golden-section search and a
/// variable-subscription program in the tests.
pub fn optimal_subscription(
    load: &LoadSeries,
    tariff: &TariffSpec,
    index: &TimeIndex,
) -> Result<f64> {
    let TariffSpec::SubscribedCapacity {
        energy_rate,
        excess_rate,
        ..
    } = tariff
    else {
        return Err(Error::Config(format!(
            "optimal_subscription applies to the subscribed-capacity tariff, got {}",
            tariff.name()
        )));
    };
    if excess_rate <= energy_rate {
        return Err(Error::Config(format!(
            "excess rate {excess_rate} must exceed energy rate {energy_rate}"
        )));
    }
    if load.len() != index.hour_count() {
        return Err(Error::InvalidInput(format!(
            "load series has {} hours, index has {}",
            load.len(),
            index.hour_count()
        )));
    }
    let break_even_hours = tariff.prorated_capacity_price(index) / (excess_rate - energy_rate);
    let mut sorted = load.values().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let count_above = |x: f64| -> usize { sorted.len() - sorted.partition_point(|&v| v <= x) };
    if count_above(0.0) as f64 <= break_even_hours {
        return Ok(0.0);
    }
    let mut previous = f64::NEG_INFINITY;
    for &v in &sorted {
        if v == previous {
            continue;
        }
        previous = v;
        if (count_above(v) as f64) <= break_even_hours {
            return Ok(v);
        }
    }
    Ok(sorted[sorted.len() - 1])
}

/// Exceedance hour count of `level` in the load series (hours strictly
/// above). Exposed for diagnostics around the subscription choice.
pub fn exceedance_hours(load: &LoadSeries, level: f64) -> usize {
    load.values().iter().filter(|&&v| v > level).count()
}

fn primary_value(lp: &LinearProgram, primal: &[f64]) -> f64 {
    lp.objective()
        .iter()
        .zip(primal)
        .map(|(c, x)| c * x)
        .sum::<f64>()
        + lp.objective_offset()
}

fn solver_error(problem: &ConsumerProblem, e: crate::lp::LpError) -> Error {
    Error::Solver {
        consumer: problem.load.consumer_id().to_string(),
        source: e,
    }
}

fn expect_optimal(problem: &ConsumerProblem, sol: &LpSolution, what: &str) -> Result<()> {
    if sol.is_optimal() {
        Ok(())
    } else {
        Err(Error::Internal(format!(
            "{what} for consumer '{}' ended {:?}; the curtailment program is always feasible \
             and bounded",
            problem.load.consumer_id(),
            sol.status
        )))
    }
}

/// Solves one block (whole days) lexicographically and scatters the
/// curtailment into `reduction`. Returns the block's primary cost.
fn solve_block_lexicographic(
    problem: &ConsumerProblem,
    hours: std::ops::Range<usize>,
    reduction: &mut [f64],
) -> Result<f64> {
    let (mut lp, layout) = build_block(problem, hours.clone())?;
    let secondary = augment_tie_break(&mut lp, &layout, problem);
    let sol = lp
        .solve_lexicographic(&secondary, Some(0.0))
        .map_err(|e| solver_error(problem, e))?;
    expect_optimal(problem, &sol, "curtailment block")?;
    scatter_reduction(problem, &layout, &sol.primal, reduction);
    Ok(primary_value(&lp, &sol.primal))
}

fn scatter_reduction(
    problem: &ConsumerProblem,
    layout: &VariableLayout,
    primal: &[f64],
    reduction: &mut [f64],
) {
    let load = problem.load.values();
    let q_cap = problem.flexibility.max_hourly_share;
    for (k, t) in layout.hours.clone().enumerate() {
        let cap = q_cap * load[t];
        reduction[t] = primal[layout.q.start + k].clamp(0.0, cap);
    }
}

/// Cost-minimizing demand response of a single consumer under a tariff,
/// optionally exposed to spot prices.
///
/// Volumetric designs decompose into independent daily programs; the demand
/// charge decomposes per month (with a one-dimensional search over the
/// monthly peak level); subscribed capacity fixes the stage-1 subscription
/// and decomposes per day. The result's costs are recomputed by direct
/// evaluation and must agree with the optimized objective.
pub fn solve_consumer(problem: &ConsumerProblem) -> Result<ResponseResult> {
    problem.validate()?;
    let index = problem.index;
    let mut reduction = vec![0.0; index.hour_count()];
    let mut lp_cost = 0.0;
    let mut subscription = None;

    match problem.tariff {
        TariffSpec::FlatEnergy { .. }
        | TariffSpec::StaticTou { .. }
        | TariffSpec::DynamicTou { .. } => {
            for d in 0..index.day_count() {
                lp_cost +=
                    solve_block_lexicographic(problem, index.hours_of_day(d), &mut reduction)?;
            }
        }
        TariffSpec::SubscribedCapacity { .. } => {
            // Stage 1 is a pure grid-subscription choice; spot prices do
            // not enter it.
            let x = match problem.fixed_subscription {
                Some(x) => x,
                None => optimal_subscription(problem.load, problem.tariff, index)?,
            };
            let staged = ConsumerProblem {
                fixed_subscription: Some(x),
                ..problem.clone()
            };
            for d in 0..index.day_count() {
                lp_cost +=
                    solve_block_lexicographic(&staged, index.hours_of_day(d), &mut reduction)?;
            }
            lp_cost += x * problem.tariff.prorated_capacity_price(index);
            subscription = Some(x);
        }
        TariffSpec::DemandCharge { .. } => {
            for m in 0..index.month_count() {
                lp_cost += solve_demand_charge_month(problem, m, &mut reduction)?;
            }
        }
    }

    finish(problem, reduction, lp_cost, subscription)
}

/// Reference path that solves the whole horizon as one program (the
/// monolithic build plus tie-break augmentation). Used to validate the
/// decomposed paths; quadratic in the horizon, so keep fixtures small.
pub fn solve_consumer_monolithic(problem: &ConsumerProblem) -> Result<ResponseResult> {
    problem.validate()?;
    let mut subscription = None;
    let staged = match problem.tariff {
        TariffSpec::SubscribedCapacity { .. } => {
            let x = match problem.fixed_subscription {
                Some(x) => x,
                None => optimal_subscription(problem.load, problem.tariff, problem.index)?,
            };
            subscription = Some(x);
            ConsumerProblem {
                fixed_subscription: Some(x),
                ..problem.clone()
            }
        }
        _ => problem.clone(),
    };
    let (mut lp, layout) = build_problem(&staged)?;
    let secondary = augment_tie_break(&mut lp, &layout, &staged);
    let sol = lp
        .solve_lexicographic(&secondary, Some(0.0))
        .map_err(|e| solver_error(problem, e))?;
    expect_optimal(problem, &sol, "monolithic program")?;
    let mut reduction = vec![0.0; problem.index.hour_count()];
    scatter_reduction(&staged, &layout, &sol.primal, &mut reduction);
    finish(
        problem,
        reduction,
        primary_value(&lp, &sol.primal),
        subscription,
    )
}

/// Demand-charge month: parametrize the monthly peak level, minimize the
/// convex total cost (peak charge plus per-day optimal volumetric and
/// discomfort terms) by golden-section search, then fix the peak and solve
/// each day lexicographically for the equal-share curtailment.
fn solve_demand_charge_month(
    problem: &ConsumerProblem,
    month: usize,
    reduction: &mut [f64],
) -> Result<f64> {
    let TariffSpec::DemandCharge { peak_price, .. } = problem.tariff else {
        unreachable!("caller dispatches on tariff kind");
    };
    let index = problem.index;
    let load = problem.load.values();
    let hours = index.hours_of_month(month);
    let days = index.days_of_month(month);
    let month_max = hours.clone().map(|t| load[t]).fold(0.0f64, f64::max);
    if month_max == 0.0 {
        return Ok(0.0);
    }

    let flex = &problem.flexibility;
    // Smallest peak reachable at all: hourly caps give a hard floor, the
    // daily budgets a second one found by bisection on the closed form.
    let cap_floor = hours
        .clone()
        .map(|t| (1.0 - flex.max_hourly_share) * load[t])
        .fold(0.0f64, f64::max);
    let energy_feasible = |p: f64| -> bool {
        days.clone().all(|d| {
            let day_hours = index.hours_of_day(d);
            let budget: f64 =
                flex.max_daily_share * day_hours.clone().map(|t| load[t]).sum::<f64>();
            let needed: f64 = day_hours.map(|t| (load[t] - p).max(0.0)).sum();
            needed <= budget + 1e-12 * (1.0 + budget)
        })
    };
    let p_min = if energy_feasible(cap_floor) {
        cap_floor
    } else {
        let (mut lo, mut hi) = (cap_floor, month_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if energy_feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let total_cost = |p: f64| -> Result<f64> {
        let mut cost = peak_price * p;
        for d in days.clone() {
            cost += demand_charge_day(problem, d, p, None)?;
        }
        Ok(cost)
    };

    // Golden-section over the convex piecewise-linear cost in the peak.
    let p_star = if month_max - p_min <= 1e-12 * (1.0 + month_max) {
        p_min
    } else {
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (p_min, month_max);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = total_cost(x1)?;
        let mut f2 = total_cost(x2)?;
        for _ in 0..90 {
            if b - a <= 1e-12 * (1.0 + month_max) {
                break;
            }
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = total_cost(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = total_cost(x2)?;
            }
        }
        0.5 * (a + b)
    };

    // The optimum can sit on a flat stretch of the cost curve (always when
    // the peak price is zero, and whenever clipping is cost-neutral). Solve
    // the days at the least restrictive peak attaining the optimal cost, so
    // the equal-share stage sees the whole cost-optimal face instead of an
    // arbitrarily forced clip profile.
    let f_star = total_cost(p_star)?;
    let flat_tol = 1e-9 * (1.0 + f_star.abs());
    let p_final = if total_cost(month_max)? <= f_star + flat_tol {
        month_max
    } else {
        let (mut lo, mut hi) = (p_star, month_max);
        for _ in 0..100 {
            if hi - lo <= 1e-12 * (1.0 + month_max) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if total_cost(mid)? <= f_star + flat_tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };

    let mut cost = 0.0;
    for d in days.clone() {
        cost += demand_charge_day(problem, d, p_final, Some(&mut *reduction))?;
    }
    let actual_peak = hours
        .clone()
        .map(|t| load[t] - reduction[t])
        .fold(0.0f64, f64::max);
    Ok(cost + peak_price * actual_peak)
}

/// One day of a demand-charge month at a fixed peak level. Hours that can
/// only increase cost (no forced clipping, non-negative curtailment
/// coefficient) are pinned to zero and left out of the program. When
/// `out` is given, the equal-share second stage runs and the curtailment
/// is written into it; otherwise only the optimal cost is computed.
fn demand_charge_day(
    problem: &ConsumerProblem,
    day: usize,
    peak_level: f64,
    mut out: Option<&mut [f64]>,
) -> Result<f64> {
    let TariffSpec::DemandCharge { energy_rate, .. } = problem.tariff else {
        unreachable!("caller dispatches on tariff kind");
    };
    let index = problem.index;
    let load = problem.load.values();
    let flex = &problem.flexibility;
    let day_hours = index.hours_of_day(day);

    let mut offset = 0.0;
    let mut included: Vec<(usize, f64)> = Vec::new(); // (hour, objective coeff)
    for t in day_hours.clone() {
        let coeff = flex.discomfort_cost - energy_rate - problem.spot_at(t);
        offset += (energy_rate + problem.spot_at(t)) * load[t];
        let forced = load[t] > peak_level;
        if load[t] > 0.0 && (forced || coeff < -1e-12) {
            included.push((t, coeff));
        } else if let Some(out) = out.as_deref_mut() {
            out[t] = 0.0;
        }
    }
    if included.is_empty() {
        return Ok(offset);
    }

    let mut lp = LinearProgram::new();
    for &(t, coeff) in &included {
        lp.add_var(coeff, 0.0, flex.max_hourly_share * load[t]);
    }
    let budget: f64 = flex.max_daily_share * day_hours.clone().map(|t| load[t]).sum::<f64>();
    lp.add_row(
        (0..included.len()).map(|k| (k, 1.0)).collect(),
        RowOp::Le,
        budget,
    );
    for (k, &(t, _)) in included.iter().enumerate() {
        if load[t] > peak_level {
            lp.add_row(vec![(k, 1.0)], RowOp::Ge, load[t] - peak_level);
        }
    }
    lp.add_objective_offset(offset);

    let sol = if out.is_some() {
        let mut secondary = vec![0.0; lp.num_vars()];
        let r = lp.add_var(0.0, 0.0, 1.0);
        secondary.push(-1.0);
        for (k, &(t, _)) in included.iter().enumerate() {
            let cap = flex.max_hourly_share * load[t];
            lp.add_row(vec![(k, 1.0), (r, cap)], RowOp::Le, cap);
        }
        lp.solve_lexicographic(&secondary, Some(0.0))
    } else {
        lp.solve()
    }
    .map_err(|e| solver_error(problem, e))?;
    expect_optimal(problem, &sol, "demand-charge day")?;

    if let Some(out) = out {
        for (k, &(t, _)) in included.iter().enumerate() {
            let cap = flex.max_hourly_share * load[t];
            out[t] = sol.primal[k].clamp(0.0, cap);
        }
    }
    Ok(primary_value(&lp, &sol.primal))
}

/// Direct cost evaluation plus the LP-versus-evaluation consistency check,
/// the feasibility validation, and the auxiliary outputs.
fn finish(
    problem: &ConsumerProblem,
    reduction: Vec<f64>,
    lp_cost: f64,
    subscription: Option<f64>,
) -> Result<ResponseResult> {
    let index = problem.index;
    let load = problem.load.values();
    let new_load: Vec<f64> = load
        .iter()
        .zip(&reduction)
        .map(|(l, q)| (l - q).max(0.0))
        .collect();

    let grid = tariff::grid_cost(problem.tariff, &new_load, index, subscription)?;
    let electricity = match problem.spot {
        Some(spot) => new_load.iter().zip(spot.values()).map(|(x, p)| x * p).sum(),
        None => 0.0,
    };
    let flexibility = problem.flexibility.discomfort_cost * reduction.iter().sum::<f64>();
    let costs = CostBreakdown::new(electricity, grid, flexibility);

    if (costs.total - lp_cost).abs() > 1e-7 * (1.0 + costs.total.abs()) {
        return Err(Error::Internal(format!(
            "consumer '{}': optimized cost {lp_cost} does not match direct evaluation {}",
            problem.load.consumer_id(),
            costs.total
        )));
    }

    let monthly_peaks = match problem.tariff {
        TariffSpec::DemandCharge { .. } => Some(
            (0..index.month_count())
                .map(|m| {
                    index
                        .hours_of_month(m)
                        .map(|t| new_load[t])
                        .fold(0.0f64, f64::max)
                })
                .collect(),
        ),
        _ => None,
    };

    let result = ResponseResult {
        new_load,
        reduction,
        costs,
        subscription,
        monthly_peaks,
    };
    result.validate(problem.load, &problem.flexibility, index)?;
    Ok(result)
}

/// Independent oracle for the volumetric designs: per day, hours sorted by
/// effective price (tariff rate plus spot), curtailed to the hourly cap in
/// that order while the price beats the discomfort cost and daily budget
/// remains; hours tied at the marginal price split the remaining budget in
/// proportion to their caps (equal shares). Provably optimal because the
/// volumetric problem is separable per day.
pub fn greedy_volumetric_oracle(problem: &ConsumerProblem) -> Result<ResponseResult> {
    problem.validate()?;
    if !problem.tariff.is_volumetric() {
        return Err(Error::InvalidInput(format!(
            "greedy oracle applies to volumetric tariffs, got {}",
            problem.tariff.name()
        )));
    }
    let index = problem.index;
    let load = problem.load.values();
    let flex = &problem.flexibility;
    let mut reduction = vec![0.0; index.hour_count()];
    let mut total_cost = 0.0;

    for d in 0..index.day_count() {
        let day_hours = index.hours_of_day(d);
        let mut budget: f64 =
            flex.max_daily_share * day_hours.clone().map(|t| load[t]).sum::<f64>();
        let mut priced: Vec<(f64, usize)> = day_hours
            .clone()
            .filter(|&t| load[t] > 0.0)
            .map(|t| {
                (
                    problem.tariff.hourly_rate(index, t).unwrap() + problem.spot_at(t),
                    t,
                )
            })
            .collect();
        priced.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

        let mut i = 0;
        while i < priced.len() && budget > 0.0 {
            let price = priced[i].0;
            if price - flex.discomfort_cost <= 0.0 {
                break;
            }
            let mut j = i;
            while j < priced.len() && priced[j].0 == price {
                j += 1;
            }
            let group = &priced[i..j];
            let cap_sum: f64 = group
                .iter()
                .map(|&(_, t)| flex.max_hourly_share * load[t])
                .sum();
            if cap_sum > 0.0 {
                let take = budget.min(cap_sum);
                let share = take / cap_sum;
                for &(_, t) in group {
                    reduction[t] = share * flex.max_hourly_share * load[t];
                }
                budget -= take;
            }
            i = j;
        }

        for t in day_hours {
            let rate = problem.tariff.hourly_rate(index, t).unwrap() + problem.spot_at(t);
            total_cost += rate * (load[t] - reduction[t]) + flex.discomfort_cost * reduction[t];
        }
    }

    let new_load: Vec<f64> = load.iter().zip(&reduction).map(|(l, q)| l - q).collect();
    let grid = tariff::grid_cost(problem.tariff, &new_load, index, None)?;
    let electricity = match problem.spot {
        Some(spot) => new_load.iter().zip(spot.values()).map(|(x, p)| x * p).sum(),
        None => 0.0,
    };
    let flexibility = flex.discomfort_cost * reduction.iter().sum::<f64>();
    let result = ResponseResult {
        new_load,
        reduction,
        costs: CostBreakdown::new(electricity, grid, flexibility),
        subscription: None,
        monthly_peaks: None,
    };
    result.validate(problem.load, flex, index)?;
    debug_assert!((result.costs.total - total_cost).abs() <= 1e-9 * (1.0 + total_cost.abs()));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tariff::{default_winter_months, HourWindow};

    fn flat(rate: f64) -> TariffSpec {
        TariffSpec::FlatEnergy { energy_rate: rate }
    }

    fn subscribed() -> TariffSpec {
        TariffSpec::SubscribedCapacity {
            energy_rate: 0.25,
            excess_rate: 1.65,
            capacity_price: 1000.0,
        }
    }

    fn problem<'a>(
        load: &'a LoadSeries,
        tariff: &'a TariffSpec,
        spot: Option<&'a SpotPriceSeries>,
        index: &'a TimeIndex,
        flex: FlexibilityParams,
    ) -> ConsumerProblem<'a> {
        ConsumerProblem {
            load,
            flexibility: flex,
            tariff,
            spot,
            index,
            fixed_subscription: None,
        }
    }

    #[test]
    fn flat_load_subscribes_at_the_plateau() {
        let idx = TimeIndex::uniform(2, 24).unwrap();
        let load = LoadSeries::new("c", vec![3.0; 48]).unwrap();
        // Any positive capacity price below the full horizon's rate gap.
        let x = optimal_subscription(&load, &subscribed(), &idx).unwrap();
        assert_eq!(x, 3.0);
    }

    #[test]
    fn free_subscription_covers_the_peak() {
        let idx = TimeIndex::uniform(1, 24).unwrap();
        let mut values = vec![1.0; 24];
        values[7] = 6.5;
        let load = LoadSeries::new("c", values).unwrap();
        let tariff = TariffSpec::SubscribedCapacity {
            energy_rate: 0.25,
            excess_rate: 1.65,
            capacity_price: 0.0,
        };
        let x = optimal_subscription(&load, &tariff, &idx).unwrap();
        assert_eq!(x, 6.5);
    }

    #[test]
    fn subscription_matches_golden_section_on_rough_load() {
        let idx = TimeIndex::uniform(10, 24).unwrap();
        let values: Vec<f64> = (0..240)
            .map(|t| 1.0 + ((t * 131 % 97) as f64) / 31.0)
            .collect();
        let load = LoadSeries::new("c", values.clone()).unwrap();
        let tariff = subscribed();
        let x = optimal_subscription(&load, &tariff, &idx).unwrap();

        // Golden-section oracle on the 1-D convex cost.
        let fee = tariff.prorated_capacity_price(&idx);
        let cost = |x: f64| -> f64 {
            values
                .iter()
                .map(|&l| 0.25 * l.min(x) + 1.65 * (l - x).max(0.0))
                .sum::<f64>()
                + fee * x
        };
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, 6.0);
        for _ in 0..200 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            if cost(x1) <= cost(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let golden = 0.5 * (a + b);
        assert!(
            (cost(x) - cost(golden)).abs() <= 1e-7 * (1.0 + cost(golden).abs()),
            "closed form {x} vs golden section {golden}"
        );

        // Variable-subscription program cross-check.
        let mut lp = LinearProgram::new();
        let xsub = lp.add_var(fee, 0.0, f64::INFINITY);
        for &l in &values {
            let below = lp.add_var(0.25, 0.0, f64::INFINITY);
            let above = lp.add_var(1.65, 0.0, f64::INFINITY);
            lp.add_row(vec![(below, 1.0), (above, 1.0)], RowOp::Eq, l);
            lp.add_row(vec![(below, 1.0), (xsub, -1.0)], RowOp::Le, 0.0);
        }
        let sol = lp.solve().unwrap();
        assert!(sol.is_optimal());
        assert!(
            (sol.primal[xsub] - x).abs() <= 1e-7,
            "closed form {x} vs LP {}",
            sol.primal[xsub]
        );
    }

    #[test]
    fn build_counts_flat_energy() {
        let idx = TimeIndex::uniform(1, 24).unwrap();
        let load = LoadSeries::new("c", vec![2.0; 24]).unwrap();
        let tariff = flat(0.25);
        let flex = FlexibilityParams::new(0.25, 0.025, 0.35).unwrap();
        let p = problem(&load, &tariff, None, &idx, flex);
        let (lp, layout) = build_problem(&p).unwrap();
        assert_eq!(lp.num_vars(), 24);
        assert_eq!(lp.num_rows(), 1);
        assert_eq!(layout.q, 0..24);
        for j in 0..24 {
            assert!((lp.objective()[j] - (0.35 - 0.25)).abs() < 1e-12);
            assert_eq!(lp.bounds(j), (0.0, 0.25 * 2.0));
        }
        assert_eq!(layout.daily_budget_rows, 0..1);
    }

    #[test]
    fn build_counts_demand_charge() {
        let idx = TimeIndex::uniform(2, 24).unwrap();
        let load = LoadSeries::new("c", vec![1.0; 48]).unwrap();
        let tariff = TariffSpec::DemandCharge {
            energy_rate: 0.25,
            peak_price: 75.0,
        };
        let flex = FlexibilityParams::default();
        let p = problem(&load, &tariff, None, &idx, flex);
        let (lp, layout) = build_problem(&p).unwrap();
        assert_eq!(lp.num_vars(), 48 + 1);
        let peaks = layout.monthly_peak.unwrap();
        assert_eq!(peaks.len(), 1);
        let peak_rows = layout.peak_rows.unwrap();
        assert_eq!(peak_rows.len(), 48);
        assert_eq!(layout.daily_budget_rows.len(), 2);
    }

    #[test]
    fn build_requires_subscription_for_subscribed_capacity() {
        let idx = TimeIndex::uniform(1, 24).unwrap();
        let load = LoadSeries::new("c", vec![1.0; 24]).unwrap();
        let tariff = subscribed();
        let p = problem(&load, &tariff, None, &idx, FlexibilityParams::default());
        assert!(build_problem(&p).is_err());
    }

    #[test]
    fn spot_toy_reduces_only_the_priciest_hour() {
        let idx = TimeIndex::uniform(1, 3).unwrap();
        let load = LoadSeries::new("c", vec![10.0, 10.0, 10.0]).unwrap();
        let spot = SpotPriceSeries::new(vec![0.1, 0.5, 1.0]).unwrap();
        let tariff = flat(0.0);
        let flex = FlexibilityParams::new(0.25, 0.025, 0.2).unwrap();
        let p = problem(&load, &tariff, Some(&spot), &idx, flex);
        let got = solve_consumer(&p).unwrap();
        assert!(got.reduction[0].abs() < 1e-9);
        assert!(got.reduction[1].abs() < 1e-9);
        assert!((got.reduction[2] - 0.75).abs() < 1e-9);

        let oracle = greedy_volumetric_oracle(&p).unwrap();
        assert!((oracle.reduction[2] - 0.75).abs() < 1e-12);
        assert!(
            (got.costs.total - oracle.costs.total).abs() <= 1e-7 * (1.0 + oracle.costs.total.abs())
        );

        // Fine-grid brute force over single-hour allocations.
        let mut best = f64::INFINITY;
        let grid = 200;
        for a in 0..=grid {
            for b in 0..=grid - a {
                let c = grid - a - b;
                let q = [
                    0.75 * a as f64 / grid as f64,
                    0.75 * b as f64 / grid as f64,
                    0.75 * c as f64 / grid as f64,
                ];
                let cost: f64 = (0..3)
                    .map(|t| (10.0 - q[t]) * spot.values()[t] + 0.2 * q[t])
                    .sum();
                best = best.min(cost);
            }
        }
        assert!(got.costs.total <= best + 1e-6);
    }

    #[test]
    fn high_discomfort_means_no_curtailment() {
        let idx = TimeIndex::uniform(2, 24).unwrap();
        let load = LoadSeries::new("c", vec![5.0; 48]).unwrap();
        let spot = SpotPriceSeries::new(vec![0.5; 48]).unwrap();
        let tariff = flat(0.25);
        let flex = FlexibilityParams::new(0.25, 0.025, 10.0).unwrap();
        let p = problem(&load, &tariff, Some(&spot), &idx, flex);
        let got = solve_consumer(&p).unwrap();
        assert!(got.reduction.iter().all(|&q| q.abs() < 1e-12));
        assert_eq!(got.new_load, load.values());
    }

    #[test]
    fn equal_peak_hours_share_equally() {
        // Winter weekday with equal load in all 16 peak-window hours.
        let idx = TimeIndex::calendar(
            chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
            1,
            &Default::default(),
        )
        .unwrap();
        let values: Vec<f64> = (0..24)
            .map(|h| if (6..22).contains(&h) { 2.0 } else { 0.5 })
            .collect();
        let load = LoadSeries::new("c", values).unwrap();
        let tariff = TariffSpec::StaticTou {
            energy_rate: 0.25,
            peak_rate: 1.2,
            window: HourWindow::default_peak(),
            winter_months: default_winter_months(),
            weekends_and_holidays: false,
        };
        let flex = FlexibilityParams::default();
        let p = problem(&load, &tariff, None, &idx, flex);
        let got = solve_consumer(&p).unwrap();
        let shares: Vec<f64> = (6..22).map(|h| got.reduction[h] / 2.0).collect();
        for w in shares.windows(2) {
            assert!((w[0] - w[1]).abs() <= 1e-7, "unequal shares {:?}", shares);
        }
        assert!(shares[0] > 1e-4, "budget should be in use");
        // The daily budget must bind.
        let used: f64 = got.reduction.iter().sum();
        let budget = 0.025 * load.total_energy();
        assert!((used - budget).abs() <= 1e-7);

        // Brute force on a 4-hour miniature with the same structure.
        let mini_idx = TimeIndex::uniform(1, 4).unwrap();
        let mini_load = LoadSeries::new("m", vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        let mini_spot = SpotPriceSeries::new(vec![1.2, 1.2, 0.25, 0.25]).unwrap();
        let mini_tariff = flat(0.0);
        let mini = problem(&mini_load, &mini_tariff, Some(&mini_spot), &mini_idx, flex);
        let got_mini = solve_consumer(&mini).unwrap();
        let mut best = f64::INFINITY;
        let mut best_q = (0.0, 0.0);
        let budget = 0.025 * 8.0;
        let steps = 400;
        for a in 0..=steps {
            let q0 = budget * a as f64 / steps as f64;
            let q1 = budget - q0;
            if q0 > 0.5 || q1 > 0.5 {
                continue;
            }
            let cost = (2.0 - q0) * 1.2 + (2.0 - q1) * 1.2 + 2.0 * 0.25 * 2.0 + 0.35 * (q0 + q1);
            let maxshare = (q0 / 0.5).max(q1 / 0.5);
            // Tie-break among equal-cost splits by the smaller max share.
            if cost < best - 1e-12 || ((cost - best).abs() <= 1e-12 && maxshare < best_q.0) {
                best = cost;
                best_q = (maxshare, q0);
            }
        }
        assert!((got_mini.reduction[0] - best_q.1).abs() <= 1e-6);
        assert!((got_mini.reduction[0] - got_mini.reduction[1]).abs() <= 1e-7);
    }

    #[test]
    fn greedy_oracle_rejects_capacity_tariffs() {
        let idx = TimeIndex::uniform(1, 24).unwrap();
        let load = LoadSeries::new("c", vec![1.0; 24]).unwrap();
        let tariff = subscribed();
        let p = problem(&load, &tariff, None, &idx, FlexibilityParams::default());
        assert!(greedy_volumetric_oracle(&p).is_err());
    }

    #[test]
    fn greedy_oracle_splits_ties_equally() {
        let idx = TimeIndex::uniform(1, 3).unwrap();
        let load = LoadSeries::new("c", vec![10.0, 10.0, 1.0]).unwrap();
        let spot = SpotPriceSeries::new(vec![1.0, 1.0, 0.0]).unwrap();
        // Daily budget 0.025 * 21 = 0.525, caps 2.5 each: tie split equally.
        let flex = FlexibilityParams::new(0.25, 0.025, 0.2).unwrap();
        let tariff = flat(0.0);
        let p = problem(&load, &tariff, Some(&spot), &idx, flex);
        let got = greedy_volumetric_oracle(&p).unwrap();
        assert!((got.reduction[0] - got.reduction[1]).abs() < 1e-12);
        assert!((got.reduction[0] - 0.2625).abs() < 1e-12);
        assert_eq!(got.reduction[2], 0.0);
    }

    #[test]
    fn greedy_oracle_idle_below_discomfort() {
        let idx = TimeIndex::uniform(1, 4).unwrap();
        let load = LoadSeries::new("c", vec![3.0; 4]).unwrap();
        let spot = SpotPriceSeries::new(vec![0.05, 0.02, 0.0, 0.01]).unwrap();
        let flex = FlexibilityParams::new(0.25, 0.025, 0.5).unwrap();
        let tariff = flat(0.25);
        let p = problem(&load, &tariff, Some(&spot), &idx, flex);
        let got = greedy_volumetric_oracle(&p).unwrap();
        assert!(got.reduction.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn monolithic_and_decomposed_agree() {
        let idx = TimeIndex::uniform(3, 8).unwrap();
        let values: Vec<f64> = (0..24)
            .map(|t| 1.0 + ((t * 53 % 17) as f64) * 0.2)
            .collect();
        let load = LoadSeries::new("c", values).unwrap();
        let spot_vals: Vec<f64> = (0..24)
            .map(|t| 0.1 + ((t * 31 % 7) as f64) * 0.15)
            .collect();
        let spot = SpotPriceSeries::new(spot_vals).unwrap();
        let flex = FlexibilityParams::new(0.25, 0.05, 0.3).unwrap();
        let dc = TariffSpec::DemandCharge {
            energy_rate: 0.25,
            peak_price: 20.0,
        };
        let sc = subscribed();
        let dyn_tou = TariffSpec::DynamicTou {
            energy_rate: 0.2,
            event_rate: 1.5,
            window: HourWindow::new(2, 7),
            active_days: [0usize, 2].into_iter().collect(),
        };
        for (tariff, spot_opt) in [
            (&flat(0.6), Some(&spot)),
            (&flat(0.6), None),
            (&dyn_tou, Some(&spot)),
            (&dyn_tou, None),
            (&dc, Some(&spot)),
            (&dc, None),
            (&sc, Some(&spot)),
            (&sc, None),
        ] {
            let p = problem(&load, tariff, spot_opt, &idx, flex);
            let split = solve_consumer(&p).unwrap();
            let whole = solve_consumer_monolithic(&p).unwrap();
            assert!(
                (split.costs.total - whole.costs.total).abs()
                    <= 1e-6 * (1.0 + whole.costs.total.abs()),
                "{} spot={}: {} vs {}",
                tariff.name(),
                spot_opt.is_some(),
                split.costs.total,
                whole.costs.total
            );
            for t in 0..24 {
                assert!(
                    (split.reduction[t] - whole.reduction[t]).abs() <= 1e-6,
                    "{} hour {t}: {} vs {}",
                    tariff.name(),
                    split.reduction[t],
                    whole.reduction[t]
                );
            }
        }
    }

    #[test]
    fn zero_peak_price_keeps_equal_shares() {
        // Curtailment cheaper than the energy rate and a zero peak price:
        // every hour is equally profitable, the daily budget binds, and the
        // peak machinery must not distort the equal-share tie-break by
        // forcing a clip profile.
        let idx = TimeIndex::uniform(2, 6).unwrap();
        let values: Vec<f64> = (0..12).map(|t| 1.0 + ((t * 7 % 5) as f64) * 0.6).collect();
        let load = LoadSeries::new("c", values.clone()).unwrap();
        let tariff = TariffSpec::DemandCharge {
            energy_rate: 0.5,
            peak_price: 0.0,
        };
        let flex = FlexibilityParams::new(0.2, 0.05, 0.1).unwrap();
        let p = problem(&load, &tariff, None, &idx, flex);
        let split = solve_consumer(&p).unwrap();
        let whole = solve_consumer_monolithic(&p).unwrap();
        for day in 0..2 {
            for result in [&split, &whole] {
                let shares: Vec<f64> = idx
                    .hours_of_day(day)
                    .map(|t| result.reduction[t] / (0.2 * values[t]))
                    .collect();
                for w in shares.windows(2) {
                    assert!((w[0] - w[1]).abs() <= 1e-7, "shares {shares:?}");
                }
                // Budget/cap ratio: 0.05 / 0.2.
                assert!((shares[0] - 0.25).abs() <= 1e-7, "share {}", shares[0]);
            }
        }
        for t in 0..12 {
            assert!((split.reduction[t] - whole.reduction[t]).abs() <= 1e-7);
        }
    }

    #[test]
    fn demand_charge_reduced_form_matches_bisection() {
        // Single month, no spot, zero discomfort: the optimal new monthly
        // peak is the smallest peak the envelope allows.
        let idx = TimeIndex::uniform(2, 24).unwrap();
        let values: Vec<f64> = (0..48)
            .map(|t| 2.0 + ((t * 37 % 23) as f64) * 0.25)
            .collect();
        let load = LoadSeries::new("c", values.clone()).unwrap();
        let flex = FlexibilityParams::new(0.25, 0.025, 0.0).unwrap();
        let tariff = TariffSpec::DemandCharge {
            energy_rate: 0.0,
            peak_price: 50.0,
        };
        let p = problem(&load, &tariff, None, &idx, flex);
        let got = solve_consumer(&p).unwrap();
        let new_peak = got.monthly_peaks.as_ref().unwrap()[0];

        let feasible = |peak: f64| -> bool {
            (0..2).all(|d| {
                let hours = 24 * d..24 * (d + 1);
                let budget: f64 = 0.025 * hours.clone().map(|t| values[t]).sum::<f64>();
                let needed: f64 = hours.clone().map(|t| (values[t] - peak).max(0.0)).sum();
                let caps_ok = hours
                    .clone()
                    .all(|t| values[t] - peak <= 0.25 * values[t] + 1e-12);
                caps_ok && needed <= budget + 1e-12
            })
        };
        let (mut lo, mut hi) = (0.0, 8.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(
            (new_peak - hi).abs() <= 1e-6,
            "peak {new_peak} vs bisection {hi}"
        );
    }

    #[test]
    fn subscription_stage_is_consistent_between_paths() {
        let idx = TimeIndex::uniform(4, 24).unwrap();
        let values: Vec<f64> = (0..96)
            .map(|t| 0.5 + ((t * 61 % 41) as f64) / 13.0)
            .collect();
        let load = LoadSeries::new("c", values).unwrap();
        let tariff = subscribed();
        let p = problem(&load, &tariff, None, &idx, FlexibilityParams::default());
        let got = solve_consumer(&p).unwrap();
        let x = got.subscription.unwrap();
        let direct = optimal_subscription(&load, &tariff, &idx).unwrap();
        assert_eq!(x, direct);
        // Above-subscription hours are curtailed toward the subscription.
        assert!(got.reduction.iter().sum::<f64>() > 0.0);
    }
}
