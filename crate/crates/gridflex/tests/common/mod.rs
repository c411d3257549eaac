//! Shared test helpers: an exhaustive vertex-enumeration oracle for small
//! bounded programs and seeded random instance generators. The oracle is
//! deliberately independent of the solver implementation: it enumerates
//! every choice of n active hyperplanes, solves the square system by
//! Gaussian elimination, filters by feasibility and takes the best vertex.
#![allow(dead_code)] // each test binary uses its own subset

use gridflex::lp::{LinearProgram, RowOp};
use gridflex::model::{FlexibilityParams, LoadSeries, SpotPriceSeries};
use gridflex::tariff::{HourWindow, TariffSpec};
use gridflex::TimeIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FEAS_TOL: f64 = 1e-7;

/// Minimum objective over all vertices of the feasible region, or `None`
/// when no feasible vertex exists (with finite bounds that means the
/// region is empty).
pub fn vertex_enumeration_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let rows = lp.rows();
    let m = rows.len();
    // Hyperplanes: each row as an equality, then both bounds of each var.
    let plane_count = m + 2 * n;
    let plane = |idx: usize, out_a: &mut [f64]| -> f64 {
        out_a.iter_mut().for_each(|v| *v = 0.0);
        if idx < m {
            for &(j, a) in &rows[idx].coeffs {
                out_a[j] += a;
            }
            rows[idx].rhs
        } else {
            let k = idx - m;
            let (lo, hi) = lp.bounds(k / 2);
            out_a[k / 2] = 1.0;
            if k % 2 == 0 {
                lo
            } else {
                hi
            }
        }
    };

    let feasible = |x: &[f64]| -> bool {
        for j in 0..n {
            let (lo, hi) = lp.bounds(j);
            if x[j] < lo - FEAS_TOL || x[j] > hi + FEAS_TOL {
                return false;
            }
        }
        for row in rows {
            let activity: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let ok = match row.op {
                RowOp::Le => activity <= row.rhs + FEAS_TOL,
                RowOp::Ge => activity >= row.rhs - FEAS_TOL,
                RowOp::Eq => (activity - row.rhs).abs() <= FEAS_TOL,
            };
            if !ok {
                return false;
            }
        }
        true
    };

    let mut best: Option<f64> = None;
    let mut selection: Vec<usize> = (0..n).collect();
    if plane_count < n {
        return None;
    }
    loop {
        // Assemble and solve the active-set system.
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        let mut row_buf = vec![0.0; n];
        for (r, &p) in selection.iter().enumerate() {
            b[r] = plane(p, &mut row_buf);
            a[r * n..(r + 1) * n].copy_from_slice(&row_buf);
        }
        if let Some(x) = solve_square(&mut a, &mut b, n) {
            if feasible(&x) {
                let objective: f64 = x
                    .iter()
                    .zip(lp.objective())
                    .map(|(xj, c)| xj * c)
                    .sum::<f64>()
                    + lp.objective_offset();
                best = Some(best.map_or(objective, |b: f64| b.min(objective)));
            }
        }
        // Next combination in lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if selection[i] != i + plane_count - n {
                selection[i] += 1;
                for k in i + 1..n {
                    selection[k] = selection[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-9 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let p = a[col * n + col];
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col] / p;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|j| b[j] / a[j * n + j]).collect())
}

/// Random bounded program with small integer data: every variable gets
/// finite bounds so the instance is never unbounded and infeasibility is
/// decidable by enumeration.
pub fn random_bounded_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=6);
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        let lo = -(rng.gen_range(0..=4) as f64);
        let hi = rng.gen_range(0..=4) as f64;
        let c = rng.gen_range(-5..=5) as f64;
        lp.add_var(c, lo, hi);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                let a = rng.gen_range(-3..=3) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let op = match rng.gen_range(0..10) {
            0..=4 => RowOp::Le,
            5..=8 => RowOp::Ge,
            _ => RowOp::Eq,
        };
        let rhs = rng.gen_range(-6..=6) as f64;
        lp.add_row(coeffs, op, rhs);
    }
    lp
}

/// Random volumetric consumer instance for oracle-equivalence testing.
pub struct VolumetricInstance {
    pub index: TimeIndex,
    pub load: LoadSeries,
    pub spot: Option<SpotPriceSeries>,
    pub tariff: TariffSpec,
    pub flexibility: FlexibilityParams,
}

pub fn random_volumetric_instance(seed: u64) -> VolumetricInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = rng.gen_range(1..=5);
    let hours_per_day = rng.gen_range(2..=24);
    let index = TimeIndex::uniform(days, hours_per_day).unwrap();
    let hours = index.hour_count();
    let values: Vec<f64> = (0..hours)
        .map(|_| {
            if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(0.05..5.0)
            }
        })
        .collect();
    let load = LoadSeries::new("random", values).unwrap();
    let spot = if rng.gen_bool(0.7) {
        let prices: Vec<f64> = (0..hours).map(|_| rng.gen_range(-0.1..2.0)).collect();
        Some(SpotPriceSeries::new(prices).unwrap())
    } else {
        None
    };
    let energy_rate = rng.gen_range(0.0..0.6);
    let tariff = match rng.gen_range(0..3) {
        0 => TariffSpec::FlatEnergy { energy_rate },
        1 => TariffSpec::StaticTou {
            energy_rate,
            peak_rate: energy_rate + rng.gen_range(0.0..2.0),
            window: HourWindow::new(0, rng.gen_range(1..=hours_per_day as u32)),
            // The uniform index sits in January.
            winter_months: [1u32].into_iter().collect(),
            weekends_and_holidays: rng.gen_bool(0.5),
        },
        _ => {
            let active: std::collections::BTreeSet<usize> =
                (0..days).filter(|_| rng.gen_bool(0.5)).collect();
            TariffSpec::DynamicTou {
                energy_rate,
                event_rate: energy_rate + rng.gen_range(0.0..4.0),
                window: HourWindow::new(0, rng.gen_range(1..=hours_per_day as u32)),
                active_days: active,
            }
        }
    };
    let flexibility = FlexibilityParams::new(
        rng.gen_range(0.05..0.5),
        rng.gen_range(0.005..0.1),
        rng.gen_range(0.0..1.0),
    )
    .unwrap();
    VolumetricInstance {
        index,
        load,
        spot,
        tariff,
        flexibility,
    }
}
