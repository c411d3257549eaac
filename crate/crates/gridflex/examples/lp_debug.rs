//! Build a consumer program by hand, dump it in LP interchange format for
//! inspection with external tools, solve it and read the duals.
//!
//! ```bash
//! cargo run --release --example lp_debug
//! ```

use gridflex::lp::{LinearProgram, RowOp};
use gridflex::response::{build_problem, ConsumerProblem};
use gridflex::tariff::TariffSpec;
use gridflex::{FlexibilityParams, LoadSeries, TimeIndex};

fn main() -> gridflex::Result<()> {
    // A tiny program first: minimize x + 2y with x + y >= 3 on a box.
    let mut lp = LinearProgram::new();
    let x = lp.add_var(1.0, 0.0, 10.0);
    let y = lp.add_var(2.0, 0.0, 10.0);
    let row = lp.add_row(vec![(x, 1.0), (y, 1.0)], RowOp::Ge, 3.0);
    let solution = lp.solve()?;
    println!(
        "toy optimum {:.2} at x={:.2}, y={:.2}; row dual {:.2}",
        solution.objective, solution.primal[x], solution.primal[y], solution.dual[row]
    );

    // A real consumer program: one day under a demand charge.
    let index = TimeIndex::uniform(1, 24)?;
    let values: Vec<f64> = (0..24)
        .map(|h| 1.0 + 2.0 * (-((h as f64) - 18.0).powi(2) / 10.0).exp())
        .collect();
    let load = LoadSeries::new("debug", values)?;
    let tariff = TariffSpec::DemandCharge {
        energy_rate: 0.25,
        peak_price: 75.0,
    };
    let problem = ConsumerProblem {
        load: &load,
        flexibility: FlexibilityParams::default(),
        tariff: &tariff,
        spot: None,
        index: &index,
        fixed_subscription: None,
    };
    let (lp, layout) = build_problem(&problem)?;
    println!(
        "\nconsumer program: {} variables ({} curtailment, {} monthly peak), {} rows",
        lp.num_vars(),
        layout.q.len(),
        layout.monthly_peak.as_ref().map_or(0, |r| r.len()),
        lp.num_rows()
    );

    let path = std::path::Path::new("target/consumer_program.lp");
    std::fs::create_dir_all(path.parent().unwrap())?;
    let mut file = std::fs::File::create(path)?;
    lp.write_lp_format(&mut file)?;
    println!("dumped LP interchange format to {}", path.display());

    let solution = lp.solve()?;
    println!("optimal cost {:.4} NOK", solution.objective);
    let peak_var = layout.monthly_peak.unwrap().start;
    println!("optimized monthly peak {:.4} kW", solution.primal[peak_var]);
    Ok(())
}
