//! Self-contained linear programming: a bounded-variable program
//! representation, a deterministic revised-simplex solver, and a
//! lexicographic two-stage solve used for tie-breaking.
//!
//! The solver is intentionally dependency-free. Problem sizes in this crate
//! are small (at most a few thousand variables, typically decomposed per day
//! or per month), so a dense basis inverse is adequate.

mod simplex;

use std::io::{self, Write};

pub use simplex::{Simplex, PIVOT_TOL};

/// Comparison operator of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Eq,
    Ge,
}

/// One sparse constraint row `sum coeffs (op) rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

/// Errors from building or solving a program.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("iteration limit of {0} exceeded")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution of a [`LinearProgram`].
///
/// For non-optimal statuses the vectors are empty and `objective` is
/// `+inf` (infeasible) or `-inf` (unbounded).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Value per structural variable.
    pub primal: Vec<f64>,
    /// Multiplier per constraint row (non-positive for `<=` rows,
    /// non-negative for `>=` rows, free for `=` rows).
    pub dual: Vec<f64>,
    /// Reduced cost per structural variable.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// A bounded-variable linear program, minimized by convention.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    objective_offset: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with the given objective coefficient and bounds
    /// (either bound may be infinite) and returns its index.
    pub fn add_var(&mut self, objective: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(objective);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, op: RowOp, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, op, rhs });
        self.rows.len() - 1
    }

    /// Adds a constant to the reported objective value. Constant cost terms
    /// (for example the subscription fee once the capacity is fixed) live
    /// here so that the solved objective equals the full cost.
    pub fn add_objective_offset(&mut self, offset: f64) {
        self.objective_offset += offset;
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Tightens a variable's bounds in place (used by presolve steps that
    /// must not change the set of optimal solutions).
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::InvalidProgram("program has no variables".into()));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] {
                return Err(LpError::InvalidProgram(format!(
                    "variable {j} has lower bound {} above upper bound {}",
                    self.lower[j], self.upper[j]
                )));
            }
            if self.lower[j].is_nan()
                || self.upper[j].is_nan()
                || self.lower[j] == f64::INFINITY
                || self.upper[j] == f64::NEG_INFINITY
                || !self.objective[j].is_finite()
            {
                return Err(LpError::InvalidProgram(format!(
                    "variable {j} has non-finite data"
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::InvalidProgram(format!(
                    "row {i} has rhs {}",
                    row.rhs
                )));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::InvalidProgram(format!(
                        "row {i} references variable {j} but program has {n} variables"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidProgram(format!(
                        "row {i} has non-finite coefficient on variable {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Solves the program with a deterministic two-phase revised simplex.
    /// Identical inputs always produce identical output.
    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.validate()?;
        Simplex::new(self).run()
    }

    /// Solves the program, then re-solves minimizing `secondary` subject to
    /// the original objective value being held within `epsilon` (one extra
    /// `<=` row). `None` selects the default `1e-7 * (1 + |objective|)`.
    ///
    /// The returned solution is the second-stage one; its `dual` vector has
    /// one extra trailing entry for the objective-fixing row.
    pub fn solve_lexicographic(
        &self,
        secondary: &[f64],
        epsilon: Option<f64>,
    ) -> Result<LpSolution, LpError> {
        if secondary.len() != self.num_vars() {
            return Err(LpError::InvalidProgram(format!(
                "secondary objective has {} coefficients for {} variables",
                secondary.len(),
                self.num_vars()
            )));
        }
        let first = self.solve()?;
        if !first.is_optimal() {
            return Ok(first);
        }
        let eps = epsilon.unwrap_or_else(|| 1e-7 * (1.0 + first.objective.abs()));
        let mut second = self.clone();
        second.objective = secondary.to_vec();
        second.objective_offset = 0.0;
        let cost_row: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        // The budget comes from the raw first-stage cost (no offset), summed
        // exactly the way the row activity will be: the first-stage vertex
        // then satisfies the new row without cancellation slack.
        let raw: f64 = cost_row.iter().map(|&(j, c)| c * first.primal[j]).sum();
        second.add_row(cost_row, RowOp::Le, raw + eps);
        second.solve()
    }

    /// Writes the program in CPLEX LP interchange format (objective,
    /// constraint and bounds sections) for cross-checking with other tools.
    pub fn write_lp_format(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "Minimize")?;
        let mut line = String::from(" obj:");
        let mut any = false;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                line.push_str(&format!(
                    " {} {} x{}",
                    if c < 0.0 { "-" } else { "+" },
                    c.abs(),
                    j
                ));
                any = true;
            }
        }
        if !any {
            line.push_str(" 0 x0");
        }
        writeln!(w, "{line}")?;
        writeln!(w, "Subject To")?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut line = format!(" r{i}:");
            if row.coeffs.is_empty() {
                line.push_str(" 0 x0");
            }
            for &(j, a) in &row.coeffs {
                line.push_str(&format!(
                    " {} {} x{}",
                    if a < 0.0 { "-" } else { "+" },
                    a.abs(),
                    j
                ));
            }
            let op = match row.op {
                RowOp::Le => "<=",
                RowOp::Eq => "=",
                RowOp::Ge => ">=",
            };
            writeln!(w, "{line} {op} {}", row.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.num_vars() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => writeln!(w, " {lo} <= x{j} <= {hi}")?,
                (true, false) => writeln!(w, " x{j} >= {lo}")?,
                (false, true) => writeln!(w, " x{j} <= {hi}")?,
                (false, false) => writeln!(w, " x{j} free")?,
            }
        }
        writeln!(w, "End")
    }
}
