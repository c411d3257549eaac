//! Two-phase revised simplex over variables with explicit (possibly
//! infinite) bounds, a dense basis inverse and deterministic pivot rules:
//! Dantzig pricing, switching to Bland's rule after a run of degenerate
//! steps, ratio-test ties broken by pivot magnitude then index.

use super::{LinearProgram, LpError, LpSolution, LpStatus, RowOp};

/// Pivots below this magnitude are treated as numerical breakdown.
pub const PIVOT_TOL: f64 = 1e-11;

/// Steps below this are counted as degenerate.
const DEGEN_STEP_TOL: f64 = 1e-12;

/// Relative tie window in the ratio test.
const RATIO_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Debug)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Non-basic variable with two infinite bounds, pinned at zero.
    Free,
}

enum LoopOutcome {
    Optimal,
    Unbounded,
}

enum StepKind {
    BoundFlip,
    Pivot { row: usize, hits_upper: bool },
}

/// One solve's private working memory. Not reentrant; build a fresh
/// instance per program (instances for disjoint programs may run in
/// parallel).
pub struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n_struct: usize,
    /// Column layout: structural, then one slack per row, then artificials.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    value: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Dense basis inverse, row-major m x m.
    binv: Vec<f64>,
    rhs: Vec<f64>,
    artificial_start: usize,
    b_norm: f64,
    c_norm: f64,
    iterations: usize,
    iteration_cap: usize,
    degenerate_run: usize,
    bland_threshold: usize,
    bland: bool,
    y: Vec<f64>,
}

impl<'a> Simplex<'a> {
    pub fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.num_rows();
        let n_struct = lp.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct + m];
        let mut rhs = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(n_struct + m);
        let mut upper = Vec::with_capacity(n_struct + m);
        for j in 0..n_struct {
            let (lo, hi) = lp.bounds(j);
            lower.push(lo);
            upper.push(hi);
        }
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            cols[n_struct + i].push((i, 1.0));
            let (slo, shi) = match row.op {
                RowOp::Le => (0.0, f64::INFINITY),
                RowOp::Ge => (f64::NEG_INFINITY, 0.0),
                RowOp::Eq => (0.0, 0.0),
            };
            lower.push(slo);
            upper.push(shi);
            rhs.push(row.rhs);
        }
        let b_norm = rhs.iter().fold(0.0f64, |acc, &b| acc.max(b.abs()));
        Self {
            lp,
            m,
            n_struct,
            cols,
            lower,
            upper,
            cost: Vec::new(),
            value: Vec::new(),
            state: Vec::new(),
            basis: Vec::new(),
            binv: Vec::new(),
            rhs,
            artificial_start: 0,
            b_norm,
            c_norm: 0.0,
            iterations: 0,
            iteration_cap: 50 * (n_struct + m).max(2),
            degenerate_run: 0,
            bland_threshold: 0,
            bland: false,
            y: vec![0.0; m],
        }
    }

    pub fn run(mut self) -> Result<LpSolution, LpError> {
        self.initialize();

        let has_artificials = self.cols.len() > self.artificial_start;
        if has_artificials {
            self.set_phase1_costs();
            match self.phase_loop()? {
                LoopOutcome::Optimal => {}
                LoopOutcome::Unbounded => {
                    return Err(LpError::Numerical(
                        "phase 1 objective reported unbounded".into(),
                    ));
                }
            }
            let infeasibility: f64 = (self.artificial_start..self.cols.len())
                .map(|j| self.value[j].max(0.0))
                .sum();
            if infeasibility > 1e-8 * (1.0 + self.b_norm) {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    primal: Vec::new(),
                    dual: Vec::new(),
                    reduced_costs: Vec::new(),
                    objective: f64::INFINITY,
                });
            }
            self.drive_out_artificials()?;
            for j in self.artificial_start..self.cols.len() {
                self.lower[j] = 0.0;
                self.upper[j] = 0.0;
            }
        }

        self.set_phase2_costs();
        for _attempt in 0..3 {
            match self.phase_loop()? {
                LoopOutcome::Unbounded => {
                    return Ok(LpSolution {
                        status: LpStatus::Unbounded,
                        primal: Vec::new(),
                        dual: Vec::new(),
                        reduced_costs: Vec::new(),
                        objective: f64::NEG_INFINITY,
                    });
                }
                LoopOutcome::Optimal => {
                    if self.verify().is_ok() {
                        return Ok(self.extract());
                    }
                    // Rebuild the basis inverse from scratch and re-optimize.
                    self.refactor()?;
                }
            }
        }
        match self.verify() {
            Ok(()) => Ok(self.extract()),
            Err(msg) => Err(LpError::Numerical(format!(
                "solution failed verification after refactoring: {msg}"
            ))),
        }
    }

    /// Chooses the starting point (non-basic variables at a finite bound),
    /// seats slacks in the basis where they absorb the row residual, and
    /// adds one artificial column per remaining infeasible row.
    fn initialize(&mut self) {
        let n_cols = self.n_struct + self.m;
        self.value = vec![0.0; n_cols];
        self.state = vec![VarState::AtLower; n_cols];
        for j in 0..self.n_struct {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_finite() {
                self.value[j] = lo;
                self.state[j] = VarState::AtLower;
            } else if hi.is_finite() {
                self.value[j] = hi;
                self.state[j] = VarState::AtUpper;
            } else {
                self.value[j] = 0.0;
                self.state[j] = VarState::Free;
            }
        }
        let mut residual = self.rhs.clone();
        for j in 0..self.n_struct {
            let v = self.value[j];
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    residual[i] -= a * v;
                }
            }
        }
        self.basis = vec![usize::MAX; self.m];
        self.binv = vec![0.0; self.m * self.m];
        self.artificial_start = n_cols;
        for i in 0..self.m {
            let s = self.n_struct + i;
            let r = residual[i];
            if r >= self.lower[s] && r <= self.upper[s] {
                self.value[s] = r;
                self.state[s] = VarState::Basic(i);
                self.basis[i] = s;
                self.binv[i * self.m + i] = 1.0;
            } else {
                let pinned = if r < self.lower[s] {
                    self.lower[s]
                } else {
                    self.upper[s]
                };
                self.value[s] = pinned;
                self.state[s] = if pinned == self.lower[s] {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                let rho = r - pinned;
                let sigma = if rho >= 0.0 { 1.0 } else { -1.0 };
                let a_col = self.cols.len();
                self.cols.push(vec![(i, sigma)]);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.value.push(rho.abs());
                self.state.push(VarState::Basic(i));
                self.basis[i] = a_col;
                self.binv[i * self.m + i] = sigma;
            }
        }
    }

    fn set_phase1_costs(&mut self) {
        self.cost = vec![0.0; self.cols.len()];
        for j in self.artificial_start..self.cols.len() {
            self.cost[j] = 1.0;
        }
        self.c_norm = 1.0;
        self.reset_rules();
    }

    fn set_phase2_costs(&mut self) {
        self.cost = vec![0.0; self.cols.len()];
        let mut c_norm = 0.0f64;
        for j in 0..self.n_struct {
            let c = self.lp.objective()[j];
            self.cost[j] = c;
            c_norm = c_norm.max(c.abs());
        }
        self.c_norm = c_norm;
        self.reset_rules();
    }

    fn reset_rules(&mut self) {
        self.degenerate_run = 0;
        self.bland = false;
        self.bland_threshold = 10 * self.cols.len();
    }

    fn dual_tol(&self) -> f64 {
        1e-9 * (1.0 + self.c_norm)
    }

    fn primal_tol(&self) -> f64 {
        1e-9 * (1.0 + self.b_norm)
    }

    fn compute_duals(&mut self) {
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.m {
            let c = self.cost[self.basis[r]];
            if c != 0.0 {
                let row = &self.binv[r * self.m..(r + 1) * self.m];
                for i in 0..self.m {
                    self.y[i] += c * row[i];
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        for &(i, a) in &self.cols[j] {
            d -= self.y[i] * a;
        }
        d
    }

    /// Entering candidate: `(column, direction)` or `None` at optimality.
    fn price(&self) -> Option<(usize, f64)> {
        let tol = self.dual_tol();
        let mut best: Option<(usize, f64, f64)> = None; // (col, dir, score)
        for j in 0..self.cols.len() {
            if j >= self.artificial_start || self.lower[j] == self.upper[j] {
                continue;
            }
            let dir = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower => 1.0,
                VarState::AtUpper => -1.0,
                VarState::Free => 0.0,
            };
            let d = self.reduced_cost(j);
            let (dir, score) = if dir == 0.0 {
                if d.abs() <= tol {
                    continue;
                }
                (if d < 0.0 { 1.0 } else { -1.0 }, d.abs())
            } else {
                let score = -d * dir;
                if score <= tol {
                    continue;
                }
                (dir, score)
            };
            if self.bland {
                return Some((j, dir));
            }
            match best {
                Some((_, _, s)) if s >= score => {}
                _ => best = Some((j, dir, score)),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Ratio test for entering column `j` moving in `dir`. `alpha` is the
    /// entering column in basis coordinates.
    fn ratio_test(&self, j: usize, dir: f64, alpha: &[f64]) -> Option<(f64, StepKind)> {
        let flip_limit = if self.lower[j].is_finite() && self.upper[j].is_finite() {
            self.upper[j] - self.lower[j]
        } else {
            f64::INFINITY
        };
        let mut min_t = flip_limit;
        for r in 0..self.m {
            let a = alpha[r];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let bcol = self.basis[r];
            let dv = -dir * a;
            let limit = if dv > 0.0 {
                self.upper[bcol]
            } else {
                self.lower[bcol]
            };
            if !limit.is_finite() {
                continue;
            }
            let t = ((limit - self.value[bcol]) / dv).max(0.0);
            if t < min_t {
                min_t = t;
            }
        }
        if !min_t.is_finite() {
            return None;
        }
        let tie = min_t + RATIO_TIE_TOL * (1.0 + min_t);
        if flip_limit <= tie {
            return Some((flip_limit, StepKind::BoundFlip));
        }
        // Among blocking rows inside the tie window pick the largest pivot,
        // then the lowest basic column index (lowest index only under Bland).
        let mut chosen: Option<(usize, bool, f64)> = None;
        for r in 0..self.m {
            let a = alpha[r];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let bcol = self.basis[r];
            let dv = -dir * a;
            let (limit, hits_upper) = if dv > 0.0 {
                (self.upper[bcol], true)
            } else {
                (self.lower[bcol], false)
            };
            if !limit.is_finite() {
                continue;
            }
            let t = ((limit - self.value[bcol]) / dv).max(0.0);
            if t > tie {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((cr, _, ca)) => {
                    if self.bland {
                        self.basis[r] < self.basis[cr]
                    } else {
                        a.abs() > ca.abs() + 1e-30
                            || (a.abs() == ca.abs() && self.basis[r] < self.basis[cr])
                    }
                }
            };
            if better {
                chosen = Some((r, hits_upper, a));
            }
        }
        let (row, hits_upper, _) = chosen.expect("finite min ratio implies a blocking row");
        Some((min_t, StepKind::Pivot { row, hits_upper }))
    }

    fn apply_step(
        &mut self,
        j: usize,
        dir: f64,
        t: f64,
        kind: StepKind,
        alpha: &[f64],
    ) -> Result<(), LpError> {
        for r in 0..self.m {
            if alpha[r] != 0.0 {
                let b = self.basis[r];
                self.value[b] -= dir * t * alpha[r];
            }
        }
        match kind {
            StepKind::BoundFlip => {
                self.state[j] = match self.state[j] {
                    VarState::AtLower => {
                        self.value[j] = self.upper[j];
                        VarState::AtUpper
                    }
                    VarState::AtUpper => {
                        self.value[j] = self.lower[j];
                        VarState::AtLower
                    }
                    other => other,
                };
            }
            StepKind::Pivot { row, hits_upper } => {
                let pivot = alpha[row];
                if pivot.abs() < PIVOT_TOL {
                    return Err(LpError::Numerical(format!(
                        "pivot magnitude {} below {PIVOT_TOL}",
                        pivot.abs()
                    )));
                }
                let leaving = self.basis[row];
                self.value[leaving] = if hits_upper {
                    self.upper[leaving]
                } else {
                    self.lower[leaving]
                };
                self.state[leaving] = if hits_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.value[j] += dir * t;
                self.state[j] = VarState::Basic(row);
                self.basis[row] = j;

                let m = self.m;
                let inv_pivot = 1.0 / pivot;
                let pivot_row: Vec<f64> = self.binv[row * m..(row + 1) * m].to_vec();
                for i in 0..m {
                    if i == row {
                        continue;
                    }
                    let f = alpha[i] * inv_pivot;
                    if f != 0.0 {
                        let dst = &mut self.binv[i * m..(i + 1) * m];
                        for (d, &p) in dst.iter_mut().zip(&pivot_row) {
                            *d -= f * p;
                        }
                    }
                }
                let dst = &mut self.binv[row * m..(row + 1) * m];
                for d in dst.iter_mut() {
                    *d *= inv_pivot;
                }
            }
        }
        Ok(())
    }

    fn column_in_basis_coords(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            if a != 0.0 {
                for r in 0..m {
                    alpha[r] += self.binv[r * m + i] * a;
                }
            }
        }
        alpha
    }

    fn phase_loop(&mut self) -> Result<LoopOutcome, LpError> {
        loop {
            if self.iterations > self.iteration_cap {
                return Err(LpError::IterationLimit(self.iteration_cap));
            }
            self.iterations += 1;
            self.compute_duals();
            let Some((j, dir)) = self.price() else {
                return Ok(LoopOutcome::Optimal);
            };
            let alpha = self.column_in_basis_coords(j);
            let Some((t, kind)) = self.ratio_test(j, dir, &alpha) else {
                return Ok(LoopOutcome::Unbounded);
            };
            self.apply_step(j, dir, t, kind, &alpha)?;
            if t <= DEGEN_STEP_TOL {
                self.degenerate_run += 1;
                if self.degenerate_run > self.bland_threshold {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
        }
    }

    /// Pivots basic artificials out of the basis where a non-artificial
    /// column has a usable pivot element; rows where none exists are
    /// redundant and keep their artificial pinned at zero.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let m = self.m;
        for row in 0..m {
            if self.basis[row] < self.artificial_start {
                continue;
            }
            let binv_row: Vec<f64> = self.binv[row * m..(row + 1) * m].to_vec();
            let mut replacement: Option<usize> = None;
            for j in 0..self.artificial_start {
                if matches!(self.state[j], VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut a_rj = 0.0;
                for &(i, a) in &self.cols[j] {
                    a_rj += binv_row[i] * a;
                }
                if a_rj.abs() > 1e-7 {
                    replacement = Some(j);
                    break;
                }
            }
            if let Some(j) = replacement {
                let alpha = self.column_in_basis_coords(j);
                self.apply_step(
                    j,
                    1.0,
                    0.0,
                    StepKind::Pivot {
                        row,
                        hits_upper: false,
                    },
                    &alpha,
                )?;
            }
        }
        Ok(())
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination and refreshes
    /// the basic variable values from the bounds of the non-basic ones.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let mut mat = vec![0.0; m * m];
        for (r, &col) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[col] {
                mat[i * m + r] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut pivot_row = col;
            let mut best = mat[col * m + col].abs();
            for r in col + 1..m {
                let v = mat[r * m + col].abs();
                if v > best {
                    best = v;
                    pivot_row = r;
                }
            }
            if best < PIVOT_TOL {
                return Err(LpError::Numerical("basis matrix is singular".into()));
            }
            if pivot_row != col {
                for k in 0..m {
                    mat.swap(col * m + k, pivot_row * m + k);
                    inv.swap(col * m + k, pivot_row * m + k);
                }
            }
            let p = mat[col * m + col];
            for k in 0..m {
                mat[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = mat[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        mat[r * m + k] -= f * mat[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        self.binv = inv;

        let mut rhs_eff = self.rhs.clone();
        for j in 0..self.cols.len() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.value[j];
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs_eff[i] -= a * v;
                }
            }
        }
        for r in 0..m {
            let mut v = 0.0;
            for i in 0..m {
                v += self.binv[r * m + i] * rhs_eff[i];
            }
            self.value[self.basis[r]] = v;
        }
        Ok(())
    }

    fn verify(&mut self) -> Result<(), String> {
        let tol_p = self.primal_tol().max(1e-12);
        let tol_d = self.dual_tol();
        let comp_tol = 1e-8 * (1.0 + self.c_norm) * (1.0 + self.b_norm);

        for (i, row) in self.lp.rows().iter().enumerate() {
            let activity: f64 = row.coeffs.iter().map(|&(j, a)| a * self.value[j]).sum();
            let violation = match row.op {
                RowOp::Le => activity - row.rhs,
                RowOp::Ge => row.rhs - activity,
                RowOp::Eq => (activity - row.rhs).abs(),
            };
            if violation > tol_p {
                return Err(format!("row {i} violated by {violation}"));
            }
        }
        for j in 0..self.cols.len() {
            let v = self.value[j];
            if v < self.lower[j] - tol_p || v > self.upper[j] + tol_p {
                return Err(format!(
                    "column {j} value {v} outside [{}, {}]",
                    self.lower[j], self.upper[j]
                ));
            }
        }

        self.compute_duals();
        let mut dual_objective: f64 = self.y.iter().zip(&self.rhs).map(|(y, b)| y * b).sum();
        for j in 0..self.artificial_start {
            let d = self.reduced_cost(j);
            if self.lower[j] == self.upper[j] {
                // Fixed columns carry no sign condition; they contribute
                // their pinned value to the dual objective.
                if !matches!(self.state[j], VarState::Basic(_)) {
                    dual_objective += d * self.value[j];
                }
                continue;
            }
            match self.state[j] {
                VarState::Basic(_) => {
                    if d.abs() > tol_d * 10.0 {
                        return Err(format!("basic column {j} has reduced cost {d}"));
                    }
                }
                VarState::AtLower => {
                    if d < -tol_d {
                        return Err(format!("column {j} at lower bound has reduced cost {d}"));
                    }
                    dual_objective += d * self.value[j];
                    if self.lower[j].is_finite() {
                        let product = d.max(0.0) * (self.value[j] - self.lower[j]).abs();
                        if product > comp_tol {
                            return Err(format!("complementarity violated on column {j}"));
                        }
                    }
                }
                VarState::AtUpper => {
                    if d > tol_d {
                        return Err(format!("column {j} at upper bound has reduced cost {d}"));
                    }
                    dual_objective += d * self.value[j];
                    if self.upper[j].is_finite() {
                        let product = (-d).max(0.0) * (self.upper[j] - self.value[j]).abs();
                        if product > comp_tol {
                            return Err(format!("complementarity violated on column {j}"));
                        }
                    }
                }
                VarState::Free => {
                    if d.abs() > tol_d {
                        return Err(format!("free column {j} has reduced cost {d}"));
                    }
                }
            }
        }
        for (i, row) in self.lp.rows().iter().enumerate() {
            let activity: f64 = row.coeffs.iter().map(|&(j, a)| a * self.value[j]).sum();
            let slack = row.rhs - activity;
            let product = self.y[i].abs() * slack.abs();
            if !matches!(row.op, RowOp::Eq) && product > comp_tol {
                return Err(format!("complementarity violated on row {i}"));
            }
        }

        let primal_objective: f64 = (0..self.n_struct)
            .map(|j| self.cost[j] * self.value[j])
            .sum();
        if (primal_objective - dual_objective).abs() > 1e-8 * (1.0 + primal_objective.abs()) {
            return Err(format!(
                "duality gap: primal {primal_objective}, dual {dual_objective}"
            ));
        }
        Ok(())
    }

    fn extract(&mut self) -> LpSolution {
        self.compute_duals();
        let primal: Vec<f64> = self.value[..self.n_struct].to_vec();
        let reduced_costs: Vec<f64> = (0..self.n_struct).map(|j| self.reduced_cost(j)).collect();
        let objective: f64 = primal
            .iter()
            .zip(self.lp.objective())
            .map(|(x, c)| x * c)
            .sum::<f64>()
            + self.lp.objective_offset();
        LpSolution {
            status: LpStatus::Optimal,
            primal,
            dual: self.y.clone(),
            reduced_costs,
            objective,
        }
    }
}
