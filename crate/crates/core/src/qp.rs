//! Dense primal active-set solver for the slack-relaxed safety QP
//!
//! ```text
//! minimize    (a - a_nom)' W (a - a_nom) + sum_k w_k d_k + rho sum_k d_k^2
//! subject to  c_k' a <= b_k + d_k,   d_k >= 0     (relaxable rows)
//!             c_k' a <= b_k                       (hard rows)
//! ```
//!
//! over `a` in R^3. The quadratic slack term keeps the lifted Hessian
//! positive definite, so every equality-constrained subproblem has a unique
//! minimizer. Problems are tiny (at most [`MAX_ROWS`] rows), so each
//! subproblem is solved through its full KKT system.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::Vec3;

pub const MAX_ROWS: usize = 64;
/// Primal feasibility tolerance, relative to `max(1, |b|)`.
pub const PRIMAL_TOL: f64 = 1e-7;
/// Multipliers above `-DUAL_TOL` count as non-negative.
pub const DUAL_TOL: f64 = 1e-8;

/// Steps shorter than this (relative to the iterate) count as zero.
const STEP_TOL: f64 = 1e-11;
/// Constraints whose unit normal is this close to orthogonal to the step are
/// treated as dependent on the working set and never block.
const BLOCKING_TOL: f64 = 1e-10;

/// Objective weight on `|a - a_nom|^2` while searching for a point that
/// satisfies the hard rows.
const PHASE1_PROXIMITY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpRow {
    pub coeff: Vec3,
    pub rhs: f64,
    pub slack_weight: f64,
    pub relaxable: bool,
}

impl QpRow {
    pub fn hard(coeff: Vec3, rhs: f64) -> Self {
        Self {
            coeff,
            rhs,
            slack_weight: 1.0,
            relaxable: false,
        }
    }

    pub fn soft(coeff: Vec3, rhs: f64, slack_weight: f64) -> Self {
        Self {
            coeff,
            rhs,
            slack_weight,
            relaxable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub nominal: Vec3,
    /// Symmetric positive definite deviation metric `W`.
    pub weight_matrix: Matrix3<f64>,
    pub rows: Vec<QpRow>,
    /// Quadratic slack regularization `rho > 0`.
    pub slack_reg: f64,
}

impl QpProblem {
    pub fn new(nominal: Vec3) -> Self {
        Self {
            nominal,
            weight_matrix: Matrix3::identity(),
            rows: Vec::new(),
            slack_reg: 1e-6,
        }
    }

    pub fn with_weight_diag(mut self, diag: Vec3) -> Self {
        self.weight_matrix =
            Matrix3::from_diagonal(&nalgebra::Vector3::new(diag.x, diag.y, diag.z));
        self
    }

    pub fn with_rows(mut self, rows: Vec<QpRow>) -> Self {
        self.rows = rows;
        self
    }

    pub fn with_slack_reg(mut self, rho: f64) -> Self {
        self.slack_reg = rho;
        self
    }

    /// `(a - a_nom)' W (a - a_nom) + sum w d + rho sum d^2`.
    pub fn objective(&self, accel: Vec3, slacks: &[f64]) -> f64 {
        let d = to_na(accel - self.nominal);
        let mut f = d.dot(&(self.weight_matrix * d));
        for (row, &s) in self.rows.iter().zip(slacks) {
            if row.relaxable {
                f += row.slack_weight * s + self.slack_reg * s * s;
            }
        }
        f
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if self.rows.len() > MAX_ROWS {
            return bad(format!(
                "{} rows exceed the limit of {MAX_ROWS}",
                self.rows.len()
            ));
        }
        if !self.nominal.is_finite() {
            return bad("nominal acceleration is not finite".into());
        }
        let w = &self.weight_matrix;
        if w.iter().any(|x| !x.is_finite()) {
            return bad("weight matrix is not finite".into());
        }
        let scale = w.amax().max(1.0);
        if (w - w.transpose()).amax() > 1e-12 * scale {
            return bad("weight matrix is not symmetric".into());
        }
        if w.cholesky().is_none() {
            return bad("weight matrix is not positive definite".into());
        }
        if !(self.slack_reg.is_finite() && self.slack_reg > 0.0) {
            return bad(format!(
                "slack regularization must be > 0 (got {})",
                self.slack_reg
            ));
        }
        for (k, row) in self.rows.iter().enumerate() {
            if !row.coeff.is_finite() || !row.rhs.is_finite() {
                return bad(format!("row {k} is not finite"));
            }
            if !(row.slack_weight.is_finite() && row.slack_weight > 0.0) {
                return bad(format!("row {k}: slack weight must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub accel: Vec3,
    /// Optimal slack per row; always zero for hard rows.
    pub slacks: Vec<f64>,
    /// Lagrange multiplier of each row constraint.
    pub multipliers: Vec<f64>,
    /// Rows holding with equality at the optimum, ascending.
    pub active_set: Vec<usize>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn slack_total(&self) -> f64 {
        self.slacks.iter().sum()
    }
}

/// One linear inequality `normal . z <= bound` on the lifted variable,
/// stored scaled to unit normal.
#[derive(Debug, Clone)]
struct Ineq {
    normal: DVector<f64>,
    bound: f64,
    /// Factor that maps the scaled multiplier back to the caller's row.
    scale: f64,
}

struct Lifted {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    ineqs: Vec<Ineq>,
}

impl Lifted {
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.hessian * z + &self.linear
    }
}

struct ActiveSetResult {
    z: DVector<f64>,
    working: Vec<usize>,
    multipliers: Vec<f64>,
    iterations: usize,
}

/// Primal active-set iterations from a feasible `z` whose working set holds
/// with equality and is linearly independent.
fn active_set(
    lifted: &Lifted,
    mut z: DVector<f64>,
    mut working: Vec<usize>,
    max_iter: usize,
) -> Result<ActiveSetResult> {
    let n = z.len();
    for iter in 0..max_iter {
        let grad = lifted.gradient(&z);
        let m = working.len();
        let mut kkt = DMatrix::<f64>::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&lifted.hessian);
        for (r, &i) in working.iter().enumerate() {
            let a = &lifted.ineqs[i].normal;
            for c in 0..n {
                kkt[(n + r, c)] = a[c];
                kkt[(c, n + r)] = a[c];
            }
        }
        let mut rhs = DVector::<f64>::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&grad));
        let sol = kkt
            .full_piv_lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SolverFailure("singular KKT system".into()))?;
        let p = sol.rows(0, n).into_owned();
        let lambda: Vec<f64> = sol.rows(n, m).iter().copied().collect();

        if p.amax() > STEP_TOL * (1.0 + z.amax()) {
            let p_norm = p.norm();
            let mut step = 1.0;
            let mut blocking = None;
            for (i, ineq) in lifted.ineqs.iter().enumerate() {
                if working.binary_search(&i).is_ok() {
                    continue;
                }
                let ap = ineq.normal.dot(&p);
                if ap > BLOCKING_TOL * p_norm {
                    let ratio = ((ineq.bound - ineq.normal.dot(&z)) / ap).max(0.0);
                    if ratio < step {
                        step = ratio;
                        blocking = Some(i);
                    }
                }
            }
            z += p * step;
            if let Some(i) = blocking {
                let pos = working.binary_search(&i).unwrap_err();
                working.insert(pos, i);
                continue;
            }
            // A full step lands on the minimizer of the working-set
            // subproblem, and `lambda` already holds its multipliers.
        }

        // Stationary on the working set. Dropping the lowest-indexed negative
        // multiplier (Bland's rule) rules out cycling at degenerate vertices
        // where many rows are tight at once.
        match lambda.iter().position(|&l| l < -DUAL_TOL) {
            None => {
                let mut multipliers = vec![0.0; lifted.ineqs.len()];
                for (r, &i) in working.iter().enumerate() {
                    multipliers[i] = lambda[r];
                }
                return Ok(ActiveSetResult {
                    z,
                    working,
                    multipliers,
                    iterations: iter + 1,
                });
            }
            Some(r) => {
                working.remove(r);
            }
        }
    }
    Err(Error::SolverFailure(format!(
        "no convergence within {max_iter} iterations"
    )))
}

fn slack_scale(row: &QpRow) -> f64 {
    let n = row.coeff.norm();
    if n > 0.0 {
        n
    } else {
        1.0
    }
}

fn to_na(v: Vec3) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(v.x, v.y, v.z)
}

/// Scaled inequality from raw coefficients; `None` when every coefficient
/// vanishes.
fn ineq(normal: DVector<f64>, bound: f64) -> Option<Ineq> {
    let norm = normal.norm();
    (norm > 0.0).then(|| Ineq {
        normal: normal / norm,
        bound: bound / norm,
        scale: 1.0 / norm,
    })
}

/// Finds a point satisfying the hard rows, close to the nominal, or reports
/// the rows that conflict.
fn phase_one(problem: &QpProblem, hard: &[usize], max_iter: usize) -> Result<Vec3> {
    let h = hard.len();
    let n = 3 + h;
    let nominal = to_na(problem.nominal);
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    let mut linear = DVector::<f64>::zeros(n);
    for d in 0..3 {
        hessian[(d, d)] = 2.0 * PHASE1_PROXIMITY;
        linear[d] = -2.0 * PHASE1_PROXIMITY * nominal[d];
    }
    let mut ineqs = Vec::with_capacity(2 * h);
    let mut z = DVector::<f64>::zeros(n);
    z.rows_mut(0, 3).copy_from(&nominal);
    let mut working = Vec::new();
    let mut owner = Vec::new();
    for (t, &k) in hard.iter().enumerate() {
        let row = &problem.rows[k];
        let mut a = DVector::<f64>::zeros(n);
        a.rows_mut(0, 3).copy_from(&to_na(row.coeff));
        a[3 + t] = -1.0;
        ineqs.push(ineq(a, row.rhs).expect("slack column is non-zero"));
        owner.push(k);
    }
    for t in 0..h {
        hessian[(3 + t, 3 + t)] = 2.0 * PHASE1_PROXIMITY;
        linear[3 + t] = 1.0;
        let mut a = DVector::<f64>::zeros(n);
        a[3 + t] = -1.0;
        ineqs.push(ineq(a, 0.0).unwrap());
        let viol = problem.rows[hard[t]].coeff.dot(problem.nominal) - problem.rows[hard[t]].rhs;
        if viol > 0.0 {
            z[3 + t] = viol;
            working.push(t);
        } else {
            working.push(h + t);
        }
    }
    working.sort_unstable();
    let lifted = Lifted {
        hessian,
        linear,
        ineqs,
    };
    let res = active_set(&lifted, z, working, max_iter)?;

    let accel = Vec3::new(res.z[0], res.z[1], res.z[2]);
    let mut conflicting = Vec::new();
    for (t, &k) in hard.iter().enumerate() {
        let row = &problem.rows[k];
        let excess = row.coeff.dot(accel) - row.rhs;
        if excess > PRIMAL_TOL * row.rhs.abs().max(1.0) {
            conflicting.push(k);
        } else if res.working.binary_search(&t).is_ok() && res.multipliers[t] > DUAL_TOL {
            // tight and pushing against a violated row
            conflicting.push(k);
        }
    }
    let infeasible = hard.iter().any(|&k| {
        let row = &problem.rows[k];
        row.coeff.dot(accel) - row.rhs > PRIMAL_TOL * row.rhs.abs().max(1.0)
    });
    if infeasible {
        conflicting.sort_unstable();
        conflicting.dedup();
        return Err(Error::Infeasible { rows: conflicting });
    }
    debug_assert_eq!(owner.len(), h);
    Ok(accel)
}

/// Solves the relaxed safety QP to its unique global optimum.
pub fn solve(problem: &QpProblem) -> Result<QpSolution> {
    problem.check()?;
    let m = problem.rows.len();
    let max_iter = 100 * (m + 3);

    for (k, row) in problem.rows.iter().enumerate() {
        if !row.relaxable && row.coeff.norm_squared() == 0.0 && row.rhs < 0.0 {
            return Err(Error::Infeasible { rows: vec![k] });
        }
    }

    let nominal_feasible = problem
        .rows
        .iter()
        .all(|row| row.coeff.dot(problem.nominal) <= row.rhs);
    if nominal_feasible {
        let mut sol = QpSolution {
            accel: problem.nominal,
            slacks: vec![0.0; m],
            multipliers: vec![0.0; m],
            active_set: Vec::new(),
            objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
        };
        sol.kkt_residual = verify_kkt(problem, &sol);
        return Ok(sol);
    }

    let hard: Vec<usize> = (0..m)
        .filter(|&k| !problem.rows[k].relaxable && problem.rows[k].coeff.norm_squared() > 0.0)
        .collect();
    let start = if hard
        .iter()
        .any(|&k| problem.rows[k].coeff.dot(problem.nominal) > problem.rows[k].rhs)
    {
        phase_one(problem, &hard, max_iter)?
    } else {
        problem.nominal
    };

    // Lifted variable layout: [a (3), scaled slack of each relaxable row].
    // A row's slack is carried as d_k / |c_k| so that every lifted
    // coordinate lives in acceleration units.
    let slack_col: Vec<Option<usize>> = {
        let mut next = 3;
        problem
            .rows
            .iter()
            .map(|r| {
                r.relaxable.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let n = 3 + slack_col.iter().flatten().count();

    let w2 = problem.weight_matrix * 2.0;
    let nominal = to_na(problem.nominal);
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    hessian.view_mut((0, 0), (3, 3)).copy_from(&w2);
    let mut linear = DVector::<f64>::zeros(n);
    linear.rows_mut(0, 3).copy_from(&(-(w2 * nominal)));

    let mut z = DVector::<f64>::zeros(n);
    z.rows_mut(0, 3).copy_from(&to_na(start));

    // Constraint indices: row k -> k, slack bound of row k -> m + k.
    let mut ineqs: Vec<Option<Ineq>> = vec![None; 2 * m];
    let mut working = Vec::new();
    for (k, row) in problem.rows.iter().enumerate() {
        let mut a = DVector::<f64>::zeros(n);
        a.rows_mut(0, 3).copy_from(&to_na(row.coeff));
        if let Some(col) = slack_col[k] {
            let sigma = slack_scale(row);
            a[col] = -sigma;
            hessian[(col, col)] = 2.0 * problem.slack_reg * sigma * sigma;
            linear[col] = row.slack_weight * sigma;

            let mut bound = DVector::<f64>::zeros(n);
            bound[col] = -1.0;
            ineqs[m + k] = ineq(bound, 0.0);

            let viol = row.coeff.dot(start) - row.rhs;
            if viol > 0.0 {
                z[col] = viol / sigma;
                working.push(k);
            } else {
                working.push(m + k);
            }
        }
        ineqs[k] = ineq(a, row.rhs);
    }
    working.sort_unstable();

    // Vacuous hard rows (zero coefficients, non-negative rhs) never bind; keep
    // indices stable by parking them as unreachable constraints.
    let placeholder = || Ineq {
        normal: DVector::zeros(n),
        bound: f64::INFINITY,
        scale: 0.0,
    };
    let ineqs: Vec<Ineq> = ineqs
        .into_iter()
        .map(|i| i.unwrap_or_else(placeholder))
        .collect();
    let lifted = Lifted {
        hessian,
        linear,
        ineqs,
    };
    let res = active_set(&lifted, z, working, max_iter)?;

    let accel = Vec3::new(res.z[0], res.z[1], res.z[2]);
    let slacks: Vec<f64> = slack_col
        .iter()
        .enumerate()
        .map(|(k, c)| match c {
            Some(_) if res.working.binary_search(&(m + k)).is_ok() => 0.0,
            Some(col) => (res.z[*col] * slack_scale(&problem.rows[k])).max(0.0),
            None => 0.0,
        })
        .collect();
    let multipliers: Vec<f64> = (0..m)
        .map(|k| res.multipliers[k] * lifted.ineqs[k].scale)
        .collect();
    let active_set: Vec<usize> = res.working.iter().copied().filter(|&i| i < m).collect();
    let mut sol = QpSolution {
        accel,
        objective: problem.objective(accel, &slacks),
        slacks,
        multipliers,
        active_set,
        kkt_residual: 0.0,
        iterations: res.iterations,
    };
    sol.kkt_residual = verify_kkt(problem, &sol);
    Ok(sol)
}

/// Largest violation among the optimality conditions of `solution`.
///
/// Each condition is measured relative to the magnitude of the terms it
/// balances (floored at 1), so problems with large constraint coefficients
/// are judged on the same footing as unit-scale ones:
/// - stationarity in `a`: `|2W(a - a_nom) + sum lambda_k c_k|`
/// - dual feasibility: `lambda_k >= 0`
/// - complementary slackness: `lambda_k (c_k.a - b_k - d_k) = 0`
/// - slack bound multiplier `mu_k = w_k + 2 rho d_k - lambda_k`: `mu_k >= 0`,
///   `mu_k d_k = 0`
/// - primal feasibility: `c_k.a <= b_k + d_k`, `d_k >= 0`, `d_k = 0` on hard rows
pub fn verify_kkt(problem: &QpProblem, solution: &QpSolution) -> f64 {
    let a = solution.accel;
    let deviation = problem.weight_matrix * to_na(a - problem.nominal) * 2.0;
    let mut stationarity = deviation;
    let mut magnitude = deviation.norm();
    let mut residual: f64 = 0.0;
    for (k, row) in problem.rows.iter().enumerate() {
        let lambda = solution.multipliers.get(k).copied().unwrap_or(0.0);
        let slack = solution.slacks.get(k).copied().unwrap_or(0.0);
        let c = to_na(row.coeff);
        stationarity += c * lambda;
        magnitude = magnitude.max((c * lambda).norm());

        let lhs = row.coeff.dot(a);
        let row_scale = lhs.abs().max(row.rhs.abs()).max(slack.abs()).max(1.0);
        let gap = lhs - row.rhs - slack;
        residual = residual.max(-lambda / row.slack_weight.max(1.0));
        residual = residual.max((lambda * gap).abs() / (row_scale * lambda.abs().max(1.0)));
        residual = residual.max(gap / row_scale);
        if row.relaxable {
            let price = row.slack_weight + 2.0 * problem.slack_reg * slack;
            let mu = price - lambda;
            let mu_scale = price.max(lambda.abs()).max(1.0);
            residual = residual.max(-mu / mu_scale);
            residual = residual.max((mu * slack).abs() / (mu_scale * slack.abs().max(1.0)));
            residual = residual.max(-slack / row_scale);
        } else {
            residual = residual.max(slack.abs() / row_scale);
        }
    }
    residual.max(stationarity.norm() / magnitude.max(1.0))
}
