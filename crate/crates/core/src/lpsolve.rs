//! Bounded-variable revised simplex with dual extraction.
//!
//! Problems are `min c·x` subject to `A_eq x = b_eq`, `A_ub x ≤ b_ub` and
//! `lb ≤ x ≤ ub` (infinite bounds allowed). Inequality rows get a slack
//! column, every row that the starting point leaves infeasible gets an
//! artificial column, and a two-phase primal simplex runs over an explicit
//! basis inverse refreshed from an LU factorisation every few dozen pivots.
//!
//! Dual conventions: `y_eq[i] = ∂objective/∂b_eq[i]`; `y_ub[k] ≥ 0` is the
//! price of tightening row `k`, i.e. `−∂objective/∂b_ub[k]`. Stationarity
//! reads `c = A_eqᵀ y_eq − A_ubᵀ y_ub + z`, with `z` the bound reduced costs.

use crate::linalg::{dot, Lu, Matrix};
use crate::scalar::Scalar;

/// Pivots between basis refactorisations.
const REFACTOR_EVERY: usize = 48;
/// Non-improving pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub c: Vec<T>,
    pub a_eq: Vec<Vec<T>>,
    pub b_eq: Vec<T>,
    pub a_ub: Vec<Vec<T>>,
    pub b_ub: Vec<T>,
    pub lb: Vec<T>,
    pub ub: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    /// `min c·x` over `x ≥ 0` with no rows yet.
    pub fn minimize(c: Vec<T>) -> Self {
        let n = c.len();
        Self {
            c,
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            lb: vec![T::zero(); n],
            ub: vec![T::infinity(); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn with_bounds(mut self, j: usize, lb: T, ub: T) -> Self {
        self.lb[j] = lb;
        self.ub[j] = ub;
        self
    }

    pub fn eq(mut self, row: Vec<T>, rhs: T) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn le(mut self, row: Vec<T>, rhs: T) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn ge(self, row: Vec<T>, rhs: T) -> Self {
        let neg = row.into_iter().map(|v| -v).collect();
        self.le(neg, -rhs)
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.c.len();
        let dim = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(LpError::Dimension(format!("{what} has length {got}, expected {want}")))
            }
        };
        dim("lb", self.lb.len(), n)?;
        dim("ub", self.ub.len(), n)?;
        dim("b_eq", self.b_eq.len(), self.a_eq.len())?;
        dim("b_ub", self.b_ub.len(), self.a_ub.len())?;
        for (i, r) in self.a_eq.iter().enumerate() {
            dim(&format!("A_eq row {i}"), r.len(), n)?;
        }
        for (i, r) in self.a_ub.iter().enumerate() {
            dim(&format!("A_ub row {i}"), r.len(), n)?;
        }
        let all_finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !all_finite(&self.c)
            || !all_finite(&self.b_eq)
            || !all_finite(&self.b_ub)
            || !self.a_eq.iter().all(|r| all_finite(r))
            || !self.a_ub.iter().all(|r| all_finite(r))
        {
            return Err(LpError::Dimension("coefficients must be finite".into()));
        }
        if self.lb.iter().chain(&self.ub).any(|v| v.is_nan()) {
            return Err(LpError::Dimension("bounds must not be NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub y_eq: Vec<T>,
    pub y_ub: Vec<T>,
    /// Reduced costs of the structural variables: positive at a lower
    /// bound, negative at an upper bound, zero when basic.
    pub z_bounds: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

impl<T: Scalar> LpSolution<T> {
    fn without_optimum(status: LpStatus, lp: &LinearProgram<T>, iterations: usize) -> Self {
        Self {
            status,
            x: Vec::new(),
            y_eq: vec![T::zero(); lp.a_eq.len()],
            y_ub: vec![T::zero(); lp.a_ub.len()],
            z_bounds: Vec::new(),
            objective: T::nan(),
            iterations,
        }
    }

    /// Dual objective: `b_eq·y_eq − b_ub·y_ub` plus each reduced cost times
    /// the bound it prices. Equals the primal objective at an optimum.
    pub fn dual_objective(&self, lp: &LinearProgram<T>) -> T {
        let bound_term = self
            .z_bounds
            .iter()
            .zip(lp.lb.iter().zip(&lp.ub))
            .map(|(&z, (&lb, &ub))| {
                if z > T::zero() {
                    z * lb
                } else if z < T::zero() {
                    z * ub
                } else {
                    T::zero()
                }
            })
            .fold(T::zero(), |a, b| a + b);
        dot(&lp.b_eq, &self.y_eq) - dot(&lp.b_ub, &self.y_ub) + bound_term
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic strictly inside its bounds (free variables, or a starting
    /// value of zero between finite bounds).
    Inside,
}

struct Simplex<T> {
    m: usize,
    cols: Vec<Vec<T>>,
    b: Vec<T>,
    lb: Vec<T>,
    ub: Vec<T>,
    x: Vec<T>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Matrix<T>,
    since_refactor: usize,
    iterations: usize,
    tol: T,
    pivot_tol: T,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Simplex<T> {
    fn column_dot(&self, y: &[T], j: usize) -> T {
        dot(&self.cols[j], y)
    }

    fn basic_costs(&self, cost: &[T]) -> Vec<T> {
        self.basis.iter().map(|&j| cost[j]).collect()
    }

    fn refactor(&mut self) -> Result<Lu<T>, LpError> {
        let mut bmat = Matrix::zeros(self.m, self.m);
        for (p, &j) in self.basis.iter().enumerate() {
            for i in 0..self.m {
                bmat[(i, p)] = self.cols[j][i];
            }
        }
        let lu = Lu::factor(&bmat)
            .map_err(|e| LpError::NumericalFailure(format!("basis became singular ({e})")))?;
        self.binv = lu.inverse();
        // Recompute basic values from the nonbasic ones.
        let mut rhs = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != State::Basic && self.x[j] != T::zero() {
                for i in 0..self.m {
                    rhs[i] -= col[i] * self.x[j];
                }
            }
        }
        let xb = lu.solve(&rhs);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
        self.since_refactor = 0;
        Ok(lu)
    }

    fn run_phase(&mut self, cost: &[T], max_iter: usize) -> Result<PhaseEnd, LpError> {
        let mut bland = false;
        let mut stall = 0usize;
        let mut best_obj = T::infinity();
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::NumericalFailure(format!(
                    "no convergence after {} simplex iterations",
                    self.iterations
                )));
            }
            let cb = self.basic_costs(cost);
            let y = self.binv.tr_mul_vec(&cb);

            // Pricing.
            let mut entering: Option<(usize, T, T)> = None; // (col, |d|, direction)
            for j in 0..self.cols.len() {
                let st = self.state[j];
                if st == State::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = cost[j] - self.column_dot(&y, j);
                let dir = match st {
                    State::Lower if d < -self.tol => T::one(),
                    State::Upper if d > self.tol => -T::one(),
                    State::Inside if d.abs() > self.tol => {
                        if d < T::zero() {
                            T::one()
                        } else {
                            -T::one()
                        }
                    }
                    _ => continue,
                };
                let score = d.abs();
                let better = match entering {
                    None => true,
                    Some(_) if bland => false,
                    Some((_, s, _)) => score > s,
                };
                if better {
                    entering = Some((j, score, dir));
                }
            }
            let Some((q, _, dir)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let w = self.binv.mul_vec(&self.cols[q]);

            // Ratio test.
            let own_range = if dir > T::zero() {
                self.ub[q] - self.x[q]
            } else {
                self.x[q] - self.lb[q]
            };
            let mut step = own_range.max(T::zero());
            let mut leave: Option<(usize, bool)> = None; // (basis position, hits upper)
            let mut leave_mag = T::zero();
            for p in 0..self.m {
                let delta = dir * w[p];
                if delta.abs() <= self.pivot_tol {
                    continue;
                }
                let j = self.basis[p];
                let (ratio, to_upper) = if delta > T::zero() {
                    if self.lb[j].is_infinite() {
                        continue;
                    }
                    ((self.x[j] - self.lb[j]) / delta, false)
                } else {
                    if self.ub[j].is_infinite() {
                        continue;
                    }
                    ((self.ub[j] - self.x[j]) / -delta, true)
                };
                let ratio = ratio.max(T::zero());
                let mag = w[p].abs();
                let take = if ratio < step - self.tol {
                    true
                } else if ratio <= step + self.tol {
                    match leave {
                        None => ratio <= step,
                        Some((lp, _)) => {
                            if bland {
                                j < self.basis[lp]
                            } else {
                                mag > leave_mag
                            }
                        }
                    }
                } else {
                    false
                };
                if take {
                    step = step.min(ratio);
                    leave = Some((p, to_upper));
                    leave_mag = mag;
                }
            }
            if step.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }
            if let Some((p, _)) = leave {
                // Re-read the exact ratio of the chosen row so values land
                // on the bound.
                let j = self.basis[p];
                let delta = dir * w[p];
                let exact = if delta > T::zero() {
                    (self.x[j] - self.lb[j]) / delta
                } else {
                    (self.ub[j] - self.x[j]) / -delta
                };
                step = exact.max(T::zero());
            }

            // Move.
            for p in 0..self.m {
                let j = self.basis[p];
                self.x[j] -= step * dir * w[p];
            }
            self.x[q] += step * dir;
            self.iterations += 1;

            match leave {
                None => {
                    // Bound flip, the basis is unchanged.
                    if dir > T::zero() {
                        self.x[q] = self.ub[q];
                        self.state[q] = State::Upper;
                    } else {
                        self.x[q] = self.lb[q];
                        self.state[q] = State::Lower;
                    }
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    if to_upper {
                        self.x[out] = self.ub[out];
                        self.state[out] = State::Upper;
                    } else {
                        self.x[out] = self.lb[out];
                        self.state[out] = State::Lower;
                    }
                    self.basis[r] = q;
                    self.state[q] = State::Basic;
                    let piv = w[r];
                    {
                        let row = self.binv.row_mut(r);
                        for v in row.iter_mut() {
                            *v /= piv;
                        }
                    }
                    let pivot_row = self.binv.row(r).to_vec();
                    for i in 0..self.m {
                        if i == r || w[i] == T::zero() {
                            continue;
                        }
                        let f = w[i];
                        for (v, &pr) in self.binv.row_mut(i).iter_mut().zip(&pivot_row) {
                            *v -= f * pr;
                        }
                    }
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                    }
                }
            }

            let obj = dot(cost, &self.x);
            if obj < best_obj - self.tol * (T::one() + best_obj.abs()) {
                best_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall >= STALL_LIMIT {
                    bland = true;
                }
            }
        }
    }
}

pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    lp.check()?;
    let n = lp.c.len();
    let me = lp.a_eq.len();
    let mu = lp.a_ub.len();
    let m = me + mu;
    let tol = T::solver_eps();

    if lp.lb.iter().zip(&lp.ub).any(|(l, u)| l > u) {
        return Ok(LpSolution::without_optimum(LpStatus::Infeasible, lp, 0));
    }

    // Column layout: structural | slacks | artificials.
    let n_tot = n + mu + m;
    let mut cols = vec![vec![T::zero(); m]; n_tot];
    for j in 0..n {
        for i in 0..me {
            cols[j][i] = lp.a_eq[i][j];
        }
        for k in 0..mu {
            cols[j][me + k] = lp.a_ub[k][j];
        }
    }
    for k in 0..mu {
        cols[n + k][me + k] = T::one();
    }
    let mut lb = lp.lb.clone();
    let mut ub = lp.ub.clone();
    lb.extend(std::iter::repeat_n(T::zero(), mu + m));
    ub.extend(std::iter::repeat_n(T::infinity(), mu));
    ub.extend(std::iter::repeat_n(T::zero(), m));
    let mut b = lp.b_eq.clone();
    b.extend_from_slice(&lp.b_ub);

    let mut x = vec![T::zero(); n_tot];
    let mut state = vec![State::Lower; n_tot];
    for j in 0..n {
        let v = T::zero().max(lb[j]).min(ub[j]);
        x[j] = v;
        state[j] = if v == lb[j] {
            State::Lower
        } else if v == ub[j] {
            State::Upper
        } else {
            State::Inside
        };
    }

    let mut resid = b.clone();
    for j in 0..n {
        if x[j] != T::zero() {
            for i in 0..m {
                resid[i] -= cols[j][i] * x[j];
            }
        }
    }
    let mut basis = Vec::with_capacity(m);
    let mut binv = Matrix::zeros(m, m);
    let mut phase1_cost = vec![T::zero(); n_tot];
    for i in 0..m {
        let art = n + mu + i;
        if i >= me && resid[i] >= T::zero() {
            let s = n + (i - me);
            basis.push(s);
            state[s] = State::Basic;
            x[s] = resid[i];
            binv[(i, i)] = T::one();
        } else {
            let sign = if resid[i] < T::zero() { -T::one() } else { T::one() };
            cols[art][i] = sign;
            ub[art] = T::infinity();
            basis.push(art);
            state[art] = State::Basic;
            x[art] = resid[i].abs();
            binv[(i, i)] = sign;
            phase1_cost[art] = T::one();
        }
    }

    let mut sx = Simplex {
        m,
        cols,
        b,
        lb,
        ub,
        x,
        state,
        basis,
        binv,
        since_refactor: 0,
        iterations: 0,
        tol,
        pivot_tol: tol * T::of(1e-2),
    };
    let max_iter = 50 * (n_tot + m) + 1000;

    let scale = T::one() + sx.b.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    if phase1_cost.iter().any(|&c| c > T::zero()) {
        match sx.run_phase(&phase1_cost, max_iter)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(LpError::NumericalFailure(
                    "phase one reported an unbounded ray".into(),
                ))
            }
        }
        sx.refactor()?;
        let infeas: T = (n + mu..n_tot).map(|j| sx.x[j].abs()).sum();
        if infeas > tol * scale {
            return Ok(LpSolution::without_optimum(LpStatus::Infeasible, lp, sx.iterations));
        }
    }
    for j in n + mu..n_tot {
        sx.ub[j] = T::zero();
        if sx.state[j] != State::Basic {
            sx.x[j] = T::zero();
            sx.state[j] = State::Lower;
        }
    }

    let mut cost = lp.c.clone();
    cost.extend(std::iter::repeat_n(T::zero(), mu + m));
    match sx.run_phase(&cost, max_iter)? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => {
            return Ok(LpSolution::without_optimum(LpStatus::Unbounded, lp, sx.iterations));
        }
    }

    let lu = sx.refactor()?;
    let y = lu.solve_transposed(&sx.basic_costs(&cost));

    // Clamp basic values that drifted past a bound by rounding.
    for &j in &sx.basis {
        if sx.x[j] < sx.lb[j] && sx.x[j] > sx.lb[j] - tol * scale {
            sx.x[j] = sx.lb[j];
        }
        if sx.x[j] > sx.ub[j] && sx.x[j] < sx.ub[j] + tol * scale {
            sx.x[j] = sx.ub[j];
        }
    }
    let residual = (0..m)
        .map(|i| {
            let ax: T = (0..n_tot).map(|j| sx.cols[j][i] * sx.x[j]).sum();
            (ax - sx.b[i]).abs()
        })
        .fold(T::zero(), T::max);
    if residual > T::of(1e3) * tol * scale {
        return Err(LpError::NumericalFailure(format!(
            "primal residual {residual} after final refactorisation"
        )));
    }

    let x: Vec<T> = sx.x[..n].to_vec();
    let z_bounds = (0..n)
        .map(|j| {
            if sx.state[j] == State::Basic {
                T::zero()
            } else {
                lp.c[j] - dot(&sx.cols[j], &y)
            }
        })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: dot(&lp.c, &x),
        x,
        y_eq: y[..me].to_vec(),
        y_ub: y[me..].iter().map(|&v| -v).collect(),
        z_bounds,
        iterations: sx.iterations,
    })
}
