//! Newton–Raphson AC power flow in polar coordinates, plus the loss and
//! branch-flow sensitivities of a solved operating point.
//!
//! All non-slack buses are PQ. Solves always start flat (1.0 pu, 0 rad) and
//! use a full Jacobian refactorisation per iteration, so identical inputs
//! give bitwise-identical results.

use num_complex::Complex;

use crate::linalg::{norm_inf, Lu, Matrix};
use crate::netmodel::{branch_admittance, build_admittance, ComplexNodalMatrix, NetError, Network};
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 30;
pub const TOLERANCE_PU: f64 = 1e-8;

/// Net injections per bus (generation minus load). The slack entry of
/// `p_mw`/`q_mvar` is ignored by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSet<T> {
    pub p_mw: Vec<T>,
    pub q_mvar: Vec<T>,
}

impl<T: Scalar> InjectionSet<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            p_mw: vec![T::zero(); n],
            q_mvar: vec![T::zero(); n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution<T> {
    pub v_mag: Vec<T>,
    pub v_ang: Vec<T>,
    pub branch_p_from_mw: Vec<T>,
    pub branch_p_to_mw: Vec<T>,
    /// Injections implied by the final voltages (the slack entry is the
    /// slack unit's output).
    pub p_injection_mw: Vec<T>,
    pub q_injection_mvar: Vec<T>,
    pub total_loss_mw: T,
    pub iterations: usize,
    pub converged: bool,
    pub max_mismatch_pu: T,
}

#[derive(Debug, thiserror::Error)]
pub enum PowerFlowError {
    #[error(transparent)]
    Network(#[from] NetError),
    #[error("injection set has {got} entries, network has {expected} buses")]
    Dimension { expected: usize, got: usize },
    #[error("singular system at iteration {iteration}")]
    Singular { iteration: usize },
    #[error("operating point is not a converged power flow solution")]
    NotConverged,
}

/// How voltage magnitudes respond when sensitivities are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoltageResponse {
    /// Reactive injections fixed, magnitudes float (the full AC response).
    Floating,
    /// Magnitudes held at the operating point, reactive injections absorb
    /// the change. Loss and flow sensitivities taken this way are mutually
    /// consistent in active power alone.
    Held,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tolerance_pu: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance_pu: TOLERANCE_PU,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

/// A validated network with its admittance matrix, reusable across solves.
#[derive(Debug, Clone)]
pub struct PowerFlowModel<'a, T> {
    net: &'a Network,
    ybus: ComplexNodalMatrix<T>,
    slack: usize,
    /// Non-slack bus indices in bus order.
    others: Vec<usize>,
    /// Position of each bus in `others`, `usize::MAX` for the slack.
    pos: Vec<usize>,
    branch_ends: Vec<(usize, usize)>,
    branch_y: Vec<[Complex<T>; 4]>,
}

impl<'a, T: Scalar> PowerFlowModel<'a, T> {
    pub fn new(net: &'a Network) -> Result<Self, PowerFlowError> {
        net.ensure_valid()?;
        let ybus = build_admittance::<T>(net)?;
        let slack = net.slack_index().expect("validated network has a slack");
        let n = net.n_buses();
        let others: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
        let mut pos = vec![usize::MAX; n];
        for (p, &i) in others.iter().enumerate() {
            pos[i] = p;
        }
        let idx = net.bus_index_map();
        let branch_ends = net
            .branches
            .iter()
            .map(|b| (idx[&b.from_bus], idx[&b.to_bus]))
            .collect();
        let branch_y = net
            .branches
            .iter()
            .map(|b| {
                let (a, b2, c, d) = branch_admittance::<T>(b);
                [a, b2, c, d]
            })
            .collect();
        Ok(Self {
            net,
            ybus,
            slack,
            others,
            pos,
            branch_ends,
            branch_y,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    fn base(&self) -> T {
        T::of(self.net.base_mva)
    }

    fn voltages(v_mag: &[T], v_ang: &[T]) -> Vec<Complex<T>> {
        v_mag
            .iter()
            .zip(v_ang)
            .map(|(&m, &a)| Complex::from_polar(m, a))
            .collect()
    }

    fn currents(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..v.len())
            .map(|i| {
                self.ybus
                    .row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex::new(T::zero(), T::zero()), |s, (&y, &vk)| s + y * vk)
            })
            .collect()
    }

    fn check_dims(&self, inj: &InjectionSet<T>) -> Result<(), PowerFlowError> {
        let n = self.net.n_buses();
        for len in [inj.p_mw.len(), inj.q_mvar.len()] {
            if len != n {
                return Err(PowerFlowError::Dimension {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    pub fn solve(&self, inj: &InjectionSet<T>) -> Result<PowerFlowSolution<T>, PowerFlowError> {
        self.solve_with(inj, SolveOptions::default())
    }

    pub fn solve_with(
        &self,
        inj: &InjectionSet<T>,
        opts: SolveOptions,
    ) -> Result<PowerFlowSolution<T>, PowerFlowError> {
        self.check_dims(inj)?;
        let n = self.net.n_buses();
        let base = self.base();
        let p_spec: Vec<T> = inj.p_mw.iter().map(|&p| p / base).collect();
        let q_spec: Vec<T> = inj.q_mvar.iter().map(|&q| q / base).collect();
        let mut v_mag = vec![T::one(); n];
        let mut v_ang = vec![T::zero(); n];
        let tol = T::of(opts.tolerance_pu);
        let m = self.others.len();

        let mut iterations = 0;
        let mut converged = false;
        let mut mismatch;
        loop {
            let v = Self::voltages(&v_mag, &v_ang);
            let cur = self.currents(&v);
            let mut f = vec![T::zero(); 2 * m];
            for (p, &i) in self.others.iter().enumerate() {
                let s = v[i] * cur[i].conj();
                f[p] = s.re - p_spec[i];
                f[m + p] = s.im - q_spec[i];
            }
            mismatch = norm_inf(&f);
            if mismatch < tol {
                converged = true;
                break;
            }
            if !mismatch.is_finite() || mismatch > T::of(1e10) || iterations >= opts.max_iterations {
                break;
            }
            let jac = self.jacobian(&v, &cur, VoltageResponse::Floating);
            let lu = Lu::factor(&jac).map_err(|_| PowerFlowError::Singular {
                iteration: iterations + 1,
            })?;
            let dx = lu.solve(&f);
            for (p, &i) in self.others.iter().enumerate() {
                v_ang[i] -= dx[p];
                v_mag[i] -= dx[m + p];
            }
            iterations += 1;
        }
        Ok(self.finish(v_mag, v_ang, iterations, converged, mismatch))
    }

    /// Active-power-only Newton solve with every magnitude pinned to
    /// `v_mag`. Reactive injections come out of the solution.
    pub fn solve_fixed_voltage(
        &self,
        p_mw: &[T],
        v_mag: &[T],
        opts: SolveOptions,
    ) -> Result<PowerFlowSolution<T>, PowerFlowError> {
        let n = self.net.n_buses();
        if p_mw.len() != n || v_mag.len() != n {
            return Err(PowerFlowError::Dimension {
                expected: n,
                got: p_mw.len().min(v_mag.len()),
            });
        }
        let base = self.base();
        let v_mag = v_mag.to_vec();
        let mut v_ang = vec![T::zero(); n];
        let tol = T::of(opts.tolerance_pu);
        let m = self.others.len();
        let mut iterations = 0;
        let mut converged = false;
        let mut mismatch;
        loop {
            let v = Self::voltages(&v_mag, &v_ang);
            let cur = self.currents(&v);
            let f: Vec<T> = self
                .others
                .iter()
                .map(|&i| (v[i] * cur[i].conj()).re - p_mw[i] / base)
                .collect();
            mismatch = norm_inf(&f);
            if mismatch < tol {
                converged = true;
                break;
            }
            if !mismatch.is_finite() || iterations >= opts.max_iterations {
                break;
            }
            let jac = self.jacobian(&v, &cur, VoltageResponse::Held);
            debug_assert_eq!(jac.rows(), m);
            let lu = Lu::factor(&jac).map_err(|_| PowerFlowError::Singular {
                iteration: iterations + 1,
            })?;
            let dx = lu.solve(&f);
            for (p, &i) in self.others.iter().enumerate() {
                v_ang[i] -= dx[p];
            }
            iterations += 1;
        }
        Ok(self.finish(v_mag, v_ang, iterations, converged, mismatch))
    }

    fn finish(
        &self,
        v_mag: Vec<T>,
        v_ang: Vec<T>,
        iterations: usize,
        converged: bool,
        mismatch: T,
    ) -> PowerFlowSolution<T> {
        let base = self.base();
        let v = Self::voltages(&v_mag, &v_ang);
        let cur = self.currents(&v);
        let s: Vec<Complex<T>> = v.iter().zip(&cur).map(|(&vi, &ii)| vi * ii.conj()).collect();
        let mut p_from = Vec::with_capacity(self.branch_ends.len());
        let mut p_to = Vec::with_capacity(self.branch_ends.len());
        let mut loss = T::zero();
        for (k, &(f, t)) in self.branch_ends.iter().enumerate() {
            let [y_ff, y_ft, y_tf, y_tt] = self.branch_y[k];
            let sf = v[f] * (y_ff * v[f] + y_ft * v[t]).conj();
            let st = v[t] * (y_tf * v[f] + y_tt * v[t]).conj();
            p_from.push(sf.re * base);
            p_to.push(st.re * base);
            loss += (sf.re + st.re) * base;
        }
        PowerFlowSolution {
            v_mag,
            v_ang,
            branch_p_from_mw: p_from,
            branch_p_to_mw: p_to,
            p_injection_mw: s.iter().map(|c| c.re * base).collect(),
            q_injection_mvar: s.iter().map(|c| c.im * base).collect(),
            total_loss_mw: loss,
            iterations,
            converged,
            max_mismatch_pu: mismatch,
        }
    }

    /// Partial derivatives of complex injections: `(dS/dθ, dS/d|V|)` as
    /// dense n×n arrays.
    fn ds_dv(&self, v: &[Complex<T>], cur: &[Complex<T>]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let n = v.len();
        let j = Complex::new(T::zero(), T::one());
        let vn: Vec<Complex<T>> = v.iter().map(|c| c / c.norm()).collect();
        let mut d_ang = vec![Complex::new(T::zero(), T::zero()); n * n];
        let mut d_mag = d_ang.clone();
        for i in 0..n {
            let row = self.ybus.row(i);
            for k in 0..n {
                let y = row[k];
                let mut a = -(y * v[k]).conj();
                if i == k {
                    a = a + cur[i].conj();
                }
                d_ang[i * n + k] = j * v[i] * a;
                let mut m = v[i] * (y * vn[k]).conj();
                if i == k {
                    m = m + cur[i].conj() * vn[i];
                }
                d_mag[i * n + k] = m;
            }
        }
        (d_ang, d_mag)
    }

    fn jacobian(&self, v: &[Complex<T>], cur: &[Complex<T>], mode: VoltageResponse) -> Matrix<T> {
        let n = v.len();
        let (d_ang, d_mag) = self.ds_dv(v, cur);
        let m = self.others.len();
        match mode {
            VoltageResponse::Held => {
                let mut jac = Matrix::zeros(m, m);
                for (r, &i) in self.others.iter().enumerate() {
                    for (c, &k) in self.others.iter().enumerate() {
                        jac[(r, c)] = d_ang[i * n + k].re;
                    }
                }
                jac
            }
            VoltageResponse::Floating => {
                let mut jac = Matrix::zeros(2 * m, 2 * m);
                for (r, &i) in self.others.iter().enumerate() {
                    for (c, &k) in self.others.iter().enumerate() {
                        jac[(r, c)] = d_ang[i * n + k].re;
                        jac[(r, m + c)] = d_mag[i * n + k].re;
                        jac[(m + r, c)] = d_ang[i * n + k].im;
                        jac[(m + r, m + c)] = d_mag[i * n + k].im;
                    }
                }
                jac
            }
        }
    }

    fn state_gradient(&self, d_ang: &[T], d_mag: &[T], mode: VoltageResponse) -> Vec<T> {
        let m = self.others.len();
        let width = match mode {
            VoltageResponse::Held => m,
            VoltageResponse::Floating => 2 * m,
        };
        let mut g = vec![T::zero(); width];
        for (c, &k) in self.others.iter().enumerate() {
            g[c] = d_ang[k];
            if mode == VoltageResponse::Floating {
                g[m + c] = d_mag[k];
            }
        }
        g
    }

    fn linearise(
        &self,
        sol: &PowerFlowSolution<T>,
        mode: VoltageResponse,
    ) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>, Lu<T>), PowerFlowError> {
        if !sol.converged {
            return Err(PowerFlowError::NotConverged);
        }
        let v = Self::voltages(&sol.v_mag, &sol.v_ang);
        let cur = self.currents(&v);
        let jac = self.jacobian(&v, &cur, mode);
        let lu = Lu::factor(&jac).map_err(|_| PowerFlowError::Singular { iteration: 0 })?;
        Ok((v, cur, lu))
    }

    /// `∂P_loss/∂P_i` per bus for an injection at `i` balanced by the slack.
    /// Computed with one adjoint solve `Jᵀ w = ∇P_slack`. The slack entry is 0.
    pub fn loss_sensitivities(
        &self,
        sol: &PowerFlowSolution<T>,
        mode: VoltageResponse,
    ) -> Result<Vec<T>, PowerFlowError> {
        let (v, cur, lu) = self.linearise(sol, mode)?;
        let n = v.len();
        let (d_ang, d_mag) = self.ds_dv(&v, &cur);
        let s = self.slack;
        let ang_row: Vec<T> = (0..n).map(|k| d_ang[s * n + k].re).collect();
        let mag_row: Vec<T> = (0..n).map(|k| d_mag[s * n + k].re).collect();
        let grad = self.state_gradient(&ang_row, &mag_row, mode);
        let w = lu.solve_transposed(&grad);
        let mut out = vec![T::zero(); n];
        for (p, &i) in self.others.iter().enumerate() {
            out[i] = T::one() + w[p];
        }
        Ok(out)
    }

    /// Branch × bus matrix of `∂p_from_k/∂P_i`, slack-referenced (the slack
    /// column is zero).
    pub fn shift_factors(
        &self,
        sol: &PowerFlowSolution<T>,
        mode: VoltageResponse,
    ) -> Result<Matrix<T>, PowerFlowError> {
        let (v, _cur, lu) = self.linearise(sol, mode)?;
        let n = v.len();
        let nb = self.branch_ends.len();
        let m = self.others.len();
        let width = lu.dim();
        let j = Complex::new(T::zero(), T::one());

        // Gradient of each branch's from-end active flow w.r.t. the state.
        let mut grads = Matrix::zeros(nb, width);
        for (k, &(f, t)) in self.branch_ends.iter().enumerate() {
            let [y_ff, y_ft, _, _] = self.branch_y[k];
            let i_f = y_ff * v[f] + y_ft * v[t];
            let vn_f = v[f] / v[f].norm();
            let vn_t = v[t] / v[t].norm();
            let cross = v[f] * (y_ft * v[t]).conj();
            let d_ang_f = (j * cross).re;
            let d_ang_t = (-j * cross).re;
            let d_mag_f = (vn_f * i_f.conj() + v[f] * (y_ff * vn_f).conj()).re;
            let d_mag_t = (v[f] * (y_ft * vn_t).conj()).re;
            let row = grads.row_mut(k);
            for (bus, da, dm) in [(f, d_ang_f, d_mag_f), (t, d_ang_t, d_mag_t)] {
                let p = self.pos[bus];
                if p == usize::MAX {
                    continue;
                }
                row[p] += da;
                if mode == VoltageResponse::Floating {
                    row[m + p] += dm;
                }
            }
        }

        let mut sf = Matrix::zeros(nb, n);
        let mut e = vec![T::zero(); width];
        for (p, &i) in self.others.iter().enumerate() {
            e[p] = T::one();
            let dx = lu.solve(&e);
            e[p] = T::zero();
            for k in 0..nb {
                sf[(k, i)] = crate::linalg::dot(grads.row(k), &dx);
            }
        }
        Ok(sf)
    }
}

pub fn solve_ac<T: Scalar>(
    net: &Network,
    inj: &InjectionSet<T>,
) -> Result<PowerFlowSolution<T>, PowerFlowError> {
    PowerFlowModel::new(net)?.solve(inj)
}

/// Full AC loss sensitivities (reactive injections held fixed).
pub fn loss_sensitivities<T: Scalar>(
    net: &Network,
    sol: &PowerFlowSolution<T>,
) -> Result<Vec<T>, PowerFlowError> {
    PowerFlowModel::new(net)?.loss_sensitivities(sol, VoltageResponse::Floating)
}

/// Full AC shift factors (reactive injections held fixed).
pub fn shift_factors<T: Scalar>(
    net: &Network,
    sol: &PowerFlowSolution<T>,
) -> Result<Matrix<T>, PowerFlowError> {
    PowerFlowModel::new(net)?.shift_factors(sol, VoltageResponse::Floating)
}
