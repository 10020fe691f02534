//! Nodal pricing by sequential linear programming around AC power flows.
//!
//! Each pass linearises losses and branch flows at the latest AC operating
//! point, solves an active-power dispatch LP, and re-runs the power flow at
//! the new dispatch. Prices are read from the final LP's duals:
//!
//! `lmp_i = λ·(1 − LF_i) − Σ_k (μ⁺_k − μ⁻_k)·SF_ki`
//!
//! where `λ` is the balance dual, `LF_i = ∂P_loss/∂P_i`, `SF_ki` the shift
//! factor of branch `k` and `μ±` the forward/reverse limit duals. Both
//! sensitivity sets are taken with voltage magnitudes held at the operating
//! point, which makes them consistent in active power: a zero-cost unit that
//! is marginal behind a binding radial branch prices every bus behind that
//! branch at exactly zero.

use crate::linalg::Matrix;
use crate::lpsolve::{self, LinearProgram, LpError, LpStatus};
use crate::netmodel::{Fuel, NetError, Network};
use crate::pflow::{InjectionSet, PowerFlowError, PowerFlowModel, PowerFlowSolution, VoltageResponse};

pub const MAX_SLP_ITERATIONS: usize = 20;
/// Largest per-generator dispatch change (MW) accepted as converged.
pub const DISPATCH_TOLERANCE_MW: f64 = 0.01;
/// Dispatch change (MW) still moving at the last pass that counts as divergence.
pub const DIVERGENCE_MW: f64 = 1.0;
/// Duals below this (£/MWh) do not make a branch binding.
const BINDING_DUAL: f64 = 1e-9;
const TIE_OBJECTIVE_SLACK: f64 = 1e-10;
const TIE_WEIGHT_RATIO: f64 = 1.1;


/// One timestep's dispatch inputs.
#[derive(Debug, Clone)]
pub struct DispatchProblem<'a> {
    pub network: &'a Network,
    pub gen_available_mw: Vec<f64>,
    pub gen_cost_gbp_mwh: Vec<f64>,
    pub load_mw: Vec<f64>,
}

impl<'a> DispatchProblem<'a> {
    /// Scales availability and demand for one half-hour. Profile-driven units
    /// take their fuel's capacity factor; grid units are priced at `mip`.
    pub fn for_timestep(
        network: &'a Network,
        demand_factor: f64,
        pv_cf: f64,
        wind_cf: f64,
        mip_gbp_mwh: f64,
    ) -> Self {
        let gen_available_mw = network
            .generators
            .iter()
            .map(|g| {
                if !g.profile_driven {
                    return g.p_max_mw;
                }
                let cf = match g.fuel {
                    Fuel::Pv => pv_cf,
                    Fuel::Wind => wind_cf,
                    _ => 1.0,
                };
                g.p_max_mw * cf
            })
            .collect();
        let gen_cost_gbp_mwh = network
            .generators
            .iter()
            .map(|g| g.marginal_cost_gbp_mwh.resolve(mip_gbp_mwh))
            .collect();
        let load_mw = network.loads.iter().map(|l| l.p_peak_mw * demand_factor).collect();
        Self {
            network,
            gen_available_mw,
            gen_cost_gbp_mwh,
            load_mw,
        }
    }

    fn check(&self) -> Result<(), OpfError> {
        let net = self.network;
        if self.gen_available_mw.len() != net.generators.len()
            || self.gen_cost_gbp_mwh.len() != net.generators.len()
            || self.load_mw.len() != net.loads.len()
        {
            return Err(OpfError::Dimension);
        }
        for (g, (gen, &avail)) in net.generators.iter().zip(&self.gen_available_mw).enumerate() {
            if !(avail >= 0.0 && avail <= gen.p_max_mw + 1e-9) {
                return Err(OpfError::Availability { generator: g, available_mw: avail });
            }
            if !self.gen_cost_gbp_mwh[g].is_finite() {
                return Err(OpfError::Availability { generator: g, available_mw: avail });
            }
        }
        if self.load_mw.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(OpfError::NegativeLoad);
        }
        let supply: f64 = self.gen_available_mw.iter().sum();
        let demand: f64 = self.load_mw.iter().sum();
        if supply < demand {
            return Err(OpfError::InfeasibleDispatch(format!(
                "available supply {supply:.3} MW is below demand {demand:.3} MW"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BindingBranch {
    pub branch: usize,
    pub direction: FlowDirection,
    pub shadow_price_gbp_mwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpfSolution {
    pub bus_ids: Vec<u32>,
    pub dispatch_mw: Vec<f64>,
    pub lmp_gbp_mwh: Vec<f64>,
    pub lmp_energy: Vec<f64>,
    pub lmp_loss: Vec<f64>,
    pub lmp_congestion: Vec<f64>,
    /// Available minus dispatched for curtailable renewable units (wind, PV,
    /// biomass); zero for every other unit.
    pub curtailed_mw: Vec<f64>,
    pub binding_branches: Vec<BindingBranch>,
    /// `∂P_loss/∂P_i` used by the final dispatch LP.
    pub loss_sensitivity: Vec<f64>,
    /// Losses of the AC power flow at the final dispatch.
    pub total_loss_mw: f64,
    pub sl_iterations: usize,
    pub converged: bool,
}

impl OpfSolution {
    /// Generation minus demand minus AC losses.
    pub fn balance_residual_mw(&self, problem: &DispatchProblem<'_>) -> f64 {
        let gen: f64 = self.dispatch_mw.iter().sum();
        let load: f64 = problem.load_mw.iter().sum();
        gen - load - self.total_loss_mw
    }

    pub fn total_curtailed_mw(&self) -> f64 {
        self.curtailed_mw.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmpComponents {
    pub bus: u32,
    pub energy: f64,
    pub loss: f64,
    pub congestion: f64,
    pub total: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum OpfError {
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("dispatch problem dimensions do not match the network")]
    Dimension,
    #[error("generator {generator}: availability {available_mw} MW outside [0, p_max]")]
    Availability { generator: usize, available_mw: f64 },
    #[error("loads must be finite and non-negative")]
    NegativeLoad,
    #[error("infeasible dispatch: {0}")]
    InfeasibleDispatch(String),
    #[error("AC power flow did not converge at SLP iteration {iteration}")]
    AcNonConvergence { iteration: usize },
    #[error("SLP divergence: dispatch still moving {oscillation_mw:.3} MW after {iterations} iterations")]
    SlpDivergence { iterations: usize, oscillation_mw: f64 },
}

impl OpfError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Self::InfeasibleDispatch(_))
    }
}

struct Linearisation {
    loss_sens: Vec<f64>,
    shift: Matrix<f64>,
    op: PowerFlowSolution<f64>,
}

/// Root search on a unit's reduced cost as a function of its output.
///
/// A lumpy unit whose offer sits close to its loss-adjusted price flips
/// between its limits from one linearisation to the next. Once that happens
/// its output is pinned to a regula falsi estimate of where the reduced cost
/// crosses zero, bracketed by the latest samples of either sign.
#[derive(Debug, Clone, Default)]
struct RootSearch {
    active: bool,
    below: Option<(f64, f64)>,
    above: Option<(f64, f64)>,
    /// Illinois weighting: how often the same end was kept in a row.
    stale_below: u32,
    stale_above: u32,
}

impl RootSearch {
    fn record(&mut self, p: f64, z: f64) {
        if z < 0.0 {
            self.below = Some((p, z));
            self.stale_below = 0;
            self.stale_above += 1;
        } else if z > 0.0 {
            self.above = Some((p, z));
            self.stale_above = 0;
            self.stale_below += 1;
        }
    }

    fn estimate(&self) -> Option<f64> {
        if !self.active {
            return None;
        }
        let ((p0, mut z0), (p1, mut z1)) = (self.below?, self.above?);
        if self.stale_below > 1 {
            z0 *= 0.5f64.powi(self.stale_below as i32 - 1);
        }
        if self.stale_above > 1 {
            z1 *= 0.5f64.powi(self.stale_above as i32 - 1);
        }
        Some(p0 - z0 * (p1 - p0) / (z1 - z0))
    }
}

struct LpRows {
    /// (branch, direction) per inequality row.
    rows: Vec<(usize, FlowDirection)>,
}

fn injections(problem: &DispatchProblem<'_>, bus_of_gen: &[usize], bus_of_load: &[usize], dispatch: &[f64]) -> InjectionSet<f64> {
    let net = problem.network;
    let mut inj = InjectionSet::zeros(net.n_buses());
    for (g, &p) in dispatch.iter().enumerate() {
        inj.p_mw[bus_of_gen[g]] += p;
    }
    for (l, load) in net.loads.iter().enumerate() {
        let d = problem.load_mw[l];
        inj.p_mw[bus_of_load[l]] -= d;
        inj.q_mvar[bus_of_load[l]] -= d * load.q_per_p();
    }
    inj
}

fn build_lp(
    problem: &DispatchProblem<'_>,
    bus_of_gen: &[usize],
    bus_of_load: &[usize],
    lin: &Linearisation,
    pins: &[Option<f64>],
) -> (LinearProgram<f64>, LpRows) {
    let net = problem.network;
    let n = net.n_buses();
    let ng = net.generators.len();
    let mut demand = vec![0.0; n];
    for (l, &b) in bus_of_load.iter().enumerate() {
        demand[b] += problem.load_mw[l];
    }
    let p0 = &lin.op.p_injection_mw;
    let lf = &lin.loss_sens;

    let mut lp = LinearProgram::minimize(problem.gen_cost_gbp_mwh.clone());
    for (g, gen) in net.generators.iter().enumerate() {
        let avail = problem.gen_available_mw[g];
        let (lo, hi) = (gen.p_min_mw.min(avail), avail);
        match pins[g] {
            Some(p) => lp = lp.with_bounds(g, p.clamp(lo, hi), p.clamp(lo, hi)),
            None => lp = lp.with_bounds(g, lo, hi),
        }
    }

    // Σ(1 − LF_i)·G_i = Σ(1 − LF_i)·D_i + L0 − Σ LF_i·P0_i
    let balance_row: Vec<f64> = bus_of_gen.iter().map(|&b| 1.0 - lf[b]).collect();
    let mut rhs = lin.op.total_loss_mw;
    for i in 0..n {
        rhs += (1.0 - lf[i]) * demand[i] - lf[i] * p0[i];
    }
    lp = lp.eq(balance_row, rhs);

    let mut rows = Vec::new();
    for (k, br) in net.branches.iter().enumerate() {
        let sf = lin.shift.row(k);
        let coeffs: Vec<f64> = bus_of_gen.iter().map(|&b| sf[b]).collect();
        let f0 = lin.op.branch_p_from_mw[k];
        // Flow = f0 + Σ SF_i (G_i − D_i − P0_i)
        let offset: f64 = (0..n).map(|i| sf[i] * (demand[i] + p0[i])).sum::<f64>() - f0;
        if br.forward_limit_mw.is_finite() {
            lp = lp.le(coeffs.clone(), br.forward_limit_mw + offset);
            rows.push((k, FlowDirection::Forward));
        }
        if br.reverse_limit_mw.is_finite() {
            lp = lp.le(coeffs.iter().map(|v| -v).collect(), br.reverse_limit_mw - offset);
            rows.push((k, FlowDirection::Reverse));
        }
    }
    debug_assert_eq!(lp.n_vars(), ng);
    (lp, LpRows { rows })
}

fn lp_for_ties(
    problem: &DispatchProblem<'_>,
    bus_of_gen: &[usize],
    bus_of_load: &[usize],
    lin: &Linearisation,
    pins: &[Option<f64>],
) -> LinearProgram<f64> {
    build_lp(problem, bus_of_gen, bus_of_load, lin, pins).0
}

/// Among the optimal dispatches of `lp`, picks the one that prefers
/// lower-indexed units, so that equal-cost units behind a binding limit are
/// curtailed in a fixed order rather than whichever way the simplex lands.
/// Prices still come from the first solve; its duals are optimal for every
/// optimal dispatch.
fn tie_break(lp: &LinearProgram<f64>, first: &lpsolve::LpSolution<f64>) -> Result<Vec<f64>, OpfError> {
    let n = lp.c.len();
    let mut second = lp.clone();
    second.a_ub.push(lp.c.clone());
    let slack = TIE_OBJECTIVE_SLACK * (1.0 + first.objective.abs());
    second.b_ub.push(first.objective + slack);
    second.c = (0..n).map(|g| -TIE_WEIGHT_RATIO.powi(-(g as i32))).collect();
    let sol = lpsolve::solve(&second)?;
    Ok(if sol.status == LpStatus::Optimal { sol.x } else { first.x.clone() })
}

/// Runs the SLP loop for one timestep.
pub fn solve_opf(problem: &DispatchProblem<'_>) -> Result<OpfSolution, OpfError> {
    let net = problem.network;
    let model = PowerFlowModel::<f64>::new(net)?;
    problem.check()?;

    let idx = net.bus_index_map();
    let bus_of_gen: Vec<usize> = net.generators.iter().map(|g| idx[&g.bus]).collect();
    let bus_of_load: Vec<usize> = net.loads.iter().map(|l| idx[&l.bus]).collect();
    let n = net.n_buses();

    let linearise = |op: PowerFlowSolution<f64>| -> Result<Linearisation, OpfError> {
        Ok(Linearisation {
            loss_sens: model.loss_sensitivities(&op, VoltageResponse::Held)?,
            shift: model.shift_factors(&op, VoltageResponse::Held)?,
            op,
        })
    };

    let flat = model.solve(&InjectionSet::zeros(n))?;
    if !flat.converged {
        return Err(OpfError::AcNonConvergence { iteration: 0 });
    }
    let mut lin = linearise(flat)?;
    let mut prev: Option<Vec<f64>> = None;
    let mut prev_step = vec![0.0; net.generators.len()];
    let mut search: Vec<RootSearch> = vec![RootSearch::default(); net.generators.len()];
    let mut last_change = f64::INFINITY;

    for iteration in 1..=MAX_SLP_ITERATIONS {
        let pins: Vec<Option<f64>> = search.iter().map(|s| s.estimate()).collect();
        let (lp, mut rows) = build_lp(problem, &bus_of_gen, &bus_of_load, &lin, &pins);
        let mut sol = lpsolve::solve(&lp)?;
        if sol.status == LpStatus::Infeasible && pins.iter().any(Option::is_some) {
            let (lp, r) = build_lp(problem, &bus_of_gen, &bus_of_load, &lin, &vec![None; pins.len()]);
            sol = lpsolve::solve(&lp)?;
            rows = r;
        }
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(OpfError::InfeasibleDispatch(
                    "load cannot be met within generator and branch limits".into(),
                ))
            }
            LpStatus::Unbounded => {
                return Err(OpfError::Lp(LpError::NumericalFailure(
                    "dispatch LP reported unbounded".into(),
                )))
            }
        }
        let dispatch = if sol.y_ub.iter().any(|&y| y > BINDING_DUAL) {
            tie_break(&lp_for_ties(problem, &bus_of_gen, &bus_of_load, &lin, &pins), &sol)?
        } else {
            sol.x.clone()
        };
        if let Some(p) = &prev {
            last_change = 0.0;
            for g in 0..dispatch.len() {
                let step = dispatch[g] - p[g];
                last_change = last_change.max(step.abs());
                if net.generators[g].fuel == Fuel::Grid {
                    continue;
                }
                // Reduced cost at the linearisation point `p[g]`.
                search[g].record(p[g], sol.z_bounds[g]);
                if step * prev_step[g] < 0.0 && step.abs() >= DISPATCH_TOLERANCE_MW {
                    search[g].active = true;
                }
                prev_step[g] = step;
            }
        }
        let op = model.solve(&injections(problem, &bus_of_gen, &bus_of_load, &dispatch))?;
        if !op.converged {
            return Err(OpfError::AcNonConvergence { iteration });
        }

        let done = last_change < DISPATCH_TOLERANCE_MW;
        if done || iteration == MAX_SLP_ITERATIONS {
            if !done && last_change > DIVERGENCE_MW {
                return Err(OpfError::SlpDivergence {
                    iterations: iteration,
                    oscillation_mw: last_change,
                });
            }
            return Ok(price(problem, &lin, &sol, &rows, &dispatch, &op, iteration, done));
        }
        prev = Some(dispatch);
        lin = linearise(op)?;
    }
    unreachable!("loop returns on its last iteration")
}

#[allow(clippy::too_many_arguments)]
fn price(
    problem: &DispatchProblem<'_>,
    lin: &Linearisation,
    sol: &lpsolve::LpSolution<f64>,
    rows: &LpRows,
    dispatch: &[f64],
    final_op: &PowerFlowSolution<f64>,
    iterations: usize,
    converged: bool,
) -> OpfSolution {
    let net = problem.network;
    let n = net.n_buses();
    let lambda = sol.y_eq[0];
    let mut energy = vec![lambda; n];
    let loss: Vec<f64> = lin.loss_sens.iter().map(|&lf| -lambda * lf).collect();
    let mut congestion = vec![0.0; n];
    let mut binding = Vec::new();
    for (r, &(k, dir)) in rows.rows.iter().enumerate() {
        let mu = sol.y_ub[r];
        if mu.abs() <= BINDING_DUAL {
            continue;
        }
        let signed = match dir {
            FlowDirection::Forward => mu,
            FlowDirection::Reverse => -mu,
        };
        let sf = lin.shift.row(k);
        for i in 0..n {
            congestion[i] -= signed * sf[i];
        }
        binding.push(BindingBranch {
            branch: k,
            direction: dir,
            shadow_price_gbp_mwh: mu,
        });
    }
    let lmp: Vec<f64> = (0..n).map(|i| energy[i] + loss[i] + congestion[i]).collect();
    energy.truncate(n);

    let curtailed = net
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            if gen.fuel.is_renewable() {
                (problem.gen_available_mw[g] - dispatch[g]).max(0.0)
            } else {
                0.0
            }
        })
        .collect();

    OpfSolution {
        bus_ids: net.buses.iter().map(|b| b.id).collect(),
        dispatch_mw: dispatch.to_vec(),
        lmp_gbp_mwh: lmp,
        lmp_energy: energy,
        lmp_loss: loss,
        lmp_congestion: congestion,
        curtailed_mw: curtailed,
        binding_branches: binding,
        loss_sensitivity: lin.loss_sens.clone(),
        total_loss_mw: final_op.total_loss_mw,
        sl_iterations: iterations,
        converged,
    }
}

/// Per-bus (energy, loss, congestion, total) rows in bus order.
pub fn decompose_lmp(solution: &OpfSolution) -> Vec<LmpComponents> {
    (0..solution.bus_ids.len())
        .map(|i| LmpComponents {
            bus: solution.bus_ids[i],
            energy: solution.lmp_energy[i],
            loss: solution.lmp_loss[i],
            congestion: solution.lmp_congestion[i],
            total: solution.lmp_gbp_mwh[i],
        })
        .collect()
}
