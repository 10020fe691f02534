mod common;

use dlmp_core::lpsolve::{self, LpStatus};
use dlmp_core::netmodel::{build_admittance, Branch, Network, VoltageLevel};
use dlmp_core::stats::{level_summary, LevelSummary};
use dlmp_core::{InjectionSet, LinearProgram, LpSolution, PowerFlowModel};
use proptest::prelude::*;

use common::{chain, load, results};

/// Connected network on `n` buses: a random spanning tree plus extra edges.
fn meshed(n: u32, parents: &[u32], extra: &[(u32, u32)], imp: &[(f64, f64)]) -> Network {
    let mut net = chain(n, 0.01, 0.1);
    net.branches.clear();
    let mut k = 0;
    let mut push = |f: u32, t: u32| {
        let (r, x) = imp[k % imp.len()];
        k += 1;
        Branch::line(f, t, r, x, 0.0, 100.0)
    };
    let mut branches = Vec::new();
    for id in 2..=n {
        branches.push(push(parents[(id - 2) as usize] % (id - 1) + 1, id));
    }
    for &(a, b) in extra {
        let (a, b) = (a % n + 1, b % n + 1);
        if a != b {
            branches.push(push(a, b));
        }
    }
    net.branches = branches;
    net.loads = vec![load(n, 5.0)];
    net
}

fn network_strategy() -> impl Strategy<Value = Network> {
    (3u32..9).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(any::<u32>(), (n - 1) as usize),
            prop::collection::vec((any::<u32>(), any::<u32>()), 0..4),
            prop::collection::vec((0.0..0.05f64, 0.02..0.3f64), 1..6),
        )
            .prop_map(|(n, parents, extra, imp)| meshed(n, &parents, &extra, &imp))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn admittance_is_symmetric(net in network_strategy()) {
        prop_assert!(net.validate().is_pass(), "{}", net.validate());
        let y = build_admittance::<f64>(&net).unwrap();
        for i in 0..y.dim() {
            for j in 0..y.dim() {
                prop_assert!((y.get(i, j) - y.get(j, i)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn validation_is_idempotent(mut net in network_strategy(), flaw in 0usize..5) {
        match flaw {
            1 => net.branches[0].to_bus = 99,
            2 => net.buses[1].role = net.buses[0].role,
            3 => net.branches[0].x = 0.0,
            4 => net.base_mva = -1.0,
            _ => {}
        }
        let before = net.clone();
        let first = net.validate();
        prop_assert_eq!(&first, &net.validate());
        prop_assert_eq!(&before, &net);
        prop_assert_eq!(first.is_pass(), flaw == 0);
    }

    #[test]
    fn per_unit_round_trip(base in 1.0..1000.0f64, mw in prop::collection::vec(1e-3..1e4f64, 1..20)) {
        let mut net = chain(2, 0.0, 0.1);
        net.base_mva = base;
        for limit in mw {
            let back = net.pu_to_mw(net.mw_to_pu(limit));
            prop_assert!(((back - limit) / limit).abs() < 1e-9);
        }
    }

    #[test]
    fn power_balance_and_determinism(
        net in network_strategy(),
        loads in prop::collection::vec(0.5..15.0f64, 8),
    ) {
        let mut net = net;
        net.loads.clear();
        for id in 2..=net.n_buses() as u32 {
            net.loads.push(load(id, loads[(id - 2) as usize]));
        }
        let model = PowerFlowModel::new(&net).unwrap();
        let mut inj = InjectionSet::zeros(net.n_buses());
        for l in &net.loads {
            let i = net.bus_index(l.bus).unwrap();
            inj.p_mw[i] -= l.p_peak_mw;
            inj.q_mvar[i] -= l.p_peak_mw * l.q_per_p();
        }
        let a = model.solve(&inj).unwrap();
        let b = model.solve(&inj).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.converged);
        for i in (0..net.n_buses()).filter(|&i| i != model.slack()) {
            prop_assert!(net.mw_to_pu((a.p_injection_mw[i] - inj.p_mw[i]).abs()) < 1e-8);
            prop_assert!(net.mw_to_pu((a.q_injection_mvar[i] - inj.q_mvar[i]).abs()) < 1e-8);
        }
        let loss: f64 = a.branch_p_from_mw.iter().zip(&a.branch_p_to_mw).map(|(f, t)| f + t).sum();
        prop_assert!((loss - a.total_loss_mw).abs() < 1e-9);
        prop_assert!(a.total_loss_mw > -1e-6);
    }
}

// ------------------------------------------------------------------ LP

#[derive(Debug, Clone)]
struct RandomLp {
    lp: LinearProgram,
}

/// Bounded LP built around a known feasible point so it is never infeasible.
fn lp_strategy() -> impl Strategy<Value = RandomLp> {
    (1usize..=6, 0usize..3, 0usize..4).prop_flat_map(|(n, m_eq, m_ub)| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec((0.0..1.0f64, 0.5..4.0f64), n),
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), m_eq),
            prop::collection::vec((prop::collection::vec(-3.0..3.0f64, n), 0.0..2.0f64), m_ub),
        )
            .prop_map(|(c, frac_ub, a_eq, a_ub)| {
                let ub: Vec<f64> = frac_ub.iter().map(|&(_, u)| u).collect();
                let x0: Vec<f64> = frac_ub.iter().map(|&(f, u)| f * u).collect();
                let dot = |row: &[f64]| row.iter().zip(&x0).map(|(a, x)| a * x).sum::<f64>();
                let mut lp = LinearProgram::minimize(c);
                for (j, &u) in ub.iter().enumerate() {
                    lp = lp.with_bounds(j, 0.0, u);
                }
                for row in a_eq {
                    let rhs = dot(&row);
                    lp = lp.eq(row, rhs);
                }
                for (row, slack) in a_ub {
                    let rhs = dot(&row) + slack;
                    lp = lp.le(row, rhs);
                }
                RandomLp { lp }
            })
    })
}

fn kkt_residuals(lp: &LinearProgram, sol: &LpSolution) -> (f64, f64, f64) {
    let n = lp.n_vars();
    let mut primal = 0.0f64;
    for (row, &b) in lp.a_eq.iter().zip(&lp.b_eq) {
        let ax: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        primal = primal.max((ax - b).abs());
    }
    for (row, &b) in lp.a_ub.iter().zip(&lp.b_ub) {
        let ax: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        primal = primal.max(ax - b);
    }
    for j in 0..n {
        primal = primal.max(lp.lb[j] - sol.x[j]).max(sol.x[j] - lp.ub[j]);
    }
    let mut dual = 0.0f64;
    for j in 0..n {
        let mut g = lp.c[j] - sol.z_bounds[j];
        for (row, y) in lp.a_eq.iter().zip(&sol.y_eq) {
            g -= row[j] * y;
        }
        for (row, y) in lp.a_ub.iter().zip(&sol.y_ub) {
            g += row[j] * y;
        }
        dual = dual.max(g.abs());
    }
    for &y in &sol.y_ub {
        dual = dual.max(-y);
    }
    let gap = (sol.objective - sol.dual_objective(lp)).abs();
    (primal, dual, gap)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_optimality_conditions(case in lp_strategy()) {
        let sol = lpsolve::solve(&case.lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let (primal, dual, gap) = kkt_residuals(&case.lp, &sol);
        prop_assert!(primal < 1e-9, "primal residual {primal}");
        prop_assert!(dual < 1e-9, "dual residual {dual}");
        prop_assert!(gap < 1e-9 * (1.0 + sol.objective.abs()), "gap {gap}");
    }

    #[test]
    fn lp_scaling_scales_duals(case in lp_strategy(), alpha in 0.1..20.0f64) {
        let base = lpsolve::solve(&case.lp).unwrap();
        let mut scaled_lp = case.lp.clone();
        scaled_lp.c.iter_mut().for_each(|c| *c *= alpha);
        let scaled = lpsolve::solve(&scaled_lp).unwrap();
        let tol = |v: f64| 1e-8 * (1.0 + v.abs());
        prop_assert!((scaled.objective - alpha * base.objective).abs() < tol(scaled.objective));
        // The scaled optimum of the original problem lies on the same face.
        let c_at: f64 = case.lp.c.iter().zip(&scaled.x).map(|(c, x)| c * x).sum();
        prop_assert!((c_at - base.objective).abs() < tol(base.objective));
        for (a, b) in scaled.y_eq.iter().zip(&base.y_eq).chain(scaled.y_ub.iter().zip(&base.y_ub)) {
            prop_assert!((a - alpha * b).abs() < tol(*a), "dual {a} vs {alpha}·{b}");
        }
    }

    #[test]
    fn lp_solves_are_bitwise_repeatable(case in lp_strategy()) {
        prop_assert_eq!(lpsolve::solve(&case.lp).unwrap(), lpsolve::solve(&case.lp).unwrap());
    }
}

// --------------------------------------------------------------- stats

fn close(a: &[LevelSummary], b: &[LevelSummary]) -> bool {
    let near = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| {
            p.voltage_level == q.voltage_level
                && near(p.mean_lmp, q.mean_lmp)
                && near(p.spatial_std, q.spatial_std)
                && p.min_lmp == q.min_lmp
                && p.max_lmp == q.max_lmp
                && p.zero_pct == q.zero_pct
        })
}

fn lmp_field() -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..7, 1usize..12).prop_flat_map(|(buses, steps)| {
        (
            Just(buses),
            prop::collection::vec(prop::collection::vec(-20.0..120.0f64, buses), steps),
            prop::collection::vec(-10.0..90.0f64, steps),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn level_summary_ignores_column_order((n, lmp, mip) in lmp_field(), rot in 1usize..6) {
        let net = common::chain(n as u32, 0.0, 0.1);
        let ids: Vec<u32> = (1..=n as u32).collect();
        let base = level_summary(&results(ids.clone(), lmp.clone(), mip.clone()), &net).unwrap();
        let k = rot % n;
        let mut rids = ids;
        rids.rotate_left(k);
        let rlmp = lmp.into_iter().map(|mut row| { row.rotate_left(k); row }).collect();
        let permuted = level_summary(&results(rids, rlmp, mip), &net).unwrap();
        prop_assert!(close(&base, &permuted), "{base:?} vs {permuted:?}");
    }

    #[test]
    fn spatial_std_ignores_per_step_shift((n, lmp, mip) in lmp_field(), shift in prop::collection::vec(-50.0..50.0f64, 12)) {
        let net = common::chain(n as u32, 0.0, 0.1);
        let ids: Vec<u32> = (1..=n as u32).collect();
        let shifted: Vec<Vec<f64>> = lmp
            .iter()
            .enumerate()
            .map(|(t, row)| row.iter().map(|v| v + shift[t]).collect())
            .collect();
        let a = level_summary(&results(ids.clone(), lmp, mip.clone()), &net).unwrap();
        let b = level_summary(&results(ids, shifted, mip), &net).unwrap();
        prop_assert!((a[0].spatial_std - b[0].spatial_std).abs() < 1e-9);
    }

    #[test]
    fn summary_invariants((n, lmp, mip) in lmp_field()) {
        let net = common::chain(n as u32, 0.0, 0.1);
        let s = level_summary(&results((1..=n as u32).collect(), lmp, mip), &net).unwrap();
        prop_assert_eq!(s.len(), 1);
        prop_assert_eq!(s[0].voltage_level, VoltageLevel::Kv33);
        prop_assert!(s[0].min_lmp <= s[0].mean_lmp + 1e-9 && s[0].mean_lmp <= s[0].max_lmp + 1e-9);
        prop_assert!(s[0].spatial_std >= 0.0);
        prop_assert!((0.0..=100.0).contains(&s[0].zero_pct));
    }

    #[test]
    fn zero_pct_extremes((n, lmp, mip) in lmp_field()) {
        let net = common::chain(n as u32, 0.0, 0.1);
        let ids: Vec<u32> = (1..=n as u32).collect();
        let positive: Vec<Vec<f64>> = lmp.iter().map(|r| r.iter().map(|v| v.abs() + 1.0).collect()).collect();
        let zeros: Vec<Vec<f64>> = lmp.iter().map(|r| vec![0.0; r.len()]).collect();
        let pos_mip: Vec<f64> = mip.iter().map(|m| m.abs() + 1.0).collect();
        let a = level_summary(&results(ids.clone(), positive, mip), &net).unwrap();
        let b = level_summary(&results(ids, zeros, pos_mip), &net).unwrap();
        prop_assert_eq!(a[0].zero_pct, 0.0);
        prop_assert_eq!(b[0].zero_pct, 100.0);
    }
}
