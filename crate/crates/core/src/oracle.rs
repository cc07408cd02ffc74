//! Independent checks: exhaustive optimal-cost solving on sampled
//! instances, and Monte Carlo estimation of macro-action improvement
//! rates for validating the precomputed `r*` table.
//!
//! Nothing here shares code with the dynamic program or the search
//! policies; these are the ground-truth side of dual-route tests.

use alloc::vec::Vec;

use crate::mix::{mix64, mix_with, unit_f64};
use crate::problem::{AbstractProblem, ActionId, FeatureId, KernelRow};
use crate::rate::{EdgeClass, RStarTable};
use crate::tree::{NodeCtx, TreeInstance, LEFT, RIGHT};

/// The exhaustive enumeration gave up before finishing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBudgetExceeded {
    pub budget: u64,
}

impl core::fmt::Display for EnumerationBudgetExceeded {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "enumeration exceeded the node budget of {}", self.budget)
    }
}

/// Exact optimal solution cost within the instance's cost bound.
///
/// Enumerates every history of depth at most `c_max`, pruned only where
/// no solution cheaper than the current best can exist (`g + h` already
/// meets the bound; `h` is a lower bound on remaining cost in this
/// model). Returns `None` when no solution costs strictly less than
/// `c_max`. `node_budget` caps the number of realized nodes.
pub fn optimal_cost_in_instance(
    instance: &TreeInstance,
    node_budget: u64,
) -> Result<Option<u32>, EnumerationBudgetExceeded> {
    let c_max = instance.params().c_max;
    let mut best = c_max;
    let mut nodes = 0u64;
    let root = instance.root_ctx();
    if root.feature != 0 && root.feature < best {
        dfs(instance, &root, &mut best, &mut nodes, node_budget)?;
    }
    Ok(if best < c_max { Some(best) } else { None })
}

fn dfs(
    instance: &TreeInstance,
    ctx: &NodeCtx,
    best: &mut u32,
    nodes: &mut u64,
    budget: u64,
) -> Result<(), EnumerationBudgetExceeded> {
    for a in [LEFT, RIGHT] {
        if *nodes >= budget {
            return Err(EnumerationBudgetExceeded { budget });
        }
        *nodes += 1;
        let child = instance.child_ctx(ctx, a);
        if child.feature == 0 {
            if child.depth < *best {
                *best = child.depth;
            }
            continue;
        }
        if child.depth < instance.params().c_max && child.depth + child.feature < *best {
            dfs(instance, &child, best, nodes, budget)?;
        }
    }
    Ok(())
}

/// Monte Carlo estimate of a macro-action's incremental rate of
/// improvement, as a ratio of means with a propagated standard error.
#[derive(Clone, Copy, Debug)]
pub struct RateEstimate {
    pub mean_delta: f64,
    pub mean_time: f64,
    /// `mean_delta / mean_time`.
    pub rate: f64,
    pub samples: u64,
    /// Delta-method standard error of the ratio.
    pub std_error: f64,
}

/// Simulate the macro-action of edge class `e` on freshly sampled
/// subtrees and estimate its rate of improvement.
///
/// Each sample expands the class's edge and then keeps expanding, in
/// best-first order of table `r*`, the subtree edges whose rate is at
/// least the class's own table rate, stopping at the first strictly
/// improving goal (success, improvement `C - g_rel`) or when no
/// qualifying edge remains (failure). Edges whose relative bound is
/// spent never qualify.
pub fn mc_estimate_rate(
    problem: &AbstractProblem,
    table: &RStarTable,
    e: EdgeClass,
    samples: u64,
    seed: u64,
) -> RateEstimate {
    assert!(samples >= 1);
    assert!(e.c_rel >= 1 && e.c_rel <= table.c_max());
    assert!(
        problem.successors(e.feature, e.action).is_legal(),
        "edge class must be legal"
    );
    let threshold = table.r_star(e.c_rel as i64, e.feature, e.action);

    let mut sum_d = 0.0;
    let mut sum_t = 0.0;
    let mut sum_dd = 0.0;
    let mut sum_tt = 0.0;
    let mut sum_dt = 0.0;
    let base = mix64(seed);
    for s in 0..samples {
        let (d, t) = simulate_macro_action(problem, table, e, threshold, mix_with(base, s));
        sum_d += d;
        sum_t += t;
        sum_dd += d * d;
        sum_tt += t * t;
        sum_dt += d * t;
    }

    let n = samples as f64;
    let mean_delta = sum_d / n;
    let mean_time = sum_t / n;
    let rate = mean_delta / mean_time;
    let var_d = (sum_dd / n - mean_delta * mean_delta).max(0.0);
    let var_t = (sum_tt / n - mean_time * mean_time).max(0.0);
    let cov = sum_dt / n - mean_delta * mean_time;
    let var_ratio =
        (var_d - 2.0 * rate * cov + rate * rate * var_t).max(0.0) / (n * mean_time * mean_time);
    RateEstimate {
        mean_delta,
        mean_time,
        rate,
        samples,
        std_error: libm::sqrt(var_ratio),
    }
}

/// Frontier edge of one simulated subtree.
struct SimEdge {
    r: f64,
    seq: u32,
    parent_feature: FeatureId,
    parent_g_rel: u32,
    parent_chain: u64,
    action: ActionId,
}

impl SimEdge {
    fn better_than(&self, other: &Self) -> bool {
        match self.r.total_cmp(&other.r) {
            core::cmp::Ordering::Greater => true,
            core::cmp::Ordering::Less => false,
            core::cmp::Ordering::Equal => self.seq < other.seq,
        }
    }
}

/// Returns `(improvement, steps)` for one macro-action sample.
fn simulate_macro_action(
    problem: &AbstractProblem,
    table: &RStarTable,
    e: EdgeClass,
    threshold: f64,
    chain: u64,
) -> (f64, f64) {
    let c = e.c_rel;
    let mut frontier: Vec<SimEdge> = Vec::new();
    let mut seq = 0u32;
    frontier.push(SimEdge {
        r: f64::INFINITY,
        seq,
        parent_feature: e.feature,
        parent_g_rel: 0,
        parent_chain: chain,
        action: e.action,
    });

    let mut t = 0.0;
    while !frontier.is_empty() {
        // Best-first: take the max-rate qualifying edge.
        let mut best = 0;
        for i in 1..frontier.len() {
            if frontier[i].better_than(&frontier[best]) {
                best = i;
            }
        }
        let edge = frontier.swap_remove(best);
        t += 1.0;

        let child_chain = mix_with(mix_with(edge.parent_chain, 0x6b79_2e14), edge.action.0 as u64);
        let y = draw_child(problem, edge.parent_feature, edge.action, child_chain);
        let g_rel = edge.parent_g_rel + problem.step_cost(y);

        if problem.is_goal(y) {
            if g_rel < c {
                return ((c - g_rel) as f64, t);
            }
            continue;
        }
        let child_bound = c as i64 - g_rel as i64;
        if child_bound < 1 {
            continue;
        }
        for b in problem.legal_actions(y) {
            let r = table.r_star(child_bound, y, b);
            if r >= threshold {
                seq += 1;
                frontier.push(SimEdge {
                    r,
                    seq,
                    parent_feature: y,
                    parent_g_rel: g_rel,
                    parent_chain: child_chain,
                    action: b,
                });
            }
        }
    }
    (0.0, t)
}

fn draw_child(problem: &AbstractProblem, x: FeatureId, a: ActionId, chain: u64) -> FeatureId {
    let KernelRow::Legal(entries) = problem.successors(x, a) else {
        panic!("cannot draw from an illegal pair");
    };
    let u = unit_f64(chain);
    let mut acc = 0.0;
    for &(y, p) in entries {
        acc += p;
        if u < acc {
            return y;
        }
    }
    entries.last().expect("legal rows are non-empty").0
}
