//! The anytime best-first search loop over a lazily realized tree
//! instance, under an edge-expansion budget, with five interchangeable
//! selection policies.
//!
//! All policies share the same outer loop: select a frontier element,
//! realize its children (each realization charges one unit of budget),
//! register any strictly improving goal child at the current edge count,
//! and insert surviving children. They differ only in what a frontier
//! element is and how it is keyed:
//!
//! * `Smiri` keeps *edges* keyed by the precomputed rate
//!   `r*(C_inc - g, feature, action)` and expands one edge per step.
//! * `Apts`, `Agpts`, `Aees`, and `AraStar` keep *nodes* and expand all
//!   children of the selected node.
//!
//! Nodes whose admissible estimate `g + h` meets the incumbent are never
//! inserted; since the incumbent only decreases, they can be dropped for
//! good. When an improvement changes the incumbent, policies whose keys
//! depend on it rebuild their frontier in one pass.
//!
//! Ties everywhere break towards deeper nodes first, then towards the
//! earlier-inserted element, so runs are fully deterministic.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;

use crate::problem::{ActionId, FeatureId};
use crate::rate::RStarTable;
use crate::survival::SurvivalTable;
use crate::tree::{make_tree_problem, NodeCtx, TreeInstance, LEFT, RIGHT};

/// Selection policy, with any policy-specific parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyKind {
    /// Best-first on the precomputed peak incremental rate of improvement.
    Smiri,
    /// Anytime potential search: maximize `(C_inc - g) / h`.
    Apts,
    /// Anytime generalized potential search: maximize the precomputed
    /// probability that an improving solution exists below the node.
    Agpts,
    /// Anytime explicit estimation search with the unbiased cost-to-go
    /// estimate standing in for both `h_hat` and `d_hat`.
    Aees,
    /// Anytime repairing A* with a decreasing weight schedule.
    AraStar(AraSchedule),
}

impl PolicyKind {
    pub fn ara_standard() -> Self {
        PolicyKind::AraStar(AraSchedule::standard())
    }

    /// Short display name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Smiri => "SMIRI",
            PolicyKind::Apts => "APTS",
            PolicyKind::Agpts => "AGPTS",
            PolicyKind::Aees => "AEES",
            PolicyKind::AraStar(_) => "ARA*",
        }
    }
}

/// Strictly decreasing positive weight schedule ending at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct AraSchedule {
    weights: Vec<f64>,
}

impl AraSchedule {
    pub fn new(weights: Vec<f64>) -> Self {
        assert!(!weights.is_empty(), "schedule must not be empty");
        for w in &weights {
            assert!(*w > 0.0, "weights must be positive");
        }
        for pair in weights.windows(2) {
            assert!(pair[0] > pair[1], "schedule must be strictly decreasing");
        }
        assert_eq!(*weights.last().unwrap(), 1.0, "schedule must end at 1");
        Self { weights }
    }

    /// The published schedule 5, 3, 2, 1.5, 1.
    pub fn standard() -> Self {
        Self::new(alloc::vec![5.0, 3.0, 2.0, 1.5, 1.0])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Precomputed tables a search run needs, checked once against the
/// instance parameters they were built for.
pub struct SearchTables<'a> {
    rstar: &'a RStarTable,
    survival: &'a SurvivalTable,
    /// Expected cost-to-go per feature.
    cost_to_go: &'a [f64],
}

impl<'a> SearchTables<'a> {
    /// Bundle the tables, verifying that both were computed from the
    /// problem induced by `params` and cover its cost bound.
    pub fn new(
        params: crate::tree::TreeModelParams,
        rstar: &'a RStarTable,
        survival: &'a SurvivalTable,
        cost_to_go: &'a [f64],
    ) -> Self {
        let hash = make_tree_problem(params).content_hash();
        assert_eq!(rstar.problem_hash(), hash, "rate table was built for a different problem");
        assert_eq!(
            survival.problem_hash(),
            hash,
            "survival table was built for a different problem"
        );
        assert_eq!(rstar.c_max(), params.c_max, "rate table bound mismatch");
        assert!(survival.c_max() >= params.c_max, "survival table bound too small");
        assert_eq!(cost_to_go.len(), rstar.n_features() as usize);
        Self { rstar, survival, cost_to_go }
    }
}

/// The sequence of incumbent improvements of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ImprovementTrace {
    /// `(edge expansions charged when registered, new incumbent cost)`,
    /// with strictly increasing steps and strictly decreasing costs.
    pub improvements: Vec<(u64, u32)>,
    /// The edge budget the run was given.
    pub budget: u64,
    /// Incumbent cost before any improvement (the cost bound).
    pub initial_bound: u32,
}

impl ImprovementTrace {
    /// Incumbent cost after `step` edge expansions.
    pub fn incumbent_at(&self, step: u64) -> u32 {
        let mut cost = self.initial_bound;
        for &(s, c) in &self.improvements {
            if s <= step {
                cost = c;
            } else {
                break;
            }
        }
        cost
    }

    /// Incumbent cost when the budget ran out.
    pub fn terminal_cost(&self) -> u32 {
        self.improvements.last().map_or(self.initial_bound, |&(_, c)| c)
    }
}

/// One realized `(history, feature)` observation; histories are
/// identified by their depth and realization chain state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Observation {
    pub depth: u32,
    pub chain: u64,
    pub feature: u32,
}

/// Run `policy` on `instance` for at most `budget` edge expansions.
pub fn run_anytime(
    policy: &PolicyKind,
    instance: &TreeInstance,
    tables: &SearchTables<'_>,
    budget: u64,
) -> ImprovementTrace {
    run_engine(policy, instance, tables, budget, None)
}

/// As [`run_anytime`], also recording every realized observation.
pub fn run_anytime_observed(
    policy: &PolicyKind,
    instance: &TreeInstance,
    tables: &SearchTables<'_>,
    budget: u64,
) -> (ImprovementTrace, Vec<Observation>) {
    let mut obs = Vec::new();
    let trace = run_engine(policy, instance, tables, budget, Some(&mut obs));
    (trace, obs)
}

/// `r*(C_inc - g(n), feature(n), a)`: the SMIRI key of an unexpanded edge.
#[inline]
pub fn smiri_priority(
    table: &RStarTable,
    c_inc: u32,
    g: u32,
    feature: FeatureId,
    a: ActionId,
) -> f64 {
    table.r_star(c_inc as i64 - g as i64, feature, a)
}

/// `(C_inc - g) / h`: the anytime potential search key.
#[inline]
pub fn apts_priority(c_inc: u32, g: u32, h: u32) -> f64 {
    assert!(h >= 1, "goals never enter the frontier");
    (c_inc as f64 - g as f64) / h as f64
}

/// Probability of an improving solution below the node: the generalized
/// potential key.
#[inline]
pub fn agpts_priority(survival: &SurvivalTable, c_inc: u32, g: u32, feature: FeatureId) -> f64 {
    survival.potential(feature, c_inc as i64 - g as i64)
}

/// `g + w * h`: the weighted A* key (smaller is better).
#[inline]
pub fn ara_priority(g: u32, h: u32, w: f64) -> f64 {
    g as f64 + w * h as f64
}

/// Reference three-way selection rule for the estimation-based policy:
/// prefer the nearest estimated improvement (min `d_hat`) if its
/// estimated cost beats the incumbent, else the cheapest estimated node
/// (min `f_hat`) under the same test, else the min-`f` node. Candidates
/// are `(g, h, h_hat)`; ties break towards higher `g`, then the earlier
/// candidate. Returns the index of the selected candidate.
pub fn aees_select(candidates: &[(u32, u32, f64)], c_inc: u32) -> usize {
    assert!(!candidates.is_empty());
    let better = |i: usize, j: usize, key: &dyn Fn(usize) -> f64| -> bool {
        match key(i).total_cmp(&key(j)) {
            core::cmp::Ordering::Less => true,
            core::cmp::Ordering::Greater => false,
            core::cmp::Ordering::Equal => candidates[i].0 > candidates[j].0,
        }
    };
    let argmin = |key: &dyn Fn(usize) -> f64| -> usize {
        let mut best = 0;
        for i in 1..candidates.len() {
            if better(i, best, key) {
                best = i;
            }
        }
        best
    };
    let f_hat = |i: usize| candidates[i].0 as f64 + candidates[i].2;
    let d_hat = |i: usize| candidates[i].2;
    let f = |i: usize| (candidates[i].0 + candidates[i].1) as f64;

    let best_d = argmin(&d_hat);
    if f_hat(best_d) < c_inc as f64 {
        return best_d;
    }
    let best_fh = argmin(&f_hat);
    if f_hat(best_fh) < c_inc as f64 {
        return best_fh;
    }
    argmin(&f)
}

// --- engine internals ----------------------------------------------------

/// Max-heap entry selected by key, then deeper node, then insertion order.
#[derive(PartialEq)]
struct MaxEntry {
    key: f64,
    g: u32,
    seq: u64,
    ctx: NodeCtx,
    action: ActionId,
}

impl Eq for MaxEntry {}

impl PartialOrd for MaxEntry {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MaxEntry {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| self.g.cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-heap entry (reversed ordering) with the same tie-breaks.
#[derive(PartialEq)]
struct MinEntry {
    key: f64,
    g: u32,
    seq: u64,
    node: u32,
}

impl Eq for MinEntry {}

impl PartialOrd for MinEntry {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MinEntry {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| self.g.cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// What one selection step asks the engine to expand.
enum Selection {
    Edge(NodeCtx, ActionId),
    Node(NodeCtx),
}

trait Frontier {
    fn insert(&mut self, ctx: NodeCtx, c_inc: u32, seq: u64);
    fn select(&mut self, c_inc: u32) -> Option<Selection>;
    /// Called after the incumbent improved.
    fn rekey(&mut self, c_inc: u32);
}

struct SmiriFrontier<'a> {
    table: &'a RStarTable,
    heap: BinaryHeap<MaxEntry>,
}

impl<'a> Frontier for SmiriFrontier<'a> {
    fn insert(&mut self, ctx: NodeCtx, c_inc: u32, seq: u64) {
        for a in [LEFT, RIGHT] {
            let r = smiri_priority(self.table, c_inc, ctx.depth, FeatureId(ctx.feature), a);
            if r > 0.0 {
                self.heap.push(MaxEntry { key: r, g: ctx.depth, seq, ctx, action: a });
            }
        }
    }

    fn select(&mut self, _c_inc: u32) -> Option<Selection> {
        self.heap.pop().map(|e| Selection::Edge(e.ctx, e.action))
    }

    fn rekey(&mut self, c_inc: u32) {
        let entries: Vec<MaxEntry> = core::mem::take(&mut self.heap).into_vec();
        for mut e in entries {
            let r = smiri_priority(self.table, c_inc, e.g, FeatureId(e.ctx.feature), e.action);
            if r > 0.0 {
                e.key = r;
                self.heap.push(e);
            }
        }
    }
}

/// Shared shape of the single-heap node policies (APTS, AGPTS, ARA*).
struct KeyedNodeFrontier<K> {
    heap: BinaryHeap<MaxEntry>,
    keyer: K,
}

impl<K: Fn(&NodeCtx, u32) -> f64> Frontier for KeyedNodeFrontier<K> {
    fn insert(&mut self, ctx: NodeCtx, c_inc: u32, seq: u64) {
        let key = (self.keyer)(&ctx, c_inc);
        self.heap.push(MaxEntry { key, g: ctx.depth, seq, ctx, action: LEFT });
    }

    fn select(&mut self, _c_inc: u32) -> Option<Selection> {
        self.heap.pop().map(|e| Selection::Node(e.ctx))
    }

    fn rekey(&mut self, c_inc: u32) {
        let entries: Vec<MaxEntry> = core::mem::take(&mut self.heap).into_vec();
        for mut e in entries {
            if e.ctx.depth + e.ctx.feature < c_inc {
                e.key = (self.keyer)(&e.ctx, c_inc);
                self.heap.push(e);
            }
        }
    }
}

/// ARA* wraps a weighted-A* frontier and advances the weight on every
/// improvement, re-keying in one pass. The key is negated so the shared
/// max-heap selects the smallest `g + w h`.
struct AraFrontier<'a> {
    schedule: &'a AraSchedule,
    weight_idx: usize,
    heap: BinaryHeap<MaxEntry>,
}

impl<'a> AraFrontier<'a> {
    fn weight(&self) -> f64 {
        self.schedule.weights()[self.weight_idx]
    }
}

impl<'a> Frontier for AraFrontier<'a> {
    fn insert(&mut self, ctx: NodeCtx, _c_inc: u32, seq: u64) {
        let key = -ara_priority(ctx.depth, ctx.feature, self.weight());
        self.heap.push(MaxEntry { key, g: ctx.depth, seq, ctx, action: LEFT });
    }

    fn select(&mut self, _c_inc: u32) -> Option<Selection> {
        self.heap.pop().map(|e| Selection::Node(e.ctx))
    }

    fn rekey(&mut self, c_inc: u32) {
        if self.weight_idx + 1 < self.schedule.weights().len() {
            self.weight_idx += 1;
        }
        let w = self.weight();
        let entries: Vec<MaxEntry> = core::mem::take(&mut self.heap).into_vec();
        for mut e in entries {
            if e.ctx.depth + e.ctx.feature < c_inc {
                e.key = -ara_priority(e.ctx.depth, e.ctx.feature, w);
                self.heap.push(e);
            }
        }
    }
}

/// AEES keeps one node arena and three lazily cleaned orderings over it:
/// by `d_hat`, by `f_hat`, and by `f`. Keys never change; only the
/// incumbent comparisons and pruning do.
struct AeesFrontier<'a> {
    cost_to_go: &'a [f64],
    nodes: Vec<(NodeCtx, bool)>,
    live: usize,
    by_dhat: BinaryHeap<MinEntry>,
    by_fhat: BinaryHeap<MinEntry>,
    by_f: BinaryHeap<MinEntry>,
}

impl<'a> AeesFrontier<'a> {
    /// Drop spent entries until the top of `heap` is live, returning it.
    fn clean_top(
        heap: &mut BinaryHeap<MinEntry>,
        nodes: &mut [(NodeCtx, bool)],
        live: &mut usize,
        c_inc: u32,
    ) -> Option<(u32, f64)> {
        while let Some(top) = heap.peek() {
            let idx = top.node as usize;
            let (ctx, expanded) = nodes[idx];
            if expanded {
                heap.pop();
                continue;
            }
            if ctx.depth + ctx.feature >= c_inc {
                // The incumbent has passed this node; it can never help
                // again, so retire it everywhere.
                nodes[idx].1 = true;
                *live -= 1;
                heap.pop();
                continue;
            }
            return Some((top.node, top.key));
        }
        None
    }
}

impl<'a> Frontier for AeesFrontier<'a> {
    fn insert(&mut self, ctx: NodeCtx, _c_inc: u32, seq: u64) {
        let idx = self.nodes.len() as u32;
        let g = ctx.depth;
        let h_hat = self.cost_to_go[ctx.feature as usize];
        self.nodes.push((ctx, false));
        self.live += 1;
        self.by_dhat.push(MinEntry { key: h_hat, g, seq, node: idx });
        self.by_fhat.push(MinEntry { key: g as f64 + h_hat, g, seq, node: idx });
        self.by_f.push(MinEntry { key: (g + ctx.feature) as f64, g, seq, node: idx });
    }

    fn select(&mut self, c_inc: u32) -> Option<Selection> {
        if self.live == 0 {
            return None;
        }
        let best_d = Self::clean_top(&mut self.by_dhat, &mut self.nodes, &mut self.live, c_inc)?;
        let chosen = {
            let d_node = best_d.0 as usize;
            let d_fhat = self.nodes[d_node].0.depth as f64 + self.cost_to_go[self.nodes[d_node].0.feature as usize];
            if d_fhat < c_inc as f64 {
                d_node
            } else {
                let best_fh =
                    Self::clean_top(&mut self.by_fhat, &mut self.nodes, &mut self.live, c_inc)
                        .expect("a live node exists");
                if best_fh.1 < c_inc as f64 {
                    best_fh.0 as usize
                } else {
                    let best_f =
                        Self::clean_top(&mut self.by_f, &mut self.nodes, &mut self.live, c_inc)
                            .expect("a live node exists");
                    best_f.0 as usize
                }
            }
        };
        self.nodes[chosen].1 = true;
        self.live -= 1;
        Some(Selection::Node(self.nodes[chosen].0))
    }

    fn rekey(&mut self, _c_inc: u32) {
        // Keys are incumbent-independent; pruning happens lazily.
    }
}

fn run_engine(
    policy: &PolicyKind,
    instance: &TreeInstance,
    tables: &SearchTables<'_>,
    budget: u64,
    observations: Option<&mut Vec<Observation>>,
) -> ImprovementTrace {
    match policy {
        PolicyKind::Smiri => {
            let mut frontier =
                SmiriFrontier { table: tables.rstar, heap: BinaryHeap::new() };
            drive(&mut frontier, instance, budget, observations)
        }
        PolicyKind::Apts => {
            let mut frontier = KeyedNodeFrontier {
                heap: BinaryHeap::new(),
                keyer: |ctx: &NodeCtx, c_inc: u32| apts_priority(c_inc, ctx.depth, ctx.feature),
            };
            drive(&mut frontier, instance, budget, observations)
        }
        PolicyKind::Agpts => {
            let survival = tables.survival;
            let mut frontier = KeyedNodeFrontier {
                heap: BinaryHeap::new(),
                keyer: move |ctx: &NodeCtx, c_inc: u32| {
                    agpts_priority(survival, c_inc, ctx.depth, FeatureId(ctx.feature))
                },
            };
            drive(&mut frontier, instance, budget, observations)
        }
        PolicyKind::Aees => {
            let mut frontier = AeesFrontier {
                cost_to_go: tables.cost_to_go,
                nodes: Vec::new(),
                live: 0,
                by_dhat: BinaryHeap::new(),
                by_fhat: BinaryHeap::new(),
                by_f: BinaryHeap::new(),
            };
            drive(&mut frontier, instance, budget, observations)
        }
        PolicyKind::AraStar(schedule) => {
            let mut frontier =
                AraFrontier { schedule, weight_idx: 0, heap: BinaryHeap::new() };
            drive(&mut frontier, instance, budget, observations)
        }
    }
}

fn drive<F: Frontier>(
    frontier: &mut F,
    instance: &TreeInstance,
    budget: u64,
    mut observations: Option<&mut Vec<Observation>>,
) -> ImprovementTrace {
    let c_max = instance.params().c_max;
    let mut c_inc = c_max;
    let mut used = 0u64;
    let mut seq = 0u64;
    let mut improvements: Vec<(u64, u32)> = Vec::new();

    let root = instance.root_ctx();
    if root.feature != 0 && root.feature < c_inc {
        frontier.insert(root, c_inc, seq);
        seq += 1;
    }

    'outer: while let Some(selection) = frontier.select(c_inc) {
        let (ctx, actions): (NodeCtx, &[ActionId]) = match &selection {
            Selection::Edge(ctx, a) => (*ctx, core::slice::from_ref(a)),
            Selection::Node(ctx) => (*ctx, &[LEFT, RIGHT]),
        };
        let mut improved = false;
        for &a in actions {
            if used == budget {
                break 'outer;
            }
            used += 1;
            let child = instance.child_ctx(&ctx, a);
            if let Some(obs) = observations.as_deref_mut() {
                obs.push(Observation {
                    depth: child.depth,
                    chain: child.chain,
                    feature: child.feature,
                });
            }
            if child.feature == 0 {
                if child.depth < c_inc {
                    c_inc = child.depth;
                    improvements.push((used, c_inc));
                    improved = true;
                }
            } else if child.depth < c_max && child.depth + child.feature < c_inc {
                frontier.insert(child, c_inc, seq);
                seq += 1;
            }
        }
        if improved {
            frontier.rekey(c_inc);
        }
    }

    ImprovementTrace { improvements, budget, initial_bound: c_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::optimal_cost_in_instance;
    use crate::rate::precompute_r_star;
    use crate::survival::{expected_cost_to_go_table, survival_table};
    use crate::tree::TreeModelParams;

    struct Fixture {
        params: TreeModelParams,
        rstar: RStarTable,
        survival: SurvivalTable,
        cost_to_go: Vec<f64>,
    }

    impl Fixture {
        fn new(p: f64, h0: u32, c_max: u32) -> Self {
            let params = TreeModelParams::new(p, h0, c_max);
            let problem = make_tree_problem(params);
            let rstar = precompute_r_star(&problem, c_max).unwrap();
            let survival = survival_table(&problem, c_max);
            let cost_to_go = expected_cost_to_go_table(&survival);
            Self { params, rstar, survival, cost_to_go }
        }

        fn tables(&self) -> SearchTables<'_> {
            SearchTables::new(self.params, &self.rstar, &self.survival, &self.cost_to_go)
        }
    }

    fn all_policies() -> Vec<PolicyKind> {
        alloc::vec![
            PolicyKind::Smiri,
            PolicyKind::Apts,
            PolicyKind::Agpts,
            PolicyKind::Aees,
            PolicyKind::ara_standard(),
        ]
    }

    #[test]
    fn zero_budget_yields_empty_trace() {
        let fx = Fixture::new(0.4, 3, 8);
        let inst = TreeInstance::new(fx.params, 0xa1, 0, 0);
        for policy in all_policies() {
            let trace = run_anytime(&policy, &inst, &fx.tables(), 0);
            assert!(trace.improvements.is_empty());
            assert_eq!(trace.terminal_cost(), 8);
        }
    }

    #[test]
    fn traces_are_deterministic_and_well_formed() {
        let fx = Fixture::new(0.4, 4, 10);
        for policy in all_policies() {
            for i in 0..20 {
                let inst = TreeInstance::new(fx.params, 0xb2, 1, i);
                let a = run_anytime(&policy, &inst, &fx.tables(), 3000);
                let b = run_anytime(&policy, &inst, &fx.tables(), 3000);
                assert_eq!(a, b, "{} must be deterministic", policy.name());
                let mut prev_step = 0u64;
                let mut prev_cost = a.initial_bound;
                for &(s, c) in &a.improvements {
                    assert!(s > prev_step || (prev_step == 0 && s >= 1));
                    assert!(s <= a.budget);
                    assert!(c < prev_cost);
                    prev_step = s;
                    prev_cost = c;
                }
            }
        }
    }

    #[test]
    fn every_policy_converges_to_the_exhaustive_optimum() {
        let fx = Fixture::new(0.4, 4, 10);
        for i in 0..40 {
            let inst = TreeInstance::new(fx.params, 0xc3, 2, i);
            let optimal = optimal_cost_in_instance(&inst, 1 << 24).unwrap();
            let expected = optimal.unwrap_or(fx.params.c_max);
            for policy in all_policies() {
                let trace = run_anytime(&policy, &inst, &fx.tables(), 100_000);
                assert_eq!(
                    trace.terminal_cost(),
                    expected,
                    "{} on instance {} must reach the optimum",
                    policy.name(),
                    i
                );
            }
        }
    }

    #[test]
    fn matched_instances_realize_identical_observations() {
        let fx = Fixture::new(0.4, 4, 10);
        let inst = TreeInstance::new(fx.params, 0xd4, 3, 7);
        let observed: Vec<Vec<Observation>> = all_policies()
            .iter()
            .map(|p| run_anytime_observed(p, &inst, &fx.tables(), 2000).1)
            .collect();
        // Any history two policies both realized must carry the same feature.
        use alloc::collections::BTreeMap;
        let maps: Vec<BTreeMap<(u32, u64), u32>> = observed
            .iter()
            .map(|v| v.iter().map(|o| ((o.depth, o.chain), o.feature)).collect())
            .collect();
        for i in 0..maps.len() {
            for j in i + 1..maps.len() {
                for (key, feature) in &maps[i] {
                    if let Some(other) = maps[j].get(key) {
                        assert_eq!(feature, other);
                    }
                }
            }
        }
    }

    #[test]
    fn budget_is_never_exceeded() {
        let fx = Fixture::new(0.4, 4, 10);
        let inst = TreeInstance::new(fx.params, 0xe5, 0, 1);
        for policy in all_policies() {
            for budget in [1u64, 2, 3, 7, 50] {
                let (trace, obs) = run_anytime_observed(&policy, &inst, &fx.tables(), budget);
                assert!(obs.len() as u64 <= budget);
                if let Some(&(s, _)) = trace.improvements.last() {
                    assert!(s <= budget);
                }
            }
        }
    }

    #[test]
    fn smiri_priorities_follow_the_table() {
        let fx = Fixture::new(0.4, 4, 10);
        assert_eq!(smiri_priority(&fx.rstar, 5, 5, FeatureId(1), LEFT), 0.0);
        let r = smiri_priority(&fx.rstar, 7, 5, FeatureId(1), LEFT);
        assert!((r - 0.4).abs() < 1e-12);
        let r = smiri_priority(&fx.rstar, 8, 5, FeatureId(2), RIGHT);
        assert!((r - 0.256 / 1.64).abs() < 1e-9);
    }

    #[test]
    fn smiri_selections_are_nonincreasing_between_improvements() {
        let fx = Fixture::new(0.4, 4, 12);
        let inst = TreeInstance::new(fx.params, 0xf6, 0, 3);
        let mut frontier = SmiriFrontier { table: &fx.rstar, heap: BinaryHeap::new() };
        let mut c_inc = fx.params.c_max;
        let mut seq = 0u64;
        frontier.insert(inst.root_ctx(), c_inc, seq);
        seq += 1;
        let mut last = f64::INFINITY;
        for _ in 0..2000 {
            let Some(Selection::Edge(ctx, a)) = frontier.select(c_inc) else { break };
            let r = smiri_priority(&fx.rstar, c_inc, ctx.depth, FeatureId(ctx.feature), a);
            assert!(r <= last + 1e-12, "selected rate rose from {last} to {r}");
            last = r;
            let child = inst.child_ctx(&ctx, a);
            if child.feature == 0 {
                if child.depth < c_inc {
                    c_inc = child.depth;
                    frontier.rekey(c_inc);
                    last = f64::INFINITY;
                }
            } else if child.depth < fx.params.c_max && child.depth + child.feature < c_inc {
                frontier.insert(child, c_inc, seq);
                seq += 1;
            }
        }
    }

    #[test]
    fn priority_formulas_match_their_definitions() {
        assert_eq!(apts_priority(10, 3, 2), 3.5);
        assert_eq!(apts_priority(80, 0, 20), 4.0);
        assert_eq!(ara_priority(3, 2, 3.0), 9.0);
        assert_eq!(ara_priority(3, 2, 1.0), 5.0);
        let fx = Fixture::new(0.4, 3, 6);
        assert_eq!(agpts_priority(&fx.survival, 5, 5, FeatureId(2)), 0.0);
        let pt = agpts_priority(&fx.survival, 4, 2, FeatureId(1));
        assert!((pt - 0.64).abs() < 1e-12);
    }

    #[test]
    fn aees_rule_follows_the_three_way_selection() {
        // Single candidate: chosen regardless.
        assert_eq!(aees_select(&[(2, 3, 3.4)], 8), 0);
        // d_hat-best has f_hat below the incumbent.
        let cands = [(2u32, 3u32, 3.4f64), (4, 1, 1.2)];
        assert_eq!(aees_select(&cands, 8), 1);
        // Everything at or above the incumbent: fall back to min f.
        let cands = [(2u32, 3u32, 7.5f64), (4, 4, 6.0)];
        assert_eq!(aees_select(&cands, 5), 0);
    }

    #[test]
    fn ara_weight_advances_on_improvement() {
        let schedule = AraSchedule::standard();
        let mut frontier = AraFrontier { schedule: &schedule, weight_idx: 0, heap: BinaryHeap::new() };
        assert_eq!(frontier.weight(), 5.0);
        frontier.rekey(10);
        assert_eq!(frontier.weight(), 3.0);
        for _ in 0..10 {
            frontier.rekey(10);
        }
        assert_eq!(frontier.weight(), 1.0, "weight pins at the final entry");
    }

    #[test]
    #[should_panic(expected = "strictly decreasing")]
    fn ara_schedule_must_decrease() {
        let _ = AraSchedule::new(alloc::vec![3.0, 3.0, 1.0]);
    }

    #[test]
    #[should_panic(expected = "different problem")]
    fn mismatched_tables_are_rejected() {
        let fx = Fixture::new(0.4, 4, 10);
        let other = Fixture::new(0.2, 4, 10);
        let _ = SearchTables::new(other.params, &fx.rstar, &fx.survival, &fx.cost_to_go);
    }

    #[test]
    fn incumbent_at_walks_the_trace() {
        let trace = ImprovementTrace {
            improvements: alloc::vec![(5, 7), (9, 4)],
            budget: 20,
            initial_bound: 10,
        };
        assert_eq!(trace.incumbent_at(0), 10);
        assert_eq!(trace.incumbent_at(4), 10);
        assert_eq!(trace.incumbent_at(5), 7);
        assert_eq!(trace.incumbent_at(8), 7);
        assert_eq!(trace.incumbent_at(9), 4);
        assert_eq!(trace.incumbent_at(20), 4);
        assert_eq!(trace.terminal_cost(), 4);
    }
}
