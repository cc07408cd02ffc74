//! The random binary tree model `T(p, h0)`.
//!
//! Features are natural numbers; the root has feature `h0`, feature 0 is
//! the unique goal, both actions cost 1, and from feature `h >= 1` either
//! action leads to `h - 1` with probability `p` and to `h + 1` with
//! probability `1 - p`, independently per edge.
//!
//! The model appears in two forms:
//!
//! * as a finite [`AbstractProblem`] for table precomputation
//!   ([`make_tree_problem`]), with the feature space truncated at
//!   `h0 + c_max` (no deeper feature can sit on an improving solution
//!   within the cost bound) and one absorbing dead-end feature for the
//!   truncated mass;
//! * as a lazily realized [`TreeInstance`] for search. Realizations are
//!   typically infinite, so child features are derived on demand by a
//!   counter-based mix of the instance identity and the child's history.
//!   Realization is therefore a pure function: every algorithm and every
//!   thread sees the same tree, regardless of visit order.

use alloc::vec::Vec;

use crate::mix::{mix64, mix_with, unit_f64};
use crate::problem::{AbstractProblem, ActionId, FeatureId, KernelRow};

/// Action 0: conventionally "Left".
pub const LEFT: ActionId = ActionId(0);
/// Action 1: conventionally "Right".
pub const RIGHT: ActionId = ActionId(1);

const CHAIN_LEFT: u64 = 0x9e08_c937_55b1_2d6b;
const CHAIN_RIGHT: u64 = 0x23a9_4fb0_dd14_8e13;

/// Parameters of the tree model plus the cost bound used to truncate it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeModelParams {
    /// Probability that an edge steps down (towards the goal).
    pub p: f64,
    /// Root feature.
    pub h0: u32,
    /// Cost bound; also the depth horizon of interest.
    pub c_max: u32,
}

impl TreeModelParams {
    pub fn new(p: f64, h0: u32, c_max: u32) -> Self {
        let params = Self { p, h0, c_max };
        params.check();
        params
    }

    fn check(&self) {
        assert!(
            self.p > 0.0 && self.p < 1.0,
            "step-down probability must lie strictly in (0, 1), got {}",
            self.p
        );
        assert!(self.h0 >= 1, "root feature must be at least 1");
        assert!(self.c_max >= 1, "cost bound must be at least 1");
    }

    /// Highest live feature value: `h0 + c_max`.
    pub fn max_live_feature(&self) -> u32 {
        self.h0 + self.c_max
    }

    /// Feature id of the absorbing dead-end that stands in for all
    /// features above [`Self::max_live_feature`].
    pub fn dead_end(&self) -> FeatureId {
        FeatureId(self.max_live_feature() + 1)
    }
}

/// Build the truncated abstract problem for `T(p, h0)` under `c_max`.
///
/// Live features are `0 ..= h0 + c_max`; feature 0 is the goal sink; the
/// up-step from the highest live feature is redirected into the dead-end
/// feature, which has no legal actions. The result always validates.
pub fn make_tree_problem(params: TreeModelParams) -> AbstractProblem {
    params.check();
    let top = params.max_live_feature();
    let dead = params.dead_end();
    let n_features = top + 2;
    let n_actions = 2u32;

    let step_cost = alloc::vec![1u32; n_features as usize];
    let mut kernel = Vec::with_capacity(n_features as usize * n_actions as usize);
    for h in 0..n_features {
        for _a in 0..n_actions {
            let row = if h == 0 || h == dead.0 {
                KernelRow::Illegal
            } else {
                let up = if h == top { dead } else { FeatureId(h + 1) };
                KernelRow::Legal(alloc::vec![
                    (FeatureId(h - 1), params.p),
                    (up, 1.0 - params.p),
                ])
            };
            kernel.push(row);
        }
    }

    AbstractProblem::new(
        n_features,
        n_actions,
        FeatureId(params.h0),
        &[FeatureId(0)],
        step_cost,
        kernel,
    )
}

/// Canonical encoding of an action sequence: one bit per action
/// (0 = Left, 1 = Right) plus the explicit length, so the encoding is
/// injective over all finite histories.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HistoryKey {
    words: Vec<u64>,
    len: u32,
}

impl HistoryKey {
    /// The empty history (the root).
    pub fn root() -> Self {
        Self { words: Vec::new(), len: 0 }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Action taken at step `i` (0-based).
    pub fn action_at(&self, i: u32) -> ActionId {
        assert!(i < self.len, "step {} out of range (len {})", i, self.len);
        let bit = (self.words[(i / 64) as usize] >> (i % 64)) & 1;
        ActionId(bit as u32)
    }

    /// The history extended by one action.
    pub fn child(&self, a: ActionId) -> Self {
        assert!(a.0 < 2, "tree model has two actions");
        let mut words = self.words.clone();
        let i = self.len;
        if (i as usize) / 64 >= words.len() {
            words.push(0);
        }
        if a.0 == 1 {
            words[(i / 64) as usize] |= 1u64 << (i % 64);
        }
        Self { words, len: i + 1 }
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.len).map(move |i| self.action_at(i))
    }
}

/// Per-node realization context: the running mix state, depth, and the
/// realized feature. Produced by [`TreeInstance::root_ctx`] and
/// [`TreeInstance::child_ctx`]; equal histories always yield equal
/// contexts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeCtx {
    /// Avalanche-mix state accumulated along the history.
    pub chain: u64,
    pub depth: u32,
    /// Realized feature value (a natural number, not truncated).
    pub feature: u32,
}

/// One lazily realized sample of the tree generation process.
///
/// The instance is identified by `(master_seed, case_id, instance_id)`;
/// the feature of any history is a pure function of that identity and
/// the history itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeInstance {
    params: TreeModelParams,
    master_seed: u64,
    case_id: u32,
    instance_id: u32,
    scramble: u64,
}

impl TreeInstance {
    pub fn new(params: TreeModelParams, master_seed: u64, case_id: u32, instance_id: u32) -> Self {
        params.check();
        let scramble = mix_with(
            mix_with(mix64(master_seed), case_id as u64),
            instance_id as u64,
        );
        Self {
            params,
            master_seed,
            case_id,
            instance_id,
            scramble,
        }
    }

    pub fn params(&self) -> TreeModelParams {
        self.params
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn case_id(&self) -> u32 {
        self.case_id
    }

    pub fn instance_id(&self) -> u32 {
        self.instance_id
    }

    /// Context of the root node (feature `h0`).
    pub fn root_ctx(&self) -> NodeCtx {
        NodeCtx {
            chain: self.scramble,
            depth: 0,
            feature: self.params.h0,
        }
    }

    /// Realize the child of `parent` along `a` in O(1).
    ///
    /// Panics when `parent` is a goal (goals are terminal) or already at
    /// the depth horizon `c_max` (deeper nodes are never needed under
    /// the cost bound).
    pub fn child_ctx(&self, parent: &NodeCtx, a: ActionId) -> NodeCtx {
        assert!(parent.feature != 0, "cannot expand from a goal node");
        assert!(
            parent.depth < self.params.c_max,
            "child would exceed the depth horizon c_max = {}",
            self.params.c_max
        );
        let salt = if a.0 == 0 { CHAIN_LEFT } else { CHAIN_RIGHT };
        let chain = mix_with(parent.chain, salt);
        let down = unit_f64(chain) < self.params.p;
        let feature = if down { parent.feature - 1 } else { parent.feature + 1 };
        NodeCtx {
            chain,
            depth: parent.depth + 1,
            feature,
        }
    }

    /// Realized feature of an arbitrary history, by folding from the
    /// root. Panics if the history passes through a goal.
    pub fn feature_of(&self, key: &HistoryKey) -> u32 {
        let mut ctx = self.root_ctx();
        for a in key.actions() {
            ctx = self.child_ctx(&ctx, a);
        }
        ctx.feature
    }

    /// Realized feature of the child `parent ⌢ a`.
    pub fn realize_child(&self, parent: &HistoryKey, a: ActionId) -> u32 {
        let ctx = self.root_ctx();
        let parent_ctx = key_fold(self, ctx, parent);
        self.child_ctx(&parent_ctx, a).feature
    }
}

fn key_fold(instance: &TreeInstance, mut ctx: NodeCtx, key: &HistoryKey) -> NodeCtx {
    for a in key.actions() {
        ctx = instance.child_ctx(&ctx, a);
    }
    ctx
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn tree_problem_validates_for_all_benchmark_parameter_rows() {
        let rows = [
            (0.1, 20, 250),
            (0.2, 100, 300),
            (0.2, 50, 150),
            (0.2, 20, 80),
            (0.4, 50, 80),
            (0.6, 50, 70),
        ];
        for (p, h0, c_max) in rows {
            let problem = make_tree_problem(TreeModelParams::new(p, h0, c_max));
            assert!(problem.validate().is_empty(), "T({p}, {h0}) under {c_max}");
        }
    }

    #[test]
    fn tree_problem_shape_matches_model() {
        let params = TreeModelParams::new(0.4, 50, 80);
        let problem = make_tree_problem(params);
        // 131 live features (0..=130) plus one dead-end.
        assert_eq!(problem.n_features(), 132);
        assert_eq!(problem.n_actions(), 2);
        assert_eq!(problem.initial(), FeatureId(50));
        assert!(problem.is_goal(FeatureId(0)));
        assert_eq!(problem.goals().count(), 1);

        let row = problem.successors(FeatureId(1), LEFT);
        assert_eq!(
            row,
            &KernelRow::Legal(alloc::vec![(FeatureId(0), 0.4), (FeatureId(2), 0.6)])
        );
        assert_eq!(problem.successors(FeatureId(0), RIGHT), &KernelRow::Illegal);

        // The top live feature's up-step is redirected into the dead-end.
        let top = params.max_live_feature();
        let row = problem.successors(FeatureId(top), RIGHT);
        assert_eq!(
            row,
            &KernelRow::Legal(alloc::vec![
                (FeatureId(top - 1), 0.4),
                (params.dead_end(), 0.6)
            ])
        );
        assert!(!problem.has_legal_action(params.dead_end()));
    }

    #[test]
    fn low_p_transition_row() {
        let problem = make_tree_problem(TreeModelParams::new(0.1, 5, 10));
        let row = problem.successors(FeatureId(1), RIGHT);
        assert_eq!(
            row,
            &KernelRow::Legal(alloc::vec![(FeatureId(0), 0.1), (FeatureId(2), 0.9)])
        );
    }

    #[test]
    fn realization_is_pure_and_steps_by_one() {
        let params = TreeModelParams::new(0.4, 20, 30);
        let inst = TreeInstance::new(params, 0xfeed, 3, 17);
        let key = HistoryKey::root().child(LEFT).child(RIGHT).child(LEFT);
        assert_eq!(inst.feature_of(&key), inst.feature_of(&key));

        let mut ctx = inst.root_ctx();
        assert_eq!(ctx.feature, 20);
        for a in [LEFT, RIGHT, LEFT, LEFT, RIGHT] {
            let next = inst.child_ctx(&ctx, a);
            let diff = next.feature as i64 - ctx.feature as i64;
            assert!(diff == 1 || diff == -1);
            ctx = next;
        }
    }

    #[test]
    fn root_children_step_from_h0() {
        let inst = TreeInstance::new(TreeModelParams::new(0.4, 20, 30), 1, 0, 0);
        for a in [LEFT, RIGHT] {
            let f = inst.realize_child(&HistoryKey::root(), a);
            assert!(f == 19 || f == 21);
        }
    }

    #[test]
    #[should_panic(expected = "goal")]
    fn expanding_from_goal_panics() {
        let inst = TreeInstance::new(TreeModelParams::new(0.9, 1, 20), 7, 0, 0);
        // Walk down until we realize a goal child, then try to extend it.
        let mut key = HistoryKey::root();
        for _ in 0..20 {
            let f = inst.realize_child(&key, LEFT);
            key = key.child(LEFT);
            if f == 0 {
                let _ = inst.realize_child(&key, LEFT);
                return;
            }
        }
        panic!("no goal realized in 20 down-biased steps (p = 0.9)");
    }

    #[test]
    fn down_step_frequency_matches_p() {
        // 10^6 fresh instances, one draw each: the fraction of down-steps
        // must sit within 0.002 of p = 0.4 (about 4 binomial sigmas).
        let params = TreeModelParams::new(0.4, 5, 10);
        let mut downs = 0u32;
        let n = 1_000_000u32;
        for i in 0..n {
            let inst = TreeInstance::new(params, 0xabcdef, 0, i);
            let f = inst.child_ctx(&inst.root_ctx(), LEFT).feature;
            if f == 4 {
                downs += 1;
            }
        }
        let frac = downs as f64 / n as f64;
        assert!((frac - 0.4).abs() < 0.002, "down fraction {frac}");
    }

    #[test]
    fn history_key_encoding_is_injective_at_small_depth() {
        let mut seen = BTreeSet::new();
        // All histories of length <= 10.
        fn visit(key: HistoryKey, depth: u32, seen: &mut BTreeSet<(u32, Vec<u64>)>) {
            assert!(seen.insert((key.len(), key_words(&key))));
            if depth == 0 {
                return;
            }
            visit(key.child(LEFT), depth - 1, seen);
            visit(key.child(RIGHT), depth - 1, seen);
        }
        fn key_words(key: &HistoryKey) -> Vec<u64> {
            key.actions().map(|a| a.0 as u64).collect()
        }
        visit(HistoryKey::root(), 10, &mut seen);
        assert_eq!(seen.len(), 2usize.pow(11) - 1);
    }

    #[test]
    fn key_bits_round_trip_past_word_boundary() {
        let mut key = HistoryKey::root();
        let pattern: Vec<ActionId> = (0..130).map(|i| ActionId((i * 7 % 3 == 0) as u32)).collect();
        for &a in &pattern {
            key = key.child(a);
        }
        assert_eq!(key.len(), 130);
        let back: Vec<ActionId> = key.actions().collect();
        assert_eq!(back, pattern);
    }
}
