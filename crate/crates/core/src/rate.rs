//! Precomputation of the peak incremental rate of improvement `r*`.
//!
//! An *edge class* `(C, x, a)` stands for every unexpanded edge whose
//! parent node has feature `x`, whose action is `a`, and whose relative
//! cost bound (incumbent cost minus the parent's path cost) is `C`.
//! Committing to such an edge is a macro-action: expand it, then keep
//! expanding descendant edges whose own rate is at least the rate of the
//! class, until either a strictly improving solution is found (success)
//! or no qualifying edge remains (failure). For each class the table
//! stores the success probability `p_s`, the unnormalized expected step
//! counts `t_s`/`t_f` of successful and failed outcomes, the expected
//! improvement `delta`, and the rate `r* = delta / (t_s + t_f)`.
//!
//! Because step costs are positive, the relative bound strictly
//! decreases along any path, so classes are finalized by dynamic
//! programming in increasing order of `C`: each class aggregates the
//! already-finalized statistics of its descendant classes, dequeued in
//! non-increasing `r*` order until the running rate of the class exceeds
//! everything left. Subtrees are summarized per possible child feature,
//! with descendant edges counted at their *expected* frequencies
//! (generally non-integral), which is where the computation is an
//! approximation rather than an exact expectation.
//!
//! Goal features are terminal here, so the goal payoff enters through a
//! synthetic *claim* descendant: when a child feature is a goal, the
//! macro-action can claim an improvement of `C - c̄(goal)` at no extra
//! expansion cost. Claim rows have `p_s = 1`, `delta = C`, and infinite
//! rate; they are represented by formula rather than stored. References
//! to classes with relative bound `<= 0` resolve to the all-zero row (no
//! strict improvement is possible under a spent bound).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::problem::{AbstractProblem, ActionId, Diagnostic, FeatureId, KernelRow};

/// Default cap on stored table entries (`W = C_max * |F| * |A|`).
pub const DEFAULT_MAX_ENTRIES: u64 = 50_000_000;

/// An edge equivalence class: relative cost bound, parent feature, action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeClass {
    pub c_rel: u32,
    pub feature: FeatureId,
    pub action: ActionId,
}

/// Aggregate outcome statistics of one edge class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeClassStats {
    /// Probability that the macro-action finds a strict improvement.
    pub p_s: f64,
    /// Expected steps spent in successful outcomes, weighted by outcome
    /// probability (unnormalized).
    pub t_s: f64,
    /// Same for failed outcomes.
    pub t_f: f64,
    /// Expected improvement of the cost bound.
    pub delta: f64,
    /// Peak incremental rate of improvement; `f64::INFINITY` on claim
    /// rows only.
    pub r_star: f64,
}

impl EdgeClassStats {
    /// The all-zero row used for spent bounds (`C <= 0`).
    pub const ZERO: Self = Self {
        p_s: 0.0,
        t_s: 0.0,
        t_f: 0.0,
        delta: 0.0,
        r_star: 0.0,
    };

    /// The claim row for a goal feature under relative bound `c_rel >= 1`:
    /// certain success, improvement `c_rel`, zero further expansions.
    pub fn claim(c_rel: u32) -> Self {
        debug_assert!(c_rel >= 1);
        Self {
            p_s: 1.0,
            t_s: 0.0,
            t_f: 0.0,
            delta: c_rel as f64,
            r_star: f64::INFINITY,
        }
    }
}

/// Errors from table precomputation.
#[derive(Clone, Debug, PartialEq)]
pub enum PrecomputeError {
    /// The problem failed validation; diagnostics attached.
    InvalidProblem(Vec<Diagnostic>),
    /// `W = C_max * |F| * |A|` exceeds the configured entry cap.
    TableTooLarge { entries: u64, max: u64 },
}

impl core::fmt::Display for PrecomputeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PrecomputeError::InvalidProblem(diags) => {
                write!(f, "problem failed validation with {} diagnostic(s)", diags.len())
            }
            PrecomputeError::TableTooLarge { entries, max } => {
                write!(f, "table would hold W = {} entries, exceeding the cap of {}", entries, max)
            }
        }
    }
}

/// The finished lookup table: one row per `(C, x, a)` with
/// `1 <= C <= c_max` and `(x, a)` legal, plus virtual claim rows for
/// goal features.
#[derive(Clone, Debug)]
pub struct RStarTable {
    problem_hash: u64,
    c_max: u32,
    n_features: u32,
    n_actions: u32,
    /// Legality of each `(x, a)` pair, indexed `x * n_actions + a`.
    legal: Vec<bool>,
    goal_mask: Vec<bool>,
    /// Dense rows indexed `((c - 1) * n_features + x) * n_actions + a`;
    /// rows of illegal pairs stay all-zero.
    rows: Vec<EdgeClassStats>,
    /// Whether the row's statistics are exact (every processed descendant
    /// carried expected frequency exactly 1 and was itself exact).
    exact: Vec<bool>,
}

impl RStarTable {
    pub fn problem_hash(&self) -> u64 {
        self.problem_hash
    }

    pub fn c_max(&self) -> u32 {
        self.c_max
    }

    pub fn n_features(&self) -> u32 {
        self.n_features
    }

    pub fn n_actions(&self) -> u32 {
        self.n_actions
    }

    #[inline]
    fn pair_index(&self, x: FeatureId, a: ActionId) -> usize {
        x.index() * self.n_actions as usize + a.index()
    }

    #[inline]
    fn row_index(&self, c_rel: u32, x: FeatureId, a: ActionId) -> usize {
        ((c_rel - 1) as usize * self.n_features as usize + x.index()) * self.n_actions as usize
            + a.index()
    }

    /// Statistics for a legal `(x, a)` pair under relative bound `c_rel`.
    ///
    /// Bounds `<= 0` resolve to the all-zero row. Bounds above `c_max`
    /// are a caller error: the search starts at `C_max` and path costs
    /// only grow, so they cannot occur.
    pub fn lookup(&self, c_rel: i64, x: FeatureId, a: ActionId) -> EdgeClassStats {
        if c_rel <= 0 {
            return EdgeClassStats::ZERO;
        }
        assert!(
            c_rel <= self.c_max as i64,
            "relative bound {} exceeds table c_max {}",
            c_rel,
            self.c_max
        );
        debug_assert!(
            self.legal[self.pair_index(x, a)],
            "lookup of illegal pair ({}, {})",
            x.0,
            a.0
        );
        self.rows[self.row_index(c_rel as u32, x, a)]
    }

    /// Shorthand for `lookup(..).r_star`.
    #[inline]
    pub fn r_star(&self, c_rel: i64, x: FeatureId, a: ActionId) -> f64 {
        self.lookup(c_rel, x, a).r_star
    }

    /// The claim row of a goal feature under relative bound `c_rel`
    /// (the all-zero row when `c_rel <= 0`).
    pub fn claim_row(&self, c_rel: i64) -> EdgeClassStats {
        if c_rel <= 0 {
            EdgeClassStats::ZERO
        } else {
            assert!(
                c_rel <= self.c_max as i64,
                "relative bound {} exceeds table c_max {}",
                c_rel,
                self.c_max
            );
            EdgeClassStats::claim(c_rel as u32)
        }
    }

    /// Whether the stored row's statistics are exact rather than
    /// expected-frequency approximations.
    pub fn is_exact(&self, c_rel: u32, x: FeatureId, a: ActionId) -> bool {
        assert!(c_rel >= 1 && c_rel <= self.c_max);
        self.exact[self.row_index(c_rel, x, a)]
    }

    pub fn is_legal_pair(&self, x: FeatureId, a: ActionId) -> bool {
        self.legal[self.pair_index(x, a)]
    }

    pub fn is_goal(&self, x: FeatureId) -> bool {
        self.goal_mask[x.index()]
    }

    /// Total logical entries: stored rows for legal pairs plus one claim
    /// row per goal feature and bound.
    pub fn entry_count(&self) -> u64 {
        let legal_pairs = self.legal.iter().filter(|&&l| l).count() as u64;
        let goals = self.goal_mask.iter().filter(|&&g| g).count() as u64;
        self.c_max as u64 * (legal_pairs + goals)
    }

    /// Iterate over stored rows of legal pairs in `(C, x, a)` order.
    pub fn stored_rows(&self) -> impl Iterator<Item = (EdgeClass, EdgeClassStats, bool)> + '_ {
        (1..=self.c_max).flat_map(move |c| {
            (0..self.n_features).flat_map(move |x| {
                (0..self.n_actions).filter_map(move |a| {
                    let (x, a) = (FeatureId(x), ActionId(a));
                    if !self.legal[self.pair_index(x, a)] {
                        return None;
                    }
                    let i = self.row_index(c, x, a);
                    Some((
                        EdgeClass { c_rel: c, feature: x, action: a },
                        self.rows[i],
                        self.exact[i],
                    ))
                })
            })
        })
    }

    /// Reassemble a table from persisted parts. Lengths must be
    /// consistent; row values are taken as-is.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        problem_hash: u64,
        c_max: u32,
        n_features: u32,
        n_actions: u32,
        legal: Vec<bool>,
        goal_mask: Vec<bool>,
        rows: Vec<EdgeClassStats>,
        exact: Vec<bool>,
    ) -> Self {
        let pairs = n_features as usize * n_actions as usize;
        assert_eq!(legal.len(), pairs);
        assert_eq!(goal_mask.len(), n_features as usize);
        assert_eq!(rows.len(), c_max as usize * pairs);
        assert_eq!(exact.len(), rows.len());
        Self {
            problem_hash,
            c_max,
            n_features,
            n_actions,
            legal,
            goal_mask,
            rows,
            exact,
        }
    }
}

/// Precompute the full `r*` table with the default entry cap.
pub fn precompute_r_star(
    problem: &AbstractProblem,
    c_max: u32,
) -> Result<RStarTable, PrecomputeError> {
    precompute_r_star_with_limit(problem, c_max, DEFAULT_MAX_ENTRIES)
}

/// Precompute the full `r*` table, refusing to allocate more than
/// `max_entries` stored rows.
pub fn precompute_r_star_with_limit(
    problem: &AbstractProblem,
    c_max: u32,
    max_entries: u64,
) -> Result<RStarTable, PrecomputeError> {
    assert!(c_max >= 1, "c_max must be at least 1");
    let diags = problem.validate();
    if !diags.is_empty() {
        return Err(PrecomputeError::InvalidProblem(diags));
    }
    let w = c_max as u64 * problem.n_features() as u64 * problem.n_actions() as u64;
    if w > max_entries {
        return Err(PrecomputeError::TableTooLarge { entries: w, max: max_entries });
    }

    let mut state = Precompute::new(problem, c_max);
    for c in 1..=c_max {
        for x in problem.features() {
            if problem.is_goal(x) {
                continue; // claim rows are virtual
            }
            for a in problem.actions() {
                if !problem.successors(x, a).is_legal() {
                    continue;
                }
                let idx = state.row_index(c, x, a);
                let (stats, edges, exact) = state.finalize_row(c, x, a);
                state.rows[idx] = stats;
                state.edges[idx] = edges;
                state.exact[idx] = exact;
            }
        }
    }

    let legal = problem
        .features()
        .flat_map(|x| problem.actions().map(move |a| (x, a)))
        .map(|(x, a)| problem.successors(x, a).is_legal())
        .collect();
    let goal_mask = problem.features().map(|x| problem.is_goal(x)).collect();
    Ok(RStarTable {
        problem_hash: problem.content_hash(),
        c_max,
        n_features: problem.n_features(),
        n_actions: problem.n_actions(),
        legal,
        goal_mask,
        rows: state.rows,
        exact: state.exact,
    })
}

/// Working state of the dynamic program. Rows are keyed by the dense
/// index `((c - 1) * |F| + x) * |A| + a`; descendant keys at or above
/// `n_rows` encode claim rows as `n_rows + c_rel`.
struct Precompute<'a> {
    problem: &'a AbstractProblem,
    n_features: usize,
    n_actions: usize,
    n_rows: u32,
    rows: Vec<EdgeClassStats>,
    /// Expected frequencies of surviving descendant classes given
    /// failure, per finalized row. Needed only during the sweep; dropped
    /// when the table is assembled.
    edges: Vec<Vec<(u32, f64)>>,
    exact: Vec<bool>,
}

/// Residual failure state for one possible child feature: remaining
/// failure probability and the accumulated conditional failure time.
struct ChildSlot {
    p: f64,
    t: f64,
}

/// Max-heap entry; ties broken towards the smallest key so the dequeue
/// order is deterministic.
#[derive(PartialEq)]
struct QueueEntry {
    r: f64,
    key: u32,
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.r
            .total_cmp(&other.r)
            .then_with(|| other.key.cmp(&self.key))
    }
}

impl<'a> Precompute<'a> {
    fn new(problem: &'a AbstractProblem, c_max: u32) -> Self {
        let n_features = problem.n_features() as usize;
        let n_actions = problem.n_actions() as usize;
        let n_rows = c_max as usize * n_features * n_actions;
        Self {
            problem,
            n_features,
            n_actions,
            n_rows: n_rows as u32,
            rows: alloc::vec![EdgeClassStats::ZERO; n_rows],
            edges: alloc::vec![Vec::new(); n_rows],
            exact: alloc::vec![true; n_rows],
        }
    }

    #[inline]
    fn row_index(&self, c_rel: u32, x: FeatureId, a: ActionId) -> usize {
        ((c_rel - 1) as usize * self.n_features + x.index()) * self.n_actions + a.index()
    }

    #[inline]
    fn claim_key(&self, c_rel: u32) -> u32 {
        self.n_rows + c_rel
    }

    fn stats_of(&self, key: u32) -> EdgeClassStats {
        if key >= self.n_rows {
            EdgeClassStats::claim(key - self.n_rows)
        } else {
            self.rows[key as usize]
        }
    }

    fn edges_of(&self, key: u32) -> &[(u32, f64)] {
        if key >= self.n_rows {
            &[]
        } else {
            &self.edges[key as usize]
        }
    }

    fn exact_of(&self, key: u32) -> bool {
        if key >= self.n_rows {
            true
        } else {
            self.exact[key as usize]
        }
    }

    /// Finalize one non-goal class `(c, x, a)` against the rows already
    /// computed for smaller bounds. Returns the statistics, the surviving
    /// descendant frequencies given failure, and the exactness flag.
    fn finalize_row(
        &self,
        c: u32,
        x: FeatureId,
        a: ActionId,
    ) -> (EdgeClassStats, Vec<(u32, f64)>, bool) {
        let KernelRow::Legal(entries) = self.problem.successors(x, a) else {
            unreachable!("finalize_row is only called on legal pairs");
        };

        let mut stats = EdgeClassStats::ZERO;
        let mut exact = true;
        let mut slots: Vec<ChildSlot> = Vec::with_capacity(entries.len());
        let mut freq: Vec<BTreeMap<u32, f64>> = Vec::with_capacity(entries.len());
        let mut queue: alloc::collections::BinaryHeap<QueueEntry> =
            alloc::collections::BinaryHeap::new();
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut processed: BTreeSet<u32> = BTreeSet::new();

        for &(y, p_y) in entries {
            slots.push(ChildSlot { p: p_y, t: 1.0 });
            let mut slot_freq = BTreeMap::new();
            let c_rel = c as i64 - self.problem.step_cost(y) as i64;
            if c_rel >= 1 {
                let c_rel = c_rel as u32;
                if self.problem.is_goal(y) {
                    let key = self.claim_key(c_rel);
                    if seen.insert(key) {
                        queue.push(QueueEntry { r: f64::INFINITY, key });
                    }
                    *slot_freq.entry(key).or_insert(0.0) += 1.0;
                } else {
                    for b in self.problem.legal_actions(y) {
                        let key = self.row_index(c_rel, y, b) as u32;
                        if seen.insert(key) {
                            queue.push(QueueEntry { r: self.rows[key as usize].r_star, key });
                        }
                        *slot_freq.entry(key).or_insert(0.0) += 1.0;
                    }
                }
            }
            freq.push(slot_freq);
        }

        let mut last_r = f64::INFINITY;
        while let Some(top) = queue.peek() {
            if !(top.r >= stats.r_star) {
                break;
            }
            let top = queue.pop().expect("peeked entry");
            debug_assert!(top.r <= last_r, "descendants must dequeue in non-increasing order");
            last_r = top.r;
            processed.insert(top.key);

            self.process_descendant(
                top.key,
                &mut stats,
                &mut slots,
                &mut freq,
                &mut queue,
                &mut seen,
                &processed,
                &mut exact,
            );

            stats.t_f = slots.iter().map(|s| s.p * s.t).sum();
            let total = stats.t_s + stats.t_f;
            stats.r_star = if total > 0.0 { stats.delta / total } else { 0.0 };
        }

        // Residual frequencies survive as the expected frontier given
        // failure; when failure is impossible there is nothing to keep.
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        if stats.p_s < 1.0 {
            let denom = 1.0 - stats.p_s;
            for (slot, slot_freq) in slots.iter().zip(freq.iter()) {
                for (&key, &m) in slot_freq {
                    if m > 0.0 {
                        *merged.entry(key).or_insert(0.0) += m * slot.p / denom;
                    }
                }
            }
        }
        (stats, merged.into_iter().collect(), exact)
    }

    /// Fold one descendant class into the running statistics: exactly the
    /// per-child updates of the dynamic program, with the descendant's
    /// expected frequency `m` allowed to be any positive real.
    #[allow(clippy::too_many_arguments)]
    fn process_descendant(
        &self,
        key: u32,
        stats: &mut EdgeClassStats,
        slots: &mut [ChildSlot],
        freq: &mut [BTreeMap<u32, f64>],
        queue: &mut alloc::collections::BinaryHeap<QueueEntry>,
        seen: &mut BTreeSet<u32>,
        processed: &BTreeSet<u32>,
        exact: &mut bool,
    ) {
        let desc = self.stats_of(key);
        let desc_exact = self.exact_of(key);
        let q = 1.0 - desc.p_s;

        for (slot, slot_freq) in slots.iter_mut().zip(freq.iter_mut()) {
            let Some(m) = slot_freq.remove(&key) else {
                continue;
            };
            debug_assert!(m > 0.0);
            if m != 1.0 || !desc_exact {
                *exact = false;
            }

            let p_suc = if q <= 0.0 { 1.0 } else { 1.0 - libm::pow(q, m) };
            // t_suc = sum_{k=0}^{m-1} [t_s' + k t_f' p_s'/(1-p_s')] q^k,
            // continued analytically to real m.
            let t_suc = if q <= 0.0 {
                desc.t_s
            } else if q >= 1.0 {
                // p_s' = 0: only the t_s' term survives (and t_s' = 0 for
                // well-formed rows).
                desc.t_s * m
            } else {
                let qm = libm::pow(q, m);
                let sum_qk = (1.0 - qm) / (1.0 - q);
                let sum_kqk =
                    q * (1.0 - m * libm::pow(q, m - 1.0) + (m - 1.0) * qm) / ((1.0 - q) * (1.0 - q));
                desc.t_s * sum_qk + desc.t_f * (desc.p_s / q) * sum_kqk
            };

            stats.p_s += slot.p * p_suc;
            stats.t_s += slot.p * (t_suc + p_suc * slot.t);
            if desc.delta > 0.0 {
                assert!(
                    desc.p_s > 0.0,
                    "descendant with positive improvement must have positive success probability"
                );
                stats.delta += slot.p * desc.delta * p_suc / desc.p_s;
            }
            slot.p *= 1.0 - p_suc;

            // Failure-side updates are skipped when the descendant cannot
            // fail: the slot's failure mass is already zero.
            if q > 0.0 {
                slot.t += desc.t_f / q;
                for &(inherited, m2) in self.edges_of(key) {
                    if seen.insert(inherited) {
                        debug_assert!(!processed.contains(&inherited));
                        queue.push(QueueEntry {
                            r: self.stats_of(inherited).r_star,
                            key: inherited,
                        });
                    }
                    *slot_freq.entry(inherited).or_insert(0.0) += m * m2;
                }
            }
        }
    }
}
