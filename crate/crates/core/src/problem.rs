//! The abstract search problem: a finite feature space, a finite action
//! set, a Markov transition kernel over features, positive integer step
//! costs, and a set of goal features.
//!
//! An abstract problem is a *prior* over concrete search problems: a
//! realization draws, independently for every tree edge, the child's
//! feature from the kernel row of the parent's (feature, action) pair.
//! Goal features are terminal sinks and carry no legal actions; illegal
//! state/action pairs are marked directly in the kernel rather than
//! modelled as a distinguished illegal feature.

use alloc::string::String;
use alloc::vec::Vec;

use crate::mix::WordHasher;

/// Tolerance for kernel row normalization checks.
pub const KERNEL_NORM_EPS: f64 = 1e-12;

/// Index into the feature space of an [`AbstractProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u32);

impl FeatureId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index into the action set of an [`AbstractProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub u32);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One row of the transition kernel: either the pair is illegal, or a
/// sparse list of `(child feature, probability)` entries summing to one.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelRow {
    Illegal,
    Legal(Vec<(FeatureId, f64)>),
}

impl KernelRow {
    pub fn is_legal(&self) -> bool {
        matches!(self, KernelRow::Legal(_))
    }
}

/// A finite, immutable abstract search problem.
///
/// Immutable after construction; all accessors take `&self`, so the
/// structure may be shared freely between threads.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractProblem {
    n_features: u32,
    n_actions: u32,
    initial: FeatureId,
    goal_mask: Vec<bool>,
    step_cost: Vec<u32>,
    /// Indexed `x * n_actions + a`.
    kernel: Vec<KernelRow>,
}

/// One violated invariant found by [`AbstractProblem::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    /// A legal kernel row's probabilities do not sum to 1 within
    /// [`KERNEL_NORM_EPS`].
    KernelNotNormalized { x: FeatureId, a: ActionId, sum: f64 },
    /// A kernel entry has probability outside `(0, 1]`.
    BadProbability { x: FeatureId, a: ActionId, p: f64 },
    /// A kernel entry points at a feature outside the feature space.
    ChildOutOfRange { x: FeatureId, a: ActionId, y: u32 },
    /// A goal feature has a legal action; goals must be sinks.
    GoalNotSink { x: FeatureId, a: ActionId },
    /// A step cost is zero (costs must be positive).
    NonPositiveStepCost { x: FeatureId },
    /// The initial feature is outside the feature space.
    InitialOutOfRange { x0: u32 },
}

impl core::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Diagnostic::KernelNotNormalized { x, a, sum } => {
                write!(f, "kernel not normalized at ({}, {}): sum {}", x.0, a.0, sum)
            }
            Diagnostic::BadProbability { x, a, p } => {
                write!(f, "probability out of (0,1] at ({}, {}): {}", x.0, a.0, p)
            }
            Diagnostic::ChildOutOfRange { x, a, y } => {
                write!(f, "kernel child out of range at ({}, {}): {}", x.0, a.0, y)
            }
            Diagnostic::GoalNotSink { x, a } => {
                write!(f, "goal feature {} has legal action {}", x.0, a.0)
            }
            Diagnostic::NonPositiveStepCost { x } => {
                write!(f, "non-positive step cost at feature {}", x.0)
            }
            Diagnostic::InitialOutOfRange { x0 } => {
                write!(f, "initial feature {} out of range", x0)
            }
        }
    }
}

impl AbstractProblem {
    /// Assemble a problem from its parts. No validation is performed
    /// here; call [`AbstractProblem::validate`] to check the invariants.
    ///
    /// `kernel` must hold `features * actions` rows indexed
    /// `x * actions + a`.
    pub fn new(
        n_features: u32,
        n_actions: u32,
        initial: FeatureId,
        goals: &[FeatureId],
        step_cost: Vec<u32>,
        kernel: Vec<KernelRow>,
    ) -> Self {
        assert_eq!(step_cost.len(), n_features as usize, "one step cost per feature");
        assert_eq!(
            kernel.len(),
            n_features as usize * n_actions as usize,
            "one kernel row per (feature, action) pair"
        );
        let mut goal_mask = alloc::vec![false; n_features as usize];
        for g in goals {
            goal_mask[g.index()] = true;
        }
        Self {
            n_features,
            n_actions,
            initial,
            goal_mask,
            step_cost,
            kernel,
        }
    }

    #[inline]
    pub fn n_features(&self) -> u32 {
        self.n_features
    }

    #[inline]
    pub fn n_actions(&self) -> u32 {
        self.n_actions
    }

    #[inline]
    pub fn initial(&self) -> FeatureId {
        self.initial
    }

    #[inline]
    pub fn is_goal(&self, x: FeatureId) -> bool {
        self.goal_mask[x.index()]
    }

    /// Goal features in ascending order.
    pub fn goals(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.goal_mask
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(i, _)| FeatureId(i as u32))
    }

    #[inline]
    pub fn step_cost(&self, x: FeatureId) -> u32 {
        self.step_cost[x.index()]
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> {
        (0..self.n_actions).map(ActionId)
    }

    pub fn features(&self) -> impl Iterator<Item = FeatureId> {
        (0..self.n_features).map(FeatureId)
    }

    /// The kernel row for `(x, a)`, exactly as constructed.
    ///
    /// Panics if `x` or `a` is out of range; ids obtained from this
    /// problem are always in range.
    #[inline]
    pub fn successors(&self, x: FeatureId, a: ActionId) -> &KernelRow {
        assert!(x.0 < self.n_features, "feature id {} out of range", x.0);
        assert!(a.0 < self.n_actions, "action id {} out of range", a.0);
        &self.kernel[x.index() * self.n_actions as usize + a.index()]
    }

    /// Legal actions available at `x`, in action order.
    pub fn legal_actions(&self, x: FeatureId) -> impl Iterator<Item = ActionId> + '_ {
        self.actions().filter(move |&a| self.successors(x, a).is_legal())
    }

    pub fn has_legal_action(&self, x: FeatureId) -> bool {
        self.legal_actions(x).next().is_some()
    }

    /// Number of legal `(x, a)` pairs.
    pub fn legal_pair_count(&self) -> usize {
        self.kernel.iter().filter(|row| row.is_legal()).count()
    }

    /// Check every structural invariant, returning one diagnostic per
    /// violation. An empty list means the problem is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.initial.0 >= self.n_features {
            out.push(Diagnostic::InitialOutOfRange { x0: self.initial.0 });
        }
        for x in self.features() {
            if self.step_cost(x) == 0 {
                out.push(Diagnostic::NonPositiveStepCost { x });
            }
            for a in self.actions() {
                let row = self.successors(x, a);
                let KernelRow::Legal(entries) = row else {
                    continue;
                };
                if self.is_goal(x) {
                    out.push(Diagnostic::GoalNotSink { x, a });
                }
                let mut sum = 0.0;
                for &(y, p) in entries {
                    if y.0 >= self.n_features {
                        out.push(Diagnostic::ChildOutOfRange { x, a, y: y.0 });
                    }
                    if !(p > 0.0 && p <= 1.0) {
                        out.push(Diagnostic::BadProbability { x, a, p });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > KERNEL_NORM_EPS {
                    out.push(Diagnostic::KernelNotNormalized { x, a, sum });
                }
            }
        }
        out
    }

    /// Stable 64-bit content hash of the problem structure.
    ///
    /// Used to tie precomputed tables to the problem they were built
    /// from. Probabilities are hashed by their exact bit pattern.
    pub fn content_hash(&self) -> u64 {
        let mut h = WordHasher::new();
        h.write_u64(self.n_features as u64);
        h.write_u64(self.n_actions as u64);
        h.write_u64(self.initial.0 as u64);
        for (i, &g) in self.goal_mask.iter().enumerate() {
            if g {
                h.write_u64(i as u64);
            }
        }
        for &c in &self.step_cost {
            h.write_u64(c as u64);
        }
        for row in &self.kernel {
            match row {
                KernelRow::Illegal => h.write_u64(u64::MAX),
                KernelRow::Legal(entries) => {
                    h.write_u64(entries.len() as u64);
                    for &(y, p) in entries {
                        h.write_u64(y.0 as u64);
                        h.write_u64(p.to_bits());
                    }
                }
            }
        }
        h.finish()
    }

    /// Human-readable summary, e.g. for CLI output.
    pub fn summary(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = write!(
            s,
            "features: {}, actions: {}, initial: {}, goals: {}, legal pairs: {}",
            self.n_features,
            self.n_actions,
            self.initial.0,
            self.goals().count(),
            self.legal_pair_count()
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_state_problem() -> AbstractProblem {
        // Feature 1 steps to goal 0 or stays on 1 (via a two-entry row).
        AbstractProblem::new(
            2,
            1,
            FeatureId(1),
            &[FeatureId(0)],
            vec![1, 1],
            vec![
                KernelRow::Illegal,
                KernelRow::Legal(vec![(FeatureId(0), 0.3), (FeatureId(1), 0.7)]),
            ],
        )
    }

    #[test]
    fn valid_problem_has_no_diagnostics() {
        assert!(two_state_problem().validate().is_empty());
    }

    #[test]
    fn unnormalized_row_is_reported() {
        let p = AbstractProblem::new(
            2,
            1,
            FeatureId(1),
            &[FeatureId(0)],
            vec![1, 1],
            vec![
                KernelRow::Illegal,
                KernelRow::Legal(vec![(FeatureId(0), 0.3), (FeatureId(1), 0.6)]),
            ],
        );
        let diags = p.validate();
        assert_eq!(diags.len(), 1);
        assert!(matches!(diags[0], Diagnostic::KernelNotNormalized { .. }));
    }

    #[test]
    fn zero_step_cost_is_reported() {
        let p = AbstractProblem::new(
            2,
            1,
            FeatureId(1),
            &[FeatureId(0)],
            vec![1, 0],
            vec![
                KernelRow::Illegal,
                KernelRow::Legal(vec![(FeatureId(0), 1.0)]),
            ],
        );
        let diags = p.validate();
        assert_eq!(diags.len(), 1);
        assert!(matches!(diags[0], Diagnostic::NonPositiveStepCost { x: FeatureId(1) }));
    }

    #[test]
    fn goal_with_action_is_reported() {
        let p = AbstractProblem::new(
            2,
            1,
            FeatureId(1),
            &[FeatureId(0)],
            vec![1, 1],
            vec![
                KernelRow::Legal(vec![(FeatureId(1), 1.0)]),
                KernelRow::Legal(vec![(FeatureId(0), 1.0)]),
            ],
        );
        let diags = p.validate();
        assert_eq!(diags.len(), 1);
        assert!(matches!(diags[0], Diagnostic::GoalNotSink { .. }));
    }

    #[test]
    fn successors_returns_row_verbatim() {
        let p = two_state_problem();
        let row = p.successors(FeatureId(1), ActionId(0));
        assert_eq!(
            row,
            &KernelRow::Legal(vec![(FeatureId(0), 0.3), (FeatureId(1), 0.7)])
        );
        assert_eq!(p.successors(FeatureId(0), ActionId(0)), &KernelRow::Illegal);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn successors_rejects_out_of_range() {
        let p = two_state_problem();
        let _ = p.successors(FeatureId(2), ActionId(0));
    }

    #[test]
    fn content_hash_is_stable_and_sensitive() {
        let a = two_state_problem();
        let b = two_state_problem();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = AbstractProblem::new(
            2,
            1,
            FeatureId(1),
            &[FeatureId(0)],
            vec![1, 2],
            vec![
                KernelRow::Illegal,
                KernelRow::Legal(vec![(FeatureId(0), 0.3), (FeatureId(1), 0.7)]),
            ],
        );
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
