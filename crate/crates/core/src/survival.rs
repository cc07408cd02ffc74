//! Survival function of optimal cost-to-go, and the quantities derived
//! from it: solution potential, the expected cost-to-go heuristic, and
//! the expected optimal solution cost.
//!
//! `S(x, k)` is the probability that the optimal cost-to-go of a node
//! with feature `x` exceeds `k`. Since subtrees hanging off different
//! actions are realized independently given the node's feature, the
//! survival function satisfies
//!
//! ```text
//! S(x, k) = prod over legal a of  sum over children y of
//!           kernel(x, a, y) * S(y, k - cost(y))
//! ```
//!
//! with `S(., j) = 1` for `j < 0`, `S(goal, k) = 0`, and `S = 1` for
//! features with no legal actions (dead ends cannot reach a goal).

use alloc::vec::Vec;

use crate::problem::{AbstractProblem, FeatureId, KernelRow};

/// Dense table of `S(x, k)` for `k` in `0..=c_max`.
#[derive(Clone, Debug)]
pub struct SurvivalTable {
    n_features: u32,
    c_max: u32,
    /// Indexed `x * (c_max + 1) + k`.
    values: Vec<f64>,
    problem_hash: u64,
}

impl SurvivalTable {
    pub fn c_max(&self) -> u32 {
        self.c_max
    }

    pub fn n_features(&self) -> u32 {
        self.n_features
    }

    pub fn problem_hash(&self) -> u64 {
        self.problem_hash
    }

    /// `S(x, k) = Pr(optimal cost-to-go from feature x exceeds k)`.
    ///
    /// Negative `k` returns 1 (costs are positive); `k` above `c_max` is
    /// a caller error.
    #[inline]
    pub fn survival(&self, x: FeatureId, k: i64) -> f64 {
        if k < 0 {
            return 1.0;
        }
        assert!(k <= self.c_max as i64, "horizon {} exceeds table c_max {}", k, self.c_max);
        self.values[x.index() * (self.c_max as usize + 1) + k as usize]
    }

    /// Probability that a strictly improving solution exists beneath a
    /// feature-`x` node under relative bound `c_rel`: a solution of
    /// relative cost at most `c_rel - 1` must exist.
    #[inline]
    pub fn potential(&self, x: FeatureId, c_rel: i64) -> f64 {
        if c_rel < 1 {
            0.0
        } else {
            1.0 - self.survival(x, c_rel - 1)
        }
    }

    /// Expected cost-to-go truncated at the bound:
    /// `E[min(h*, c_max)] = sum_{k=0}^{c_max-1} S(x, k)`.
    pub fn expected_cost_to_go(&self, x: FeatureId) -> f64 {
        let base = x.index() * (self.c_max as usize + 1);
        self.values[base..base + self.c_max as usize].iter().sum()
    }

    /// Expected optimal solution cost from `x0`, conditional on a
    /// solution existing within `horizon`, together with the coverage
    /// probability of that event. `horizon` must not exceed the table's
    /// `c_max`. Returns `None` when the coverage is zero.
    pub fn expected_optimal_cost(&self, x0: FeatureId, horizon: u32) -> Option<(f64, f64)> {
        assert!(horizon <= self.c_max);
        let coverage = 1.0 - self.survival(x0, horizon as i64);
        if coverage <= 0.0 {
            return None;
        }
        // E[h* | h* <= horizon] = (E[min(h*, B)] - B * Pr(h* > B)) / coverage.
        let partial: f64 = (0..horizon as i64).map(|k| self.survival(x0, k)).sum();
        let mean = (partial - horizon as f64 * self.survival(x0, horizon as i64)) / coverage;
        Some((mean, coverage))
    }
}

/// Compute the survival table for every feature and horizon `0..=c_max`.
pub fn survival_table(problem: &AbstractProblem, c_max: u32) -> SurvivalTable {
    let n_features = problem.n_features();
    let width = c_max as usize + 1;
    let mut values = alloc::vec![0.0f64; n_features as usize * width];

    for k in 0..=c_max as i64 {
        for x in problem.features() {
            let v = if problem.is_goal(x) {
                0.0
            } else if !problem.has_legal_action(x) {
                1.0
            } else {
                let mut prod = 1.0;
                for a in problem.legal_actions(x) {
                    let KernelRow::Legal(entries) = problem.successors(x, a) else {
                        unreachable!();
                    };
                    let mut sum = 0.0;
                    for &(y, p) in entries {
                        let j = k - problem.step_cost(y) as i64;
                        let s = if j < 0 {
                            1.0
                        } else {
                            values[y.index() * width + j as usize]
                        };
                        sum += p * s;
                    }
                    prod *= sum;
                }
                prod
            };
            values[x.index() * width + k as usize] = v;
        }
    }

    SurvivalTable {
        n_features,
        c_max,
        values,
        problem_hash: problem.content_hash(),
    }
}

/// Expected cost-to-go for every feature, as a flat vector. This is the
/// inadmissible-but-unbiased heuristic used by the estimation-based
/// search policy.
pub fn expected_cost_to_go_table(table: &SurvivalTable) -> Vec<f64> {
    (0..table.n_features)
        .map(|x| table.expected_cost_to_go(FeatureId(x)))
        .collect()
}
