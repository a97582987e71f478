//! Discretised action spaces.

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::types::{Money, Report, Slot};

/// Default offset around the pivotal bribe levels.
pub const PIVOT_DELTA: f64 = 1e-6;

/// Largest instance the exhaustive searches accept.
pub const MAX_REPORTS: usize = 6;
pub const MAX_STEPS: u64 = 3;
pub const MAX_BRIBE_LEVELS: usize = 6;
pub const MAX_VECTOR_LEN: usize = 3;

/// A bribe amount, possibly anchored to a quantity known only once the
/// random string is drawn. Resolved amounts are clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "anchor", content = "offset", rename_all = "snake_case")]
pub enum BribeLevel {
    Absolute(Money),
    RMin(f64),
    /// Offset from the second-highest published value (`r_min` when fewer
    /// than two reports are published).
    Second(f64),
}

impl BribeLevel {
    pub fn resolve(&self, r_min: Money, second: Money) -> Money {
        match *self {
            BribeLevel::Absolute(x) => x,
            BribeLevel::RMin(d) => r_min + d,
            BribeLevel::Second(d) => second + d,
        }
        .max(0.0)
    }

    pub fn label(&self) -> String {
        fn off(d: f64) -> String {
            if d == 0.0 {
                String::new()
            } else if d > 0.0 {
                format!("+{d:e}")
            } else {
                format!("{d:e}")
            }
        }
        match *self {
            BribeLevel::Absolute(x) => format!("{x}"),
            BribeLevel::RMin(d) => format!("r_min{}", off(d)),
            BribeLevel::Second(d) => format!("second{}", off(d)),
        }
    }
}

/// Bribe levels and the inclusion vectors a validator may choose from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub bribe_levels: Vec<BribeLevel>,
    /// Longest raw inclusion vector considered. Every vector of three or
    /// more reports pays out like its first three entries.
    pub max_len: usize,
}

impl ActionGrid {
    /// `{0, r_min - d, r_min, r_min + d, second - d, second + d}`.
    pub fn pivotal(delta: f64) -> Self {
        Self {
            bribe_levels: vec![
                BribeLevel::Absolute(0.0),
                BribeLevel::RMin(-delta),
                BribeLevel::RMin(0.0),
                BribeLevel::RMin(delta),
                BribeLevel::Second(-delta),
                BribeLevel::Second(delta),
            ],
            max_len: MAX_VECTOR_LEN,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !self.bribe_levels.contains(&BribeLevel::Absolute(0.0)) {
            return Err(AnalysisError::Invalid("bribe grid must contain the zero level".into()));
        }
        if self.bribe_levels.len() > MAX_BRIBE_LEVELS {
            return Err(AnalysisError::OverBudget(format!(
                "{} bribe levels (limit {MAX_BRIBE_LEVELS})",
                self.bribe_levels.len()
            )));
        }
        if self.max_len == 0 || self.max_len > MAX_VECTOR_LEN {
            return Err(AnalysisError::OverBudget(format!(
                "vector length {} (must be 1..={MAX_VECTOR_LEN})",
                self.max_len
            )));
        }
        Ok(())
    }
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self::pivotal(PIVOT_DELTA)
    }
}

/// Every ordered selection of at most `max_len` distinct items from `0..n`,
/// the empty selection first.
pub fn ordered_selections(n: usize, max_len: usize) -> Vec<Vec<usize>> {
    fn grow(n: usize, max_len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        if cur.len() == max_len {
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                grow(n, max_len, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    grow(n, max_len, &mut Vec::new(), &mut out);
    out
}

/// Raw candidate inclusion vectors over `published`.
pub fn candidate_vectors(published: &[Report], max_len: usize) -> Vec<Vec<Slot>> {
    ordered_selections(published.len(), max_len)
        .into_iter()
        .map(|sel| sel.into_iter().map(|i| Slot::Report(published[i].clone())).collect())
        .collect()
}

/// All subsets of `0..n` as bit masks, full set first.
pub fn subsets(n: usize) -> Vec<u32> {
    let full = (1u32 << n) - 1;
    (0..=full).rev().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_counts() {
        assert_eq!(ordered_selections(0, 3), vec![Vec::<usize>::new()]);
        assert_eq!(ordered_selections(2, 3).len(), 1 + 2 + 2);
        assert_eq!(ordered_selections(4, 3).len(), 1 + 4 + 12 + 24);
        assert_eq!(ordered_selections(6, 3).len(), 1 + 6 + 30 + 120);
    }

    #[test]
    fn pivotal_grid_is_valid_and_resolves() {
        let g = ActionGrid::default();
        g.validate().unwrap();
        let amounts: Vec<f64> = g.bribe_levels.iter().map(|l| l.resolve(2.0, 8.0)).collect();
        assert_eq!(amounts, vec![0.0, 2.0 - 1e-6, 2.0, 2.0 + 1e-6, 8.0 - 1e-6, 8.0 + 1e-6]);
        assert_eq!(BribeLevel::RMin(-5.0).resolve(2.0, 0.0), 0.0);
    }

    #[test]
    fn grid_budget_enforced() {
        let mut g = ActionGrid::default();
        g.bribe_levels.push(BribeLevel::Absolute(1.0));
        assert!(matches!(g.validate(), Err(AnalysisError::OverBudget(_))));
        let g = ActionGrid { bribe_levels: vec![BribeLevel::Absolute(1.0)], max_len: 3 };
        assert!(g.validate().is_err());
    }

    #[test]
    fn subsets_start_with_full_set() {
        assert_eq!(subsets(2), vec![3, 2, 1, 0]);
    }
}
