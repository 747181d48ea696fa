use std::ops::Range;

use crate::error::{Error, Result};

/// Deterministic component-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// One component per iteration, `i_k = k mod m` (0-based).
    Cyclic,
    /// Consecutive batches of `B` components in ascending order; the last
    /// batch of a pass may be shorter when `B` does not divide `m`.
    CyclicMinibatch(usize),
}

impl SelectionRule {
    pub fn validate(&self, m: usize) -> Result<()> {
        match *self {
            SelectionRule::Cyclic => Ok(()),
            SelectionRule::CyclicMinibatch(b) if b == 0 || b > m => {
                Err(Error::invalid(format!("batch size must be in 1..={m}, got {b}")))
            }
            SelectionRule::CyclicMinibatch(_) => Ok(()),
        }
    }

    pub fn batch_size(&self) -> usize {
        match *self {
            SelectionRule::Cyclic => 1,
            SelectionRule::CyclicMinibatch(b) => b,
        }
    }

    /// Number of iterations in one pass over the components.
    pub fn iterations_per_pass(&self, m: usize) -> usize {
        m.div_ceil(self.batch_size())
    }

    /// Components touched at iteration `iteration` (0-based).
    pub fn batch(&self, iteration: usize, m: usize) -> Range<usize> {
        let b = self.batch_size();
        let start = (iteration % self.iterations_per_pass(m)) * b;
        start..(start + b).min(m)
    }

    /// Delay bound `K`: `m` for cyclic selection, `⌈m/B⌉·B` for minibatches.
    pub fn delay_bound(&self, m: usize) -> usize {
        self.iterations_per_pass(m) * self.batch_size()
    }
}
