//! Count-only buffer that lets an escalated invocation see injections with
//! a lag while the actual packets sit in the main queue.

use std::collections::VecDeque;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub(crate) struct DelayLine {
    entries: VecDeque<u32>,
}

impl DelayLine {
    pub fn record(&mut self, count: u32) {
        self.entries.push_back(count);
    }

    /// Passes one real round through the line and returns the count the
    /// algorithm should treat as injected now. An empty line is transparent.
    pub fn shift(&mut self, real: u32) -> u32 {
        if self.entries.is_empty() {
            real
        } else {
            self.entries.push_back(real);
            self.entries.pop_front().expect("non-empty")
        }
    }

    /// Pops up to `k` entries at once; returns how many and their sum.
    pub fn drain_up_to(&mut self, k: usize) -> (usize, u32) {
        let d = k.min(self.entries.len());
        let sum = self.entries.drain(..d).sum();
        (d, sum)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.entries.len()
    }
}
