use std::collections::VecDeque;

/// A registered dominant co-occurring direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Direction on the `x` side.
    pub u: Vec<f64>,
    /// Direction on the `y` side.
    pub v: Vec<f64>,
    /// Registration time of the preceding snapshot in the same queue, or the
    /// boundary right before the owning sketch began receiving updates.
    pub s: u64,
    /// Registration time.
    pub t: u64,
}

impl Snapshot {
    /// `||u|| * ||v||`, the mass this snapshot carries.
    pub fn weight(&self) -> f64 {
        crate::kernels::l2(&self.u) * crate::kernels::l2(&self.v)
    }
}

/// FIFO of snapshots ordered by registration time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotQueue {
    items: VecDeque<Snapshot>,
    last_registered: u64,
}

impl SnapshotQueue {
    /// Empty queue whose `s`-chain starts at `boundary`.
    pub fn new(boundary: u64) -> Self {
        Self {
            items: VecDeque::new(),
            last_registered: boundary,
        }
    }

    pub(crate) fn from_parts(items: VecDeque<Snapshot>, last_registered: u64) -> Self {
        Self {
            items,
            last_registered,
        }
    }

    pub fn push(&mut self, u: Vec<f64>, v: Vec<f64>, t: u64) {
        debug_assert!(self.items.back().is_none_or(|b| b.t <= t));
        self.items.push_back(Snapshot {
            u,
            v,
            s: self.last_registered,
            t,
        });
        self.last_registered = t;
    }

    /// Drop snapshots with `t + n_window <= now`; returns how many were dropped.
    pub fn expire(&mut self, now: u64, n_window: u64) -> usize {
        let mut dropped = 0;
        while self.items.front().is_some_and(|s| s.t + n_window <= now) {
            self.items.pop_front();
            dropped += 1;
        }
        dropped
    }

    pub fn pop_front(&mut self) -> Option<Snapshot> {
        self.items.pop_front()
    }

    pub fn front(&self) -> Option<&Snapshot> {
        self.items.front()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Snapshot> {
        self.items.iter()
    }

    pub fn last_registered(&self) -> u64 {
        self.last_registered
    }

    /// Earliest time from which this queue's contents are complete: the
    /// predecessor time of the head, or the last registration when empty.
    pub fn coverage_start(&self) -> u64 {
        self.items
            .front()
            .map_or(self.last_registered, |s| s.s)
    }
}
