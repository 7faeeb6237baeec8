//! Approximate-time grouping of messages from several topics.
//!
//! The matching rule: while every queue is non-empty, take the latest head
//! stamp as the pivot and pick, per topic, the queued message nearest to it
//! (ties go to the earlier one). If the picked stamps span at most `slop_ns`
//! the set is emitted and everything up to the picks is consumed; otherwise
//! the single oldest head is discarded and matching is retried.

use std::collections::VecDeque;

use super::broker::{Envelope, DEFAULT_QUEUE_CAPACITY};

pub trait Stamped {
    fn stamp(&self) -> u64;
}

impl Stamped for u64 {
    fn stamp(&self) -> u64 {
        *self
    }
}

impl<T> Stamped for (u64, T) {
    fn stamp(&self) -> u64 {
        self.0
    }
}

impl Stamped for Envelope {
    fn stamp(&self) -> u64 {
        self.stamp_ns()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncPolicy {
    pub topics: Vec<String>,
    pub slop_ns: u64,
    pub queue_capacity: usize,
}

impl SyncPolicy {
    pub fn new(topics: Vec<String>, slop_ns: u64) -> Self {
        SyncPolicy {
            topics,
            slop_ns,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

#[derive(Debug)]
pub struct Synchronizer<T> {
    policy: SyncPolicy,
    queues: Vec<VecDeque<T>>,
    last_pivot: Option<u64>,
    discarded: u64,
}

impl<T: Stamped> Synchronizer<T> {
    pub fn new(policy: SyncPolicy) -> Self {
        let n = policy.topics.len();
        Synchronizer {
            policy,
            queues: (0..n).map(|_| VecDeque::new()).collect(),
            last_pivot: None,
            discarded: 0,
        }
    }

    pub fn policy(&self) -> &SyncPolicy {
        &self.policy
    }

    pub fn set_slop(&mut self, slop_ns: u64) {
        self.policy.slop_ns = slop_ns;
    }

    pub fn topic_index(&self, topic: &str) -> Option<usize> {
        self.policy.topics.iter().position(|t| t == topic)
    }

    /// Messages thrown away by overflow or by the matching rule.
    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn queued(&self, idx: usize) -> usize {
        self.queues[idx].len()
    }

    /// Enqueues in stamp order; a full queue loses its oldest entry.
    pub fn push(&mut self, idx: usize, item: T) {
        let cap = self.policy.queue_capacity.max(1);
        let q = &mut self.queues[idx];
        let stamp = item.stamp();
        let pos = q.iter().rposition(|m| m.stamp() <= stamp).map_or(0, |p| p + 1);
        q.insert(pos, item);
        if q.len() > cap {
            q.pop_front();
            self.discarded += 1;
        }
    }

    /// One matching attempt; returns a set ordered like `policy.topics`.
    pub fn step(&mut self) -> Option<Vec<T>> {
        loop {
            if self.queues.is_empty() || self.queues.iter().any(VecDeque::is_empty) {
                return None;
            }
            let pivot = self.queues.iter().map(|q| q[0].stamp()).max().unwrap();
            let picks: Vec<usize> = self
                .queues
                .iter()
                .map(|q| {
                    let mut best = 0;
                    for (i, m) in q.iter().enumerate() {
                        if m.stamp().abs_diff(pivot) < q[best].stamp().abs_diff(pivot) {
                            best = i;
                        }
                    }
                    best
                })
                .collect();
            let stamps = self.queues.iter().zip(&picks).map(|(q, &i)| q[i].stamp());
            let (lo, hi) = stamps.fold((u64::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s)));
            if hi - lo <= self.policy.slop_ns {
                let set = self
                    .queues
                    .iter_mut()
                    .zip(&picks)
                    .map(|(q, &i)| {
                        self.discarded += i as u64;
                        q.drain(..=i).last().unwrap()
                    })
                    .collect();
                debug_assert!(self.last_pivot.is_none_or(|p| pivot >= p));
                self.last_pivot = Some(pivot);
                return Some(set);
            }
            let oldest = (0..self.queues.len())
                .min_by_key(|&i| (self.queues[i][0].stamp(), i))
                .unwrap();
            self.queues[oldest].pop_front();
            self.discarded += 1;
        }
    }

    /// Runs `step` until it yields nothing.
    pub fn drain_ready(&mut self) -> Vec<Vec<T>> {
        std::iter::from_fn(|| self.step()).collect()
    }
}
