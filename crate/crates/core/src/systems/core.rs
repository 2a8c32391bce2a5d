//! Per-core pipeline state and the private cache pair.
//!
//! The core issues one instruction per cycle into an in-order retirement
//! window. Compute instructions finish one cycle after issue, loads when
//! their data returns; stores retire into the store queue and drain on
//! their own. Because every downstream model resolves timing when a request
//! arrives, completion ticks are known at issue time.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::engine::{ServedBy, Tick};
use crate::host::{Cache, HostConfig};

/// Fill times of lines with an outstanding MSHR.
#[derive(Debug, Default)]
pub(crate) struct Fills {
    due: HashMap<u64, (Tick, ServedBy)>,
    order: BinaryHeap<Reverse<(Tick, u64)>>,
}

impl Fills {
    pub fn insert(&mut self, line: u64, at: Tick, from: ServedBy) {
        self.due.insert(line, (at, from));
        self.order.push(Reverse((at, line)));
    }

    pub fn get(&self, line: u64) -> Option<(Tick, ServedBy)> {
        self.due.get(&line).copied()
    }

    /// Releases the MSHR of every fill done by `now`.
    pub fn retire(&mut self, cache: &mut Cache, now: Tick) {
        while let Some(&Reverse((at, line))) = self.order.peek() {
            if at > now {
                break;
            }
            self.order.pop();
            if self.due.get(&line).is_some_and(|d| d.0 == at) {
                self.due.remove(&line);
                cache.complete(line);
            }
        }
    }

    pub fn earliest(&self) -> Option<Tick> {
        self.order.peek().map(|r| r.0 .0)
    }
}

#[derive(Debug)]
pub(crate) struct Core {
    pub pos: usize,
    /// Earliest tick the next instruction may issue.
    pub t: Tick,
    /// Retire ticks of instructions in the window, oldest first.
    pub window: VecDeque<Tick>,
    pub last_retire: Tick,
    pub loads: BinaryHeap<Reverse<Tick>>,
    pub stores: BinaryHeap<Reverse<Tick>>,
    /// Synchronous path: completion of the outstanding uncached access.
    pub uncached_busy: Tick,
    pub l1: Cache,
    pub l2: Cache,
    pub l1_fills: Fills,
    pub l2_fills: Fills,
}

impl Core {
    pub fn new(h: &HostConfig) -> Self {
        Self {
            pos: 0,
            t: Tick::ZERO,
            window: VecDeque::with_capacity(h.lsq_entries as usize),
            last_retire: Tick::ZERO,
            loads: BinaryHeap::new(),
            stores: BinaryHeap::new(),
            uncached_busy: Tick::ZERO,
            l1: Cache::new(&h.l1d, h.line_bytes),
            l2: Cache::new(&h.l2, h.line_bytes),
            l1_fills: Fills::default(),
            l2_fills: Fills::default(),
        }
    }

    /// Tick at which a window slot is free for an instruction wanting to
    /// issue at `t`.
    pub fn window_slot(&mut self, t: Tick, capacity: usize) -> Tick {
        while self.window.front().is_some_and(|&r| r <= t) {
            self.window.pop_front();
        }
        if self.window.len() >= capacity {
            self.window.pop_front().map_or(t, |r| r.max(t))
        } else {
            t
        }
    }

    pub fn retire_at(&mut self, complete: Tick) {
        self.last_retire = self.last_retire.max(complete);
        self.window.push_back(self.last_retire);
    }

    /// Outstanding loads and queued stores at `t`.
    pub fn lsq_occupancy(&mut self, t: Tick) -> (u32, u32) {
        while self.loads.peek().is_some_and(|r| r.0 <= t) {
            self.loads.pop();
        }
        while self.stores.peek().is_some_and(|r| r.0 <= t) {
            self.stores.pop();
        }
        (self.loads.len() as u32, self.stores.len() as u32)
    }

    pub fn retire_fills(&mut self, now: Tick) {
        self.l1_fills.retire(&mut self.l1, now);
        self.l2_fills.retire(&mut self.l2, now);
    }

    /// If the access needs an MSHR that is not available, the tick at which
    /// one frees up.
    pub fn mshr_stall(&self, line: u64) -> Option<Tick> {
        let l1_needs = !self.l1.contains(line) && !self.l1.is_pending(line);
        if l1_needs && !self.l1.mshrs_free() {
            return self.l1_fills.earliest();
        }
        let l2_needs = l1_needs && !self.l2.contains(line) && !self.l2.is_pending(line);
        if l2_needs && !self.l2.mshrs_free() {
            return self.l2_fills.earliest();
        }
        None
    }
}
