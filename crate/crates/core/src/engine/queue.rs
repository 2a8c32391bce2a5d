use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{EngineError, Tick};

struct Entry<E> {
    due: Tick,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.due, self.seq) == (other.due, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.due, self.seq).cmp(&(other.due, other.seq))
    }
}

/// Time-ordered event queue with a virtual clock.
///
/// Dispatch order is `(due, seq)` ascending, where `seq` is the insertion
/// counter, so events scheduled for the same tick run in insertion order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    now: Tick,
    next_seq: u64,
    dispatched: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: Tick::ZERO,
            next_seq: 0,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn peek_due(&self) -> Option<Tick> {
        self.heap.peek().map(|e| e.0.due)
    }

    pub fn schedule(&mut self, due: Tick, event: E) -> Result<(), EngineError> {
        if due < self.now {
            return Err(EngineError::SchedulingInPast {
                due,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { due, seq, event }));
        Ok(())
    }

    /// Schedule relative to the current clock; never fails.
    pub fn schedule_in(&mut self, delay: Tick, event: E) {
        let due = self.now + delay;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { due, seq, event }));
    }

    /// Pop the next event if it is due at or before `limit`, advancing the clock.
    pub fn pop(&mut self, limit: Option<Tick>) -> Option<(Tick, E)> {
        let due = self.peek_due()?;
        if limit.is_some_and(|l| due > l) {
            return None;
        }
        let Reverse(entry) = self.heap.pop()?;
        debug_assert!(entry.due >= self.now);
        self.now = entry.due;
        self.dispatched += 1;
        Some((entry.due, entry.event))
    }

    /// Dispatch every event due at or before `limit` (or until the queue
    /// drains when `limit` is `None`). Returns the clock reached.
    pub fn run_until<F>(&mut self, limit: Option<Tick>, mut handler: F) -> Tick
    where
        F: FnMut(&mut Self, E),
    {
        while let Some((_, ev)) = self.pop(limit) {
            handler(self, ev);
        }
        if let Some(l) = limit {
            if l > self.now {
                self.now = l;
            }
        }
        self.now
    }
}
