//! Reservation calendar for a resource that serves one transfer at a time.
//!
//! Models resolve timing when a request arrives, and some requests are
//! booked for a point well in the future (a line fill waiting on flash, say).
//! A single busy-until tick would make every later request queue behind such
//! a booking even when the resource sits idle until then, so idle gaps stay
//! usable here.

use std::collections::VecDeque;

use super::Tick;

#[derive(Debug, Clone, Default)]
pub struct Timeline {
    /// Disjoint busy intervals as (start, end), sorted.
    busy: VecDeque<(Tick, Tick)>,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Books the earliest `dur`-long idle slot starting at or after `at` and
    /// returns its start.
    pub fn reserve(&mut self, at: Tick, dur: Tick) -> Tick {
        // Common case: nothing booked at or after `at`.
        match self.busy.back_mut() {
            None => {}
            Some(last) if last.1 <= at => {}
            Some(_) => return self.reserve_slow(at, dur),
        }
        self.insert_at(self.busy.len(), at, dur);
        at
    }

    fn reserve_slow(&mut self, at: Tick, dur: Tick) -> Tick {
        // First interval ending after `at`.
        let mut i = self.busy.partition_point(|&(_, e)| e <= at);
        let mut s = at;
        while let Some(&(bs, be)) = self.busy.get(i) {
            if bs >= s + dur {
                break;
            }
            s = s.max(be);
            i += 1;
        }
        self.insert_at(i, s, dur);
        s
    }

    /// Inserts [s, s + dur) before index `i`, merging with touching
    /// neighbours.
    fn insert_at(&mut self, i: usize, s: Tick, dur: Tick) {
        if dur == Tick::ZERO {
            return;
        }
        let e = s + dur;
        let joins_prev = i > 0 && self.busy[i - 1].1 == s;
        let joins_next = self.busy.get(i).is_some_and(|n| n.0 == e);
        match (joins_prev, joins_next) {
            (true, true) => {
                let (_, ne) = self.busy.remove(i).expect("checked");
                self.busy[i - 1].1 = ne;
            }
            (true, false) => self.busy[i - 1].1 = e,
            (false, true) => self.busy[i].0 = s,
            (false, false) => self.busy.insert(i, (s, e)),
        }
    }

    /// Drops bookings that end at or before `t`. Callers promise that no
    /// later request is made for a time before `t`.
    pub fn forget_before(&mut self, t: Tick) {
        while self.busy.front().is_some_and(|&(_, e)| e <= t) {
            self.busy.pop_front();
        }
    }

    /// End of the last booking.
    pub fn free_after(&self) -> Tick {
        self.busy.back().map_or(Tick::ZERO, |&(_, e)| e)
    }

    pub fn intervals(&self) -> usize {
        self.busy.len()
    }
}
