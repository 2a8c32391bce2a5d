//! Page-granular, set-associative cache in the device's internal DRAM.

use crate::engine::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Way {
    page: u64,
    valid: bool,
    dirty: bool,
    pinned: bool,
    stamp: u64,
    ready_at: Tick,
}

const EMPTY: Way = Way {
    page: 0,
    valid: false,
    dirty: false,
    pinned: false,
    stamp: 0,
    ready_at: Tick::ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineState {
    pub dirty: bool,
    pub pinned: bool,
    /// When the page's data is present; later than now while a fill is in
    /// flight.
    pub ready_at: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evicted {
    pub page: u64,
    pub dirty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FillOutcome {
    pub victim: Option<Evicted>,
    /// Every way was pinned; the LRU pinned page was demoted and reused.
    pub demoted: bool,
}

#[derive(Debug, Clone)]
pub struct DramCache {
    sets: u64,
    assoc: usize,
    ways: Vec<Way>,
    clock: u64,
    dirty_count: u64,
}

impl DramCache {
    pub fn new(pages: u64, assoc: usize) -> Self {
        assert!(assoc > 0 && pages >= assoc as u64);
        let sets = pages / assoc as u64;
        Self {
            sets,
            assoc,
            ways: vec![EMPTY; (sets as usize) * assoc],
            clock: 0,
            dirty_count: 0,
        }
    }

    pub fn sets(&self) -> u64 {
        self.sets
    }

    pub fn assoc(&self) -> usize {
        self.assoc
    }

    pub fn capacity_pages(&self) -> u64 {
        self.sets * self.assoc as u64
    }

    pub fn dirty_count(&self) -> u64 {
        self.dirty_count
    }

    fn set_range(&self, page: u64) -> std::ops::Range<usize> {
        let s = (page % self.sets) as usize * self.assoc;
        s..s + self.assoc
    }

    fn find(&self, page: u64) -> Option<usize> {
        self.set_range(page)
            .find(|&i| self.ways[i].valid && self.ways[i].page == page)
    }

    pub fn peek(&self, page: u64) -> Option<LineState> {
        self.find(page).map(|i| {
            let w = &self.ways[i];
            LineState {
                dirty: w.dirty,
                pinned: w.pinned,
                ready_at: w.ready_at,
            }
        })
    }

    /// Looks up `page`, refreshing its recency on a hit.
    pub fn touch(&mut self, page: u64) -> Option<LineState> {
        let i = self.find(page)?;
        self.clock += 1;
        self.ways[i].stamp = self.clock;
        self.peek(page)
    }

    /// Installs `page`, choosing the LRU unpinned way, or the LRU pinned way
    /// when the whole set is pinned. The page must not be resident.
    pub fn fill(&mut self, page: u64, ready_at: Tick, dirty: bool, pinned: bool) -> FillOutcome {
        debug_assert!(self.find(page).is_none());
        let range = self.set_range(page);
        let mut out = FillOutcome::default();
        let slot = match range.clone().find(|&i| !self.ways[i].valid) {
            Some(i) => i,
            None => {
                let lru_of = |pinned: bool| {
                    range
                        .clone()
                        .filter(|&i| self.ways[i].pinned == pinned)
                        .min_by_key(|&i| self.ways[i].stamp)
                };
                let i = match lru_of(false) {
                    Some(i) => i,
                    None => {
                        out.demoted = true;
                        lru_of(true).expect("set is non-empty")
                    }
                };
                let w = self.ways[i];
                if w.dirty {
                    self.dirty_count -= 1;
                }
                out.victim = Some(Evicted {
                    page: w.page,
                    dirty: w.dirty,
                });
                i
            }
        };
        self.clock += 1;
        self.ways[slot] = Way {
            page,
            valid: true,
            dirty,
            pinned,
            stamp: self.clock,
            ready_at,
        };
        if dirty {
            self.dirty_count += 1;
        }
        out
    }

    pub fn set_dirty(&mut self, page: u64, dirty: bool) {
        if let Some(i) = self.find(page) {
            let w = &mut self.ways[i];
            if w.dirty != dirty {
                if dirty {
                    self.dirty_count += 1;
                } else {
                    self.dirty_count -= 1;
                }
                w.dirty = dirty;
            }
        }
    }

    pub fn pin(&mut self, page: u64) {
        if let Some(i) = self.find(page) {
            self.ways[i].pinned = true;
        }
    }

    pub fn dirty_pages(&self) -> Vec<u64> {
        self.ways
            .iter()
            .filter(|w| w.valid && w.dirty)
            .map(|w| w.page)
            .collect()
    }

    /// Drops every line without writing anything back.
    pub fn invalidate_all(&mut self) {
        self.ways.fill(EMPTY);
        self.dirty_count = 0;
    }
}
