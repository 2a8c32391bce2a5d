//! Set-associative write-back cache with LRU replacement and MSHRs.
//!
//! Lines are allocated at miss time: the victim is chosen and the new tag
//! installed immediately, while the MSHR records that the data is still in
//! flight. Accesses to a line with an outstanding MSHR merge into it.

use std::collections::HashMap;

use thiserror::Error;

use super::{CacheLevelConfig, MemOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CacheError {
    #[error("all {0} MSHRs are busy")]
    MshrFull(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Victim {
    /// Line-aligned byte address of the evicted line.
    pub address: u64,
    pub dirty: bool,
    /// Function that last wrote the line.
    pub owner: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    /// The line is already being fetched; the access waits on that MSHR.
    Merged,
    Miss { victim: Option<Victim> },
}

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    tag: u64,
    valid: bool,
    dirty: bool,
    stamp: u64,
    owner: u32,
}

#[derive(Debug)]
pub struct Cache<W = ()> {
    sets: usize,
    assoc: usize,
    line_shift: u32,
    ways: Vec<Way>,
    clock: u64,
    mshr_limit: usize,
    mshrs: HashMap<u64, Vec<W>>,
    hit_latency: u32,
}

impl<W> Cache<W> {
    pub fn new(cfg: &CacheLevelConfig, line_bytes: u64) -> Self {
        let lines = (cfg.size_bytes / line_bytes) as usize;
        let assoc = cfg.assoc as usize;
        // Set count need not be a power of two: 64 KiB at 12 ways gives 85 sets.
        let sets = lines / assoc;
        assert!(sets > 0, "cache smaller than one set");
        Self {
            sets,
            assoc,
            line_shift: line_bytes.trailing_zeros(),
            ways: vec![Way::default(); sets * assoc],
            clock: 0,
            mshr_limit: cfg.mshrs as usize,
            mshrs: HashMap::new(),
            hit_latency: cfg.hit_cycles,
        }
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn assoc(&self) -> usize {
        self.assoc
    }

    pub fn hit_latency(&self) -> u32 {
        self.hit_latency
    }

    pub fn mshrs_in_use(&self) -> usize {
        self.mshrs.len()
    }

    pub fn mshrs_free(&self) -> bool {
        self.mshrs.len() < self.mshr_limit
    }

    fn locate(&self, address: u64) -> (usize, u64) {
        let line = address >> self.line_shift;
        ((line % self.sets as u64) as usize, line / self.sets as u64)
    }

    fn line_address(&self, set: usize, tag: u64) -> u64 {
        (tag * self.sets as u64 + set as u64) << self.line_shift
    }

    fn set_range(&self, set: usize) -> std::ops::Range<usize> {
        set * self.assoc..(set + 1) * self.assoc
    }

    fn find(&self, address: u64) -> Option<usize> {
        let (set, tag) = self.locate(address);
        self.set_range(set)
            .find(|&i| self.ways[i].valid && self.ways[i].tag == tag)
    }

    fn line_key(&self, address: u64) -> u64 {
        address >> self.line_shift
    }

    pub fn contains(&self, address: u64) -> bool {
        self.find(address).is_some()
    }

    pub fn is_pending(&self, address: u64) -> bool {
        self.mshrs.contains_key(&self.line_key(address))
    }

    /// Look up `address`. A store marks the line dirty (write-allocate on miss).
    /// `owner` is recorded on stores.
    pub fn access(&mut self, address: u64, op: MemOp, owner: u32) -> Result<Outcome, CacheError> {
        let key = self.line_key(address);
        let store = op == MemOp::Store;
        self.clock += 1;
        if self.mshrs.contains_key(&key) {
            if let Some(i) = self.find(address) {
                self.ways[i].stamp = self.clock;
                if store {
                    self.ways[i].dirty = true;
                    self.ways[i].owner = owner;
                }
            }
            return Ok(Outcome::Merged);
        }
        if let Some(i) = self.find(address) {
            let w = &mut self.ways[i];
            w.stamp = self.clock;
            if store {
                w.dirty = true;
                w.owner = owner;
            }
            return Ok(Outcome::Hit);
        }
        if self.mshrs.len() >= self.mshr_limit {
            self.clock -= 1;
            return Err(CacheError::MshrFull(self.mshr_limit));
        }
        self.mshrs.insert(key, Vec::new());
        let victim = self.install(address, store, owner);
        Ok(Outcome::Miss { victim })
    }

    /// Place `address` in its set, returning the evicted line if one was valid.
    fn install(&mut self, address: u64, dirty: bool, owner: u32) -> Option<Victim> {
        let (set, tag) = self.locate(address);
        let range = self.set_range(set);
        let slot = range
            .clone()
            .find(|&i| !self.ways[i].valid)
            .unwrap_or_else(|| {
                range
                    .min_by_key(|&i| self.ways[i].stamp)
                    .expect("non-empty set")
            });
        let old = self.ways[slot];
        let victim = old.valid.then(|| Victim {
            address: self.line_address(set, old.tag),
            dirty: old.dirty,
            owner: old.owner,
        });
        self.ways[slot] = Way {
            tag,
            valid: true,
            dirty,
            stamp: self.clock,
            owner,
        };
        victim
    }

    /// Register a waiter on the outstanding MSHR for `address`.
    pub fn wait_on(&mut self, address: u64, waiter: W) {
        let key = self.line_key(address);
        self.mshrs
            .get_mut(&key)
            .expect("waiting on a line with no MSHR")
            .push(waiter);
    }

    /// Data for `address` arrived: release its MSHR and return the waiters.
    pub fn complete(&mut self, address: u64) -> Vec<W> {
        let key = self.line_key(address);
        self.mshrs.remove(&key).unwrap_or_default()
    }

    /// Write into a resident line (e.g. an upper-level dirty eviction).
    /// Returns false if the line is not present.
    pub fn write_back_into(&mut self, address: u64, owner: u32) -> bool {
        match self.find(address) {
            Some(i) => {
                self.ways[i].dirty = true;
                self.ways[i].owner = owner;
                true
            }
            None => false,
        }
    }

    /// Drop a line without writing it back. Returns its dirty state if present.
    pub fn invalidate(&mut self, address: u64) -> Option<Victim> {
        let i = self.find(address)?;
        let w = std::mem::take(&mut self.ways[i]);
        Some(Victim {
            address: crate::host::line_align(address, 1 << self.line_shift),
            dirty: w.dirty,
            owner: w.owner,
        })
    }

    /// Every valid line address, and whether it is dirty.
    pub fn resident(&self) -> impl Iterator<Item = (u64, bool)> + '_ {
        (0..self.sets).flat_map(move |set| {
            self.set_range(set).filter_map(move |i| {
                let w = &self.ways[i];
                w.valid.then(|| (self.line_address(set, w.tag), w.dirty))
            })
        })
    }

    /// Clear the dirty bit on every line, returning the ones that were dirty.
    pub fn clean_all(&mut self) -> Vec<Victim> {
        let mut out = Vec::new();
        for set in 0..self.sets {
            for i in self.set_range(set) {
                let w = &mut self.ways[i];
                if w.valid && w.dirty {
                    w.dirty = false;
                    let (tag, owner) = (w.tag, w.owner);
                    out.push(Victim {
                        address: self.line_address(set, tag),
                        dirty: true,
                        owner,
                    });
                }
            }
        }
        out
    }

    pub fn valid_in_set(&self, set: usize) -> usize {
        self.set_range(set).filter(|&i| self.ways[i].valid).count()
    }
}
