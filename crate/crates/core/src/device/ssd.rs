//! Flash SSD endpoint.
//!
//! Timing is resolved when a request arrives: each flash channel keeps the
//! tick it next becomes free, and arrivals are fed in time order. Garbage
//! collection is a chain of single-page operations that is advanced lazily
//! up to each arrival; an operation is committed only once its start tick
//! has been reached, so a DT request can still hold back anything that has
//! not begun.

use std::collections::HashMap;

use super::{
    DevOp, DevRequest, DevResponse, DeviceConfig, DeviceError, DeviceStats, DramCache, DramModel,
    EventLog, Ftl,
};
use crate::engine::{GcEvent, ServedBy, SimRng, Tick};
use crate::protocol::Bufferability;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcPhase {
    Idle,
    Migrating { victim: u32, from: u32 },
    Erasing { victim: u32 },
}

#[derive(Debug, Clone)]
struct Gc {
    phase: GcPhase,
    /// Earliest start of the next operation in the chain.
    ready: Tick,
    active: bool,
    started: Option<Tick>,
    moved: u64,
    deferring: bool,
    /// No block had anything to reclaim; cleared by the next host write.
    stalled: bool,
    /// Arrival of the latest host request. A cycle triggered by it cannot
    /// start earlier.
    trigger: Tick,
}

#[derive(Debug, Clone)]
pub struct FlashSsd {
    cfg: DeviceConfig,
    capacity: u64,
    ftl: Ftl,
    cache: DramCache,
    dram: DramModel,
    channel_free: Vec<Tick>,
    t_r: Tick,
    t_prog: Tick,
    t_bers: Tick,
    page_xfer: Tick,
    line_xfer: Tick,
    dt_window: Tick,
    dt_until: Tick,
    gc: Gc,
    // Sparse data: dirty lines still only in DRAM, and what flash holds.
    volatile: HashMap<u64, HashMap<u64, u64>>,
    durable: HashMap<u64, u64>,
    stats: DeviceStats,
    log: Option<EventLog>,
}

impl FlashSsd {
    pub fn new(cfg: DeviceConfig) -> Result<Self, DeviceError> {
        cfg.validate()?;
        let f = cfg.flash;
        let logical = cfg.capacity_bytes / f.page_bytes;
        let ftl = Ftl::new(cfg.blocks(), f.pages_per_block, f.channels, logical);
        let cache_pages = cfg.dram_cache_bytes() / f.page_bytes;
        let mut ssd = Self {
            capacity: cfg.capacity_bytes,
            ftl,
            cache: DramCache::new(cache_pages, cfg.dram_cache.assoc as usize),
            dram: DramModel::new(cfg.dram_cache.timing),
            channel_free: vec![Tick::ZERO; f.channels as usize],
            t_r: Tick::from_ns_f64(f.t_r_ns),
            t_prog: Tick::from_ns_f64(f.t_prog_ns),
            t_bers: Tick::from_ns_f64(f.t_bers_ns),
            page_xfer: Tick::from_ns_f64(f.page_bytes as f64 / f.channel_bytes_per_ns),
            line_xfer: Tick::from_ns_f64(64.0 / f.channel_bytes_per_ns),
            dt_window: Tick::from_ns_f64(cfg.gc.dt_window_ns),
            dt_until: Tick::ZERO,
            gc: Gc {
                phase: GcPhase::Idle,
                ready: Tick::ZERO,
                active: false,
                started: None,
                moved: 0,
                deferring: false,
                stalled: false,
                trigger: Tick::ZERO,
            },
            volatile: HashMap::new(),
            durable: HashMap::new(),
            stats: DeviceStats::default(),
            log: None,
            cfg,
        };
        ssd.precondition()?;
        Ok(ssd)
    }

    fn precondition(&mut self) -> Result<(), DeviceError> {
        let p = self.cfg.precondition;
        let n = (self.ftl.logical_pages() as f64 * p.fill_fraction).floor() as u64;
        for lpn in 0..n {
            self.ftl.write(lpn)?;
        }
        if n > 0 {
            if let Some(target) = p.free_fraction {
                let mut rng = SimRng::new(p.seed);
                while self.ftl.free_fraction() >= target
                    && self.ftl.free_blocks() > self.cfg.gc.reserve_blocks + 1
                {
                    self.ftl.write(rng.below(n))?;
                }
            }
        }
        let warm = p.warm_cache_bytes / self.cfg.flash.page_bytes;
        for page in 0..warm.min(self.cache.capacity_pages()) {
            if self.cache.peek(page).is_none() {
                self.cache.fill(page, Tick::ZERO, false, false);
            }
        }
        Ok(())
    }

    pub fn enable_event_log(&mut self) {
        self.log.get_or_insert_with(EventLog::default);
    }

    pub fn event_log(&self) -> Option<&EventLog> {
        self.log.as_ref()
    }

    fn note(&mut self, tick: Tick, event: &'static str, detail: impl FnOnce() -> String) {
        if let Some(log) = self.log.as_mut() {
            log.push(tick, event, detail());
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn forget_before(&mut self, t: Tick) {
        self.dram.forget_before(t);
    }

    pub fn stats(&self) -> &DeviceStats {
        &self.stats
    }

    pub fn ftl(&self) -> &Ftl {
        &self.ftl
    }

    pub fn cache(&self) -> &DramCache {
        &self.cache
    }

    pub fn gc_phase(&self) -> GcPhase {
        self.gc.phase
    }

    pub fn dt_window_until(&self) -> Tick {
        self.dt_until
    }

    pub fn page_bytes(&self) -> u64 {
        self.cfg.flash.page_bytes
    }

    fn flash_read(&mut self, ch: u32, at: Tick) -> Tick {
        let c = ch as usize;
        let start = at.max(self.channel_free[c]);
        let done = start + self.t_r + self.page_xfer;
        self.channel_free[c] = done;
        self.stats.flash_reads += 1;
        done
    }

    fn flash_program(&mut self, ch: u32, at: Tick) -> Tick {
        let c = ch as usize;
        let start = at.max(self.channel_free[c]);
        let done = start + self.page_xfer + self.t_prog;
        self.channel_free[c] = done;
        self.stats.flash_programs += 1;
        done
    }

    fn persist(&mut self, lpn: u64) {
        if let Some(lines) = self.volatile.remove(&lpn) {
            let base = lpn * self.cfg.flash.page_bytes;
            for (off, v) in lines {
                self.durable.insert(base + off, v);
            }
        }
    }

    /// Host write of a whole page to flash; waits for reclamation if the
    /// free pool is down to the reserve.
    fn program_page(&mut self, lpn: u64, at: Tick) -> Result<Tick, DeviceError> {
        while self.ftl.free_blocks() <= self.cfg.gc.reserve_blocks {
            if !self.gc_step(at, true)? {
                break;
            }
        }
        let ppn = self.ftl.write(lpn)?;
        self.gc.stalled = false;
        let ch = self.ftl.channel_of_ppn(ppn);
        let done = self.flash_program(ch, at);
        self.persist(lpn);
        Ok(done)
    }

    fn install(
        &mut self,
        page: u64,
        ready: Tick,
        dirty: bool,
        pinned: bool,
        now: Tick,
    ) -> Result<(), DeviceError> {
        let out = self.cache.fill(page, ready, dirty, pinned);
        if out.demoted {
            self.stats.pinned_demotions += 1;
        }
        if let Some(v) = out.victim {
            if v.dirty {
                self.program_page(v.page, now)?;
            }
        }
        Ok(())
    }

    /// Flash read of a page into DRAM. Returns (data off flash, line ready).
    fn fetch(&mut self, page: u64, at: Tick) -> (Tick, Tick) {
        match self.ftl.lookup(page) {
            Some(ppn) => {
                let ch = self.ftl.channel_of_ppn(ppn);
                let off_flash = self.flash_read(ch, at);
                let bytes = self.cfg.flash.page_bytes;
                let ready = self.dram.access(off_flash, page * bytes, bytes);
                (off_flash, ready)
            }
            // Never written: reads as zeros without touching flash.
            None => (at, at),
        }
    }

    fn prefetch(&mut self, page: u64, now: Tick) -> Result<(), DeviceError> {
        if page >= self.ftl.logical_pages() || self.cache.peek(page).is_some() {
            return Ok(());
        }
        let (_, ready) = self.fetch(page, now);
        self.stats.prefetches += 1;
        self.install(page, ready, false, true, now)
    }

    fn read_value(&self, addr: u64) -> u64 {
        let pb = self.cfg.flash.page_bytes;
        self.volatile
            .get(&(addr / pb))
            .and_then(|l| l.get(&(addr % pb)))
            .or_else(|| self.durable.get(&addr))
            .copied()
            .unwrap_or(0)
    }

    pub fn handle(&mut self, now: Tick, req: &DevRequest) -> Result<DevResponse, DeviceError> {
        if req.local.saturating_add(64) > self.capacity {
            return Err(DeviceError::OutOfRange(req.local));
        }
        self.stats.requests += 1;
        self.advance(now)?;
        let ann = req.annotation;
        if ann.is_dt() {
            self.dt_until = self.dt_until.max(now + self.dt_window);
        }
        let pb = self.cfg.flash.page_bytes;
        let page = req.local / pb;
        let bf = ann.bufferability == Bufferability::Bf;
        let resp = match req.op {
            DevOp::Load => self.load(now, req, page, bf)?,
            DevOp::Store if ann.is_nb() => self.store_nb(now, req, page)?,
            DevOp::Store => self.store(now, req, page, bf)?,
        };
        if ann.is_dt() {
            // The window also covers the request's own service time.
            self.dt_until = self.dt_until.max(resp.done + self.dt_window);
        }
        self.gc.trigger = now;
        if bf {
            self.cache.pin(page);
            self.prefetch(page + 1, now)?;
        }
        Ok(resp)
    }

    fn load(
        &mut self,
        now: Tick,
        req: &DevRequest,
        page: u64,
        bf: bool,
    ) -> Result<DevResponse, DeviceError> {
        let (done, served_by) = match self.cache.touch(page) {
            Some(line) => {
                self.stats.dram_hits += 1;
                let at = now.max(line.ready_at);
                let served = if line.ready_at > now {
                    ServedBy::DeviceFlash
                } else {
                    ServedBy::DeviceDram
                };
                (self.dram.access(at, req.local, 64), served)
            }
            None => {
                self.stats.dram_misses += 1;
                let mapped = self.ftl.lookup(page).is_some();
                let (off_flash, ready) = self.fetch(page, now);
                self.install(page, ready, false, bf, now)?;
                if !mapped {
                    (self.dram.access(now, req.local, 64), ServedBy::DeviceDram)
                } else if req.annotation.is_dt() {
                    // Critical line goes straight to the host; the DRAM fill
                    // completes behind it.
                    (off_flash + self.line_xfer, ServedBy::DeviceFlash)
                } else {
                    (self.dram.access(ready, req.local, 64), ServedBy::DeviceFlash)
                }
            }
        };
        Ok(DevResponse {
            done,
            served_by,
            value: self.read_value(req.local),
        })
    }

    fn write_value(&mut self, req: &DevRequest, page: u64) {
        let off = req.local % self.cfg.flash.page_bytes;
        self.volatile.entry(page).or_default().insert(off, req.value);
    }

    fn store(
        &mut self,
        now: Tick,
        req: &DevRequest,
        page: u64,
        bf: bool,
    ) -> Result<DevResponse, DeviceError> {
        self.stats.stores += 1;
        self.write_value(req, page);
        let done = match self.cache.touch(page) {
            Some(line) => {
                self.stats.dram_hits += 1;
                self.cache.set_dirty(page, true);
                self.dram.access(now.max(line.ready_at), req.local, 64)
            }
            None => {
                self.stats.dram_misses += 1;
                self.install(page, now, true, bf, now)?;
                self.dram.access(now, req.local, 64)
            }
        };
        Ok(DevResponse {
            done,
            served_by: ServedBy::DeviceDram,
            value: 0,
        })
    }

    /// Write-through: completes once the containing page is programmed.
    fn store_nb(&mut self, now: Tick, req: &DevRequest, page: u64) -> Result<DevResponse, DeviceError> {
        self.stats.stores += 1;
        self.write_value(req, page);
        let start = match self.cache.touch(page) {
            Some(line) => {
                self.stats.dram_hits += 1;
                now.max(line.ready_at)
            }
            None => {
                self.stats.dram_misses += 1;
                match self.ftl.lookup(page) {
                    Some(ppn) => {
                        let ch = self.ftl.channel_of_ppn(ppn);
                        self.flash_read(ch, now)
                    }
                    None => now,
                }
            }
        };
        let done = self.program_page(page, start)?;
        self.cache.set_dirty(page, false);
        Ok(DevResponse {
            done,
            served_by: ServedBy::DeviceFlash,
            value: 0,
        })
    }

    /// PCIe BAR path: same internals, annotations never reach the device.
    pub fn serve_bar_request(
        &mut self,
        now: Tick,
        local: u64,
        op: DevOp,
        value: u64,
    ) -> Result<DevResponse, DeviceError> {
        let req = DevRequest {
            local,
            op,
            annotation: crate::protocol::Annotation::NONE,
            value,
        };
        self.handle(now, &req)
    }

    /// Commits every garbage-collection operation that starts before `now`.
    /// Ties go to the arriving request, whose DT window may still hold the
    /// operation back.
    pub fn advance(&mut self, now: Tick) -> Result<(), DeviceError> {
        while self.gc_step(now, false)? {}
        Ok(())
    }

    fn gc_wanted(&self) -> bool {
        let free = self.ftl.free_fraction();
        free < self.cfg.gc.low_watermark || (self.gc.active && free < self.cfg.gc.high_watermark)
    }

    /// One GC operation. With `force`, runs regardless of `now` and of DT
    /// windows. Returns whether an operation was committed.
    fn gc_step(&mut self, now: Tick, force: bool) -> Result<bool, DeviceError> {
        loop {
            match self.gc.phase {
                GcPhase::Idle => {
                    if !(force || self.gc_wanted()) {
                        self.gc.active = false;
                        return Ok(false);
                    }
                    if self.gc.stalled {
                        return Ok(false);
                    }
                    let victim = match self.ftl.victim() {
                        Ok(v) if self.ftl.block(v).valid < self.ftl.pages_per_block() => v,
                        Ok(_) | Err(DeviceError::NoCandidate) => {
                            self.gc.stalled = true;
                            self.gc.active = false;
                            return Ok(false);
                        }
                        Err(e) => return Err(e),
                    };
                    if !self.gc.active {
                        self.gc.ready = self.gc.ready.max(self.gc.trigger);
                    }
                    self.gc.active = true;
                    self.gc.phase = GcPhase::Migrating { victim, from: 0 };
                }
                GcPhase::Migrating { victim, from } => match self.ftl.next_valid(victim, from) {
                    None => self.gc.phase = GcPhase::Erasing { victim },
                    Some((idx, lpn)) => {
                        let rch = self.ftl.channel_of_block(victim);
                        let Some(start) = self.gc_gate(now, force, rch) else {
                            return Ok(false);
                        };
                        let read_done = start + self.t_r + self.page_xfer;
                        self.channel_free[rch as usize] = read_done;
                        self.stats.flash_reads += 1;
                        let ppn = self.ftl.write(lpn)?;
                        let wch = self.ftl.channel_of_ppn(ppn);
                        let done = self.flash_program(wch, read_done);
                        self.gc.ready = done;
                        self.gc.started.get_or_insert(start);
                        self.gc.moved += 1;
                        self.gc.phase = GcPhase::Migrating {
                            victim,
                            from: idx + 1,
                        };
                        self.note(start, "gc_migrate", || {
                            format!("block={victim};read_ch={rch};write_ch={wch};end_ps={}", done.as_ps())
                        });
                        return Ok(true);
                    }
                },
                GcPhase::Erasing { victim } => {
                    let ch = self.ftl.channel_of_block(victim);
                    let Some(start) = self.gc_gate(now, force, ch) else {
                        return Ok(false);
                    };
                    let done = start + self.t_bers;
                    self.channel_free[ch as usize] = done;
                    self.stats.flash_erases += 1;
                    self.ftl.erase(victim)?;
                    self.gc.ready = done;
                    let ev = GcEvent {
                        start: self.gc.started.take().unwrap_or(start),
                        end: done,
                        pages_moved: std::mem::take(&mut self.gc.moved),
                    };
                    self.stats.gc_events.push(ev);
                    self.note(start, "gc_erase", || {
                        format!("block={victim};ch={ch};end_ps={}", done.as_ps())
                    });
                    self.gc.phase = GcPhase::Idle;
                    if !self.gc_wanted() {
                        self.gc.active = false;
                        let free = self.ftl.free_blocks();
                        self.note(done, "gc_stop", || format!("free_blocks={free}"));
                    }
                    return Ok(true);
                }
            }
        }
    }

    /// Start tick of the next GC operation on channel `ch`, or `None` if it
    /// must not start yet.
    fn gc_gate(&mut self, now: Tick, force: bool, ch: u32) -> Option<Tick> {
        let emergency = force || self.ftl.free_blocks() <= self.cfg.gc.reserve_blocks;
        let ready = self.gc.ready.max(self.channel_free[ch as usize]);
        if !emergency && self.dt_until > ready {
            if ready < now && !self.gc.deferring {
                self.gc.deferring = true;
                let until = self.dt_until;
                self.note(ready, "dt_defer", || format!("until_ps={}", until.as_ps()));
            }
            let start = self.dt_until.max(ready);
            return (start < now).then(|| {
                self.gc.deferring = false;
                start
            });
        }
        self.gc.deferring = false;
        (force || ready < now).then_some(ready)
    }

    /// Programs every dirty page, spread over the channels. Returns when the
    /// last program completes.
    pub fn persist_flush(&mut self, now: Tick) -> Tick {
        // Reclamation in progress is allowed to finish its committed work.
        let _ = self.advance(now);
        let mut pages = self.cache.dirty_pages();
        pages.sort_unstable();
        let mut done = now;
        for (i, page) in pages.iter().enumerate() {
            match self.program_page(*page, now) {
                Ok(t) => done = done.max(t),
                Err(e) => self.note(now, "flush_error", || e.to_string()),
            }
            self.cache.set_dirty(*page, false);
            if (i + 1) % self.cfg.flash.channels as usize == 0 || i + 1 == pages.len() {
                let n = i + 1;
                self.note(now, "flush_wave", || format!("pages={n}"));
            }
        }
        done
    }

    /// Loses everything volatile: the DRAM cache and any dirty data in it.
    pub fn crash_drop_volatile(&mut self) {
        self.cache.invalidate_all();
        self.volatile.clear();
    }

    /// Lines written but not yet on flash.
    pub fn dirty_pages(&self) -> u64 {
        self.cache.dirty_count()
    }
}
