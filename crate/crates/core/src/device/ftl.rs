//! Page-mapped flash translation layer over append-only blocks.
//!
//! Logical pages are striped across channels: each channel keeps one open
//! block and writes rotate between channels. Block `b` sits on channel
//! `b % channels`.

use std::collections::VecDeque;

use super::DeviceError;

const UNMAPPED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockMeta {
    pub valid: u32,
    /// Next programmable page; only grows until erase.
    pub cursor: u32,
    pub erase_count: u32,
}

#[derive(Debug, Clone)]
pub struct Ftl {
    pages_per_block: u32,
    channels: u32,
    logical_pages: u64,
    l2p: Vec<u32>,
    p2l: Vec<u32>,
    blocks: Vec<BlockMeta>,
    free: Vec<VecDeque<u32>>,
    free_count: u32,
    active: Vec<Option<u32>>,
    next_channel: u32,
}

/// Greedy choice: minimum valid count among eligible blocks, lowest id on
/// ties.
pub fn gc_select_victim(valid: &[u32], eligible: &[bool]) -> Result<u32, DeviceError> {
    valid
        .iter()
        .zip(eligible)
        .enumerate()
        .filter(|(_, (_, &e))| e)
        .min_by_key(|(i, (&v, _))| (v, *i))
        .map(|(i, _)| i as u32)
        .ok_or(DeviceError::NoCandidate)
}

impl Ftl {
    pub fn new(blocks: u32, pages_per_block: u32, channels: u32, logical_pages: u64) -> Self {
        assert!(channels > 0 && blocks >= channels);
        assert!(logical_pages < (blocks as u64) * pages_per_block as u64);
        let mut free = vec![VecDeque::new(); channels as usize];
        for b in 0..blocks {
            free[(b % channels) as usize].push_back(b);
        }
        Self {
            pages_per_block,
            channels,
            logical_pages,
            l2p: vec![UNMAPPED; logical_pages as usize],
            p2l: vec![UNMAPPED; blocks as usize * pages_per_block as usize],
            blocks: vec![BlockMeta::default(); blocks as usize],
            free,
            free_count: blocks,
            active: vec![None; channels as usize],
            next_channel: 0,
        }
    }

    pub fn logical_pages(&self) -> u64 {
        self.logical_pages
    }

    pub fn block_count(&self) -> u32 {
        self.blocks.len() as u32
    }

    pub fn pages_per_block(&self) -> u32 {
        self.pages_per_block
    }

    pub fn free_blocks(&self) -> u32 {
        self.free_count
    }

    pub fn free_fraction(&self) -> f64 {
        self.free_count as f64 / self.blocks.len() as f64
    }

    pub fn block(&self, b: u32) -> BlockMeta {
        self.blocks[b as usize]
    }

    pub fn channel_of_block(&self, b: u32) -> u32 {
        b % self.channels
    }

    pub fn channel_of_ppn(&self, ppn: u32) -> u32 {
        self.channel_of_block(ppn / self.pages_per_block)
    }

    pub fn lookup(&self, lpn: u64) -> Option<u32> {
        match self.l2p.get(lpn as usize) {
            Some(&p) if p != UNMAPPED => Some(p),
            _ => None,
        }
    }

    fn is_active(&self, b: u32) -> bool {
        self.active[self.channel_of_block(b) as usize] == Some(b)
    }

    /// Channel the next write will use, rotating across channels with space.
    fn pick_channel(&mut self) -> Option<u32> {
        for i in 0..self.channels {
            let c = (self.next_channel + i) % self.channels;
            let has_room = match self.active[c as usize] {
                Some(b) => self.blocks[b as usize].cursor < self.pages_per_block,
                None => false,
            };
            if has_room || !self.free[c as usize].is_empty() {
                self.next_channel = (c + 1) % self.channels;
                return Some(c);
            }
        }
        None
    }

    fn open_page(&mut self, c: u32) -> u32 {
        let ci = c as usize;
        let need_new = match self.active[ci] {
            Some(b) => self.blocks[b as usize].cursor >= self.pages_per_block,
            None => true,
        };
        if need_new {
            let b = self.free[ci].pop_front().expect("caller checked free space");
            self.free_count -= 1;
            self.active[ci] = Some(b);
        }
        let b = self.active[ci].unwrap();
        let meta = &mut self.blocks[b as usize];
        let ppn = b * self.pages_per_block + meta.cursor;
        meta.cursor += 1;
        ppn
    }

    /// Programs `lpn` to a fresh page, invalidating its old copy.
    pub fn write(&mut self, lpn: u64) -> Result<u32, DeviceError> {
        if lpn >= self.logical_pages {
            return Err(DeviceError::OutOfRange(lpn));
        }
        let c = self.pick_channel().ok_or(DeviceError::NoFreeBlocks)?;
        let ppn = self.open_page(c);
        if let Some(old) = self.lookup(lpn) {
            self.p2l[old as usize] = UNMAPPED;
            self.blocks[(old / self.pages_per_block) as usize].valid -= 1;
        }
        self.l2p[lpn as usize] = ppn;
        self.p2l[ppn as usize] = lpn as u32;
        self.blocks[(ppn / self.pages_per_block) as usize].valid += 1;
        Ok(ppn)
    }

    pub fn victim(&self) -> Result<u32, DeviceError> {
        let valid: Vec<u32> = self.blocks.iter().map(|m| m.valid).collect();
        let eligible: Vec<bool> = (0..self.blocks.len() as u32)
            .map(|b| self.blocks[b as usize].cursor > 0 && !self.is_active(b))
            .collect();
        gc_select_victim(&valid, &eligible)
    }

    /// Next valid page in `block` at or after page index `from`.
    pub fn next_valid(&self, block: u32, from: u32) -> Option<(u32, u64)> {
        (from..self.pages_per_block).find_map(|i| {
            let ppn = block * self.pages_per_block + i;
            let l = self.p2l[ppn as usize];
            (l != UNMAPPED).then_some((i, l as u64))
        })
    }

    /// Erases a block with no valid pages and returns it to the free pool.
    pub fn erase(&mut self, block: u32) -> Result<(), DeviceError> {
        let meta = &mut self.blocks[block as usize];
        if meta.valid != 0 {
            return Err(DeviceError::EraseValid(block));
        }
        if meta.cursor == 0 {
            return Ok(());
        }
        meta.cursor = 0;
        meta.erase_count += 1;
        let c = self.channel_of_block(block);
        if self.active[c as usize] == Some(block) {
            self.active[c as usize] = None;
        }
        self.free[c as usize].push_back(block);
        self.free_count += 1;
        Ok(())
    }

    /// Bijection and counter consistency.
    pub fn check(&self) -> Result<(), String> {
        let mut valid = vec![0u32; self.blocks.len()];
        for (lpn, &ppn) in self.l2p.iter().enumerate() {
            if ppn == UNMAPPED {
                continue;
            }
            if self.p2l[ppn as usize] != lpn as u32 {
                return Err(format!("lpn {lpn} -> ppn {ppn} not reversed"));
            }
            valid[(ppn / self.pages_per_block) as usize] += 1;
        }
        let mapped = self.p2l.iter().filter(|&&l| l != UNMAPPED).count();
        let image = self.l2p.iter().filter(|&&p| p != UNMAPPED).count();
        if mapped != image {
            return Err(format!("{mapped} valid pages but {image} mapped lpns"));
        }
        for (b, m) in self.blocks.iter().enumerate() {
            if m.valid != valid[b] {
                return Err(format!("block {b} counts {} valid, found {}", m.valid, valid[b]));
            }
            let beyond = (m.cursor..self.pages_per_block)
                .any(|i| self.p2l[b * self.pages_per_block as usize + i as usize] != UNMAPPED);
            if beyond {
                return Err(format!("block {b} has mapped pages past its cursor"));
            }
        }
        let free: u32 = self.free.iter().map(|f| f.len() as u32).sum();
        if free != self.free_count {
            return Err("free counter drifted".into());
        }
        Ok(())
    }
}
