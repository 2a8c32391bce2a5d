use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::host::AccessRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKernel {
    Copy,
    Scale,
    Add,
    Triad,
}

/// STREAM vector kernels. Each element is one 64 B line; arrays a, b, c are
/// laid out back to back from address zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub kernel: StreamKernel,
    pub elements: u64,
    pub threads: u32,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            kernel: StreamKernel::Triad,
            elements: 1 << 16,
            threads: 1,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.threads == 0 {
            return Err(WorkloadError::config("workload.stream.threads", "must be positive"));
        }
        if self.elements == 0 || !self.elements.is_multiple_of(self.threads as u64) {
            return Err(WorkloadError::config(
                "workload.stream.elements",
                "must be a positive multiple of the thread count",
            ));
        }
        Ok(())
    }

    pub fn footprint_bytes(&self) -> u64 {
        3 * self.elements * 64
    }

    /// Base address of array `a`, `b` or `c` (0, 1, 2).
    pub fn array_base(&self, array: u64) -> u64 {
        array * self.elements * 64
    }

    /// Lines moved per element.
    pub fn accesses_per_element(&self) -> u64 {
        match self.kernel {
            StreamKernel::Copy | StreamKernel::Scale => 2,
            StreamKernel::Add | StreamKernel::Triad => 3,
        }
    }
}

/// One stream per thread over a contiguous slice of the arrays.
pub fn stream_gen(cfg: &StreamConfig) -> Result<Vec<Vec<AccessRecord>>, WorkloadError> {
    cfg.validate()?;
    let per = cfg.elements / cfg.threads as u64;
    let [a, b, c] = [0, 1, 2].map(|i| cfg.array_base(i));
    let out = (0..cfg.threads)
        .map(|t| {
            let mut v = Vec::with_capacity((per * cfg.accesses_per_element()) as usize);
            for i in t as u64 * per..(t as u64 + 1) * per {
                let at = |base: u64| base + i * 64;
                match cfg.kernel {
                    StreamKernel::Copy | StreamKernel::Scale => {
                        v.push(AccessRecord::load(at(a), 0));
                        v.push(AccessRecord::store(at(b), 0));
                    }
                    StreamKernel::Add => {
                        v.push(AccessRecord::load(at(a), 0));
                        v.push(AccessRecord::load(at(b), 0));
                        v.push(AccessRecord::store(at(c), 0));
                    }
                    StreamKernel::Triad => {
                        v.push(AccessRecord::load(at(b), 0));
                        v.push(AccessRecord::load(at(c), 0));
                        v.push(AccessRecord::store(at(a), 0));
                    }
                }
            }
            for r in &mut v {
                r.core = t;
            }
            v
        })
        .collect();
    Ok(out)
}
