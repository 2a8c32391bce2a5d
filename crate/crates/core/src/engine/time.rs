use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Simulated time in picoseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);
    pub const MAX: Tick = Tick(u64::MAX);

    pub const fn ps(ps: u64) -> Self {
        Tick(ps)
    }

    pub const fn ns(ns: u64) -> Self {
        Tick(ns * 1_000)
    }

    pub const fn us(us: u64) -> Self {
        Tick(us * 1_000_000)
    }

    pub const fn ms(ms: u64) -> Self {
        Tick(ms * 1_000_000_000)
    }

    /// Round a fractional nanosecond value up to the next picosecond.
    pub fn from_ns_f64(ns: f64) -> Self {
        debug_assert!(ns >= 0.0 && ns.is_finite());
        // Guard against representation error such as 27.499999999 ns.
        let ps = ns * 1000.0;
        let rounded = ps.round();
        if (ps - rounded).abs() < 1e-6 {
            Tick(rounded as u64)
        } else {
            Tick(ps.ceil() as u64)
        }
    }

    pub fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_ns_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, rhs: Tick) -> Tick {
        Tick(self.0.saturating_sub(rhs.0))
    }

    pub fn max(self, other: Tick) -> Tick {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Add for Tick {
    type Output = Tick;
    fn add(self, rhs: Tick) -> Tick {
        Tick(self.0 + rhs.0)
    }
}

impl AddAssign for Tick {
    fn add_assign(&mut self, rhs: Tick) {
        self.0 += rhs.0;
    }
}

impl Sub for Tick {
    type Output = Tick;
    fn sub(self, rhs: Tick) -> Tick {
        Tick(self.0 - rhs.0)
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.0)
    }
}

/// Fixed-frequency clock domain, e.g. a 4 GHz core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    period: Tick,
}

impl Clock {
    /// A clock at `hz`; the period must be a whole number of picoseconds.
    pub fn from_hz(hz: u64) -> Option<Self> {
        const PS_PER_S: u64 = 1_000_000_000_000;
        if hz == 0 || !PS_PER_S.is_multiple_of(hz) {
            return None;
        }
        Some(Clock {
            period: Tick(PS_PER_S / hz),
        })
    }

    pub fn period(&self) -> Tick {
        self.period
    }

    pub fn cycles(&self, n: u64) -> Tick {
        Tick(self.period.0 * n)
    }

    /// First clock edge at or after `t`.
    pub fn align_up(&self, t: Tick) -> Tick {
        let p = self.period.0;
        Tick(t.0.div_ceil(p) * p)
    }
}
