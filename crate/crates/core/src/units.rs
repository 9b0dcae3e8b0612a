//! Bit-rate newtype.
//!
//! Rates are held as integer bits per second so that reservation arithmetic
//! in the resource pool is exact. On the wire they are expressed in Mbit/s.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(u64);

impl Rate {
    pub const ZERO: Rate = Rate(0);

    pub const fn from_bps(bps: u64) -> Self {
        Rate(bps)
    }

    /// Rounds to the nearest bit/s. Negative or non-finite inputs yield `None`.
    pub fn from_mbps(mbps: f64) -> Option<Self> {
        if !mbps.is_finite() || mbps < 0.0 {
            return None;
        }
        let bps = (mbps * 1e6).round();
        if bps > u64::MAX as f64 {
            return None;
        }
        Some(Rate(bps as u64))
    }

    pub const fn bps(self) -> u64 {
        self.0
    }

    pub fn mbps(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_sub(self, rhs: Rate) -> Option<Rate> {
        self.0.checked_sub(rhs.0).map(Rate)
    }

    pub fn saturating_sub(self, rhs: Rate) -> Rate {
        Rate(self.0.saturating_sub(rhs.0))
    }

    /// Scales by a non-negative factor, rounding to the nearest bit/s.
    pub fn scale(self, factor: f64) -> Rate {
        Rate((self.0 as f64 * factor).round() as u64)
    }

    /// One tenth, rounded down. Used for the default return-link demand.
    pub fn tenth(self) -> Rate {
        Rate(self.0 / 10)
    }
}

impl Add for Rate {
    type Output = Rate;
    fn add(self, rhs: Rate) -> Rate {
        Rate(self.0 + rhs.0)
    }
}

impl AddAssign for Rate {
    fn add_assign(&mut self, rhs: Rate) {
        self.0 += rhs.0;
    }
}

impl Sub for Rate {
    type Output = Rate;
    fn sub(self, rhs: Rate) -> Rate {
        Rate(self.0 - rhs.0)
    }
}

impl SubAssign for Rate {
    fn sub_assign(&mut self, rhs: Rate) {
        self.0 -= rhs.0;
    }
}

impl Sum for Rate {
    fn sum<I: Iterator<Item = Rate>>(iter: I) -> Rate {
        Rate(iter.map(|r| r.0).sum())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Mbit/s", self.mbps())
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.mbps())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let mbps = f64::deserialize(deserializer)?;
        Rate::from_mbps(mbps).ok_or_else(|| {
            serde::de::Error::custom(format!("rate must be a non-negative Mbit/s value, got {mbps}"))
        })
    }
}
