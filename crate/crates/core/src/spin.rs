use std::fmt;

use crate::error::{domain, Result};

/// A spin magnitude S ∈ {1/2, 1, 3/2, …}, stored as the integer 2S.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin(u32);

impl Spin {
    pub const HALF: Spin = Spin(1);

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return domain("spin magnitude must be positive");
        }
        Ok(Spin(twice))
    }

    /// Parses a floating value such as `0.5` or `10`; it must be a positive half-integer.
    pub fn from_f64(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !twice.is_finite() || twice < 0.5 || (twice - twice.round()).abs() > 1e-9 {
            return domain(format!("spin magnitude {value} is not a positive half-integer"));
        }
        Self::from_twice(twice.round() as u32)
    }

    /// 2S, the maximum number of spin deviations a site can hold.
    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}
