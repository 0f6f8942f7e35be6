//! One-decimal percentages held as integer tenths, so rounding is exact.

use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent {
    tenths: u32,
}

impl Percent {
    pub const HUNDRED: Percent = Percent { tenths: 1000 };

    pub fn from_tenths(tenths: u32) -> Self {
        Percent { tenths }
    }

    pub fn tenths(self) -> u32 {
        self.tenths
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.tenths) / 10.0
    }

    /// `part / whole` as a percentage, rounded half-up to one decimal.
    pub fn ratio(part: usize, whole: usize) -> Percent {
        assert!(whole > 0, "percentage of an empty whole");
        let (part, whole) = (part as u128, whole as u128);
        let tenths = (part * 2000 + whole) / (2 * whole);
        Percent {
            tenths: tenths as u32,
        }
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.tenths / 10, self.tenths % 10)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

/// Shares of `counts` in tenths of a percent, distributed by largest remainder
/// so the result sums to exactly 100.0. Ties go to the earlier entry.
pub fn largest_remainder(counts: &[usize]) -> Vec<Percent> {
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    if total == 0 {
        return vec![Percent::default(); counts.len()];
    }
    let mut floors: Vec<u128> = Vec::with_capacity(counts.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        let scaled = c as u128 * 1000;
        floors.push(scaled / total);
        remainders.push((scaled % total, i));
    }
    let leftover = 1000 - floors.iter().sum::<u128>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(leftover as usize) {
        floors[i] += 1;
    }
    floors
        .into_iter()
        .map(|t| Percent { tenths: t as u32 })
        .collect()
}
