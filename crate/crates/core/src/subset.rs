use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A set of input dimensions, stored as a bitmask: bit `i` is set when
/// dimension `i` (zero-based) belongs to the set.
///
/// Displayed and parsed with one-based, comma-separated indices, so the set
/// `{0, 1}` prints as `1,2` and the empty set as `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(pub u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    /// Largest dimension a bitmask can describe.
    pub const MAX_DIM: usize = 64;

    pub fn from_dims<I: IntoIterator<Item = usize>>(dims: I) -> Self {
        Subset(dims.into_iter().fold(0, |m, i| m | (1u64 << i)))
    }

    /// Builds a subset from one-based dimension indices.
    pub fn from_one_based(dims: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &i in dims {
            if i == 0 || i > Self::MAX_DIM {
                return Err(Error::BadSubset { mask: 0, dim: i });
            }
            mask |= 1 << (i - 1);
        }
        Ok(Subset(mask))
    }

    pub fn full(d: usize) -> Self {
        if d >= 64 {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << d) - 1)
        }
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn dims(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..64).filter(move |&i| mask & (1 << i) != 0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Errors unless every member is below `d`.
    pub fn check(self, d: usize) -> Result<()> {
        if self.is_subset_of(Subset::full(d)) {
            Ok(())
        } else {
            Err(Error::BadSubset { mask: self.0, dim: d })
        }
    }

    /// All `2^d` subsets of `{0, …, d-1}` in ascending bitmask order.
    pub fn all(d: usize) -> impl Iterator<Item = Subset> {
        assert!(d < 64, "full enumeration needs d < 64");
        (0..(1u64 << d)).map(Subset)
    }

    /// Non-empty subsets of size at most `max_order`, ascending bitmask order.
    pub fn up_to_order(d: usize, max_order: usize) -> impl Iterator<Item = Subset> {
        Self::all(d).filter(move |s| !s.is_empty() && s.len() <= max_order)
    }

    /// Strict subsets of `self`, including the empty set.
    pub fn proper_subsets(self) -> impl Iterator<Item = Subset> {
        let full = self.0;
        // standard submask walk, descending, excluding `full` itself
        let mut next = Some(full);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == 0 { None } else { Some((cur - 1) & full) };
            Some(Subset(cur))
        })
        .filter(move |s| s.0 != full)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for i in self.dims() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(Subset::EMPTY);
        }
        let dims = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad subset '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Subset::from_one_based(&dims)
    }
}

impl Serialize for Subset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
