//! Integer partitions: the index set for abelian p-group types and
//! Hall-Littlewood polynomials.
//!
//! A [`Partition`] stores its nonzero parts in weakly decreasing order. The
//! empty partition prints as `[]`; nonempty ones print as `a1,a2,...`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default, Debug)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn empty() -> Self {
        Partition { parts: Vec::new() }
    }

    /// Builds a partition from parts, dropping trailing zeros.
    ///
    /// Fails if the parts are not weakly decreasing.
    pub fn new(parts: impl Into<Vec<u32>>) -> Result<Self> {
        let mut parts = parts.into();
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.windows(2).any(|w| w[0] < w[1]) || parts.contains(&0) {
            return Err(Error::InvalidPartition(format!("{parts:?} is not weakly decreasing")));
        }
        Ok(Partition { parts })
    }

    /// Sorts arbitrary nonnegative parts into a partition.
    pub fn from_unsorted(parts: impl IntoIterator<Item = u32>) -> Self {
        let mut parts: Vec<u32> = parts.into_iter().filter(|&x| x > 0).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts }
    }

    /// The partition with `count` parts all equal to `value`.
    pub fn rectangle(value: u32, count: usize) -> Self {
        if value == 0 {
            return Self::empty();
        }
        Partition { parts: vec![value; count] }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// The i-th part with 1-based indexing; zero beyond the length.
    pub fn part(&self, i: usize) -> u32 {
        if i == 0 {
            return 0;
        }
        self.parts.get(i - 1).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn largest(&self) -> u32 {
        self.parts.first().copied().unwrap_or(0)
    }

    pub fn conjugate(&self) -> Partition {
        let width = self.largest() as usize;
        let mut conj = vec![0u32; width];
        for &part in &self.parts {
            for c in conj.iter_mut().take(part as usize) {
                *c += 1;
            }
        }
        Partition { parts: conj }
    }

    /// Conjugate part λ'_i with 1-based indexing.
    pub fn conjugate_part(&self, i: usize) -> u32 {
        if i == 0 {
            return self.len() as u32;
        }
        self.parts.iter().filter(|&&x| x as usize >= i).count() as u32
    }

    /// m_i(λ) = #{j : λ_j = i}.
    pub fn multiplicity(&self, i: u32) -> u32 {
        self.parts.iter().filter(|&&x| x == i).count() as u32
    }

    /// n(λ) = Σ (i-1) λ_i.
    pub fn weighted_sum(&self) -> u64 {
        self.parts
            .iter()
            .enumerate()
            .map(|(i, &x)| i as u64 * x as u64)
            .sum()
    }

    /// Diagram containment: μ ⊆ λ iff μ_i ≤ λ_i for all i.
    pub fn is_contained_in(&self, other: &Partition) -> bool {
        self.len() <= other.len() && self.parts.iter().zip(&other.parts).all(|(a, b)| a <= b)
    }

    /// True iff `self ≺ lambda`, i.e. λ_1 ≥ μ_1 ≥ λ_2 ≥ μ_2 ≥ ….
    pub fn interlaces(&self, lambda: &Partition) -> bool {
        let n = self.len().max(lambda.len());
        (1..=n).all(|i| lambda.part(i) >= self.part(i) && self.part(i) >= lambda.part(i + 1))
    }

    /// Every part clamped to at most `cap`.
    pub fn truncate_parts(&self, cap: u32) -> Partition {
        Partition { parts: self.parts.iter().map(|&x| x.min(cap)).filter(|&x| x > 0).collect() }
    }

    /// All partitions ν with ν ⊆ self, in graded order (by size, then decreasing lex).
    pub fn sub_diagrams(&self) -> Vec<Partition> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(self.len());
        sub_diagrams_rec(&self.parts, 0, u32::MAX, &mut current, &mut out);
        out.sort_by(graded_cmp);
        out
    }

    /// Union of parts (the type of a direct sum of groups).
    pub fn direct_sum(&self, other: &Partition) -> Partition {
        Partition::from_unsorted(self.parts.iter().chain(&other.parts).copied())
    }
}

fn sub_diagrams_rec(bound: &[u32], i: usize, cap: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if i == bound.len() {
        out.push(Partition { parts: cur.iter().copied().filter(|&x| x > 0).collect() });
        return;
    }
    let hi = bound[i].min(cap);
    for v in 0..=hi {
        cur.push(v);
        sub_diagrams_rec(bound, i + 1, v, cur, out);
        cur.pop();
    }
}

/// Graded order: smaller size first, then reverse lexicographic within a size.
pub fn graded_cmp(a: &Partition, b: &Partition) -> Ordering {
    a.size().cmp(&b.size()).then_with(|| b.parts.cmp(&a.parts))
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Partition {
    fn cmp(&self, other: &Self) -> Ordering {
        graded_cmp(self, other)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return f.write_str("[]");
        }
        let mut first = true;
        for p in &self.parts {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "[]" {
            return Ok(Partition::empty());
        }
        let parts = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidPartition(format!("bad part {tok:?} in {s:?}")))
            })
            .collect::<Result<Vec<u32>>>()?;
        if parts.contains(&0) {
            return Err(Error::InvalidPartition(format!("zero part in {s:?}")));
        }
        Partition::new(parts)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Every partition with size ≤ `max_size`, largest part ≤ `max_part` and
/// length ≤ `max_len`, each exactly once, in graded order.
pub fn partitions_bounded(
    max_size: u32,
    max_part: u32,
    max_len: usize,
) -> impl Iterator<Item = Partition> {
    let mut out = Vec::new();
    for size in 0..=max_size {
        let mut cur = Vec::new();
        of_size_rec(size, max_part.min(size), max_len, &mut cur, &mut out);
    }
    out.into_iter()
}

// Emits partitions of `remaining` with parts ≤ cap in decreasing lex order.
fn of_size_rec(remaining: u32, cap: u32, len_left: usize, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if remaining == 0 {
        out.push(Partition { parts: cur.clone() });
        return;
    }
    if len_left == 0 {
        return;
    }
    for part in (1..=cap.min(remaining)).rev() {
        cur.push(part);
        of_size_rec(remaining - part, part, len_left - 1, cur, out);
        cur.pop();
    }
}
