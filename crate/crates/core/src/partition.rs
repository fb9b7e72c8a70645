//! Admissible tuples `(n₁, …, n_k)` and the coefficient `c(n₁, …, n_k)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("dimension {0} is too small, need n >= 2")]
    DimensionError(usize),
    #[error("part {part} is outside [2, {max}]")]
    PartOutOfRange { part: usize, max: usize },
    #[error("parts sum to {sum}, exceeding n = {n}")]
    SumTooLarge { sum: usize, n: usize },
}

/// Unordered tuple of subspace dimensions for an `n`-dimensional tangent
/// space. Parts are stored non-increasing; the empty tuple is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    n: usize,
    parts: Vec<usize>,
}

impl Partition {
    /// Builds the canonical form of an unordered tuple, checking `2 ≤ part ≤ n−1`
    /// and `Σ parts ≤ n`.
    pub fn new(n: usize, mut parts: Vec<usize>) -> Result<Self, PartitionError> {
        if n < 2 {
            return Err(PartitionError::DimensionError(n));
        }
        for &p in &parts {
            if p < 2 || p > n - 1 {
                return Err(PartitionError::PartOutOfRange { part: p, max: n - 1 });
            }
        }
        let sum: usize = parts.iter().sum();
        if sum > n {
            return Err(PartitionError::SumTooLarge { sum, n });
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { n, parts })
    }

    pub fn empty(n: usize) -> Result<Self, PartitionError> {
        Self::new(n, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn k(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn sum(&self) -> usize {
        self.parts.iter().sum()
    }

    /// `n²(n + k − 1 − Σnⱼ) / (2(n + k − Σnⱼ))`.
    pub fn c_coefficient(&self) -> f64 {
        let n = self.n as f64;
        let free = (self.n + self.k()) as f64 - self.sum() as f64;
        n * n * (free - 1.0) / (2.0 * free)
    }

    /// `Σⱼ nⱼ(nⱼ − 1)/2`, the number of coordinate planes inside the blocks.
    pub fn block_plane_count(&self) -> usize {
        self.parts.iter().map(|p| p * (p - 1) / 2).sum()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return f.write_str("()");
        }
        f.write_str("(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

// Serialized as the bare parts array; the dimension comes from context.
impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.parts.serialize(s)
    }
}

/// Parts array as read from JSON, before it is tied to a dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawParts(pub Vec<usize>);

impl RawParts {
    pub fn with_dim(self, n: usize) -> Result<Partition, PartitionError> {
        Partition::new(n, self.0)
    }
}

fn extend(remaining: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(prefix.clone());
    for p in 2..=max_part.min(remaining) {
        prefix.push(p);
        extend(remaining - p, p, prefix, out);
        prefix.pop();
    }
}

/// All admissible tuples for dimension `n`, empty tuple first, then by number
/// of parts and lexicographically within equal length.
pub fn enumerate_tuples(n: usize) -> Result<Vec<Partition>, PartitionError> {
    if n < 2 {
        return Err(PartitionError::DimensionError(n));
    }
    let mut raw = Vec::new();
    extend(n, n - 1, &mut Vec::new(), &mut raw);
    raw.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(raw.into_iter().map(|parts| Partition { n, parts }).collect())
}
