//! Partition agreement: adjusted Rand index and best-permutation
//! misclassification rate.

use itertools::Itertools;

use crate::error::{Error, Result};

/// Largest number of groups for which the exhaustive permutation search in
/// [`misclassification_rate`] is allowed.
pub const MAX_PERMUTATION_GROUPS: usize = 8;

/// Cross-tabulation of two partitions of the same items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub counts: Vec<u64>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

impl ContingencyTable {
    /// Labels may be any nonnegative integers; unused values give empty
    /// rows or columns, which do not affect pair counts.
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(format!(
                "partitions have {} and {} items",
                a.len(),
                b.len()
            )));
        }
        let rows = a.iter().max().map_or(0, |m| m + 1);
        let cols = b.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![0u64; rows * cols];
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for (&i, &j) in a.iter().zip(b) {
            counts[i * cols + j] += 1;
            row_sums[i] += 1;
            col_sums[j] += 1;
        }
        Ok(Self {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
            n: a.len() as u64,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }
}

fn pairs(m: u64) -> f64 {
    (m * m.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index. Identical trivial partitions (both all-singletons or
/// both a single block) make the denominator vanish; they score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(a, b)?;
    if table.n < 2 {
        return Err(Error::Dimension("ARI needs at least two items".into()));
    }
    let index: f64 = table.counts.iter().map(|&c| pairs(c)).sum();
    let sum_a: f64 = table.row_sums.iter().map(|&c| pairs(c)).sum();
    let sum_b: f64 = table.col_sums.iter().map(|&c| pairs(c)).sum();
    let expected = sum_a * sum_b / pairs(table.n);
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// `min over permutations phi of (1/n) #{i : c_hat_i != phi(c_true_i)}`,
/// with labels in `0..k_total`.
pub fn misclassification_rate(c_hat: &[usize], c_true: &[usize], k_total: usize) -> Result<f64> {
    if k_total > MAX_PERMUTATION_GROUPS {
        return Err(Error::Unsupported(format!(
            "exhaustive permutation search over {k_total} groups (limit {MAX_PERMUTATION_GROUPS})"
        )));
    }
    if c_hat.len() != c_true.len() {
        return Err(Error::Dimension(format!(
            "partitions have {} and {} items",
            c_hat.len(),
            c_true.len()
        )));
    }
    if c_hat.is_empty() {
        return Err(Error::Dimension("empty partitions".into()));
    }
    if let Some(&bad) = c_hat.iter().chain(c_true).find(|&&l| l >= k_total) {
        return Err(Error::InvalidLabels(format!(
            "label {bad} outside 0..{k_total}"
        )));
    }
    let mut confusion = vec![0usize; k_total * k_total];
    for (&h, &t) in c_hat.iter().zip(c_true) {
        confusion[h * k_total + t] += 1;
    }
    let best_agreement = (0..k_total)
        .permutations(k_total)
        .map(|phi| {
            (0..k_total)
                .map(|t| confusion[phi[t] * k_total + t])
                .sum::<usize>()
        })
        .max()
        .unwrap_or(0);
    Ok(1.0 - best_agreement as f64 / c_hat.len() as f64)
}
