//! Graph, covariate and label containers plus the block-counting primitives
//! every fitter is built on.
//!
//! Node indices are 0-based. Group indices are 0-based too, with the
//! background stored as group `K`; reports and files shift them to 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph stored as sorted neighbour lists (CSR layout).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Network {
    /// Builds a graph from unordered pairs. Self-loops, duplicates (in either
    /// orientation) and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::InvalidNetwork(format!(
                "{n} nodes exceeds u32 range"
            )));
        }
        let mut degree = vec![0usize; n];
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge #{idx} ({a}, {b}) has an endpoint >= n = {n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidNetwork(format!(
                    "edge #{idx} is a self-loop on node {a}"
                )));
            }
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; offsets[n]];
        for &(a, b) in edges {
            neighbors[cursor[a]] = b as u32;
            cursor[a] += 1;
            neighbors[cursor[b]] = a as u32;
            cursor[b] += 1;
        }
        for i in 0..n {
            let row = &mut neighbors[offsets[i]..offsets[i + 1]];
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate edge between {} and {}",
                    i.min(w[0] as usize),
                    i.max(w[0] as usize)
                )));
            }
        }
        Ok(Self {
            n,
            offsets,
            neighbors,
        })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Sorted neighbours of `i`.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Dense 0/1 adjacency matrix, row-major. Refuses graphs above `limit`
    /// nodes.
    pub fn to_dense(&self, limit: usize) -> Result<Vec<Vec<u8>>> {
        if self.n > limit {
            return Err(Error::Unsupported(format!(
                "dense adjacency requested for n = {} above limit {limit}",
                self.n
            )));
        }
        let mut a = vec![vec![0u8; self.n]; self.n];
        for (i, j) in self.edges() {
            a[i][j] = 1;
            a[j][i] = 1;
        }
        Ok(a)
    }
}

/// `n x P` matrix of nodal covariates. The intercept column is implicit:
/// coefficient vectors have length `P + 1` with the intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    names: Vec<String>,
}

impl CovariateMatrix {
    /// `values` is row-major with `n * names.len()` entries.
    pub fn new(n: usize, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let p = names.len();
        if values.len() != n * p {
            return Err(Error::Dimension(format!(
                "covariate buffer has {} values, expected {n} x {p}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "covariate value at row {}, column {} is not finite",
                pos / p,
                pos % p
            )));
        }
        Ok(Self {
            n,
            p,
            values,
            names,
        })
    }

    /// Convenience constructor from row vectors with generated names `x1..xP`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("ragged covariate rows".into()));
        }
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::new(n, names, rows.concat())
    }

    /// Design with only the intercept column.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            n,
            p: 0,
            values: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of user covariates, excluding the intercept.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Length of a coefficient vector for this design.
    pub fn n_coef(&self) -> usize {
        self.p + 1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    /// Entry `j` of the design row for node `i`; `j = 0` is the intercept.
    #[inline]
    pub fn design(&self, i: usize, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.values[i * self.p + j - 1]
        }
    }

    /// Linear predictor `x_i . beta` including the intercept.
    #[inline]
    pub fn linear_predictor(&self, i: usize, beta: &[f64]) -> f64 {
        debug_assert_eq!(beta.len(), self.p + 1);
        beta[0]
            + self
                .row(i)
                .iter()
                .zip(&beta[1..])
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }
}

/// Assignment of every node to one of `K` communities or the background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector {
    groups: Vec<usize>,
    k: usize,
}

impl LabelVector {
    /// `groups` are 0-based; the background is group `k`.
    pub fn new(groups: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidLabels("K must be at least 1".into()));
        }
        if let Some(pos) = groups.iter().position(|&g| g > k) {
            return Err(Error::InvalidLabels(format!(
                "node {pos} has group index {} outside 0..={k}",
                groups[pos]
            )));
        }
        Ok(Self { groups, k })
    }

    /// Labels in `1..=K+1`, as used in reports.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        if let Some(pos) = labels.iter().position(|&l| l == 0) {
            return Err(Error::InvalidLabels(format!("node {pos} has label 0")));
        }
        Self::new(labels.iter().map(|&l| l - 1).collect(), k)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of groups including the background.
    pub fn n_groups(&self) -> usize {
        self.k + 1
    }

    pub fn background(&self) -> usize {
        self.k
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn get(&self, i: usize) -> usize {
        self.groups[i]
    }

    /// `y_i = 1` when node `i` sits in one of the K communities.
    pub fn in_community(&self, i: usize) -> bool {
        self.groups[i] < self.k
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k + 1];
        for &g in &self.groups {
            s[g] += 1;
        }
        s
    }
}

#[derive(Serialize, Deserialize)]
struct LabelsRepr {
    k: usize,
    labels: Vec<usize>,
}

impl Serialize for LabelVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LabelsRepr {
            k: self.k,
            labels: self.to_one_based(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = LabelsRepr::deserialize(d)?;
        LabelVector::from_one_based(&repr.labels, repr.k).map_err(serde::de::Error::custom)
    }
}

/// Per-node edge counts into each block of a blocking vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCounts {
    n: usize,
    n_blocks: usize,
    counts: Vec<u32>,
    degrees: Vec<u32>,
}

impl BlockCounts {
    /// Builds counts from explicit rows; degrees are the row sums.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        let n_blocks = rows.first().map_or(0, Vec::len);
        if n_blocks < 2 || rows.iter().any(|r| r.len() != n_blocks) {
            return Err(Error::Dimension(
                "block-count rows must share a width of at least 2".into(),
            ));
        }
        let degrees = rows.iter().map(|r| r.iter().sum()).collect();
        Ok(Self {
            n,
            n_blocks,
            counts: rows.concat(),
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `K + 1`.
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn k(&self) -> usize {
        self.n_blocks - 1
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.n_blocks..(i + 1) * self.n_blocks]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> u32 {
        self.counts[i * self.n_blocks + k]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> u32 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }
}

/// `B[i][k]` = number of neighbours `j` of node `i` with `e_j = k`.
pub fn block_counts(net: &Network, e: &LabelVector) -> Result<BlockCounts> {
    if e.len() != net.n() {
        return Err(Error::Dimension(format!(
            "blocking vector has {} entries for {} nodes",
            e.len(),
            net.n()
        )));
    }
    let n_blocks = e.n_groups();
    let mut counts = vec![0u32; net.n() * n_blocks];
    let mut degrees = vec![0u32; net.n()];
    for i in 0..net.n() {
        let row = &mut counts[i * n_blocks..(i + 1) * n_blocks];
        for &j in net.neighbors(i) {
            row[e.get(j as usize)] += 1;
        }
        degrees[i] = net.degree(i) as u32;
    }
    Ok(BlockCounts {
        n: net.n(),
        n_blocks,
        counts,
        degrees,
    })
}

/// Link totals between groups under the ordered-pair convention: within-group
/// edges are counted twice, so `sum(O) = 2|E|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBlockSums {
    pub n_groups: usize,
    /// Row-major `(K+1) x (K+1)` link counts.
    pub links: Vec<u64>,
    pub sizes: Vec<usize>,
    /// Row-major `(K+1) x (K+1)` ordered pair counts: `n_k n_l` off the
    /// diagonal, `n_k (n_k - 1)` on it.
    pub pairs: Vec<u64>,
}

impl EdgeBlockSums {
    pub fn links(&self, k: usize, l: usize) -> u64 {
        self.links[k * self.n_groups + l]
    }

    pub fn pairs(&self, k: usize, l: usize) -> u64 {
        self.pairs[k * self.n_groups + l]
    }
}

pub fn edge_block_sums(net: &Network, c: &LabelVector) -> Result<EdgeBlockSums> {
    if c.len() != net.n() {
        return Err(Error::Dimension(format!(
            "label vector has {} entries for {} nodes",
            c.len(),
            net.n()
        )));
    }
    let g = c.n_groups();
    let mut links = vec![0u64; g * g];
    for (i, j) in net.edges() {
        let (a, b) = (c.get(i), c.get(j));
        links[a * g + b] += 1;
        links[b * g + a] += 1;
    }
    let sizes = c.sizes();
    let mut pairs = vec![0u64; g * g];
    for k in 0..g {
        for l in 0..g {
            let (nk, nl) = (sizes[k] as u64, sizes[l] as u64);
            pairs[k * g + l] = if k == l {
                nk * nk.saturating_sub(1)
            } else {
                nk * nl
            };
        }
    }
    Ok(EdgeBlockSums {
        n_groups: g,
        links,
        sizes,
        pairs,
    })
}
