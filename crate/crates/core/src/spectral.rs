//! Spectral starting partitions: leading adjacency eigenvectors followed by
//! k-means on the node embeddings.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::Network;

const OVERSAMPLE: usize = 6;
const SUBSPACE_ITERS: usize = 150;
const KMEANS_ITERS: usize = 100;
const KMEANS_SEEDINGS: usize = 5;

fn multiply(net: &Network, v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(v.nrows(), v.ncols());
    for c in 0..v.ncols() {
        for i in 0..net.n() {
            out[(i, c)] = net.neighbors(i).iter().map(|&j| v[(j as usize, c)]).sum();
        }
    }
    out
}

/// `dim` eigenpairs with the largest (algebraic) eigenvalues of the symmetric
/// `n x n` operator `apply`: eigenvalues in decreasing order and eigenvectors
/// as the columns of an `n x dim` matrix. Block subspace iteration with
/// oversampling and a Rayleigh-Ritz projection.
pub fn leading_eigenpairs(
    n: usize,
    apply: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    dim: usize,
    seed: u64,
) -> (Vec<f64>, DMatrix<f64>) {
    let width = (dim + OVERSAMPLE).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::from_fn(n, width, |_, _| rng.random::<f64>() - 0.5)
        .qr()
        .q();
    for _ in 0..SUBSPACE_ITERS {
        q = apply(&q).qr().q();
    }
    let aq = apply(&q);
    let small = q.transpose() * &aq;
    let small = (&small + small.transpose()) * 0.5;
    let eig = SymmetricEigen::new(small);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let ritz = q * &eig.eigenvectors;
    let dim = dim.min(width);
    let values = order[..dim].iter().map(|&c| eig.eigenvalues[c]).collect();
    (values, DMatrix::from_fn(n, dim, |i, c| ritz[(i, order[c])]))
}

pub fn leading_eigenvectors(
    n: usize,
    apply: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    dim: usize,
    seed: u64,
) -> DMatrix<f64> {
    leading_eigenpairs(n, apply, dim, seed).1
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding, best of several seedings by
/// within-cluster sum of squares. Points are rows of `points`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_SEEDINGS {
        let mut centers = vec![points[rng.random_range(0..n)].clone()];
        while centers.len() < k {
            let d: Vec<f64> = points
                .iter()
                .map(|p| {
                    centers
                        .iter()
                        .map(|c| sq_dist(p, c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = d.iter().sum();
            let next = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, di) in d.iter().enumerate() {
                    if target < *di {
                        pick = i;
                        break;
                    }
                    target -= di;
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            centers.push(points[next].clone());
        }

        let mut assign = vec![0; n];
        for _ in 0..KMEANS_ITERS {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let c = (0..k)
                    .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                    .unwrap();
                if c != assign[i] {
                    assign[i] = c;
                    changed = true;
                }
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (p, &c) in points.iter().zip(&assign) {
                counts[c] += 1;
                for (s, v) in sums[c].iter_mut().zip(p) {
                    *s += v;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
            if !changed {
                break;
            }
        }
        let wss: f64 = points
            .iter()
            .zip(&assign)
            .map(|(p, &c)| sq_dist(p, &centers[c]))
            .sum();
        if best.as_ref().is_none_or(|(w, _)| wss < *w) {
            best = Some((wss, assign));
        }
    }
    best.expect("at least one seeding").1
}

/// Upper edge of the adjacency spectrum of an Erdos-Renyi graph with the
/// same mean degree, `2 sqrt(d (1 - d / n))`.
pub fn bulk_edge(net: &Network) -> f64 {
    let n = net.n() as f64;
    let mean_degree = 2.0 * net.edge_count() as f64 / n;
    2.0 * (mean_degree * (1.0 - mean_degree / n)).max(0.0).sqrt()
}

/// Spectral clustering of the adjacency matrix into `groups` blocks. The
/// embedding keeps the leading eigenvector, the second one, and any further
/// ones among the leading `groups` whose eigenvalue clears [`bulk_edge`];
/// coordinates are scaled by `sqrt(n)` and clustered by k-means. Cluster ids
/// are ordered by decreasing mean degree.
pub fn spectral_partition(net: &Network, groups: usize, seed: u64) -> Vec<usize> {
    let n = net.n();
    let (values, vecs) = leading_eigenpairs(n, |q| multiply(net, q), groups, seed);
    let edge = bulk_edge(net);
    let keep: Vec<usize> = (0..values.len())
        .filter(|&c| c <= 1 || values[c] > edge)
        .collect();
    let scale = (n as f64).sqrt();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| keep.iter().map(|&c| vecs[(i, c)] * scale).collect())
        .collect();
    let raw = kmeans(&points, groups, seed);

    let mut deg = vec![(0.0, 0usize); groups];
    for (i, &c) in raw.iter().enumerate() {
        deg[c].0 += net.degree(i) as f64;
        deg[c].1 += 1;
    }
    let mut order: Vec<usize> = (0..groups).collect();
    let mean = |c: usize| {
        if deg[c].1 == 0 {
            f64::NEG_INFINITY
        } else {
            deg[c].0 / deg[c].1 as f64
        }
    };
    order.sort_by(|&a, &b| mean(b).total_cmp(&mean(a)).then(a.cmp(&b)));
    let mut rank = vec![0; groups];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    raw.into_iter().map(|c| rank[c]).collect()
}

/// [`spectral_partition`] of the subgraph induced by `nodes`; entry `t` of
/// the result is the cluster of `nodes[t]`.
pub fn spectral_partition_subset(
    net: &Network,
    nodes: &[usize],
    groups: usize,
    seed: u64,
) -> Vec<usize> {
    if groups <= 1 || nodes.len() <= groups {
        return (0..nodes.len()).map(|t| t % groups.max(1)).collect();
    }
    let mut local = vec![usize::MAX; net.n()];
    for (t, &i) in nodes.iter().enumerate() {
        local[i] = t;
    }
    let mut edges = Vec::new();
    for (t, &i) in nodes.iter().enumerate() {
        for &j in net.neighbors(i) {
            let u = local[j as usize];
            if u != usize::MAX && t < u {
                edges.push((t, u));
            }
        }
    }
    let sub = Network::from_edges(nodes.len(), &edges).expect("induced subgraph is simple");
    spectral_partition(&sub, groups, seed)
}
