//! Sparse node-classification graphs in CSR form, symmetric adjacency
//! normalization with self-loops, a stochastic block model generator, and
//! random edge sparsification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Undirected node-classification instance. Edges are stored loop-free with
/// both directions materialized in CSR so aggregation is a single row scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub num_nodes: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub features: Mat,
    pub labels: Vec<usize>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub num_classes: usize,
}

/// Symmetrically normalized adjacency Â with self-loops: entry (i,j) is
/// 1/√(d_i d_j) where d counts the self-loop-augmented degree.
#[derive(Debug, Clone)]
pub struct PropagationOperator {
    pub num_nodes: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub degrees: Vec<usize>,
}

impl Graph {
    /// Build a graph from an undirected edge list (one entry per edge, no
    /// self-loops, no duplicates). Both directions are materialized.
    pub fn from_undirected_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Mat,
        labels: Vec<usize>,
        train_mask: Vec<bool>,
        val_mask: Vec<bool>,
        test_mask: Vec<bool>,
        num_classes: usize,
    ) -> Result<Self> {
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut row_offsets = vec![0usize; num_nodes + 1];
        for i in 0..num_nodes {
            row_offsets[i + 1] = row_offsets[i] + degree[i];
        }
        let mut col_indices = vec![0usize; row_offsets[num_nodes]];
        let mut cursor = row_offsets.clone();
        for &(u, v) in edges {
            col_indices[cursor[u]] = v;
            cursor[u] += 1;
            col_indices[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..num_nodes {
            col_indices[row_offsets[i]..row_offsets[i + 1]].sort_unstable();
        }
        // duplicate undirected edges show up as equal adjacent column indices
        for i in 0..num_nodes {
            let row = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidGraph(format!(
                        "duplicate edge ({i},{})",
                        w[0]
                    )));
                }
            }
        }
        let g = Graph {
            num_nodes,
            row_offsets,
            col_indices,
            features,
            labels,
            train_mask,
            val_mask,
            test_mask,
            num_classes,
        };
        g.validate()?;
        Ok(g)
    }

    /// Check every structural invariant; constructors call this before
    /// returning.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if self.row_offsets.len() != n + 1 {
            return Err(Error::InvalidGraph("row offsets length != n+1".into()));
        }
        if self.row_offsets[0] != 0 {
            return Err(Error::InvalidGraph("row offsets must start at 0".into()));
        }
        for w in self.row_offsets.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidGraph("row offsets must be nondecreasing".into()));
            }
        }
        if *self.row_offsets.last().unwrap() != self.col_indices.len() {
            return Err(Error::InvalidGraph(
                "last offset must equal number of directed edge entries".into(),
            ));
        }
        if self.col_indices.iter().any(|&c| c >= n) {
            return Err(Error::InvalidGraph("column index out of range".into()));
        }
        if self.features.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "feature rows {} != num_nodes {}",
                self.features.rows(),
                n
            )));
        }
        if self.labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "label count {} != num_nodes {}",
                self.labels.len(),
                n
            )));
        }
        if self.train_mask.len() != n || self.val_mask.len() != n || self.test_mask.len() != n {
            return Err(Error::DimensionMismatch("mask length != num_nodes".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::InvalidGraph(format!(
                "class id {bad} >= num_classes {}",
                self.num_classes
            )));
        }
        for i in 0..n {
            let overlaps = (self.train_mask[i] && self.val_mask[i])
                || (self.train_mask[i] && self.test_mask[i])
                || (self.val_mask[i] && self.test_mask[i]);
            if overlaps {
                return Err(Error::InvalidGraph(format!(
                    "masks are not pairwise disjoint at node {i}"
                )));
            }
        }
        Ok(())
    }

    /// Number of directed edge entries stored (twice the undirected count).
    pub fn num_edge_entries(&self) -> usize {
        self.col_indices.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// The unique undirected edges (u < v).
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.col_indices.len() / 2);
        for u in 0..self.num_nodes {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Symmetric normalization Â = D^{-1/2} (A + I) D^{-1/2}. Self-loops are
/// added here, never stored in the raw graph.
pub fn normalize_adjacency(g: &Graph) -> PropagationOperator {
    let n = g.num_nodes;
    let degrees: Vec<usize> = (0..n).map(|i| g.neighbors(i).len() + 1).collect();
    let mut row_offsets = vec![0usize; n + 1];
    for i in 0..n {
        row_offsets[i + 1] = row_offsets[i] + degrees[i];
    }
    let mut col_indices = Vec::with_capacity(row_offsets[n]);
    let mut values = Vec::with_capacity(row_offsets[n]);
    for i in 0..n {
        let di = degrees[i] as f64;
        let mut inserted_self = false;
        for &j in g.neighbors(i) {
            if !inserted_self && j > i {
                col_indices.push(i);
                values.push(1.0 / di);
                inserted_self = true;
            }
            col_indices.push(j);
            values.push(1.0 / (di * degrees[j] as f64).sqrt());
        }
        if !inserted_self {
            col_indices.push(i);
            values.push(1.0 / di);
        }
    }
    PropagationOperator {
        num_nodes: n,
        row_offsets,
        col_indices,
        values,
        degrees,
    }
}

impl PropagationOperator {
    /// Â X
    pub fn matmul(&self, x: &Mat) -> Mat {
        assert_eq!(x.rows(), self.num_nodes, "operator/feature shape mismatch");
        let mut out = Mat::zeros(x.rows(), x.cols());
        for i in 0..self.num_nodes {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            for k in s..e {
                let j = self.col_indices[k];
                let w = self.values[k];
                let xrow = x.row(j);
                let orow = out.row_mut(i);
                for (o, v) in orow.iter_mut().zip(xrow) {
                    *o += w * v;
                }
            }
        }
        out
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Uniform draw in [0,1) keyed by (seed, min(u,v), max(u,v)). One draw per
/// undirected edge, so both directions share a fate and edge subsets nest
/// monotonically across keep fractions.
fn edge_uniform(seed: u64, u: usize, v: usize) -> f64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    let h = splitmix64(splitmix64(seed ^ (a as u64)).wrapping_add(b as u64));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Randomly retain each undirected edge with probability `keep_fraction`.
/// Nodes, features, labels, and masks are unchanged.
pub fn sparsify_edges(g: &Graph, keep_fraction: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&keep_fraction) {
        return Err(Error::InvalidArgument(format!(
            "keep_fraction {keep_fraction} not in [0,1]"
        )));
    }
    let kept: Vec<(usize, usize)> = g
        .undirected_edges()
        .into_iter()
        .filter(|&(u, v)| edge_uniform(seed, u, v) < keep_fraction)
        .collect();
    Graph::from_undirected_edges(
        g.num_nodes,
        &kept,
        g.features.clone(),
        g.labels.clone(),
        g.train_mask.clone(),
        g.val_mask.clone(),
        g.test_mask.clone(),
        g.num_classes,
    )
}

/// Box-Muller standard normal from a uniform RNG.
pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen();
        return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
}

/// Stochastic block model generator. Labels are block ids; features are a
/// one-hot block signal plus N(0, 0.1) noise; masks split 60/20/20 by a
/// seeded shuffle.
pub fn generate_synthetic_sbm(
    num_blocks: usize,
    nodes_per_block: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    seed: u64,
) -> Result<Graph> {
    if num_blocks == 0 || nodes_per_block == 0 || feature_dim == 0 {
        return Err(Error::InvalidArgument("counts must be >= 1".into()));
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} not in [0,1]")));
        }
    }
    // With feature_dim < num_blocks the one-hot signal wraps around, so some
    // blocks are indistinguishable by features alone and must be separated
    // through the graph structure.
    let n = num_blocks * nodes_per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let labels: Vec<usize> = (0..n).map(|i| i / nodes_per_block).collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut features = Mat::zeros(n, feature_dim);
    for i in 0..n {
        let row = features.row_mut(i);
        row[labels[i] % feature_dim] = 1.0;
        for v in row.iter_mut() {
            *v += 0.1 * gaussian(&mut rng);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_train = (n * 6) / 10;
    let n_val = (n * 2) / 10;
    let mut train_mask = vec![false; n];
    let mut val_mask = vec![false; n];
    let mut test_mask = vec![false; n];
    for (k, &i) in order.iter().enumerate() {
        if k < n_train {
            train_mask[i] = true;
        } else if k < n_train + n_val {
            val_mask[i] = true;
        } else {
            test_mask[i] = true;
        }
    }

    Graph::from_undirected_edges(
        n,
        &edges,
        features,
        labels,
        train_mask,
        val_mask,
        test_mask,
        num_blocks,
    )
}
