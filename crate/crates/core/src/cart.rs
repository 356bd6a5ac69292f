//! CART regression trees.
//!
//! Splits minimize the summed within-child squared error. At every node a
//! fresh set of `max(1, round(mtry * p))` candidate features is drawn without
//! replacement, and only those are searched. Trees are grown best-first: the
//! open node with the largest SSE reduction is split next, so a cap on the
//! number of terminal nodes (`maxnodes`) keeps the globally best splits.
//!
//! Because candidate draws happen when a node is created, in creation order,
//! the tree grown with cap `k` is exactly the first `k - 1` splits of the tree
//! grown with any larger cap. [`TreeModel::predict_with_leaf_cap`] uses this
//! to evaluate a whole `maxnodes` grid from one fit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use crate::datagen::Dataset;
use crate::error::{ensure, Error, Result};
use crate::rng::{self, StreamRng};

/// Relative tolerance below which two SSE reductions are considered tied.
const TIE_RTOL: f64 = 1e-12;
/// A node whose SSE is this small relative to its raw sum of squares is pure.
const PURE_RTOL: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    /// Proportion of features eligible at each node, in `(0, 1]`.
    pub mtry: f64,
    /// Cap on terminal nodes.
    pub maxnodes: Option<usize>,
    /// Minimum number of in-bag rows in each child of a split.
    pub min_node_size: usize,
    pub bootstrap: bool,
}

impl Default for TreeConfig {
    /// Forest regression defaults: a third of the features, leaves of at
    /// least five rows, bootstrap resampling, no cap.
    fn default() -> Self {
        TreeConfig {
            mtry: 1.0 / 3.0,
            maxnodes: None,
            min_node_size: 5,
            bootstrap: true,
        }
    }
}

impl TreeConfig {
    /// Single tree grown until every leaf is pure or a single row.
    pub fn full_depth() -> Self {
        TreeConfig {
            mtry: 1.0,
            maxnodes: None,
            min_node_size: 1,
            bootstrap: false,
        }
    }

    pub fn with_mtry(mut self, mtry: f64) -> Self {
        self.mtry = mtry;
        self
    }

    pub fn with_maxnodes(mut self, maxnodes: Option<usize>) -> Self {
        self.maxnodes = maxnodes;
        self
    }

    pub fn with_min_node_size(mut self, size: usize) -> Self {
        self.min_node_size = size;
        self
    }

    pub fn with_bootstrap(mut self, bootstrap: bool) -> Self {
        self.bootstrap = bootstrap;
        self
    }

    /// Number of candidate features per node for `p` features.
    pub fn candidates(&self, p: usize) -> usize {
        ((self.mtry * p as f64).round() as usize).clamp(1, p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.mtry > 0.0 && self.mtry <= 1.0,
            "mtry must lie in (0, 1], got {}",
            self.mtry
        );
        ensure!(self.min_node_size >= 1, "min_node_size must be at least 1");
        if let Some(cap) = self.maxnodes {
            ensure!(cap >= 1, "maxnodes must be at least 1");
        }
        Ok(())
    }
}

/// Internal node rule: rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRecord {
    pub feature_index: usize,
    pub threshold: f64,
    pub left_child: usize,
    pub right_child: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Internal {
        split: SplitRecord,
        /// Mean in-bag response at this node, used when the split is cut off.
        value: f64,
        /// Position of this split in best-first order (0 = root split).
        rank: usize,
    },
}

impl Node {
    pub fn value(&self) -> f64 {
        match *self {
            Node::Leaf { value } | Node::Internal { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
    p: usize,
    n_leaves: usize,
    inbag: Vec<usize>,
}

impl TreeModel {
    /// Node 0 is the root.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Training-row indices the tree was grown on, with multiplicity.
    pub fn inbag_indices(&self) -> &[usize] {
        &self.inbag
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.predict_with_leaf_cap(x, usize::MAX)
    }

    /// Predictions of the same tree truncated to its first `max_leaves - 1`
    /// best-first splits.
    pub fn predict_with_leaf_cap(&self, x: &DMatrix<f64>, max_leaves: usize) -> Result<DVector<f64>> {
        if x.ncols() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: x.ncols(),
            });
        }
        let splits = max_leaves.saturating_sub(1);
        Ok(DVector::from_fn(x.nrows(), |i, _| self.route(|j| x[(i, j)], splits)))
    }

    pub(crate) fn route(&self, feature: impl Fn(usize) -> f64, splits: usize) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value } => return *value,
                Node::Internal { split, value, rank } => {
                    if *rank >= splits {
                        return *value;
                    }
                    id = if feature(split.feature_index) <= split.threshold {
                        split.left_child
                    } else {
                        split.right_child
                    };
                }
            }
        }
    }
}

/// Fits one regression tree.
pub fn fit_tree(data: &Dataset, cfg: &TreeConfig, seed: u64) -> Result<TreeModel> {
    let mut rng = rng::stream(seed, &[]);
    fit_tree_with_rng(&data.x, &data.y, cfg, &mut rng)
}

pub fn predict_tree(model: &TreeModel, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    model.predict(x)
}

pub(crate) fn fit_tree_with_rng(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &TreeConfig,
    rng: &mut StreamRng,
) -> Result<TreeModel> {
    let order = prefers_presort(cfg, x.nrows(), x.ncols()).then(|| RowOrder::new(x, y));
    fit_tree_impl(x, y, cfg, rng, order.as_ref())
}

/// Presorting costs `O(p)` per row and split, per-node sorting
/// `O(k log n)`.
pub(crate) fn prefers_presort(cfg: &TreeConfig, n: usize, p: usize) -> bool {
    p as f64 <= cfg.candidates(p) as f64 * (n.max(2) as f64).log2()
}

/// Rows of every feature sorted by `(x_j, y)`, shared by the trees of a
/// forest.
pub(crate) struct RowOrder {
    n: usize,
    order: Vec<u32>,
}

impl RowOrder {
    pub(crate) fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let (n, p) = x.shape();
        let mut order = Vec::with_capacity(n * p);
        for j in 0..p {
            let col = x.column(j);
            let from = order.len();
            order.extend(0..n as u32);
            order[from..].sort_unstable_by(|&a: &u32, &b: &u32| {
                let (a, b) = (a as usize, b as usize);
                col[a].total_cmp(&col[b]).then(y[a].total_cmp(&y[b]))
            });
        }
        RowOrder { n, order }
    }

    fn block(&self, j: usize) -> &[u32] {
        &self.order[j * self.n..(j + 1) * self.n]
    }
}

/// Grows one tree; with `order`, split search scans presorted blocks
/// instead of sorting at every node. Both paths give identical trees.
pub(crate) fn fit_tree_impl(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &TreeConfig,
    rng: &mut StreamRng,
    order: Option<&RowOrder>,
) -> Result<TreeModel> {
    cfg.validate()?;
    let n = x.nrows();
    let p = x.ncols();
    ensure!(n >= 2, "a tree needs at least two rows, got {n}");
    ensure!(p >= 1, "a tree needs at least one feature");
    ensure!(y.len() == n, "X has {n} rows but y has {} entries", y.len());

    let samples: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let inbag = samples.clone();
    let k = cfg.candidates(p);
    let mut grower = Grower {
        cols: x.as_slice(),
        n_rows: n,
        p,
        y: y.as_slice(),
        k,
        min_leaf: cfg.min_node_size,
        samples,
        sorted: Vec::new(),
        buf: Vec::new(),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(n),
        rng,
    };
    if let Some(order) = order {
        grower.presort(order);
    }
    let (nodes, n_leaves) = grower.grow(cfg.maxnodes.unwrap_or(usize::MAX));
    Ok(TreeModel {
        nodes,
        p,
        n_leaves,
        inbag,
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

#[derive(Debug)]
struct Open {
    node: usize,
    start: usize,
    end: usize,
    split: Candidate,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // Max-heap on gain; older nodes first among equal gains.
    fn cmp(&self, other: &Self) -> Ordering {
        self.split
            .gain
            .total_cmp(&other.split.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

struct Grower<'a> {
    cols: &'a [f64],
    n_rows: usize,
    p: usize,
    y: &'a [f64],
    k: usize,
    min_leaf: usize,
    samples: Vec<usize>,
    /// When nonempty, feature `j`'s in-bag rows sorted by `(x_j, y)` in
    /// block `j`, each node owning the same `start..end` range in every
    /// block as in `samples`.
    sorted: Vec<u32>,
    buf: Vec<u32>,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
    rng: &'a mut StreamRng,
}

impl Grower<'_> {
    /// Expands the shared row order into this tree's in-bag multiset.
    fn presort(&mut self, order: &RowOrder) {
        let mut count = vec![0u32; self.n_rows];
        for &i in &self.samples {
            count[i] += 1;
        }
        self.sorted = Vec::with_capacity(self.p * self.samples.len());
        for j in 0..self.p {
            for &row in order.block(j) {
                for _ in 0..count[row as usize] {
                    self.sorted.push(row);
                }
            }
        }
    }

    fn grow(mut self, max_leaves: usize) -> (Vec<Node>, usize) {
        let mut open = BinaryHeap::new();
        let n = self.samples.len();
        self.open_node(0, n, &mut open);
        let mut leaves = 1;
        let mut rank = 0;
        while leaves < max_leaves {
            let Some(o) = open.pop() else { break };
            let mid = self.partition(o.start, o.end, o.split.feature, o.split.threshold);
            let left = self.open_node(o.start, mid, &mut open);
            let right = self.open_node(mid, o.end, &mut open);
            let value = self.nodes[o.node].value();
            self.nodes[o.node] = Node::Internal {
                split: SplitRecord {
                    feature_index: o.split.feature,
                    threshold: o.split.threshold,
                    left_child: left,
                    right_child: right,
                },
                value,
                rank,
            };
            rank += 1;
            leaves += 1;
        }
        (self.nodes, leaves)
    }

    /// Registers a leaf for `samples[start..end]` and queues it if it has a
    /// worthwhile split.
    fn open_node(&mut self, start: usize, end: usize, open: &mut BinaryHeap<Open>) -> usize {
        let id = self.nodes.len();
        let m = end - start;
        let idx = &self.samples[start..end];
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / m as f64;
        self.nodes.push(Node::Leaf { value: mean });

        if m < 2 * self.min_leaf {
            return id;
        }
        let raw: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        if sse <= PURE_RTOL * raw || sse == 0.0 {
            return id;
        }
        let mut feats = index::sample(self.rng, self.p, self.k).into_vec();
        feats.sort_unstable();
        if let Some(split) = self.best_split(start, end, mean, &feats) {
            if split.gain > TIE_RTOL * sse {
                open.push(Open {
                    node: id,
                    start,
                    end,
                    split,
                });
            }
        }
        id
    }

    fn best_split(&mut self, start: usize, end: usize, mean: f64, feats: &[usize]) -> Option<Candidate> {
        let m = end - start;
        let mut best: Option<Candidate> = None;
        for &j in feats {
            let col = &self.cols[j * self.n_rows..(j + 1) * self.n_rows];
            self.scratch.clear();
            if self.sorted.is_empty() {
                self.scratch
                    .extend(self.samples[start..end].iter().map(|&i| (col[i], self.y[i] - mean)));
                self.scratch
                    .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            } else {
                let block = &self.sorted[j * self.samples.len()..(j + 1) * self.samples.len()];
                self.scratch
                    .extend(block[start..end].iter().map(|&i| (col[i as usize], self.y[i as usize] - mean)));
            }
            let total: f64 = self.scratch.iter().map(|v| v.1).sum();
            let base = total * total / m as f64;
            let mut left = 0.0;
            for i in 0..m - 1 {
                left += self.scratch[i].1;
                let nl = i + 1;
                let nr = m - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                let (lo, hi) = (self.scratch[i].0, self.scratch[i + 1].0);
                if lo >= hi {
                    continue;
                }
                let right = total - left;
                let gain = left * left / nl as f64 + right * right / nr as f64 - base;
                let better = match best {
                    None => true,
                    Some(b) => gain > b.gain + TIE_RTOL * b.gain.abs(),
                };
                if better {
                    best = Some(Candidate {
                        feature: j,
                        threshold: midpoint(lo, hi),
                        gain,
                    });
                }
            }
        }
        best
    }

    fn partition(&mut self, start: usize, end: usize, feature: usize, threshold: f64) -> usize {
        let col = &self.cols[feature * self.n_rows..(feature + 1) * self.n_rows];
        let slice = &mut self.samples[start..end];
        let mut mid = 0;
        for i in 0..slice.len() {
            if col[slice[i]] <= threshold {
                slice.swap(i, mid);
                mid += 1;
            }
        }
        if !self.sorted.is_empty() {
            // stable, so every block stays sorted
            let m = self.samples.len();
            for j in 0..self.p {
                let block = &mut self.sorted[j * m + start..j * m + end];
                self.buf.clear();
                let mut l = 0;
                for t in 0..block.len() {
                    let row = block[t];
                    if col[row as usize] <= threshold {
                        block[l] = row;
                        l += 1;
                    } else {
                        self.buf.push(row);
                    }
                }
                block[l..].copy_from_slice(&self.buf);
            }
        }
        start + mid
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dataset(x: DMatrix<f64>, y: Vec<f64>) -> Dataset {
        let n = y.len();
        Dataset::new(x, DVector::from_vec(y)).map(|d| {
            assert_eq!(d.n(), n);
            d
        })
        .unwrap()
    }

    fn toy() -> Dataset {
        let x = DMatrix::from_fn(11, 1, |i, _| (i + 1) as f64);
        let y = (1..=11).map(|i| if i == 6 { 1.0 } else { 0.0 }).collect();
        dataset(x, y)
    }

    fn random_data(n: usize, p: usize, seed: u64) -> Dataset {
        let mut r = rng::stream(seed, &[99]);
        let x = DMatrix::from_fn(n, p, |_, _| r.random::<f64>());
        let y = (0..n).map(|i| x[(i, 0)] * 3.0 + x[(i, p - 1)] + r.random::<f64>()).collect();
        dataset(x, y)
    }

    fn sse(pred: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (pred - y).norm_squared()
    }

    #[test]
    fn full_depth_tree_interpolates_toy() {
        let d = toy();
        let t = fit_tree(&d, &TreeConfig::full_depth(), 1).unwrap();
        let pred = t.predict(&d.x).unwrap();
        assert_eq!(pred, d.y);
        let at6 = t.predict(&DMatrix::from_element(1, 1, 6.0)).unwrap();
        assert_eq!(at6[0], 1.0);
    }

    #[test]
    fn constant_response_gives_single_leaf() {
        let x = DMatrix::from_fn(20, 2, |i, j| (i * (j + 1)) as f64);
        let d = dataset(x, vec![0.1; 20]);
        let t = fit_tree(&d, &TreeConfig::full_depth(), 3).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert!(t.predict(&d.x).unwrap().iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn too_few_rows_for_min_node_size() {
        let d = random_data(9, 2, 1);
        let t = fit_tree(&d, &TreeConfig::full_depth().with_min_node_size(5), 1).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert!(fit_tree(&random_data(1, 2, 1), &TreeConfig::full_depth(), 1).is_err());
    }

    #[test]
    fn prediction_edge_cases() {
        let d = random_data(30, 3, 2);
        let t = fit_tree(&d, &TreeConfig::full_depth(), 1).unwrap();
        assert_eq!(t.predict(&DMatrix::zeros(0, 3)).unwrap().len(), 0);
        assert!(matches!(
            t.predict(&DMatrix::zeros(2, 4)),
            Err(Error::DimensionMismatch { expected: 3, actual: 4 })
        ));
        let stump = fit_tree(&d, &TreeConfig::full_depth().with_maxnodes(Some(1)), 1).unwrap();
        let c = d.y.mean();
        assert!(stump.predict(&d.x).unwrap().iter().all(|&v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn respects_maxnodes_and_min_leaf() {
        let d = random_data(200, 4, 5);
        for cap in [2, 3, 7, 15] {
            let cfg = TreeConfig::default().with_maxnodes(Some(cap));
            let t = fit_tree(&d, &cfg, 11).unwrap();
            assert!(t.n_leaves() <= cap);
            // every leaf holds at least min_node_size in-bag rows
            let xb = d.x.select_rows(t.inbag_indices());
            let mut counts = std::collections::HashMap::new();
            for i in 0..xb.nrows() {
                let leaf = leaf_id(&t, &xb, i);
                *counts.entry(leaf).or_insert(0usize) += 1;
            }
            assert!(counts.values().all(|&c| c >= 5));
            assert_eq!(counts.len(), t.n_leaves());
        }
    }

    fn leaf_id(t: &TreeModel, x: &DMatrix<f64>, i: usize) -> usize {
        let mut id = 0;
        while let Node::Internal { split, .. } = &t.nodes()[id] {
            id = if x[(i, split.feature_index)] <= split.threshold {
                split.left_child
            } else {
                split.right_child
            };
        }
        id
    }

    #[test]
    fn leaf_values_are_inbag_means() {
        let d = random_data(120, 3, 8);
        let t = fit_tree(&d, &TreeConfig::default(), 4).unwrap();
        let xb = d.x.select_rows(t.inbag_indices());
        let yb: Vec<f64> = t.inbag_indices().iter().map(|&i| d.y[i]).collect();
        let mut sums = std::collections::HashMap::<usize, (f64, usize)>::new();
        for i in 0..xb.nrows() {
            let e = sums.entry(leaf_id(&t, &xb, i)).or_default();
            e.0 += yb[i];
            e.1 += 1;
        }
        for (leaf, (s, c)) in sums {
            assert!((t.nodes()[leaf].value() - s / c as f64).abs() < 1e-12);
        }
    }

    /// Independent greedy best-first grower: naive SSE of every split of
    /// every leaf, recomputed from scratch.
    fn brute_force_best_first(x: &DMatrix<f64>, y: &DVector<f64>, leaves: usize) -> f64 {
        let sse_of = |rows: &[usize]| {
            let m = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
            rows.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>()
        };
        let mut parts: Vec<Vec<usize>> = vec![(0..x.nrows()).collect()];
        while parts.len() < leaves {
            let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>)> = None;
            for (pi, rows) in parts.iter().enumerate() {
                let parent = sse_of(rows);
                for j in 0..x.ncols() {
                    let mut vals: Vec<f64> = rows.iter().map(|&i| x[(i, j)]).collect();
                    vals.sort_by(f64::total_cmp);
                    vals.dedup();
                    for w in vals.windows(2) {
                        let thr = (w[0] + w[1]) / 2.0;
                        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[(i, j)] <= thr);
                        let gain = parent - sse_of(&l) - sse_of(&r);
                        if best.as_ref().is_none_or(|b| gain > b.0) {
                            best = Some((gain, pi, l, r));
                        }
                    }
                }
            }
            let Some((_, pi, l, r)) = best else { break };
            parts.remove(pi);
            parts.push(l);
            parts.push(r);
        }
        parts.iter().map(|r| sse_of(r)).sum()
    }

    #[test]
    fn best_first_matches_brute_force() {
        for seed in 0..5 {
            let d = random_data(30, 3, seed);
            for cap in [2, 3, 4, 6] {
                let cfg = TreeConfig::full_depth().with_maxnodes(Some(cap));
                let t = fit_tree(&d, &cfg, seed).unwrap();
                let got = sse(&t.predict(&d.x).unwrap(), &d.y);
                let want = brute_force_best_first(&d.x, &d.y, cap);
                assert!((got - want).abs() < 1e-9 * want.max(1.0), "seed {seed} cap {cap}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn truncated_prediction_equals_capped_fit() {
        let d = random_data(150, 5, 21);
        let cfg = TreeConfig::default().with_mtry(0.4);
        let big = fit_tree(&d, &cfg.with_maxnodes(Some(40)), 77).unwrap();
        for cap in [1, 2, 5, 10, 20, 40] {
            let capped = fit_tree(&d, &cfg.with_maxnodes(Some(cap)), 77).unwrap();
            assert_eq!(
                big.predict_with_leaf_cap(&d.x, cap).unwrap(),
                capped.predict(&d.x).unwrap(),
                "cap {cap}"
            );
        }
    }

    #[test]
    fn presorted_search_is_bit_identical() {
        let mut d = random_data(120, 6, 8);
        // ties in x and y exercise the tie-breaking
        for i in 0..120 {
            d.x[(i, 2)] = (d.x[(i, 2)] * 3.0).round();
            if i % 7 == 0 {
                d.y[i] = 1.0;
            }
        }
        for (mtry, boot) in [(0.2, true), (0.5, true), (1.0, false), (1.0, true)] {
            let cfg = TreeConfig::default().with_mtry(mtry).with_bootstrap(boot).with_min_node_size(2);
            let order = RowOrder::new(&d.x, &d.y);
            let a = fit_tree_impl(&d.x, &d.y, &cfg, &mut rng::stream(4, &[]), Some(&order)).unwrap();
            let b = fit_tree_impl(&d.x, &d.y, &cfg, &mut rng::stream(4, &[]), None).unwrap();
            assert_eq!(a, b, "mtry {mtry}");
        }
    }

    #[test]
    fn mtry_one_is_seed_free_without_bootstrap() {
        let d = random_data(80, 4, 3);
        let cfg = TreeConfig::default().with_mtry(1.0).with_bootstrap(false);
        assert_eq!(fit_tree(&d, &cfg, 1).unwrap(), fit_tree(&d, &cfg, 2).unwrap());
    }

    #[test]
    fn candidate_counts() {
        let c = TreeConfig::default();
        assert_eq!(c.with_mtry(0.1).candidates(10), 1);
        assert_eq!(c.with_mtry(0.33).candidates(10), 3);
        assert_eq!(c.with_mtry(0.67).candidates(10), 7);
        assert_eq!(c.with_mtry(1.0).candidates(10), 10);
        assert_eq!(c.with_mtry(0.01).candidates(10), 1);
        assert!(c.with_mtry(0.0).validate().is_err());
        assert!(c.with_mtry(1.5).validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sse_nonincreasing_in_maxnodes(seed in 0u64..1000, mtry in 0.2f64..1.0) {
            let d = random_data(60, 3, seed);
            let cfg = TreeConfig::default().with_mtry(mtry).with_min_node_size(2);
            let t = fit_tree(&d, &cfg.with_maxnodes(Some(30)), seed).unwrap();
            let xb = d.x.select_rows(t.inbag_indices());
            let yb = DVector::from_iterator(xb.nrows(), t.inbag_indices().iter().map(|&i| d.y[i]));
            let mut last = f64::INFINITY;
            for cap in 1..=30 {
                let s = sse(&t.predict_with_leaf_cap(&xb, cap).unwrap(), &yb);
                prop_assert!(s <= last * (1.0 + 1e-12) + 1e-12);
                last = s;
            }
        }

        #[test]
        fn row_order_irrelevant_without_bootstrap(seed in 0u64..1000) {
            let d = random_data(40, 3, seed);
            let mut perm: Vec<usize> = (0..40).collect();
            let mut r = rng::stream(seed, &[5]);
            for i in (1..40).rev() {
                perm.swap(i, r.random_range(0..=i));
            }
            let shuffled = d.select_rows(&perm);
            let cfg = TreeConfig::full_depth().with_maxnodes(Some(8));
            let a = fit_tree(&d, &cfg, 0).unwrap().predict(&d.x).unwrap();
            let b = fit_tree(&shuffled, &cfg, 0).unwrap().predict(&d.x).unwrap();
            prop_assert!((a - b).amax() < 1e-12);
        }
    }
}
