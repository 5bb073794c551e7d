//! Output-kernel random forests.
//!
//! Trees split on the covariates z to maximize the reduction in embedding
//! variance Var(Φ_S) = (1/|S|)Σ k(x_i,x_i) − (1/|S|²)ΣΣ k(x_i,x_j), evaluated
//! either on the exact output Gram or on explicit random-Fourier features.
//! A fitted forest predicts through leaf-averaging weights over training
//! points, which the test engine consumes as an n×n weight matrix.
//!
//! The split sweep is incremental: per node one O(m²) pass builds the local
//! Gram block, its row sums, and then each candidate feature costs one
//! O(m²/2) cumulative pass, instead of O(m³) naive re-evaluation.

use ndarray::prelude::*;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::WeightMatrix;
use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    ExactKernel,
    Rff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub num_trees: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub subsample_fraction: f64,
    pub with_replacement: bool,
    pub split_mode: SplitMode,
    #[serde(rename = "rff_D", default, skip_serializing_if = "Option::is_none")]
    pub rff_d: Option<usize>,
    pub seed: u64,
    /// Route every training point through every tree when building the
    /// weight matrix, instead of restricting a tree's weights to its bag.
    #[serde(default)]
    pub route_all_points: bool,
}

impl ForestSpec {
    /// num_trees = 100·d, mtry = d, min_node_size = 5, half-sampling without
    /// replacement, exact-kernel splits.
    pub fn defaults(d: usize, seed: u64) -> Self {
        let d = d.max(1);
        Self {
            num_trees: 100 * d,
            mtry: d,
            min_node_size: 5,
            subsample_fraction: 0.5,
            with_replacement: false,
            split_mode: SplitMode::ExactKernel,
            rff_d: None,
            seed,
            route_all_points: false,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::Config("num_trees must be at least 1".into()));
        }
        if self.mtry == 0 || self.mtry > d {
            return Err(Error::Config(format!(
                "mtry must lie in [1, {d}], got {}",
                self.mtry
            )));
        }
        if self.min_node_size == 0 {
            return Err(Error::Config("min_node_size must be at least 1".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "subsample_fraction must lie in (0, 1], got {}",
                self.subsample_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training ids whose weight this leaf carries (bag members by
        /// default, every routed training point with route_all_points).
        members: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub bag: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub spec: ForestSpec,
    pub n_train: usize,
    pub dim: usize,
}

/// Output-side information driving the split criterion.
#[derive(Clone, Copy)]
pub enum SplitInput<'a> {
    Gram(&'a GramMatrix),
    Features(&'a Array2<f64>),
}

/// Var(Φ_S): mean Gram diagonal over S minus the mean of the S×S block.
pub fn node_variance(gram: &GramMatrix, s: &[usize]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::DegenerateData("node variance of an empty set".into()));
    }
    let k = &gram.values;
    let n = k.nrows();
    if let Some(&bad) = s.iter().find(|&&i| i >= n) {
        return Err(Error::DimensionMismatch(format!(
            "index {bad} out of range for a {n}-point Gram"
        )));
    }
    let m = s.len() as f64;
    let diag: f64 = s.iter().map(|&i| k[[i, i]]).sum();
    let mut block = 0.0;
    for &i in s {
        for &j in s {
            block += k[[i, j]];
        }
    }
    Ok(diag / m - block / (m * m))
}

/// Maximizer of the variance reduction over all candidate features and all
/// midpoints between consecutive distinct sorted values; ties go to the
/// lowest feature index, then the lowest threshold. Returns `None` when every
/// candidate feature is constant on S.
pub fn best_split(
    gram: &GramMatrix,
    s: &[usize],
    z: ArrayView2<f64>,
    candidate_features: &[usize],
) -> Option<(usize, f64)> {
    if s.len() < 2 || candidate_features.is_empty() {
        return None;
    }
    let ids: Vec<u32> = s.iter().map(|&i| i as u32).collect();
    let ksub = local_gram(&gram.values, &ids);
    let mut feats: Vec<usize> = candidate_features.to_vec();
    feats.sort_unstable();
    feats.dedup();
    sweep_gram(&ksub, &ids, z, &feats, 1).map(|(j, t, _)| (j, t))
}

fn local_gram(k: &Array2<f64>, ids: &[u32]) -> Array2<f64> {
    let m = ids.len();
    let mut sub = Array2::zeros((m, m));
    for (r, &ir) in ids.iter().enumerate() {
        let krow = k.row(ir as usize);
        let mut srow = sub.row_mut(r);
        for (c, &ic) in ids.iter().enumerate() {
            srow[c] = krow[ic as usize];
        }
    }
    sub
}

/// Relative half-width of the near-tie window around the running sweep
/// maximum. The incremental accumulators drift by roughly m·eps relative, so
/// 1e-9 dominates the drift by orders of magnitude while staying far below
/// genuine gaps between distinct partitions.
const TIE_WINDOW_REL: f64 = 1e-9;

/// Upper bound on how many near-tied candidates get the direct re-evaluation.
const TIE_REFINE_CAP: usize = 64;

/// Split candidates whose sweep reduction lies within the tie window of the
/// running maximum, in (feature, threshold) visit order. Mathematically equal
/// reductions (complementary partitions reached through different features,
/// duplicated covariate columns) land here with traversal-dependent round-off;
/// the final choice among them comes from a traversal-independent
/// re-evaluation so the lowest-feature lowest-threshold rule actually holds.
struct TieSet {
    entries: Vec<(usize, f64, f64)>,
    best: f64,
    scale: f64,
}

impl TieSet {
    fn new(parent_var: f64) -> Self {
        Self {
            entries: Vec::new(),
            best: f64::NEG_INFINITY,
            scale: parent_var.abs(),
        }
    }

    fn window(&self) -> f64 {
        TIE_WINDOW_REL * (self.scale + self.best.abs())
    }

    fn push(&mut self, feature: usize, threshold: f64, red: f64) {
        if red > self.best {
            self.best = red;
            let floor = self.best - self.window();
            self.entries.retain(|e| e.2 >= floor);
        } else if red < self.best - self.window() {
            return;
        }
        self.entries.push((feature, threshold, red));
    }

    /// Candidates to re-evaluate, still in visit order; when the cap bites,
    /// the sweep maximum itself always survives.
    fn into_candidates(self) -> Vec<(usize, f64, f64)> {
        let mut entries = self.entries;
        if entries.len() > TIE_REFINE_CAP {
            let arg_best = entries
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .2.partial_cmp(&b.1 .2).expect("finite reductions"))
                .map(|(i, _)| i)
                .expect("nonempty");
            if arg_best >= TIE_REFINE_CAP {
                let keep = entries[arg_best];
                entries.truncate(TIE_REFINE_CAP - 1);
                entries.push(keep);
            } else {
                entries.truncate(TIE_REFINE_CAP);
            }
        }
        entries
    }
}

/// Re-ranks near-tied candidates with a direct evaluation of
/// Var(S) − (|L|/|S|)Var(L) − (|R|/|S|)Var(R), where `var_of` computes a set
/// variance from scratch in ascending local-index order. The arithmetic is
/// independent of sweep traversal, so equal partitions give equal values and
/// the first (lowest feature, lowest threshold) maximiser wins.
fn refine_candidates(
    candidates: &[(usize, f64, f64)],
    z: ArrayView2<f64>,
    ids: &[u32],
    var_of: impl Fn(&[usize]) -> f64,
) -> (usize, f64, f64) {
    let m = ids.len();
    let mf = m as f64;
    let all: Vec<usize> = (0..m).collect();
    let parent = var_of(&all);
    let mut best: Option<(usize, f64, f64)> = None;
    for &(j, t, _) in candidates {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for local in 0..m {
            if z[[ids[local] as usize, j]] <= t {
                left.push(local);
            } else {
                right.push(local);
            }
        }
        let (mlf, mrf) = (left.len() as f64, right.len() as f64);
        let red = parent - (mlf / mf) * var_of(&left) - (mrf / mf) * var_of(&right);
        let better = match &best {
            None => true,
            Some((_, _, br)) => red > *br,
        };
        if better {
            best = Some((j, t, red));
        }
    }
    best.expect("refinement over a nonempty candidate set")
}

/// One pass per feature over the locally indexed Gram block. Row sums give
/// the right-block sum via B_r = B + B_l − 2·Σ_{i∈left} rowsum_i, so only the
/// cumulative left cross-terms need the quadratic pass.
fn sweep_gram(
    ksub: &Array2<f64>,
    ids: &[u32],
    z: ArrayView2<f64>,
    sorted_features: &[usize],
    min_child: usize,
) -> Option<(usize, f64, f64)> {
    let m = ids.len();
    let mf = m as f64;
    let diag: Vec<f64> = (0..m).map(|i| ksub[[i, i]]).collect();
    let rowsum: Vec<f64> = (0..m).map(|i| ksub.row(i).sum()).collect();
    let d_total: f64 = diag.iter().sum();
    let b_total: f64 = rowsum.iter().sum();
    let parent_var = d_total / mf - b_total / (mf * mf);

    let mut ties = TieSet::new(parent_var);
    let mut order: Vec<u32> = (0..m as u32).collect();
    for &j in sorted_features {
        order.sort_unstable_by(|&a, &b| {
            let va = z[[ids[a as usize] as usize, j]];
            let vb = z[[ids[b as usize] as usize, j]];
            va.partial_cmp(&vb).expect("finite covariates")
        });
        let first = z[[ids[order[0] as usize] as usize, j]];
        let last = z[[ids[order[m - 1] as usize] as usize, j]];
        if first == last {
            continue;
        }
        let mut left_d = 0.0;
        let mut left_b = 0.0;
        let mut left_rs = 0.0;
        for k in 0..(m - 1) {
            let lk = order[k] as usize;
            let mut cross = 0.0;
            let row = ksub.row(lk);
            for &a in &order[..k] {
                cross += row[a as usize];
            }
            left_d += diag[lk];
            left_b += 2.0 * cross + diag[lk];
            left_rs += rowsum[lk];
            let v_here = z[[ids[lk] as usize, j]];
            let v_next = z[[ids[order[k + 1] as usize] as usize, j]];
            if v_here >= v_next {
                continue;
            }
            let ml = k + 1;
            let mr = m - ml;
            if ml < min_child || mr < min_child {
                continue;
            }
            let (mlf, mrf) = (ml as f64, mr as f64);
            let b_r = b_total + left_b - 2.0 * left_rs;
            let d_r = d_total - left_d;
            let var_l = left_d / mlf - left_b / (mlf * mlf);
            let var_r = d_r / mrf - b_r / (mrf * mrf);
            let red = parent_var - (mlf / mf) * var_l - (mrf / mf) * var_r;
            ties.push(j, 0.5 * (v_here + v_next), red);
        }
    }
    match ties.entries.len() {
        0 => None,
        1 => Some(ties.entries[0]),
        _ => {
            let candidates = ties.into_candidates();
            Some(refine_candidates(&candidates, z, ids, |s| {
                let sf = s.len() as f64;
                let mut d = 0.0;
                for &i in s {
                    d += ksub[[i, i]];
                }
                let mut block = 0.0;
                for &i in s {
                    for &j2 in s {
                        block += ksub[[i, j2]];
                    }
                }
                d / sf - block / (sf * sf)
            }))
        }
    }
}

/// RFF-mode sweep on explicit feature rows: variance is mean squared norm
/// minus squared norm of the mean.
fn sweep_features(
    feats: &Array2<f64>,
    sqnorm: &[f64],
    ids: &[u32],
    z: ArrayView2<f64>,
    sorted_features: &[usize],
    min_child: usize,
) -> Option<(usize, f64, f64)> {
    let m = ids.len();
    let mf = m as f64;
    let dim = feats.ncols();
    let sq_total: f64 = ids.iter().map(|&i| sqnorm[i as usize]).sum();
    let mut sum_total = Array1::<f64>::zeros(dim);
    for &i in ids {
        sum_total += &feats.row(i as usize);
    }
    let parent_var = sq_total / mf - sum_total.dot(&sum_total) / (mf * mf);

    let mut ties = TieSet::new(parent_var);
    let mut order: Vec<u32> = (0..m as u32).collect();
    let mut left_sum = Array1::<f64>::zeros(dim);
    for &j in sorted_features {
        order.sort_unstable_by(|&a, &b| {
            let va = z[[ids[a as usize] as usize, j]];
            let vb = z[[ids[b as usize] as usize, j]];
            va.partial_cmp(&vb).expect("finite covariates")
        });
        let first = z[[ids[order[0] as usize] as usize, j]];
        let last = z[[ids[order[m - 1] as usize] as usize, j]];
        if first == last {
            continue;
        }
        left_sum.fill(0.0);
        let mut left_sq = 0.0;
        for k in 0..(m - 1) {
            let id = ids[order[k] as usize] as usize;
            left_sum += &feats.row(id);
            left_sq += sqnorm[id];
            let v_here = z[[id, j]];
            let v_next = z[[ids[order[k + 1] as usize] as usize, j]];
            if v_here >= v_next {
                continue;
            }
            let ml = k + 1;
            let mr = m - ml;
            if ml < min_child || mr < min_child {
                continue;
            }
            let (mlf, mrf) = (ml as f64, mr as f64);
            let l2 = left_sum.dot(&left_sum);
            let right_sum = &sum_total - &left_sum;
            let r2 = right_sum.dot(&right_sum);
            let var_l = left_sq / mlf - l2 / (mlf * mlf);
            let var_r = (sq_total - left_sq) / mrf - r2 / (mrf * mrf);
            let red = parent_var - (mlf / mf) * var_l - (mrf / mf) * var_r;
            ties.push(j, 0.5 * (v_here + v_next), red);
        }
    }
    match ties.entries.len() {
        0 => None,
        1 => Some(ties.entries[0]),
        _ => {
            let candidates = ties.into_candidates();
            Some(refine_candidates(&candidates, z, ids, |s| {
                let sf = s.len() as f64;
                let mut sq = 0.0;
                let mut sum = Array1::<f64>::zeros(dim);
                for &local in s {
                    let g = ids[local] as usize;
                    sq += sqnorm[g];
                    sum += &feats.row(g);
                }
                sq / sf - sum.dot(&sum) / (sf * sf)
            }))
        }
    }
}

pub fn fit_forest(z: ArrayView2<f64>, output: SplitInput, spec: &ForestSpec) -> Result<Forest> {
    let keys: Vec<u64> = (0..z.nrows())
        .map(|i| seed::mix(seed::mix_str(spec.seed, "sample_key"), i as u64))
        .collect();
    fit_forest_with_keys(z, output, spec, &keys)
}

/// Like [`fit_forest`] but with caller-supplied per-sample bagging keys,
/// which makes the fit equivariant under simultaneous permutation of rows
/// and keys (without-replacement bagging picks the bottom-k keys per tree).
pub fn fit_forest_with_keys(
    z: ArrayView2<f64>,
    output: SplitInput,
    spec: &ForestSpec,
    sample_keys: &[u64],
) -> Result<Forest> {
    let n = z.nrows();
    let d = z.ncols();
    if n == 0 || d == 0 {
        return Err(Error::TooFewSamples { n, min: 1 });
    }
    spec.validate(d)?;
    if sample_keys.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} sample keys for {n} rows",
            sample_keys.len()
        )));
    }
    match (spec.split_mode, &output) {
        (SplitMode::ExactKernel, SplitInput::Gram(g)) => {
            if g.values.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "output gram is {}x{} but z has {n} rows",
                    g.values.nrows(),
                    g.values.ncols()
                )));
            }
        }
        (SplitMode::Rff, SplitInput::Features(f)) => {
            if f.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "output features have {} rows but z has {n}",
                    f.nrows()
                )));
            }
        }
        (SplitMode::ExactKernel, SplitInput::Features(_)) => {
            return Err(Error::Config(
                "exact_kernel split mode needs a Gram matrix input".into(),
            ))
        }
        (SplitMode::Rff, SplitInput::Gram(_)) => {
            return Err(Error::Config(
                "rff split mode needs explicit feature input".into(),
            ))
        }
    }
    let bag_size = ((spec.subsample_fraction * n as f64).round() as usize).clamp(1, n);
    let sqnorms: Option<Vec<f64>> = match output {
        SplitInput::Features(f) => Some((0..n).map(|i| f.row(i).dot(&f.row(i))).collect()),
        SplitInput::Gram(_) => None,
    };

    let trees: Vec<Tree> = (0..spec.num_trees)
        .into_par_iter()
        .map(|t| {
            let bag = draw_bag(n, bag_size, spec, sample_keys, t);
            let feat_seed = seed::mix(seed::mix_str(spec.seed, "features"), t as u64);
            grow_tree(z, output, sqnorms.as_deref(), spec, bag, feat_seed)
        })
        .collect();

    let mut forest = Forest {
        trees,
        spec: spec.clone(),
        n_train: n,
        dim: d,
    };
    if spec.route_all_points {
        reroute_all_points(&mut forest, z);
    }
    Ok(forest)
}

fn draw_bag(n: usize, bag_size: usize, spec: &ForestSpec, keys: &[u64], tree: usize) -> Vec<u32> {
    if spec.with_replacement {
        let mut rng = seed::rng(seed::mix(seed::mix_str(spec.seed, "bag"), tree as u64));
        let mut bag: Vec<u32> = (0..bag_size)
            .map(|_| rng.random_range(0..n) as u32)
            .collect();
        bag.sort_unstable();
        bag
    } else {
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by_key(|&i| (seed::mix(keys[i as usize], tree as u64), i));
        order.truncate(bag_size);
        order.sort_unstable();
        order
    }
}

fn grow_tree(
    z: ArrayView2<f64>,
    output: SplitInput,
    sqnorms: Option<&[f64]>,
    spec: &ForestSpec,
    bag: Vec<u32>,
    feat_seed: u64,
) -> Tree {
    let mut nodes = Vec::new();
    let root_gram = match output {
        SplitInput::Gram(g) => Some(local_gram(&g.values, &bag)),
        SplitInput::Features(_) => None,
    };
    grow_node(
        z,
        output,
        sqnorms,
        spec,
        bag.clone(),
        root_gram,
        feat_seed,
        &mut nodes,
    );
    Tree { nodes, bag }
}

/// Creates the subtree for `ids` and returns its root index; pre-order ids
/// keep node numbering (and hence per-node RNG streams) independent of the
/// rest of the tree.
#[allow(clippy::too_many_arguments)]
fn grow_node(
    z: ArrayView2<f64>,
    output: SplitInput,
    sqnorms: Option<&[f64]>,
    spec: &ForestSpec,
    ids: Vec<u32>,
    ksub: Option<Array2<f64>>,
    feat_seed: u64,
    nodes: &mut Vec<Node>,
) -> usize {
    let idx = nodes.len();
    nodes.push(Node::Leaf { members: vec![] });
    if ids.len() < 2 * spec.min_node_size {
        nodes[idx] = Node::Leaf { members: ids };
        return idx;
    }
    let d = z.ncols();
    let mut candidates = draw_features(d, spec.mtry, seed::mix(feat_seed, idx as u64));
    candidates.sort_unstable();
    let chosen = match (&output, &ksub) {
        (SplitInput::Gram(_), Some(sub)) => {
            sweep_gram(sub, &ids, z, &candidates, spec.min_node_size)
        }
        (SplitInput::Features(f), _) => sweep_features(
            f,
            sqnorms.expect("feature mode carries square norms"),
            &ids,
            z,
            &candidates,
            spec.min_node_size,
        ),
        _ => unreachable!("validated in fit_forest"),
    };
    let Some((feature, threshold, _)) = chosen else {
        nodes[idx] = Node::Leaf { members: ids };
        return idx;
    };

    let mut left_ids = Vec::new();
    let mut right_ids = Vec::new();
    let mut left_pos = Vec::new();
    let mut right_pos = Vec::new();
    for (pos, &id) in ids.iter().enumerate() {
        if z[[id as usize, feature]] <= threshold {
            left_ids.push(id);
            left_pos.push(pos as u32);
        } else {
            right_ids.push(id);
            right_pos.push(pos as u32);
        }
    }
    let (left_gram, right_gram) = match &ksub {
        Some(sub) => (
            Some(local_gram(sub, &left_pos)),
            Some(local_gram(sub, &right_pos)),
        ),
        None => (None, None),
    };
    drop(ksub);
    let left = grow_node(z, output, sqnorms, spec, left_ids, left_gram, feat_seed, nodes);
    let right = grow_node(z, output, sqnorms, spec, right_ids, right_gram, feat_seed, nodes);
    nodes[idx] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    idx
}

fn draw_features(d: usize, mtry: usize, node_seed: u64) -> Vec<usize> {
    if mtry >= d {
        return (0..d).collect();
    }
    let mut rng = seed::rng(node_seed);
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..mtry {
        let j = rng.random_range(i..d);
        pool.swap(i, j);
    }
    pool.truncate(mtry);
    pool
}

fn route(tree: &Tree, z_row: ArrayView1<f64>) -> usize {
    let mut at = 0;
    loop {
        match &tree.nodes[at] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                at = if z_row[*feature] <= *threshold {
                    *left
                } else {
                    *right
                };
            }
            Node::Leaf { .. } => return at,
        }
    }
}

fn reroute_all_points(forest: &mut Forest, z: ArrayView2<f64>) {
    for tree in &mut forest.trees {
        let mut routed: Vec<Vec<u32>> = vec![Vec::new(); tree.nodes.len()];
        for i in 0..z.nrows() {
            let leaf = route(tree, z.row(i));
            routed[leaf].push(i as u32);
        }
        for (node, members) in tree.nodes.iter_mut().zip(routed) {
            if let Node::Leaf { members: m } = node {
                *m = members;
            }
        }
    }
}

/// Per tree: weight 1/|leaf| on each member of the leaf the query lands in,
/// averaged over trees. Nonnegative, sums to 1.
pub fn forest_weights(forest: &Forest, z_query: ArrayView1<f64>) -> Result<Array1<f64>> {
    if z_query.len() != forest.dim {
        return Err(Error::DimensionMismatch(format!(
            "query has {} coordinates, forest was grown on {}",
            z_query.len(),
            forest.dim
        )));
    }
    let mut w = Array1::zeros(forest.n_train);
    let per_tree = 1.0 / forest.trees.len() as f64;
    for tree in &forest.trees {
        let leaf = route(tree, z_query);
        if let Node::Leaf { members } = &tree.nodes[leaf] {
            let share = per_tree / members.len() as f64;
            for &id in members {
                w[id as usize] += share;
            }
        }
    }
    Ok(w)
}

/// Row i is forest_weights at the i-th training covariate row.
pub fn forest_weight_matrix(forest: &Forest, z_train: ArrayView2<f64>) -> Result<WeightMatrix> {
    if z_train.nrows() != forest.n_train || z_train.ncols() != forest.dim {
        return Err(Error::DimensionMismatch(format!(
            "weight matrix wants the {}x{} training covariates, got {}x{}",
            forest.n_train,
            forest.dim,
            z_train.nrows(),
            z_train.ncols()
        )));
    }
    let mut w = Array2::zeros((forest.n_train, forest.n_train));
    for i in 0..forest.n_train {
        let row = forest_weights(forest, z_train.row(i))?;
        w.row_mut(i).assign(&row);
    }
    Ok(WeightMatrix {
        w,
        method: format!(
            "forest(trees={},mtry={},min_node={})",
            forest.spec.num_trees, forest.spec.mtry, forest.spec.min_node_size
        ),
    })
}
