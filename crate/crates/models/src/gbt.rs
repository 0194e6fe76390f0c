//! Histogram gradient-boosted regression trees with squared loss.
//!
//! Each round grows one tree leaf-wise: the leaf whose best histogram split
//! has the largest gain is split next, until `max_leaves` is reached or no
//! leaf can be split. Child histograms come from building the smaller child
//! and subtracting it from the parent.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub max_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub n_bins: usize,
    pub l2_leaf_penalty: f64,
    /// Zero disables early stopping.
    pub early_stopping_rounds: usize,
    pub recipe: FeatureRecipe,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            max_rounds: 500,
            learning_rate: 0.05,
            max_leaves: 31,
            min_samples_leaf: 20,
            n_bins: 63,
            l2_leaf_penalty: 1.0,
            early_stopping_rounds: 50,
            recipe: FeatureRecipe::default(),
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(ModelError::InvalidConfig("learning_rate must lie in (0, 1]".into()));
        }
        if self.max_leaves < 2 {
            return Err(ModelError::InvalidConfig("max_leaves must be at least 2".into()));
        }
        if self.n_bins < 2 || self.n_bins > u16::MAX as usize + 1 {
            return Err(ModelError::InvalidConfig("n_bins must lie in [2, 65536]".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ModelError::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if !(self.l2_leaf_penalty >= 0.0 && self.l2_leaf_penalty.is_finite()) {
            return Err(ModelError::InvalidConfig("l2_leaf_penalty must be finite and non-negative".into()));
        }
        self.recipe.validate()
    }
}

/// Tabular features built from an hourly frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureRecipe {
    pub lags: Vec<usize>,
    pub hour_of_day: bool,
    pub day_of_week: bool,
}

impl Default for FeatureRecipe {
    fn default() -> Self {
        FeatureRecipe { lags: (1..=24).collect(), hour_of_day: true, day_of_week: true }
    }
}

impl FeatureRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.lags.iter().any(|l| *l == 0) {
            return Err(ModelError::InvalidConfig("target lags must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0)
    }
}

/// Per-feature split thresholds. `bin(v)` is the number of thresholds below
/// `v`, so `bin(v) <= b` exactly when `v <= thresholds[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub thresholds: Vec<Vec<f64>>,
}

impl BinMapper {
    /// Distinct values get their own bin when there are at most `n_bins` of
    /// them; otherwise cuts fall at equally spaced quantiles.
    pub fn fit(features: &[Vec<f64>], n_bins: usize) -> BinMapper {
        let thresholds = features
            .iter()
            .map(|col| {
                let mut sorted = col.clone();
                sorted.sort_by(f64::total_cmp);
                let mut uniq = sorted.clone();
                uniq.dedup();
                if uniq.len() <= n_bins {
                    uniq.windows(2).map(|w| midpoint(w[0], w[1])).collect()
                } else {
                    let n = sorted.len();
                    let mut cuts: Vec<f64> = (1..n_bins)
                        .filter_map(|k| {
                            let i = k * n / n_bins;
                            (i > 0 && sorted[i - 1] < sorted[i]).then(|| midpoint(sorted[i - 1], sorted[i]))
                        })
                        .collect();
                    cuts.dedup();
                    cuts
                }
            })
            .collect();
        BinMapper { thresholds }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, v: f64) -> u16 {
        self.thresholds[feature].partition_point(|t| *t < v) as u16
    }

    fn bin_column(&self, feature: usize, col: &[f64]) -> Vec<u16> {
        col.iter().map(|v| self.bin(feature, *v)).collect()
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // keep a < m so that `a` routes left and `b` right
    if m < b { m } else { a }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, bin: u16, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// A regression tree stored as a node arena with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub bins: BinMapper,
    pub trees: Vec<Tree>,
    /// Number of trees kept; round 0 is the base score alone.
    pub best_round: usize,
    /// RMSE after each round, starting with round 0.
    pub train_rmse: Vec<f64>,
    pub val_rmse: Vec<f64>,
}

impl GbtEnsemble {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Row-major feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub n_rows: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let w = names.len();
        if w == 0 || !data.len().is_multiple_of(w) {
            return Err(ModelError::ColumnMismatch(format!("{} values for {} columns", data.len(), w)));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(format!("feature {:?}", names[i % w])));
        }
        Ok(FeatureMatrix { n_rows: data.len() / w, names, data })
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.data[i * self.n_cols() + j]).collect()
    }
}

/// A candidate split: rows with `bin <= bin` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub bin: u16,
    pub gain: f64,
    pub left_grad: f64,
    pub left_count: usize,
}

/// `G_L²/(H_L+λ) + G_R²/(H_R+λ) − G_P²/(H_P+λ)` with `H` = sample counts.
pub fn split_gain(gl: f64, hl: usize, gp: f64, hp: usize, lambda: f64) -> f64 {
    let gr = gp - gl;
    let hr = hp - hl;
    gl * gl / (hl as f64 + lambda) + gr * gr / (hr as f64 + lambda) - gp * gp / (hp as f64 + lambda)
}

struct Histogram {
    grad: Vec<f64>,
    count: Vec<u32>,
}

struct Layout {
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    fn new(bins: &BinMapper) -> Layout {
        let mut offsets = Vec::with_capacity(bins.thresholds.len());
        let mut total = 0;
        for f in 0..bins.thresholds.len() {
            offsets.push(total);
            total += bins.n_bins(f);
        }
        Layout { offsets, total }
    }

    fn build(&self, binned: &[Vec<u16>], grad: &[f64], rows: &[u32]) -> Histogram {
        let mut h = Histogram { grad: vec![0.0; self.total], count: vec![0; self.total] };
        for (f, col) in binned.iter().enumerate() {
            let off = self.offsets[f];
            for &r in rows {
                let k = off + col[r as usize] as usize;
                h.grad[k] += grad[r as usize];
                h.count[k] += 1;
            }
        }
        h
    }

    fn subtract(parent: &Histogram, child: &Histogram) -> Histogram {
        Histogram {
            grad: parent.grad.iter().zip(&child.grad).map(|(p, c)| p - c).collect(),
            count: parent.count.iter().zip(&child.count).map(|(p, c)| p - c).collect(),
        }
    }

    fn best_split(
        &self,
        bins: &BinMapper,
        hist: &Histogram,
        g_sum: f64,
        n: usize,
        config: &GbtConfig,
        min_gain: f64,
    ) -> Option<SplitCandidate> {
        let msl = config.min_samples_leaf;
        if n < 2 * msl {
            return None;
        }
        let mut best: Option<SplitCandidate> = None;
        for f in 0..bins.thresholds.len() {
            let off = self.offsets[f];
            let (mut gl, mut hl) = (0.0, 0usize);
            for b in 0..bins.n_bins(f) - 1 {
                gl += hist.grad[off + b];
                hl += hist.count[off + b] as usize;
                if hl < msl {
                    continue;
                }
                if n - hl < msl {
                    break;
                }
                let gain = split_gain(gl, hl, g_sum, n, config.l2_leaf_penalty);
                if gain > 0.0 && gain > min_gain && best.is_none_or(|s| gain > s.gain) {
                    best = Some(SplitCandidate { feature: f, bin: b as u16, gain, left_grad: gl, left_count: hl });
                }
            }
        }
        best
    }
}

struct OpenLeaf {
    node: usize,
    rows: Vec<u32>,
    hist: Histogram,
    g_sum: f64,
    split: Option<SplitCandidate>,
}

/// Grows one tree on gradients `grad`. Returns `None` when the root cannot
/// be split. Leaf assignments are written to `leaf_of`.
fn grow_tree(
    config: &GbtConfig,
    bins: &BinMapper,
    layout: &Layout,
    binned: &[Vec<u16>],
    grad: &[f64],
    leaf_of: &mut [usize],
) -> Option<Tree> {
    let n = grad.len();
    let min_gain = 1e-12 * grad.iter().map(|g| g * g).sum::<f64>();
    let rows: Vec<u32> = (0..n as u32).collect();
    let hist = layout.build(binned, grad, &rows);
    let g_sum: f64 = grad.iter().sum();
    let split = layout.best_split(bins, &hist, g_sum, n, config, min_gain);
    split?;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open = vec![OpenLeaf { node: 0, rows, hist, g_sum, split }];

    while open.len() < config.max_leaves {
        // strict comparison keeps the earliest leaf on ties
        let mut pick: Option<usize> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(s) = leaf.split {
                if pick.is_none_or(|p| s.gain > open[p].split.expect("picked leaf has a split").gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let parent = open.remove(i);
        let s = parent.split.expect("picked leaf has a split");
        let col = &binned[s.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            parent.rows.iter().partition(|&&r| col[r as usize] <= s.bin);
        let (small_hist, small_is_left) = if left_rows.len() <= right_rows.len() {
            (layout.build(binned, grad, &left_rows), true)
        } else {
            (layout.build(binned, grad, &right_rows), false)
        };
        let large_hist = Layout::subtract(&parent.hist, &small_hist);
        let (left_hist, right_hist) =
            if small_is_left { (small_hist, large_hist) } else { (large_hist, small_hist) };

        let left_node = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[parent.node] = Node::Split {
            feature: s.feature,
            bin: s.bin,
            threshold: bins.thresholds[s.feature][s.bin as usize],
            left: left_node,
            right: left_node + 1,
        };
        let left_g = s.left_grad;
        let right_g = parent.g_sum - s.left_grad;
        let left_split = layout.best_split(bins, &left_hist, left_g, left_rows.len(), config, min_gain);
        let right_split = layout.best_split(bins, &right_hist, right_g, right_rows.len(), config, min_gain);
        // children take the parent's slot so leaf order follows the tree layout
        open.insert(i, OpenLeaf { node: left_node + 1, rows: right_rows, hist: right_hist, g_sum: right_g, split: right_split });
        open.insert(i, OpenLeaf { node: left_node, rows: left_rows, hist: left_hist, g_sum: left_g, split: left_split });
    }

    for leaf in &open {
        // recompute from the rows so the value does not inherit subtraction error
        let g: f64 = leaf.rows.iter().map(|&r| grad[r as usize]).sum();
        nodes[leaf.node] = Node::Leaf { value: -g / (leaf.rows.len() as f64 + config.l2_leaf_penalty) };
        for &r in &leaf.rows {
            leaf_of[r as usize] = leaf.node;
        }
    }
    Some(Tree { nodes })
}

fn rmse_of(y: &[f64], pred: &[f64]) -> f64 {
    (y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64).sqrt()
}

fn columns_of(x: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..x.n_cols()).map(|j| x.column(j)).collect()
}

/// Boosts on `(x_train, y_train)`. When early stopping is enabled the
/// validation set decides how many trees are kept.
pub fn fit_gbt(
    config: &GbtConfig,
    x_train: &FeatureMatrix,
    y_train: &[f64],
    val: Option<(&FeatureMatrix, &[f64])>,
) -> Result<GbtEnsemble> {
    config.validate()?;
    if x_train.n_rows == 0 {
        return Err(ModelError::InsufficientRows { needed: 1, got: 0 });
    }
    if y_train.len() != x_train.n_rows {
        return Err(ModelError::ColumnMismatch(format!("{} targets for {} rows", y_train.len(), x_train.n_rows)));
    }
    if y_train.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("training target".into()));
    }
    if let Some((xv, yv)) = val {
        if xv.names != x_train.names {
            return Err(ModelError::ColumnMismatch("validation columns differ from training".into()));
        }
        if yv.len() != xv.n_rows || yv.is_empty() {
            return Err(ModelError::ColumnMismatch(format!("{} targets for {} validation rows", yv.len(), xv.n_rows)));
        }
        if yv.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("validation target".into()));
        }
    } else if config.early_stopping_rounds > 0 {
        return Err(ModelError::InvalidConfig("early stopping needs a validation set".into()));
    }

    let columns = columns_of(x_train);
    let bins = BinMapper::fit(&columns, config.n_bins);
    let binned: Vec<Vec<u16>> = columns.iter().enumerate().map(|(f, c)| bins.bin_column(f, c)).collect();
    let val_binned: Option<Vec<Vec<u16>>> =
        val.map(|(xv, _)| columns_of(xv).iter().enumerate().map(|(f, c)| bins.bin_column(f, c)).collect());
    let layout = Layout::new(&bins);

    let n = y_train.len();
    let base_score = y_train.iter().sum::<f64>() / n as f64;
    let eta = config.learning_rate;
    let mut pred = vec![base_score; n];
    let mut val_pred = val.map(|(_, yv)| vec![base_score; yv.len()]);
    let mut train_rmse = vec![rmse_of(y_train, &pred)];
    let mut val_rmse: Vec<f64> = val.iter().map(|(_, yv)| rmse_of(yv, val_pred.as_ref().unwrap())).collect();
    let mut trees = Vec::new();
    let mut best_round = 0;
    let mut grad = vec![0.0; n];
    let mut leaf_of = vec![0usize; n];

    for round in 1..=config.max_rounds {
        for i in 0..n {
            grad[i] = pred[i] - y_train[i];
        }
        let Some(tree) = grow_tree(config, &bins, &layout, &binned, &grad, &mut leaf_of) else {
            break;
        };
        for i in 0..n {
            if let Node::Leaf { value } = tree.nodes[leaf_of[i]] {
                pred[i] += eta * value;
            }
        }
        train_rmse.push(rmse_of(y_train, &pred));
        if let (Some(vp), Some(vb), Some((_, yv))) = (val_pred.as_mut(), val_binned.as_ref(), val) {
            for (i, p) in vp.iter_mut().enumerate() {
                *p += eta * route_binned(&tree, vb, i);
            }
            let r = rmse_of(yv, vp);
            if r < val_rmse[best_round] {
                best_round = round;
            }
            val_rmse.push(r);
        } else {
            best_round = round;
        }
        trees.push(tree);
        if config.early_stopping_rounds > 0 && round - best_round >= config.early_stopping_rounds {
            break;
        }
    }
    if config.early_stopping_rounds > 0 {
        trees.truncate(best_round);
    } else {
        best_round = trees.len();
    }
    Ok(GbtEnsemble {
        feature_names: x_train.names.clone(),
        base_score,
        learning_rate: eta,
        bins,
        trees,
        best_round,
        train_rmse,
        val_rmse,
    })
}

fn route_binned(tree: &Tree, binned: &[Vec<u16>], row: usize) -> f64 {
    let mut i = 0;
    loop {
        match &tree.nodes[i] {
            Node::Leaf { value } => return *value,
            Node::Split { feature, bin, left, right, .. } => {
                i = if binned[*feature][row] <= *bin { *left } else { *right };
            }
        }
    }
}

pub fn predict_gbt(ensemble: &GbtEnsemble, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if x.names != ensemble.feature_names {
        return Err(ModelError::ColumnMismatch(format!(
            "expected {:?}, got {:?}",
            ensemble.feature_names, x.names
        )));
    }
    Ok((0..x.n_rows).map(|i| ensemble.predict_row(x.row(i))).collect())
}

/// Exhaustive split search over raw feature values, used to check the
/// histogram search.
pub fn exact_best_split(x: &FeatureMatrix, grad: &[f64], config: &GbtConfig) -> Option<(usize, f64, f64)> {
    let n = grad.len();
    let g_sum: f64 = grad.iter().sum();
    let min_gain = 1e-12 * grad.iter().map(|g| g * g).sum::<f64>();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.n_cols() {
        let col = x.column(f);
        let mut uniq = col.clone();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        for w in uniq.windows(2) {
            let thr = midpoint(w[0], w[1]);
            let (mut gl, mut hl) = (0.0, 0);
            for i in 0..n {
                if col[i] <= thr {
                    gl += grad[i];
                    hl += 1;
                }
            }
            if hl < config.min_samples_leaf || n - hl < config.min_samples_leaf {
                continue;
            }
            let gain = split_gain(gl, hl, g_sum, n, config.l2_leaf_penalty);
            if gain > 0.0 && gain > min_gain && best.is_none_or(|b| gain > b.2) {
                best = Some((f, thr, gain));
            }
        }
    }
    best
}
