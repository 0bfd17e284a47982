//! Random-forest regression teacher.
//!
//! Bootstrap-sampled CART trees with variance-reduction splits on the summed
//! per-output squared error and multi-output mean leaves. Trees are seeded
//! individually, and training samples are first brought into a canonical
//! sort order, so the fitted model is independent of the order the caller
//! happened to assemble the dataset in.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use super::LearnError;
use crate::rng::{derive_seed, SeededRng};

/// Forest hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    /// Number of trees.
    pub tree_count: usize,
    /// Maximum tree depth.
    pub max_depth: usize,
    /// Minimum samples in each side of a split.
    pub min_leaf: usize,
    /// Features examined per split; `None` means ceil(sqrt(D)).
    pub feature_subsample: Option<usize>,
    /// Draw each tree's training set with replacement.
    pub bootstrap: bool,
    /// Root seed; tree t uses substream t.
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            tree_count: 100,
            max_depth: 12,
            min_leaf: 2,
            feature_subsample: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict<'a>(&'a self, x: &[f64]) -> &'a [f64] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { value } => return value,
            }
        }
    }
}

/// Fitted forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    /// Configuration the model was fitted with.
    pub config: ForestConfig,
    /// Expected feature vector length.
    pub feature_len: usize,
    /// Output vector length.
    pub outputs: usize,
}

/// Fits the forest on fingerprint features and simplex ratio targets.
pub fn forest_fit(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    cfg: &ForestConfig,
) -> Result<ForestModel, LearnError> {
    if x.len() != y.len() {
        return Err(LearnError::ShapeMismatch("feature and target counts differ"));
    }
    if x.len() < 10 {
        return Err(LearnError::TooFewSamples(x.len()));
    }
    if cfg.tree_count == 0 || cfg.min_leaf == 0 {
        return Err(LearnError::BadConfig("tree_count and min_leaf must be >= 1"));
    }
    let d = x[0].len();
    let c = y[0].len();
    if d == 0 || c == 0 {
        return Err(LearnError::ShapeMismatch("empty feature or target vectors"));
    }
    for (xi, yi) in x.iter().zip(y) {
        if xi.len() != d || yi.len() != c {
            return Err(LearnError::ShapeMismatch("ragged feature or target rows"));
        }
        if xi.iter().any(|v| !v.is_finite()) || yi.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite("forest training data"));
        }
        let sum: f64 = yi.iter().sum();
        if yi.iter().any(|&v| v < 0.0) || sum > 1.0 + 1e-9 {
            return Err(LearnError::BadConfig("targets must be non-negative with sum <= 1"));
        }
    }

    // Canonical order makes fitting independent of caller sample order.
    let order = canonical_order(x, y);
    let xs: Vec<&[f64]> = order.iter().map(|&i| x[i].as_slice()).collect();
    let ys: Vec<&[f64]> = order.iter().map(|&i| y[i].as_slice()).collect();

    let subsample = cfg
        .feature_subsample
        .unwrap_or_else(|| ((d as f64).sqrt().ceil() as usize).max(1))
        .min(d);

    let trees = (0..cfg.tree_count)
        .map(|t| {
            let mut rng = SeededRng::new(derive_seed(cfg.seed, t as u64));
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..xs.len()).map(|_| rng.index(xs.len())).collect()
            } else {
                (0..xs.len()).collect()
            };
            let mut builder = TreeBuilder {
                xs: &xs,
                ys: &ys,
                outputs: c,
                features: d,
                subsample,
                max_depth: cfg.max_depth,
                min_leaf: cfg.min_leaf,
                rng,
                nodes: Vec::new(),
            };
            builder.grow(samples, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();

    Ok(ForestModel { trees, config: *cfg, feature_len: d, outputs: c })
}

/// Mean of the per-tree leaf vectors, clipped to at least 1e-6 and
/// renormalized to the simplex so the output is usable as a soft target.
pub fn forest_predict(model: &ForestModel, x: &[f64]) -> Result<Vec<f64>, LearnError> {
    if x.len() != model.feature_len {
        return Err(LearnError::ShapeMismatch("feature length vs training data"));
    }
    let mut mean = vec![0.0; model.outputs];
    for tree in &model.trees {
        for (m, v) in mean.iter_mut().zip(tree.predict(x)) {
            *m += v / model.trees.len() as f64;
        }
    }
    for m in &mut mean {
        *m = m.max(1e-6);
    }
    let sum: f64 = mean.iter().sum();
    for m in &mut mean {
        *m /= sum;
    }
    Ok(mean)
}

fn canonical_order(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        slice_cmp(&x[a], &x[b]).then_with(|| slice_cmp(&y[a], &y[b]))
    });
    order
}

fn slice_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (p, q) in a.iter().zip(b) {
        let cmp = p.total_cmp(q);
        if cmp != core::cmp::Ordering::Equal {
            return cmp;
        }
    }
    core::cmp::Ordering::Equal
}

struct TreeBuilder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [&'a [f64]],
    outputs: usize,
    features: usize,
    subsample: usize,
    max_depth: usize,
    min_leaf: usize,
    rng: SeededRng,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Grows a subtree over `samples` and returns its root node index.
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let sse = self.node_sse(&samples);
        if depth >= self.max_depth || samples.len() < 2 * self.min_leaf || sse < 1e-15 {
            return self.push_leaf(&samples);
        }
        let Some((feature, threshold)) = self.best_split(&samples) else {
            return self.push_leaf(&samples);
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&s| self.xs[s][feature] <= threshold);
        // Reserve the split slot before growing children so the tree reads
        // top-down.
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
        let left_idx = self.grow(left, depth + 1);
        let right_idx = self.grow(right, depth + 1);
        self.nodes[at] = TreeNode::Split { feature, threshold, left: left_idx, right: right_idx };
        at
    }

    fn push_leaf(&mut self, samples: &[usize]) -> usize {
        let mut value = vec![0.0; self.outputs];
        for &s in samples {
            for (v, t) in value.iter_mut().zip(self.ys[s]) {
                *v += t / samples.len() as f64;
            }
        }
        self.nodes.push(TreeNode::Leaf { value });
        self.nodes.len() - 1
    }

    fn node_sse(&self, samples: &[usize]) -> f64 {
        let n = samples.len() as f64;
        let mut sse = 0.0;
        for o in 0..self.outputs {
            let sum: f64 = samples.iter().map(|&s| self.ys[s][o]).sum();
            let sum2: f64 = samples.iter().map(|&s| self.ys[s][o] * self.ys[s][o]).sum();
            sse += sum2 - sum * sum / n;
        }
        sse.max(0.0)
    }

    /// Scans a random feature subset for the split minimizing the summed
    /// child SSE. Ties resolve to the first candidate in (feature, threshold)
    /// order because later candidates must be strictly better.
    fn best_split(&mut self, samples: &[usize]) -> Option<(usize, f64)> {
        let mut candidates: Vec<usize> = (0..self.features).collect();
        for k in 0..self.subsample {
            let pick = k + self.rng.index(self.features - k);
            candidates.swap(k, pick);
        }
        let mut chosen = candidates[..self.subsample].to_vec();
        chosen.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<usize> = samples.to_vec();
        for &feature in &chosen {
            sorted.sort_by(|&a, &b| self.xs[a][feature].total_cmp(&self.xs[b][feature]));
            // Prefix sums per output let each threshold cost come out in
            // constant time.
            let n = sorted.len();
            let mut prefix = vec![0.0; (n + 1) * self.outputs];
            let mut prefix2 = vec![0.0; (n + 1) * self.outputs];
            for (i, &s) in sorted.iter().enumerate() {
                for o in 0..self.outputs {
                    let t = self.ys[s][o];
                    prefix[(i + 1) * self.outputs + o] = prefix[i * self.outputs + o] + t;
                    prefix2[(i + 1) * self.outputs + o] = prefix2[i * self.outputs + o] + t * t;
                }
            }
            for cut in self.min_leaf..=n - self.min_leaf {
                let lo = self.xs[sorted[cut - 1]][feature];
                let hi = self.xs[sorted[cut]][feature];
                if lo == hi {
                    continue;
                }
                let mut cost = 0.0;
                for o in 0..self.outputs {
                    let ls = prefix[cut * self.outputs + o];
                    let ls2 = prefix2[cut * self.outputs + o];
                    let ts = prefix[n * self.outputs + o];
                    let ts2 = prefix2[n * self.outputs + o];
                    cost += ls2 - ls * ls / cut as f64;
                    cost += (ts2 - ls2) - (ts - ls) * (ts - ls) / (n - cut) as f64;
                }
                let threshold = 0.5 * (lo + hi);
                if best.as_ref().map_or(true, |(c, _, _)| cost < *c) {
                    best = Some((cost, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

// ---------------------------------------------------------------------------
// checkpoint encoding
// ---------------------------------------------------------------------------

/// Flattens a fitted forest into a plain number stream for persistence:
/// `[feature_len, outputs, tree_count]`, then per tree its node count
/// followed by the nodes, splits as `[0, feature, threshold, left, right]`
/// and leaves as `[1, value...]`. Hyperparameters are not encoded; they
/// travel with the run configuration.
pub fn forest_flatten(model: &ForestModel) -> Vec<f64> {
    let mut out = vec![
        model.feature_len as f64,
        model.outputs as f64,
        model.trees.len() as f64,
    ];
    for tree in &model.trees {
        out.push(tree.nodes.len() as f64);
        for node in &tree.nodes {
            match node {
                TreeNode::Split { feature, threshold, left, right } => {
                    out.push(0.0);
                    out.push(*feature as f64);
                    out.push(*threshold);
                    out.push(*left as f64);
                    out.push(*right as f64);
                }
                TreeNode::Leaf { value } => {
                    out.push(1.0);
                    out.extend_from_slice(value);
                }
            }
        }
    }
    out
}

/// Rebuilds a forest from [`forest_flatten`] output. The configuration is
/// not part of the stream, so the caller supplies the one the model was
/// fitted with; prediction only depends on the decoded trees.
pub fn forest_restore(values: &[f64], cfg: &ForestConfig) -> Result<ForestModel, LearnError> {
    let mut cursor = values.iter().copied();
    let mut take = |what: &'static str| -> Result<f64, LearnError> {
        cursor.next().ok_or(LearnError::ShapeMismatch(what))
    };
    let index = |v: f64, what: &'static str| -> Result<usize, LearnError> {
        if v.fract() != 0.0 || v < 0.0 || v > (1u64 << 53) as f64 {
            return Err(LearnError::ShapeMismatch(what));
        }
        Ok(v as usize)
    };

    let feature_len = index(take("missing feature length")?, "bad feature length")?;
    let outputs = index(take("missing output count")?, "bad output count")?;
    let tree_count = index(take("missing tree count")?, "bad tree count")?;
    if feature_len == 0 || outputs == 0 || tree_count == 0 {
        return Err(LearnError::ShapeMismatch("empty forest encoding"));
    }

    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let node_count = index(take("missing node count")?, "bad node count")?;
        if node_count == 0 {
            return Err(LearnError::ShapeMismatch("empty tree encoding"));
        }
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            match take("missing node tag")? {
                t if t == 0.0 => {
                    let feature = index(take("missing split feature")?, "bad split feature")?;
                    let threshold = take("missing split threshold")?;
                    let left = index(take("missing split child")?, "bad split child")?;
                    let right = index(take("missing split child")?, "bad split child")?;
                    if feature >= feature_len || left >= node_count || right >= node_count {
                        return Err(LearnError::ShapeMismatch("split references out of range"));
                    }
                    nodes.push(TreeNode::Split { feature, threshold, left, right });
                }
                t if t == 1.0 => {
                    let mut value = Vec::with_capacity(outputs);
                    for _ in 0..outputs {
                        value.push(take("missing leaf value")?);
                    }
                    nodes.push(TreeNode::Leaf { value });
                }
                _ => return Err(LearnError::ShapeMismatch("unknown node tag")),
            }
        }
        trees.push(Tree { nodes });
    }
    if cursor.next().is_some() {
        return Err(LearnError::ShapeMismatch("trailing forest data"));
    }
    Ok(ForestModel { trees, config: *cfg, feature_len, outputs })
}
