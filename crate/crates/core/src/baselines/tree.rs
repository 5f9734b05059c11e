use crate::{Error, Matrix, Result, SeededRng};

/// Tree node; samples with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART regression tree stored as a preorder node list (root first).
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` tries all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1, max_features: None }
    }
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Preorder text: `tree <count>` then one `L <value>` or
    /// `S <feature> <threshold>` line per node.
    pub fn to_text(&self) -> String {
        let mut out = format!("tree {}\n", self.nodes.len());
        for n in &self.nodes {
            match n {
                Node::Leaf { value } => out.push_str(&format!("L {value}\n")),
                Node::Split { feature, threshold, .. } => out.push_str(&format!("S {feature} {threshold}\n")),
            }
        }
        out
    }

    /// Reads one tree written by [`to_text`](Self::to_text) from `lines`.
    pub fn from_lines<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let header = lines.next().ok_or_else(|| Error::Parse("expected `tree <count>`".into()))?;
        let count: usize = header
            .strip_prefix("tree ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad tree header `{header}`")))?;
        let mut raw = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| Error::Parse("tree ended early".into()))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("bad tree node `{line}`"));
            let node = match parts.as_slice() {
                ["L", v] => Node::Leaf { value: v.parse().map_err(|_| bad())? },
                ["S", f, t] => Node::Split {
                    feature: f.parse().map_err(|_| bad())?,
                    threshold: t.parse().map_err(|_| bad())?,
                    left: 0,
                    right: 0,
                },
                _ => return Err(bad()),
            };
            raw.push(node);
        }
        // Rebuild child links from preorder.
        fn link(nodes: &mut [Node], at: usize) -> Result<usize> {
            if at >= nodes.len() {
                return Err(Error::Parse("split node is missing children".into()));
            }
            if let Node::Split { .. } = nodes[at] {
                let left = at + 1;
                let after_left = link(nodes, left)?;
                let right = after_left;
                let end = link(nodes, right)?;
                if let Node::Split { left: l, right: r, .. } = &mut nodes[at] {
                    *l = left;
                    *r = right;
                }
                Ok(end)
            } else {
                Ok(at + 1)
            }
        }
        if raw.is_empty() {
            return Err(Error::Parse("tree has no nodes".into()));
        }
        if link(&mut raw, 0)? != raw.len() {
            return Err(Error::Parse("tree has unreachable nodes".into()));
        }
        Ok(Self { nodes: raw })
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut SeededRng>,
    nodes: Vec<Node>,
}

/// Best split of `idx` on `feature`: `(score, threshold)` maximizing
/// `S_L^2 / n_L + S_R^2 / n_R`, which is the same as minimizing the summed
/// squared error of the two children.
fn best_on_feature(x: &Matrix, y: &[f64], idx: &mut [usize], feature: usize, min_leaf: usize) -> Option<(f64, f64)> {
    idx.sort_by(|&a, &b| x.get(a, feature).total_cmp(&x.get(b, feature)));
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let mut left_sum = 0.0;
    let mut best: Option<(f64, f64)> = None;
    for i in 1..n {
        left_sum += y[idx[i - 1]];
        let lo = x.get(idx[i - 1], feature);
        let hi = x.get(idx[i], feature);
        if lo == hi || i < min_leaf || n - i < min_leaf {
            continue;
        }
        let right_sum = total - left_sum;
        let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
        if best.is_none_or(|(s, _)| score > s) {
            let mut threshold = lo + (hi - lo) / 2.0;
            // Keep the midpoint strictly below `hi` so routing matches the split.
            if threshold >= hi {
                threshold = lo;
            }
            best = Some((score, threshold));
        }
    }
    best
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let value = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < p => {
                let mut chosen = rng.permutation(p)[..k.max(1)].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..p).collect(),
        }
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || n < 2 * self.params.min_samples_leaf {
            return self.leaf(idx);
        }
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mean = total / n as f64;
        let node_sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let parent_score = total * total / n as f64;

        let mut best: Option<(f64, usize, f64)> = None;
        for f in self.candidate_features() {
            if let Some((score, threshold)) = best_on_feature(self.x, self.y, idx, f, self.params.min_samples_leaf) {
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, f, threshold));
                }
            }
        }
        let Some((score, feature, threshold)) = best else {
            return self.leaf(idx);
        };
        if score - parent_score <= 1e-12 * node_sse.max(f64::MIN_POSITIVE) {
            return self.leaf(idx);
        }

        idx.sort_by(|&a, &b| self.x.get(a, feature).total_cmp(&self.x.get(b, feature)));
        let cut = idx.partition_point(|&i| self.x.get(i, feature) <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        let (left_idx, right_idx) = idx.split_at_mut(cut);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

/// Greedy CART fit: each node takes the split with the largest squared-error
/// reduction over midpoints between consecutive distinct feature values.
/// Ties go to the lowest feature index, then the lowest threshold.
pub fn tree_fit(x: &Matrix, y: &[f64], max_depth: Option<usize>, min_samples_leaf: usize) -> Result<RegressionTree> {
    tree_fit_with(x, y, &(0..x.rows()).collect::<Vec<_>>(), TreeParams { max_depth, min_samples_leaf, max_features: None }, None)
}

/// Fits on the rows listed in `rows` (repeats allowed, as in a bootstrap
/// sample). `rng` drives per-split feature subsampling.
pub fn tree_fit_with(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    params: TreeParams,
    rng: Option<&mut SeededRng>,
) -> Result<RegressionTree> {
    if y.len() != x.rows() {
        return Err(Error::shape(format!("{} design rows but {} targets", x.rows(), y.len())));
    }
    if rows.is_empty() {
        return Err(Error::argument("a tree needs at least one sample"));
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::argument("min_samples_leaf must be at least 1"));
    }
    let mut idx = rows.to_vec();
    let mut b = Builder { x, y, params, rng, nodes: Vec::new() };
    b.grow(&mut idx, 0);
    Ok(RegressionTree { nodes: b.nodes })
}
