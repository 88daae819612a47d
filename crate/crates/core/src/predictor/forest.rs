//! Bagged regression trees with variance-reduction splits.
//!
//! Each tree is grown on a bootstrap sample; at every node a seeded random
//! subset of features is searched for the split with the largest drop in
//! squared error. Leaves predict the mean target of their rows.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features searched per split; `None` means `ceil(d / 2)`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 8, min_samples_split: 2, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], config: &ForestConfig, seed: u64) -> Self {
        let d = inputs.first().map_or(0, Vec::len);
        let mtry = config.max_features.unwrap_or(d.div_ceil(2)).clamp(1, d.max(1));
        let n = inputs.len();
        let trees = (0..config.n_trees.max(1))
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut builder = Builder { inputs, targets, config, mtry, rng, nodes: Vec::new() };
                builder.grow(rows, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Self { trees }
    }
}

struct Builder<'a> {
    inputs: &'a [Vec<f64>],
    targets: &'a [f64],
    config: &'a ForestConfig,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    /// Grows the subtree for `rows` and returns its node index.
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mean = rows.iter().map(|&i| self.targets[i]).sum::<f64>() / rows.len() as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });
        if depth >= self.config.max_depth || rows.len() < self.config.min_samples_split.max(2) {
            return id;
        }
        let Some(best) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.inputs[i][best.feature] <= best.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let d = self.inputs[rows[0]].len();
        // Features are visited in a random order; like common implementations,
        // the search goes past `mtry` features until one yields a valid split.
        let features = index::sample(&mut self.rng, d, d);
        let total: f64 = rows.iter().map(|&i| self.targets[i]).sum();
        let n = rows.len() as f64;
        let mut best: Option<BestSplit> = None;
        let mut order = rows.to_vec();
        for (visited, f) in features.iter().enumerate() {
            if visited >= self.mtry && best.is_some() {
                break;
            }
            order.sort_by(|&a, &b| self.inputs[a][f].total_cmp(&self.inputs[b][f]));
            let mut left_sum = 0.0;
            for (k, w) in order.windows(2).enumerate() {
                left_sum += self.targets[w[0]];
                let (xa, xb) = (self.inputs[w[0]][f], self.inputs[w[1]][f]);
                if xa == xb {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                // SSE reduction up to a constant: sum_l^2/n_l + sum_r^2/n_r - total^2/n
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / n;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit { feature: f, threshold: xa + (xb - xa) / 2.0, gain });
                }
            }
        }
        best
    }
}
