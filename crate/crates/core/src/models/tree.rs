//! CART regression trees grown by variance reduction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec;

/// Below this many (row, feature) pairs the split search stays sequential.
const PARALLEL_SPLIT_WORK: usize = 16_384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split, drawn without replacement.
    pub max_features: usize,
    pub parallel_split_search: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

struct Grower<'a> {
    x: &'a [f64],
    p: usize,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
}

/// Grows one tree on `rows` (duplicates allowed, as in a bootstrap sample).
pub fn grow_tree(x: &[f64], p: usize, y: &[f64], rows: Vec<usize>, params: TreeParams, rng: &mut ChaCha8Rng) -> Tree {
    let mut g = Grower {
        x,
        p,
        y,
        params,
        nodes: Vec::new(),
    };
    g.grow(rows, 0, rng);
    Tree { nodes: g.nodes }
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let (sum, n) = (rows.iter().map(|&r| self.y[r]).sum::<f64>(), rows.len() as f64);
        self.nodes.push(Node::Leaf { value: sum / n });
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || rows.len() < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some(best) = self.find_split(&rows, sum * sum / n, rng) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.x[r * self.p + best.feature] <= best.threshold);
        drop(rows);
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Examines `max_features` of the features that vary within the node,
    /// drawn in random order; constant features never consume a draw. The
    /// search goes on past `max_features` until a valid split turns up.
    fn find_split(&self, rows: &[usize], parent_score: f64, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let mut order: Vec<usize> = (0..self.p).filter(|&f| !self.is_constant(rows, f)).collect();
        let k = self.params.max_features.clamp(1, order.len().max(1));
        if k < order.len() {
            for i in 0..order.len() {
                let j = rng.random_range(i..order.len());
                order.swap(i, j);
            }
        }
        let mut best = self.best_split(rows, &order[..k.min(order.len())], parent_score);
        let mut rest = order.iter().skip(k);
        while best.is_none() {
            best = self.best_split(rows, &[*rest.next()?], parent_score);
        }
        best
    }

    fn is_constant(&self, rows: &[usize], f: usize) -> bool {
        let first = self.x[rows[0] * self.p + f];
        rows.iter().all(|&r| self.x[r * self.p + f] == first)
    }

    fn best_split(&self, rows: &[usize], features: &[usize], parent_score: f64) -> Option<Candidate> {
        let search = |&f: &usize| self.best_for_feature(rows, f);
        let per_feature = if self.params.parallel_split_search && rows.len() * features.len() >= PARALLEL_SPLIT_WORK {
            exec::map_slice(features, search)
        } else {
            features.iter().map(search).collect()
        };
        let tol = 1e-12 * parent_score.abs().max(1e-300);
        per_feature
            .into_iter()
            .flatten()
            .filter(|c| c.score > parent_score + tol)
            .fold(None, |best: Option<Candidate>, c| match best {
                Some(b) if b.score >= c.score => Some(b),
                _ => Some(c),
            })
    }

    /// Best threshold on one feature: maximizes sumL²/nL + sumR²/nR, which is
    /// equivalent to minimizing the children's squared error.
    fn best_for_feature(&self, rows: &[usize], f: usize) -> Option<Candidate> {
        let mut pairs: Vec<(f64, f64)> = rows.iter().map(|&r| (self.x[r * self.p + f], self.y[r])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut left = 0.0;
        let mut best: Option<Candidate> = None;
        for k in 1..n {
            left += pairs[k - 1].1;
            if k < min_leaf || n - k < min_leaf || pairs[k - 1].0 >= pairs[k].0 {
                continue;
            }
            let right = total - left;
            let score = left * left / k as f64 + right * right / (n - k) as f64;
            if best.is_none_or(|b| score > b.score) {
                best = Some(Candidate {
                    score,
                    feature: f,
                    threshold: 0.5 * (pairs[k - 1].0 + pairs[k].0),
                });
            }
        }
        best
    }
}
