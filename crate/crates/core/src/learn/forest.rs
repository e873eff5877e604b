//! Random forest of CART regression trees.
//!
//! Each tree is grown on a bootstrap sample, fully expanded (a node with
//! fewer than two samples, or a pure node, is a leaf), and picks the split
//! minimizing the summed squared error of its children among `sqrt(p)`
//! randomly ordered candidate features. Tree `t` draws from its own stream
//! `derive_seed(seed, t)`, so the first `k` trees of a larger forest are
//! exactly a `k`-tree forest.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

struct Grower<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Grower<'_, R> {
    fn mean(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }

    /// Best `(feature, threshold, sse)` over candidate features, or `None`
    /// when every feature is constant on the node.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let p = self.x[0].len();
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut visited = 0;
        let mut sorted = idx.to_vec();
        for f in order {
            if visited >= self.mtry {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let lo = self.x[sorted[0]][f];
            let hi = self.x[sorted[sorted.len() - 1]][f];
            if lo == hi {
                continue;
            }
            visited += 1;
            let m = sorted.len();
            let total: f64 = sorted.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = sorted.iter().map(|&i| self.y[i] * self.y[i]).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 1..m {
                let yi = self.y[sorted[k - 1]];
                s += yi;
                sq += yi * yi;
                let (a, b) = (self.x[sorted[k - 1]][f], self.x[sorted[k]][f]);
                if a == b {
                    continue;
                }
                let nl = k as f64;
                let nr = (m - k) as f64;
                let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s).powi(2) / nr);
                if best.is_none_or(|(_, _, e)| sse < e) {
                    let mid = 0.5 * (a + b);
                    let threshold = if mid < b { mid } else { a };
                    best = Some((f, threshold, sse));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let first = self.y[idx[0]];
        if idx.len() < 2 || idx.iter().all(|&i| self.y[i] == first) {
            let v = self.mean(&idx);
            self.nodes.push(Node::Leaf(v));
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(&idx) else {
            let v = self.mean(&idx);
            self.nodes.push(Node::Leaf(v));
            return id;
        };
        self.nodes.push(Node::Leaf(0.0));
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn grow_tree(x: &[Vec<f64>], y: &[f64], seed_root: u64, t: u64) -> Tree {
    let mut rng = seed::rng(seed_root, t);
    let n = y.len();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let p = x[0].len();
    let mtry = ((p as f64).sqrt().floor() as usize).max(1);
    let mut g = Grower {
        x,
        y,
        mtry,
        rng,
        nodes: Vec::new(),
    };
    g.grow(idx);
    Tree { nodes: g.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Grow `trees` trees; rows must already be in canonical order.
    pub fn fit(x: &[Vec<f64>], y: &[f64], trees: usize, seed_root: u64) -> Self {
        let trees = (0..trees as u64)
            .into_par_iter()
            .map(|t| grow_tree(x, y, seed_root, t))
            .collect();
        Self { trees }
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_prefix(x, self.trees.len())
    }

    /// Prediction of the forest made of the first `k` trees.
    pub fn predict_prefix(&self, x: &[f64], k: usize) -> f64 {
        let k = k.min(self.trees.len());
        self.trees[..k].iter().map(|t| t.predict(x)).sum::<f64>() / k as f64
    }
}
