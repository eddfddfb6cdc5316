//! Binary CART classifier with Gini impurity.
//!
//! Each node scans every feature exhaustively. Candidate thresholds are the
//! midpoints between consecutive distinct values; samples with
//! `x[feature] <= threshold` go left. The split minimizing the weighted
//! child impurity wins, ties going to the lowest feature index and then the
//! lowest threshold. Impurities are compared as exact rationals so ties are
//! genuine ties.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_xy, Classifier};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 10,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Training samples reaching the node, `[negative, positive]`.
    pub counts: [usize; 2],
    pub depth: usize,
    #[serde(flatten)]
    pub kind: NodeKind,
}

impl Node {
    /// Majority class; ties go to the negative class.
    pub fn majority(&self) -> bool {
        self.counts[1] > self.counts[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Nodes in depth-first order; index 0 is the root.
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub n_features: usize,
}

impl DecisionTree {
    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[i].kind
        {
            i = if x[feature] <= threshold { left } else { right };
        }
        i
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }
}

impl Classifier for DecisionTree {
    fn predict(&self, x: &[f64]) -> bool {
        self.nodes[self.leaf_index(x)].majority()
    }
}

/// `n · weighted Gini` of a two-way partition, kept as `num / den`.
#[derive(Debug, Clone, Copy)]
struct Impurity {
    num: u128,
    den: u128,
}

impl Impurity {
    fn of(left: [usize; 2], right: [usize; 2]) -> Self {
        // Σ_side n_side · (1 − Σ p²) = Σ_side (n_side² − Σ c²) / n_side
        let part = |c: [usize; 2]| {
            let n = (c[0] + c[1]) as u128;
            let sq = (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
            (n * n - sq, n)
        };
        let (a, na) = part(left);
        let (b, nb) = part(right);
        Impurity {
            num: a * nb + b * na,
            den: na * nb,
        }
    }
}

impl PartialEq for Impurity {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Impurity {}
impl PartialOrd for Impurity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Impurity {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    cfg: TreeConfig,
    nodes: Vec<Node>,
}

fn counts_of(y: &[bool], idx: &[usize]) -> [usize; 2] {
    let pos = idx.iter().filter(|&&i| y[i]).count();
    [idx.len() - pos, pos]
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let total = counts_of(self.y, idx);
        let mut best: Option<(Impurity, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for feature in 0..self.x[0].len() {
            sorted.sort_by(|&a, &b| {
                self.x[a][feature]
                    .total_cmp(&self.x[b][feature])
                    .then(a.cmp(&b))
            });
            let mut left = [0usize; 2];
            for k in 0..sorted.len() - 1 {
                left[usize::from(self.y[sorted[k]])] += 1;
                let (lo, hi) = (self.x[sorted[k]][feature], self.x[sorted[k + 1]][feature]);
                let n_left = k + 1;
                if lo == hi
                    || n_left < self.cfg.min_leaf
                    || sorted.len() - n_left < self.cfg.min_leaf
                {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let score = Impurity::of(left, right);
                if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = counts_of(self.y, &idx);
        let id = self.nodes.len();
        self.nodes.push(Node {
            counts,
            depth,
            kind: NodeKind::Leaf,
        });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id].kind = NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a CART tree. A single-class training set yields a single leaf.
pub fn train_tree(x: &[Vec<f64>], y: &[bool], cfg: &TreeConfig) -> Result<DecisionTree> {
    let n_features = check_xy(x, y)?;
    if cfg.max_depth == 0 || cfg.min_leaf == 0 {
        return Err(crate::Error::Shape(
            "max_depth and min_leaf must be positive".into(),
        ));
    }
    let mut b = Builder {
        x,
        y,
        cfg: *cfg,
        nodes: Vec::new(),
    };
    b.grow((0..x.len()).collect(), 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        max_depth: cfg.max_depth,
        n_features,
    })
}
