//! Gradient-boosted regression trees with squared loss.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub feature_subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 1000,
            max_depth: 6,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            feature_subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 || self.max_depth < 1 || self.min_samples_leaf < 1 {
            return Err(Error::Config(
                "n_trees, max_depth and min_samples_leaf must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("learning_rate must lie in (0, 1]".into()));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::Config("feature_subsample must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    pub n_features: usize,
    pub init: f64,
    pub trees: Vec<Tree>,
    /// Training RMSE after each tree.
    pub train_rmse: Vec<f64>,
}

impl GbdtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
    feature: usize,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

const DONE: u32 = u32::MAX;

/// Column-major copy of the training matrix with every column presorted.
pub struct Presorted {
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    sorted: Vec<Vec<f64>>,
}

impl Presorted {
    pub fn new(rows: usize, cols: usize, get: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let columns: Vec<Vec<f64>> = (0..cols)
            .into_par_iter()
            .map(|j| (0..rows).map(|i| get(i, j)).collect())
            .collect();
        let order = columns
            .par_iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect::<Vec<Vec<u32>>>();
        let sorted = order
            .iter()
            .zip(&columns)
            .map(|(o, c)| o.iter().map(|&i| c[i as usize]).collect())
            .collect();
        Self { columns, order, sorted }
    }

    /// The presorted matrix of the given ascending `rows`, without sorting.
    pub fn restrict(&self, rows: &[usize]) -> Self {
        debug_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        let mut new_index = vec![u32::MAX; self.rows()];
        for (k, &r) in rows.iter().enumerate() {
            new_index[r] = k as u32;
        }
        let columns: Vec<Vec<f64>> = self
            .columns
            .par_iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        let (order, sorted) = self
            .order
            .par_iter()
            .zip(&self.sorted)
            .map(|(o, v)| {
                o.iter()
                    .zip(v)
                    .filter(|(&r, _)| new_index[r as usize] != u32::MAX)
                    .map(|(&r, &x)| (new_index[r as usize], x))
                    .unzip()
            })
            .unzip();
        Self { columns, order, sorted }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }
}

fn rmse(y: &[f64], pred: &[f64]) -> f64 {
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    (sse / y.len() as f64).sqrt()
}

/// Fits on the columns `cols` of `data`; tree features index into `cols`.
pub fn fit_gbdt_columns(data: &Presorted, cols: &[usize], y: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    let n = y.len();
    if n < 2 {
        return Err(Error::Fit(format!("gradient boosting needs at least 2 rows, got {n}")));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Fit(format!("non-finite target {bad}")));
    }
    if data.rows() != n && !cols.is_empty() {
        return Err(Error::Contract(format!("{} rows but {n} targets", data.rows())));
    }
    if let Some(&bad) = cols.iter().find(|&&j| j >= data.cols()) {
        return Err(Error::Contract(format!("column {bad} out of range")));
    }
    let p = cols.len();
    let init = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![init; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut train_rmse = Vec::with_capacity(params.n_trees);
    let n_sub = ((params.feature_subsample * p as f64).ceil() as usize).clamp(1.min(p), p);

    for t in 0..params.n_trees {
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(y, p)| y - p).collect();
        let features: Vec<usize> = if n_sub == p {
            cols.to_vec()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let mut f = sample(&mut rng, p, n_sub).into_vec();
            f.sort_unstable();
            f.into_iter().map(|k| cols[k]).collect()
        };
        let (mut tree, leaf_of) = grow_tree(data, &residual, &features, params);
        for node in &mut tree.nodes {
            if let Node::Split { feature, .. } = node {
                *feature = cols.iter().position(|c| c == feature).expect("feature from cols");
            }
        }
        for (pr, leaf) in pred.iter_mut().zip(&leaf_of) {
            if let Node::Leaf { value } = tree.nodes[*leaf as usize] {
                *pr += value;
            }
        }
        train_rmse.push(rmse(y, &pred));
        trees.push(tree);
    }
    Ok(GbdtModel {
        params: params.clone(),
        n_features: p,
        init,
        trees,
        train_rmse,
    })
}

/// Grows one tree on `residual` and returns it with the leaf of every row.
fn grow_tree(data: &Presorted, residual: &[f64], features: &[usize], params: &GbdtParams) -> (Tree, Vec<u32>) {
    let n = residual.len();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    // Slot of each row among the open nodes of the current level.
    let mut slot_of = vec![0u32; n];
    let mut leaf_of = vec![0u32; n];
    let mut open: Vec<usize> = vec![0];
    let min_leaf = params.min_samples_leaf;

    for depth in 0..=params.max_depth {
        if open.is_empty() {
            break;
        }
        let k = open.len();
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for i in 0..n {
            let s = slot_of[i];
            if s != DONE {
                sum[s as usize] += residual[i];
                count[s as usize] += 1;
            }
        }

        let best: Vec<Option<Candidate>> = if depth == params.max_depth {
            vec![None; k]
        } else {
            let per_feature: Vec<Vec<Option<Candidate>>> = features
                .par_iter()
                .map(|&j| {
                    let vals = &data.sorted[j];
                    let mut ls = vec![0.0; k];
                    let mut lc = vec![0usize; k];
                    let mut last = vec![f64::NAN; k];
                    let mut best: Vec<Option<Candidate>> = vec![None; k];
                    for (&r, &x) in data.order[j].iter().zip(vals) {
                        let r = r as usize;
                        let s = slot_of[r];
                        if s == DONE {
                            continue;
                        }
                        let s = s as usize;
                        if lc[s] > 0 && x > last[s] {
                            let rc = count[s] - lc[s];
                            if lc[s] >= min_leaf && rc >= min_leaf {
                                let rs = sum[s] - ls[s];
                                let gain = ls[s] * ls[s] / lc[s] as f64 + rs * rs / rc as f64
                                    - sum[s] * sum[s] / count[s] as f64;
                                if gain > best[s].map_or(0.0, |c| c.gain) {
                                    best[s] = Some(Candidate {
                                        gain,
                                        threshold: midpoint(last[s], x),
                                        feature: j,
                                    });
                                }
                            }
                        }
                        ls[s] += residual[r];
                        lc[s] += 1;
                        last[s] = x;
                    }
                    best
                })
                .collect();
            (0..k)
                .map(|s| {
                    let mut pick: Option<Candidate> = None;
                    for cands in &per_feature {
                        if let Some(c) = cands[s] {
                            if c.gain > pick.map_or(0.0, |p| p.gain) {
                                pick = Some(c);
                            }
                        }
                    }
                    pick
                })
                .collect()
        };

        let mut next_open = Vec::new();
        let mut child_slots: Vec<Option<(u32, u32)>> = vec![None; k];
        for (s, &node) in open.iter().enumerate() {
            match best[s] {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    child_slots[s] = Some((next_open.len() as u32, next_open.len() as u32 + 1));
                    next_open.push(left);
                    next_open.push(left + 1);
                }
                None => {
                    let value = if count[s] > 0 {
                        params.learning_rate * sum[s] / count[s] as f64
                    } else {
                        0.0
                    };
                    nodes[node] = Node::Leaf { value };
                }
            }
        }
        for i in 0..n {
            let s = slot_of[i];
            if s == DONE {
                continue;
            }
            let s = s as usize;
            match (child_slots[s], best[s]) {
                (Some((l, r)), Some(c)) => {
                    slot_of[i] = if data.columns[c.feature][i] <= c.threshold { l } else { r };
                }
                _ => {
                    leaf_of[i] = open[s] as u32;
                    slot_of[i] = DONE;
                }
            }
        }
        open = next_open;
    }
    (Tree { nodes }, leaf_of)
}
