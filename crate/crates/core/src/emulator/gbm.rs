//! Least-squares gradient boosting over depth-limited regression trees.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

#[derive(Debug, Clone)]
pub struct GbmConfig {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub min_leaf: Vec<usize>,
    pub folds: usize,
    pub fold_seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            n_trees: vec![100, 250],
            max_depth: vec![2, 3, 4],
            learning_rate: vec![0.05, 0.1],
            min_leaf: vec![5],
            folds: 10,
            fold_seed: 17,
        }
    }
}

impl GbmConfig {
    /// Grid in a fixed order; ties in CV error go to the earliest entry.
    pub fn grid(&self) -> Vec<GbmParams> {
        let mut out = Vec::new();
        for &max_depth in &self.max_depth {
            for &learning_rate in &self.learning_rate {
                for &min_leaf in &self.min_leaf {
                    for &n_trees in &self.n_trees {
                        out.push(GbmParams {
                            n_trees,
                            max_depth,
                            learning_rate,
                            min_leaf,
                        });
                    }
                }
            }
        }
        out
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
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub init_value: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub params: Option<GbmParams>,
    /// Mean CV-RMSE for each grid entry, in grid order.
    #[serde(default)]
    pub cv_rmse: Vec<(GbmParams, f64)>,
}

impl TreeEnsemble {
    pub fn constant(value: f64) -> Self {
        Self {
            init_value: value,
            learning_rate: 0.0,
            trees: Vec::new(),
            params: None,
            cv_rmse: Vec::new(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.init_value + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Training view: row-major inputs plus, per feature, row indices sorted by
/// that feature's value.
struct Data<'a> {
    x: &'a [f64],
    p: usize,
    sorted: Vec<Vec<u32>>,
}

impl<'a> Data<'a> {
    fn new(x: &'a [f64], p: usize, rows: &[u32]) -> Self {
        let sorted = (0..p)
            .map(|f| {
                let mut idx = rows.to_vec();
                idx.sort_by(|&a, &b| {
                    x[a as usize * p + f]
                        .total_cmp(&x[b as usize * p + f])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { x, p, sorted }
    }

    fn at(&self, row: u32, f: usize) -> f64 {
        self.x[row as usize * self.p + f]
    }
}

struct TreeBuilder<'a> {
    data: &'a Data<'a>,
    resid: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    go_left: Vec<bool>,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.resid[r as usize]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: sum / n as f64,
        });
        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return id;
        }
        let parent = sum * sum / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, idx) in sorted.iter().enumerate() {
            let mut left = 0.0;
            for k in 0..n - 1 {
                left += self.resid[idx[k] as usize];
                let nl = k + 1;
                let nr = n - nl;
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let (a, b) = (self.data.at(idx[k], f), self.data.at(idx[k + 1], f));
                if a == b {
                    continue;
                }
                let right = sum - left;
                let gain = left * left / nl as f64 + right * right / nr as f64 - parent;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (a + b)));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return id;
        };
        if !(gain > 1e-14 * parent.abs().max(f64::MIN_POSITIVE)) {
            return id;
        }
        for &r in rows {
            self.go_left[r as usize] = self.data.at(r, feature) <= threshold;
        }
        let mut ls = Vec::with_capacity(sorted.len());
        let mut rs = Vec::with_capacity(sorted.len());
        for idx in &sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = idx.iter().partition(|&&r| self.go_left[r as usize]);
            ls.push(l);
            rs.push(r);
        }
        drop(sorted);
        let left = self.build(ls, depth + 1);
        let right = self.build(rs, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Boosts `n_trees` trees on `rows`, calling `stage(t, ensemble_so_far)`
/// after each tree.
fn boost(
    data: &Data,
    y: &[f64],
    rows: &[u32],
    params: &GbmParams,
    mut stage: impl FnMut(usize, &TreeEnsemble),
) -> TreeEnsemble {
    let init = rows.iter().map(|&r| y[r as usize]).sum::<f64>() / rows.len() as f64;
    let mut ens = TreeEnsemble {
        init_value: init,
        learning_rate: params.learning_rate,
        trees: Vec::with_capacity(params.n_trees),
        params: Some(*params),
        cv_rmse: Vec::new(),
    };
    let n_all = y.len();
    let mut fitted = vec![init; n_all];
    let mut resid = vec![0.0; n_all];
    let mut go_left = vec![false; n_all];
    for t in 0..params.n_trees {
        for &r in rows {
            resid[r as usize] = y[r as usize] - fitted[r as usize];
        }
        let mut b = TreeBuilder {
            data,
            resid: &resid,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            go_left: std::mem::take(&mut go_left),
            nodes: Vec::new(),
        };
        b.build(data.sorted.clone(), 0);
        go_left = b.go_left;
        let tree = Tree { nodes: b.nodes };
        for &r in rows {
            let x = &data.x[r as usize * data.p..(r as usize + 1) * data.p];
            fitted[r as usize] += params.learning_rate * tree.predict(x);
        }
        ens.trees.push(tree);
        stage(t + 1, &ens);
    }
    ens
}

/// Fits the grid entry with the smallest mean CV-RMSE, then refits on all rows.
pub fn fit_gbm(x: &[f64], p: usize, y: &[f64], cfg: &GbmConfig) -> Result<TreeEnsemble> {
    let n = y.len();
    if x.len() != n * p {
        return Err(Error::DimensionMismatch {
            expected: n * p,
            got: x.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("boosting targets".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "boosting targets must be finite".into(),
        ));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Ok(TreeEnsemble::constant(y[0]));
    }
    let grid = cfg.grid();
    if grid.is_empty() {
        return Err(Error::InvalidConfig("boosting grid is empty".into()));
    }
    if cfg.folds < 2 || n < cfg.folds {
        return Err(Error::InvalidConfig(format!(
            "cross-validation needs 2 <= folds <= n (folds = {}, n = {n})",
            cfg.folds
        )));
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.fold_seed));
    let mut fold_of = vec![0; n];
    for (pos, &r) in order.iter().enumerate() {
        fold_of[r as usize] = pos % cfg.folds;
    }

    // Entries sharing depth, learning rate and leaf size differ only in tree
    // count, so one boosting run per fold scores all of them.
    let mut sq_err: Vec<Vec<f64>> = vec![vec![0.0; cfg.folds]; grid.len()];
    let mut groups: Vec<(GbmParams, Vec<usize>)> = Vec::new();
    for (gi, g) in grid.iter().enumerate() {
        let key = GbmParams { n_trees: 0, ..*g };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(gi),
            None => groups.push((key, vec![gi])),
        }
    }
    for fold in 0..cfg.folds {
        let train: Vec<u32> = (0..n as u32)
            .filter(|&r| fold_of[r as usize] != fold)
            .collect();
        let test: Vec<u32> = (0..n as u32)
            .filter(|&r| fold_of[r as usize] == fold)
            .collect();
        let data = Data::new(x, p, &train);
        for (key, members) in &groups {
            let max_trees = members
                .iter()
                .map(|&gi| grid[gi].n_trees)
                .max()
                .unwrap_or(0);
            let params = GbmParams {
                n_trees: max_trees,
                ..*key
            };
            let mut pred: Vec<f64> = Vec::new();
            boost(&data, y, &train, &params, |t, ens| {
                if t == 1 {
                    pred = test.iter().map(|_| ens.init_value).collect();
                }
                let last = ens.trees.last().expect("stage called after a tree");
                for (v, &r) in pred.iter_mut().zip(&test) {
                    *v +=
                        ens.learning_rate * last.predict(&x[r as usize * p..(r as usize + 1) * p]);
                }
                for &gi in members {
                    if grid[gi].n_trees == t {
                        let mse = pred
                            .iter()
                            .zip(&test)
                            .map(|(v, &r)| (v - y[r as usize]).powi(2))
                            .sum::<f64>()
                            / test.len() as f64;
                        sq_err[gi][fold] = mse.sqrt();
                    }
                }
            });
        }
    }
    let cv: Vec<(GbmParams, f64)> = grid
        .iter()
        .zip(&sq_err)
        .map(|(g, e)| (*g, e.iter().sum::<f64>() / cfg.folds as f64))
        .collect();
    let (best, _) = cv
        .iter()
        .copied()
        .fold(None::<(GbmParams, f64)>, |acc, (g, e)| match acc {
            Some((_, be)) if be <= e => acc,
            _ => Some((g, e)),
        })
        .expect("grid is non-empty");
    log::debug!("boosting selected {best:?}");
    let all: Vec<u32> = (0..n as u32).collect();
    let data = Data::new(x, p, &all);
    let mut ens = boost(&data, y, &all, &best, |_, _| {});
    ens.cv_rmse = cv;
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::lhs_sample;

    #[test]
    fn constant_targets() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 / 40.0).collect();
        let e = fit_gbm(&x, 2, &[3.5; 20], &GbmConfig::default()).unwrap();
        assert!(e.trees.is_empty());
        assert_eq!(e.predict(&[0.1, 0.9]), 3.5);
    }

    #[test]
    fn single_split_tree() {
        let x = [0.1, 0.2, 0.8, 0.9];
        let y = [0.0, 0.0, 1.0, 1.0];
        let rows: Vec<u32> = (0..4).collect();
        let data = Data::new(&x, 1, &rows);
        let params = GbmParams {
            n_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            min_leaf: 1,
        };
        let e = boost(&data, &y, &rows, &params, |_, _| {});
        assert_eq!(e.trees[0].nodes.len(), 3);
        assert!((e.predict(&[0.0]) - 0.0).abs() < 1e-12);
        assert!((e.predict(&[1.0]) - 1.0).abs() < 1e-12);
        match e.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert!((threshold - 0.5).abs() < 1e-12),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn linear_signal_cv_error_small() {
        let d = lhs_sample(500, 10, 5);
        let y: Vec<f64> = d.rows().map(|r| 10.0 * r[0]).collect();
        let e = fit_gbm(d.values(), 10, &y, &GbmConfig::default()).unwrap();
        let sd = crate::stats::sample_sd(&y);
        let best = e
            .cv_rmse
            .iter()
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.1 * sd, "cv rmse {best} vs sd {sd}");
    }

    #[test]
    fn deterministic_selection() {
        let d = lhs_sample(120, 3, 8);
        let y: Vec<f64> = d.rows().map(|r| (6.0 * r[0]).sin() + r[1] * r[2]).collect();
        let a = fit_gbm(d.values(), 3, &y, &GbmConfig::default()).unwrap();
        let b = fit_gbm(d.values(), 3, &y, &GbmConfig::default()).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_rows_for_folds() {
        let x = [0.0, 0.5, 1.0];
        assert!(fit_gbm(&x, 1, &[1.0, 2.0, 3.0], &GbmConfig::default()).is_err());
    }
}
