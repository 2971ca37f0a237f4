//! CART decision trees (Gini impurity) and bagged random forests over sparse
//! feature vectors.
//!
//! At each node the candidate features are the ones that are not constant
//! across the node's samples; `max_features` of them are drawn at random.
//! Absent sparse entries count as 0.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features tried per split; `None` means ⌈√d⌉.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 12,
            max_features: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        distribution: Vec<f64>,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub classes: usize,
    /// Node 0 is the root; `value <= threshold` goes left.
    pub nodes: Vec<Node>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    xs: &'a [SparseVector],
    ys: &'a [usize],
    classes: usize,
    params: TreeParams,
    max_features: usize,
    rng: rng::Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: u32,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn class_counts(&self, samples: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.classes];
        for &i in samples {
            counts[self.ys[i]] += 1.0;
        }
        counts
    }

    fn leaf(&mut self, counts: &[f64]) -> usize {
        let total: f64 = counts.iter().sum();
        self.nodes.push(Node::Leaf {
            distribution: counts.iter().map(|c| c / total).collect(),
        });
        self.nodes.len() - 1
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&samples);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure || depth >= self.params.max_depth || samples.len() < self.params.min_samples_split {
            return self.leaf(&counts);
        }
        let Some(best) = self.best_split(&samples, &counts) else {
            return self.leaf(&counts);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.xs[i].get(best.feature) <= best.threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { distribution: Vec::new() });
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        at
    }

    fn best_split(&mut self, samples: &[usize], counts: &[f64]) -> Option<BestSplit> {
        // (feature, value, sample) for every non-zero entry in the node.
        let mut entries: Vec<(u32, f64, usize)> = samples
            .iter()
            .flat_map(|&i| self.xs[i].iter().map(move |(j, v)| (j, v, i)))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut groups: Vec<&[(u32, f64, usize)]> = entries
            .chunk_by(|a, b| a.0 == b.0)
            .filter(|g| g.len() < samples.len() || g.first().map(|e| e.1) != g.last().map(|e| e.1))
            .collect();
        if groups.is_empty() {
            return None;
        }
        let take = self.max_features.min(groups.len());
        let (chosen, _) = groups.partial_shuffle(&mut self.rng, take);
        chosen.sort_by_key(|g| g[0].0);

        let n = samples.len() as f64;
        let parent = gini(counts, n);
        let mut best: Option<BestSplit> = None;
        for group in chosen.iter() {
            if let Some((threshold, impurity)) = self.scan_feature(group, counts, n) {
                let gain = parent - impurity;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: group[0].0,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    /// Best threshold for one feature, given its non-zero entries sorted by
    /// value. Returns the threshold and weighted child impurity.
    fn scan_feature(&self, entries: &[(u32, f64, usize)], counts: &[f64], n: f64) -> Option<(f64, f64)> {
        // Runs of equal value: (value, class counts). Zeros form one run.
        let mut runs: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut zero = counts.to_vec();
        for e in entries {
            zero[self.ys[e.2]] -= 1.0;
        }
        let zero_n: f64 = zero.iter().sum();
        let mut zero_pending = zero_n > 0.0;
        for e in entries {
            if zero_pending && e.1 > 0.0 {
                runs.push((0.0, zero.clone()));
                zero_pending = false;
            }
            match runs.last_mut() {
                Some((v, c)) if *v == e.1 => c[self.ys[e.2]] += 1.0,
                _ => {
                    let mut c = vec![0.0; self.classes];
                    c[self.ys[e.2]] = 1.0;
                    runs.push((e.1, c));
                }
            }
        }
        if zero_pending {
            runs.push((0.0, zero));
        }

        let mut left = vec![0.0; self.classes];
        let mut left_n = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for w in runs.windows(2) {
            for (l, c) in left.iter_mut().zip(&w[0].1) {
                *l += c;
            }
            left_n += w[0].1.iter().sum::<f64>();
            let right: Vec<f64> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
            let right_n = n - left_n;
            let impurity = (left_n * gini(&left, left_n) + right_n * gini(&right, right_n)) / n;
            if best.is_none_or(|b| impurity < b.1) {
                best = Some(((w[0].0 + w[1].0) / 2.0, impurity));
            }
        }
        best
    }
}

impl DecisionTree {
    pub fn fit(xs: &[SparseVector], ys: &[usize], classes: usize, params: &TreeParams, seed: u64) -> Self {
        Self::fit_samples(xs, ys, (0..xs.len()).collect(), classes, params, rng::seeded(seed))
    }

    fn fit_samples(
        xs: &[SparseVector],
        ys: &[usize],
        samples: Vec<usize>,
        classes: usize,
        params: &TreeParams,
        rng: rng::Rng,
    ) -> Self {
        assert!(!samples.is_empty(), "cannot fit a tree on no samples");
        let dimension = xs[0].dimension;
        let max_features = params
            .max_features
            .unwrap_or_else(|| (dimension as f64).sqrt().ceil() as usize)
            .max(1);
        let mut b = Builder {
            xs,
            ys,
            classes,
            params: *params,
            max_features,
            rng,
            nodes: Vec::new(),
        };
        b.build(samples, 0);
        DecisionTree { classes, nodes: b.nodes }
    }

    pub fn predict_proba(&self, x: &SparseVector) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Tree `t` uses seed `seed + t` for both its bootstrap sample and its
    /// feature draws, so the forest is identical at any thread count.
    pub fn fit(xs: &[SparseVector], ys: &[usize], classes: usize, params: &ForestParams, seed: u64) -> Self {
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::seeded(seed.wrapping_add(t as u64));
                let samples = if params.bootstrap {
                    (0..xs.len()).map(|_| rng.gen_range(0..xs.len())).collect()
                } else {
                    (0..xs.len()).collect()
                };
                DecisionTree::fit_samples(xs, ys, samples, classes, &params.tree, rng)
            })
            .collect();
        RandomForest { classes, trees }
    }

    /// Mean of the trees' leaf distributions.
    pub fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.classes];
        for tree in &self.trees {
            for (o, p) in out.iter_mut().zip(tree.predict_proba(x)) {
                *o += p;
            }
        }
        let t = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= t);
        out
    }
}
