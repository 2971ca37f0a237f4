//! Multinomial naive Bayes with additive (Laplace) smoothing.

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    pub alpha: f64,
    pub dimension: usize,
    /// ln P(c); `None` for classes absent from training.
    pub log_prior: Vec<Option<f64>>,
    /// Per class, sparse ln P(feature | c) for features seen with that class.
    pub seen: Vec<SparseVector>,
    /// Per class, ln P(feature | c) of a feature never seen with it.
    pub unseen: Vec<f64>,
}

impl MultinomialNb {
    /// Priors are class frequencies; feature values are treated as counts.
    pub fn fit(xs: &[SparseVector], ys: &[usize], classes: usize, alpha: f64) -> Self {
        assert_eq!(xs.len(), ys.len());
        let dimension = xs.first().map_or(0, |x| x.dimension);
        let mut class_n = vec![0usize; classes];
        let mut counts = vec![std::collections::BTreeMap::<u32, f64>::new(); classes];
        for (x, &y) in xs.iter().zip(ys) {
            class_n[y] += 1;
            for (j, v) in x.iter() {
                *counts[y].entry(j).or_insert(0.0) += v;
            }
        }
        let n = xs.len() as f64;
        let mut log_prior = Vec::with_capacity(classes);
        let mut seen = Vec::with_capacity(classes);
        let mut unseen = Vec::with_capacity(classes);
        for c in 0..classes {
            let total: f64 = counts[c].values().sum();
            let denom = (total + alpha * dimension as f64).ln();
            log_prior.push((class_n[c] > 0).then(|| (class_n[c] as f64 / n).ln()));
            let map = counts[c].iter().map(|(&j, &v)| (j, (v + alpha).ln() - denom)).collect();
            seen.push(SparseVector::from_map(map, dimension));
            unseen.push(alpha.ln() - denom);
        }
        MultinomialNb {
            alpha,
            dimension,
            log_prior,
            seen,
            unseen,
        }
    }

    /// Joint log-likelihood per class; `-inf` for untrained classes.
    pub fn joint_log_likelihood(&self, x: &SparseVector) -> Vec<f64> {
        self.log_prior
            .iter()
            .enumerate()
            .map(|(c, prior)| match prior {
                None => f64::NEG_INFINITY,
                Some(p) => {
                    p + x
                        .iter()
                        .map(|(j, v)| {
                            v * match self.seen[c].indices.binary_search(&j) {
                                Ok(pos) => self.seen[c].values[pos],
                                Err(_) => self.unseen[c],
                            }
                        })
                        .sum::<f64>()
                }
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let jll = self.joint_log_likelihood(x);
        let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = jll.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }
}
