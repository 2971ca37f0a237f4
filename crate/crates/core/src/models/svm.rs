//! One-vs-rest linear SVM trained with Pegasos (hinge loss, SGD with step
//! 1/(λt)). The bias is an extra constant feature.
//!
//! Probabilities are a softmax over the per-class margins of the classes seen
//! in training.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::models::nn::softmax;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryHinge {
    pub weights: SparseVector,
    pub bias: f64,
}

impl BinaryHinge {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        let mut s = self.bias;
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.weights, x);
        while i < a.indices.len() && j < b.indices.len() {
            match a.indices[i].cmp(&b.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a.values[i] * b.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    /// `ys` are ±1.
    pub fn fit(xs: &[SparseVector], ys: &[f64], params: &SvmParams, seed: u64) -> Self {
        let d = xs.first().map_or(0, |x| x.dimension);
        let mut v = vec![0.0; d + 1];
        let mut scale = 1.0f64;
        let mut rng = rng::seeded(seed);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut t = 0u64;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (params.lambda * t as f64);
                let x = &xs[i];
                let raw = v[d] + x.iter().map(|(j, val)| v[j as usize] * val).sum::<f64>();
                let margin = ys[i] * scale * raw;
                let shrink = 1.0 - eta * params.lambda;
                if shrink <= 0.0 {
                    v.iter_mut().for_each(|w| *w = 0.0);
                    scale = 1.0;
                } else {
                    scale *= shrink;
                }
                if margin < 1.0 {
                    let c = eta * ys[i] / scale;
                    for (j, val) in x.iter() {
                        v[j as usize] += c * val;
                    }
                    v[d] += c;
                }
                if scale < 1e-9 {
                    v.iter_mut().for_each(|w| *w *= scale);
                    scale = 1.0;
                }
            }
        }
        let weights = SparseVector::from_map(
            v[..d].iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(j, w)| (j as u32, w * scale)).collect(),
            d,
        );
        BinaryHinge {
            weights,
            bias: v[d] * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub classes: usize,
    /// One binary model per class seen in training.
    pub per_class: Vec<Option<BinaryHinge>>,
}

impl LinearSvm {
    pub fn fit(xs: &[SparseVector], ys: &[usize], classes: usize, params: &SvmParams, seed: u64) -> Self {
        let present: Vec<bool> = (0..classes).map(|c| ys.contains(&c)).collect();
        let single = present.iter().filter(|&&p| p).count() == 1;
        let per_class = (0..classes)
            .map(|c| {
                if !present[c] {
                    return None;
                }
                if single {
                    return Some(BinaryHinge {
                        weights: SparseVector::from_map(Default::default(), xs[0].dimension),
                        bias: 1.0,
                    });
                }
                let signs: Vec<f64> = ys.iter().map(|&y| if y == c { 1.0 } else { -1.0 }).collect();
                Some(BinaryHinge::fit(xs, &signs, params, seed.wrapping_add(c as u64)))
            })
            .collect();
        LinearSvm { classes, per_class }
    }

    pub fn margins(&self, x: &SparseVector) -> Vec<Option<f64>> {
        self.per_class.iter().map(|m| m.as_ref().map(|m| m.margin(x))).collect()
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let logits: Vec<f64> = self
            .margins(x)
            .into_iter()
            .map(|m| m.unwrap_or(f64::NEG_INFINITY))
            .collect();
        softmax(&logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_two_class_training_accuracy() {
        let xs: Vec<SparseVector> = (0..40)
            .map(|i| {
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                SparseVector::from_dense(&[side * (1.0 + (i % 5) as f64 * 0.3), (i % 7) as f64 * 0.1])
            })
            .collect();
        let ys: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let svm = LinearSvm::fit(&xs, &ys, 2, &SvmParams::default(), 1);
        for (x, &y) in xs.iter().zip(&ys) {
            let p = svm.predict_proba(x);
            assert!(p[y] > p[1 - y], "sample {x:?}");
        }
    }

    #[test]
    fn missing_class_probability_zero() {
        let xs: Vec<SparseVector> = (0..6).map(|i| SparseVector::from_dense(&[i as f64, 1.0])).collect();
        let ys = [0, 0, 0, 2, 2, 2];
        let svm = LinearSvm::fit(&xs, &ys, 4, &SvmParams::default(), 0);
        let p = svm.predict_proba(&xs[0]);
        assert_eq!((p[1], p[3]), (0.0, 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
