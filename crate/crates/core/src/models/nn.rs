//! Small dense networks trained with backpropagation and Adam.
//!
//! Hidden layers use ReLU with optional inverted dropout. The output layer is
//! either a softmax trained with cross-entropy or a single sigmoid unit
//! trained with binary cross-entropy; both losses are computed from logits.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Class(usize),
    Binary(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: OutputKind,
    /// Drop probability applied after every hidden activation while training.
    pub dropout: f64,
}

/// Gradients laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &Mlp) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }

    /// Flattened in the same order as [`Mlp::parameter`].
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn masked(logits: &mut [f64], mask: Option<&[bool]>) {
    if let Some(mask) = mask {
        for (z, &keep) in logits.iter_mut().zip(mask) {
            if !keep {
                *z = f64::NEG_INFINITY;
            }
        }
    }
}

impl Mlp {
    /// `sizes` lists the input width, every hidden width, then the output width.
    pub fn new(sizes: &[usize], output: OutputKind, dropout: f64, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        assert!(output == OutputKind::Softmax || sizes[sizes.len() - 1] == 1, "sigmoid output is a single unit");
        assert!((0.0..1.0).contains(&dropout), "dropout must lie in [0, 1)");
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
            output,
            dropout,
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    /// Output-layer pre-activations, without dropout.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.apply(&a);
            if i + 1 < self.layers.len() {
                a.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        a
    }

    /// Class distribution for softmax nets, `[P(y = 1)]` for sigmoid nets.
    pub fn predict(&self, x: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
        let mut z = self.logits(x);
        match self.output {
            OutputKind::Softmax => {
                masked(&mut z, mask);
                softmax(&z)
            }
            OutputKind::Sigmoid => vec![sigmoid(z[0])],
        }
    }

    /// Loss of one example and its gradient with respect to every parameter.
    /// Dropout is applied only when `dropout_rng` is given.
    pub fn loss_and_gradient(
        &self,
        x: &[f64],
        target: Target,
        mask: Option<&[bool]>,
        mut dropout_rng: Option<&mut Rng>,
    ) -> (f64, Gradients) {
        let last = self.layers.len() - 1;
        // activations[i] is the input of layer i.
        let mut activations = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut drop_masks: Vec<Option<Vec<f64>>> = Vec::with_capacity(last);
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&activations[i]);
            if i < last {
                let mut a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
                let dm = match dropout_rng.as_deref_mut() {
                    Some(rng) if self.dropout > 0.0 => {
                        let keep = 1.0 - self.dropout;
                        let m: Vec<f64> = (0..a.len())
                            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        a.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                        Some(m)
                    }
                    _ => None,
                };
                drop_masks.push(dm);
                activations.push(a);
            }
            pre.push(z);
        }

        let mut z = pre[last].clone();
        let (loss, mut delta) = match (self.output, target) {
            (OutputKind::Softmax, Target::Class(y)) => {
                masked(&mut z, mask);
                let p = softmax(&z);
                let mut d = p.clone();
                d[y] -= 1.0;
                (-p[y].max(f64::MIN_POSITIVE).ln(), d)
            }
            (OutputKind::Sigmoid, Target::Binary(y)) => {
                let z0 = z[0];
                let loss = z0.max(0.0) - z0 * y + (-z0.abs()).exp().ln_1p();
                (loss, vec![sigmoid(z0) - y])
            }
            _ => panic!("target does not match the output layer"),
        };

        let mut grads = Gradients::zeros(self);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &activations[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut grads.weights[i][o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                grads.bias[i][o] += d;
            }
            if i == 0 {
                break;
            }
            let mut back = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
            }
            let prev_pre = &pre[i - 1];
            for (j, b) in back.iter_mut().enumerate() {
                if prev_pre[j] <= 0.0 {
                    *b = 0.0;
                } else if let Some(m) = &drop_masks[i - 1] {
                    *b *= m[j];
                }
            }
            delta = back;
        }
        (loss, grads)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (i, l) in self.layers.iter().enumerate() {
            if index < l.weights.len() {
                return (i, true, index);
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return (i, false, index);
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index: layer by layer, weights then bias.
    pub fn parameter(&self, index: usize) -> f64 {
        let (l, is_weight, j) = self.locate(index);
        if is_weight {
            self.layers[l].weights[j]
        } else {
            self.layers[l].bias[j]
        }
    }

    pub fn set_parameter(&mut self, index: usize, value: f64) {
        let (l, is_weight, j) = self.locate(index);
        if is_weight {
            self.layers[l].weights[j] = value;
        } else {
            self.layers[l].bias[j] = value;
        }
    }

    /// One pass over the data in seeded shuffled mini-batches. Returns the
    /// mean training loss.
    pub fn train_epoch(
        &mut self,
        adam: &mut Adam,
        xs: &[Vec<f64>],
        targets: &[Target],
        mask: Option<&[bool]>,
        batch_size: usize,
        rng: &mut Rng,
    ) -> f64 {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(batch_size.max(1)) {
            let mut acc = Gradients::zeros(self);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (loss, g) = self.loss_and_gradient(&xs[i], targets[i], mask, Some(rng));
                total += loss;
                acc.add_scaled(&g, scale);
            }
            adam.step(self, &acc);
        }
        total / xs.len().max(1) as f64
    }

    /// Mean loss without dropout.
    pub fn mean_loss(&self, xs: &[Vec<f64>], targets: &[Target], mask: Option<&[bool]>) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(targets)
            .map(|(x, &t)| {
                let z = self.logits(x);
                match (self.output, t) {
                    (OutputKind::Softmax, Target::Class(y)) => {
                        let mut z = z;
                        masked(&mut z, mask);
                        -softmax(&z)[y].max(f64::MIN_POSITIVE).ln()
                    }
                    (OutputKind::Sigmoid, Target::Binary(y)) => {
                        z[0].max(0.0) - z[0] * y + (-z[0].abs()).exp().ln_1p()
                    }
                    _ => panic!("target does not match the output layer"),
                }
            })
            .sum();
        total / xs.len().max(1) as f64
    }
}

/// Adam with the usual defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        let g = grads.flat();
        if self.m.is_empty() {
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let mut idx = 0;
        for layer in &mut net.layers {
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                let gi = g[idx];
                self.m[idx] = self.beta1 * self.m[idx] + (1.0 - self.beta1) * gi;
                self.v[idx] = self.beta2 * self.v[idx] + (1.0 - self.beta2) * gi * gi;
                let m_hat = self.m[idx] / c1;
                let v_hat = self.v[idx] / c2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                idx += 1;
            }
        }
    }
}
