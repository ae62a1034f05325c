//! One-hidden-layer ReLU network with a softmax output over sparse inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForward {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    // Row-major by input feature: w1[j * hidden + h].
    w1: Vec<f64>,
    b1: Vec<f64>,
    // Row-major by hidden unit: w2[h * outputs + k].
    w2: Vec<f64>,
    b2: Vec<f64>,
}

pub struct Activations {
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Accumulated gradient over a mini-batch; `w1` rows are only touched for
/// features present in the batch.
pub struct Gradient {
    w1: Vec<f64>,
    touched: Vec<usize>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl Gradient {
    pub fn zeros(net: &FeedForward) -> Self {
        Self {
            w1: vec![0.0; net.w1.len()],
            touched: Vec::new(),
            b1: vec![0.0; net.hidden],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.outputs],
        }
    }

    fn clear(&mut self, hidden: usize) {
        for &j in &self.touched {
            self.w1[j * hidden..(j + 1) * hidden].fill(0.0);
        }
        self.touched.clear();
        self.b1.fill(0.0);
        self.w2.fill(0.0);
        self.b2.fill(0.0);
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl FeedForward {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + outputs) as f64).sqrt();
        let w1 = (0..inputs * hidden).map(|_| rng.random_range(-a1..a1)).collect();
        let w2 = (0..hidden * outputs).map(|_| rng.random_range(-a2..a2)).collect();
        Self {
            inputs,
            hidden,
            outputs,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flattened parameters in the order w1, b1, w2, b2.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1[..], &self.w2[..], &self.b2[..]].concat()
    }

    pub fn from_parameters(inputs: usize, hidden: usize, outputs: usize, params: &[f64]) -> Self {
        assert_eq!(params.len(), inputs * hidden + hidden + hidden * outputs + outputs);
        let (w1, rest) = params.split_at(inputs * hidden);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(hidden * outputs);
        Self {
            inputs,
            hidden,
            outputs,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: b2.to_vec(),
        }
    }

    pub fn forward(&self, x: &SparseVector) -> Activations {
        let h = self.hidden;
        let mut pre_hidden = self.b1.clone();
        for &(j, v) in &x.entries {
            let row = &self.w1[j * h..(j + 1) * h];
            for (acc, w) in pre_hidden.iter_mut().zip(row) {
                *acc += v * w;
            }
        }
        let hidden: Vec<f64> = pre_hidden.iter().map(|&z| z.max(0.0)).collect();
        let mut logits = self.b2.clone();
        for (hi, &a) in hidden.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.w2[hi * self.outputs..(hi + 1) * self.outputs];
            for (acc, w) in logits.iter_mut().zip(row) {
                *acc += a * w;
            }
        }
        Activations {
            pre_hidden,
            hidden,
            probs: softmax(&logits),
        }
    }

    /// Adds d(loss)/d(params) for one example to `grad`; returns the
    /// cross-entropy loss.
    pub fn accumulate(&self, x: &SparseVector, label: usize, grad: &mut Gradient) -> f64 {
        let act = self.forward(x);
        let loss = -act.probs[label].max(f64::MIN_POSITIVE).ln();
        let mut delta_out = act.probs.clone();
        delta_out[label] -= 1.0;

        let mut delta_hidden = vec![0.0; self.hidden];
        for hi in 0..self.hidden {
            let a = act.hidden[hi];
            let w_row = &self.w2[hi * self.outputs..(hi + 1) * self.outputs];
            let g_row = &mut grad.w2[hi * self.outputs..(hi + 1) * self.outputs];
            let mut back = 0.0;
            for k in 0..self.outputs {
                g_row[k] += a * delta_out[k];
                back += w_row[k] * delta_out[k];
            }
            if act.pre_hidden[hi] > 0.0 {
                delta_hidden[hi] = back;
            }
        }
        for (g, d) in grad.b2.iter_mut().zip(&delta_out) {
            *g += d;
        }
        for (g, d) in grad.b1.iter_mut().zip(&delta_hidden) {
            *g += d;
        }
        let h = self.hidden;
        for &(j, v) in &x.entries {
            if !grad.touched.contains(&j) {
                grad.touched.push(j);
            }
            let g_row = &mut grad.w1[j * h..(j + 1) * h];
            for (g, d) in g_row.iter_mut().zip(&delta_hidden) {
                *g += v * d;
            }
        }
        loss
    }

    /// Loss and dense gradient in [`FeedForward::parameters`] order.
    pub fn loss_and_gradient(&self, x: &SparseVector, label: usize) -> (f64, Vec<f64>) {
        let mut grad = Gradient::zeros(self);
        let loss = self.accumulate(x, label, &mut grad);
        (loss, [&grad.w1[..], &grad.b1[..], &grad.w2[..], &grad.b2[..]].concat())
    }

    /// Plain gradient step with the batch-mean gradient, then clears `grad`.
    pub fn apply(&mut self, grad: &mut Gradient, learning_rate: f64, batch_len: usize) {
        let scale = learning_rate / batch_len as f64;
        let h = self.hidden;
        for &j in &grad.touched {
            let w_row = &mut self.w1[j * h..(j + 1) * h];
            for (w, g) in w_row.iter_mut().zip(&grad.w1[j * h..(j + 1) * h]) {
                *w -= scale * g;
            }
        }
        for (w, g) in self.b1.iter_mut().zip(&grad.b1) {
            *w -= scale * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grad.w2) {
            *w -= scale * g;
        }
        for (w, g) in self.b2.iter_mut().zip(&grad.b2) {
            *w -= scale * g;
        }
        grad.clear(h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_at(inputs: usize, hidden: usize, outputs: usize, params: &[f64], x: &SparseVector, label: usize) -> f64 {
        let net = FeedForward::from_parameters(inputs, hidden, outputs, params);
        -net.forward(x).probs[label].ln()
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // 1 input, 2 hidden, 2 classes: 2 + 2 + 4 + 2 = 10 parameters.
        let params = vec![0.7, -0.4, 0.3, 0.5, 1.2, -0.8, 0.6, 0.9, 0.1, -0.2];
        let net = FeedForward::from_parameters(1, 2, 2, &params);
        assert_eq!(net.parameter_count(), 10);
        let x = SparseVector {
            entries: vec![(0, 0.9)],
        };
        for label in 0..2 {
            let (_, analytic) = net.loss_and_gradient(&x, label);
            let eps = 1e-6;
            for i in 0..params.len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus[i] += eps;
                minus[i] -= eps;
                let numeric = (loss_at(1, 2, 2, &plus, &x, label) - loss_at(1, 2, 2, &minus, &x, label)) / (2.0 * eps);
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-8);
                let rel = (analytic[i] - numeric).abs() / scale;
                assert!(rel < 1e-4, "param {i}: analytic {} numeric {numeric}", analytic[i]);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, -3.0, 2.5, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v.is_finite()));
    }
}
