//! Single-hidden-layer feedforward network with tanh activation, softmax
//! output, cross-entropy loss and an Adam optimizer. Small enough to stay
//! dependency-free and fully deterministic.

use rand::Rng;

/// Dense network parameters. Weight matrices are row-major:
/// `w1[h * input + i]` connects input `i` to hidden unit `h`, and
/// `w2[o * hidden + h]` connects hidden unit `h` to output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl FeedForward {
    pub fn zeroed(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Uniform Xavier/Glorot initialization.
    pub fn glorot<R: Rng>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut net = Self::zeroed(input, hidden, output);
        let lim1 = (6.0 / (input + hidden) as f64).sqrt();
        for w in &mut net.w1 {
            *w = rng.random_range(-lim1..lim1);
        }
        let lim2 = (6.0 / (hidden + output) as f64).sqrt();
        for w in &mut net.w2 {
            *w = rng.random_range(-lim2..lim2);
        }
        net
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Forward pass. `dropout_mask`, when present, scales hidden activations
    /// (inverted dropout, so inference needs no rescaling).
    pub fn forward(&self, x: &[f64], dropout_mask: Option<&[f64]>) -> ForwardPass {
        debug_assert_eq!(x.len(), self.input);
        let mut hidden_act = vec![0.0; self.hidden];
        for h in 0..self.hidden {
            let mut z = self.b1[h];
            let row = &self.w1[h * self.input..(h + 1) * self.input];
            for (wi, xi) in row.iter().zip(x) {
                z += wi * xi;
            }
            let mut a = z.tanh();
            if let Some(mask) = dropout_mask {
                a *= mask[h];
            }
            hidden_act[h] = a;
        }
        let mut logits = vec![0.0; self.output];
        for (o, logit) in logits.iter_mut().enumerate() {
            let mut z = self.b2[o];
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            for (wi, hi) in row.iter().zip(&hidden_act) {
                z += wi * hi;
            }
            *logit = z;
        }
        let probs = softmax(&logits);
        ForwardPass {
            hidden_act,
            logits,
            probs,
        }
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x, None).probs
    }

    /// Accumulate gradients of cross-entropy at one example into `grads`.
    /// Returns the per-example loss. The same dropout mask must be passed
    /// as was used in the forward pass.
    pub fn backward(
        &self,
        x: &[f64],
        target_class: usize,
        fwd: &ForwardPass,
        dropout_mask: Option<&[f64]>,
        grads: &mut Gradients,
    ) -> f64 {
        // d loss / d logits for softmax + cross-entropy.
        let mut dlogits = fwd.probs.clone();
        dlogits[target_class] -= 1.0;

        for (o, dlogit) in dlogits.iter().enumerate() {
            grads.b2[o] += dlogit;
            for h in 0..self.hidden {
                grads.w2[o * self.hidden + h] += dlogit * fwd.hidden_act[h];
            }
        }

        for h in 0..self.hidden {
            let mut dh = 0.0;
            for (o, dlogit) in dlogits.iter().enumerate() {
                dh += dlogit * self.w2[o * self.hidden + h];
            }
            if let Some(mask) = dropout_mask {
                dh *= mask[h];
            }
            // hidden_act = tanh(z) * mask; recover tanh(z) to differentiate.
            let a = match dropout_mask {
                Some(mask) if mask[h] == 0.0 => 0.0,
                Some(mask) => fwd.hidden_act[h] / mask[h],
                None => fwd.hidden_act[h],
            };
            let dz = dh * (1.0 - a * a);
            grads.b1[h] += dz;
            for (i, xi) in x.iter().enumerate() {
                grads.w1[h * self.input + i] += dz * xi;
            }
        }

        cross_entropy(&fwd.probs, target_class)
    }

    /// Sum of squared weights (biases excluded), used for L2 regularization.
    pub fn weight_norm_sq(&self) -> f64 {
        self.w1.iter().chain(self.w2.iter()).map(|w| w * w).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub hidden_act: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Cross-entropy `-ln p[class]`, clamped away from log(0).
pub fn cross_entropy(probs: &[f64], class: usize) -> f64 {
    -(probs[class].max(1e-300)).ln()
}

/// Gradient accumulator shaped like a [`FeedForward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeroed_like(net: &FeedForward) -> Self {
        Self {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    pub fn reset(&mut self) {
        for g in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *g = 0.0;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *g *= factor;
        }
    }

    /// Add `lambda * w` terms for L2 weight decay (weights only).
    pub fn add_weight_decay(&mut self, net: &FeedForward, lambda: f64) {
        for (g, w) in self.w1.iter_mut().zip(&net.w1) {
            *g += lambda * w;
        }
        for (g, w) in self.w2.iter_mut().zip(&net.w2) {
            *g += lambda * w;
        }
    }
}

/// Adam optimizer state (first/second moment estimates per parameter).
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(lr: f64, net: &FeedForward) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Gradients::zeroed_like(net),
            v: Gradients::zeroed_like(net),
        }
    }

    pub fn step(&mut self, net: &mut FeedForward, grads: &Gradients) {
        self.t += 1;
        let bias1 = 1.0 - self.beta1.powi(self.t as i32);
        let bias2 = 1.0 - self.beta2.powi(self.t as i32);
        let lr = self.lr;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..param.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        update(&mut net.w1, &grads.w1, &mut self.m.w1, &mut self.v.w1);
        update(&mut net.b1, &grads.b1, &mut self.m.b1, &mut self.v.b1);
        update(&mut net.w2, &grads.w2, &mut self.m.w2, &mut self.v.w2);
        update(&mut net.b2, &grads.b2, &mut self.m.b2, &mut self.v.b2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zero_network_outputs_uniform_probabilities() {
        let net = FeedForward::zeroed(6, 8, 2);
        let p = net.probabilities(&[0.3, -1.0, 2.0, 0.0, 0.5, -0.2]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one_over_random_draws() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let net = FeedForward::glorot(6, 8, 2, &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-4.0..4.0)).collect();
            let p = net.probabilities(&x);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(p.iter().all(|q| *q >= 0.0));
        }
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0, 998.0]);
        assert!(p[0].is_finite() && p[1].is_finite());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    /// Central-difference gradient check of cross-entropy plus L2 decay
    /// over random configurations.
    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let lambda = 1e-4;
        for case in 0..100 {
            let mut net = FeedForward::glorot(6, 5, 2, &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let class = usize::from(rng.random_bool(0.5));

            let mut grads = Gradients::zeroed_like(&net);
            let fwd = net.forward(&x, None);
            net.backward(&x, class, &fwd, None, &mut grads);
            grads.add_weight_decay(&net, lambda);

            let loss_at = |net: &FeedForward| {
                cross_entropy(&net.forward(&x, None).probs, class)
                    + 0.5 * lambda * net.weight_norm_sq()
            };

            let h = 1e-6;
            // Check a deterministic sample of parameters in every tensor.
            for idx in [0usize, 7, 13, 29] {
                for tensor in 0..4 {
                    let (len, analytic) = match tensor {
                        0 => (net.w1.len(), grads.w1.as_slice()),
                        1 => (net.b1.len(), grads.b1.as_slice()),
                        2 => (net.w2.len(), grads.w2.as_slice()),
                        _ => (net.b2.len(), grads.b2.as_slice()),
                    };
                    let i = idx % len;
                    let a = analytic[i];
                    fn param_mut(n: &mut FeedForward, tensor: usize, i: usize) -> &mut f64 {
                        match tensor {
                            0 => &mut n.w1[i],
                            1 => &mut n.b1[i],
                            2 => &mut n.w2[i],
                            _ => &mut n.b2[i],
                        }
                    }
                    let orig = *param_mut(&mut net, tensor, i);
                    *param_mut(&mut net, tensor, i) = orig + h;
                    let plus = loss_at(&net);
                    *param_mut(&mut net, tensor, i) = orig - h;
                    let minus = loss_at(&net);
                    *param_mut(&mut net, tensor, i) = orig;
                    let numeric = (plus - minus) / (2.0 * h);
                    let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
                    assert!(
                        rel < 1e-5,
                        "case {case} tensor {tensor} idx {i}: analytic={a} numeric={numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn adam_with_zero_learning_rate_leaves_weights_unchanged() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut net = FeedForward::glorot(6, 8, 2, &mut rng);
        let before = net.clone();
        let mut adam = Adam::new(0.0, &net);
        let x = [0.5, -0.25, 1.0, 0.0, 2.0, -1.0];
        for _ in 0..10 {
            let mut grads = Gradients::zeroed_like(&net);
            let fwd = net.forward(&x, None);
            net.backward(&x, 0, &fwd, None, &mut grads);
            adam.step(&mut net, &grads);
        }
        assert_eq!(net, before);
    }

    #[test]
    fn adam_reduces_loss_on_a_fixed_example() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut net = FeedForward::glorot(6, 8, 2, &mut rng);
        let mut adam = Adam::new(1e-2, &net);
        let x = [1.0, -0.5, 0.25, 2.0, -1.5, 0.75];
        let initial = cross_entropy(&net.probabilities(&x), 1);
        for _ in 0..200 {
            let mut grads = Gradients::zeroed_like(&net);
            let fwd = net.forward(&x, None);
            net.backward(&x, 1, &fwd, None, &mut grads);
            adam.step(&mut net, &grads);
        }
        let trained = cross_entropy(&net.probabilities(&x), 1);
        assert!(trained < initial * 0.1, "{initial} -> {trained}");
    }

    #[test]
    fn dropout_mask_zeroes_hidden_units() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let net = FeedForward::glorot(6, 4, 2, &mut rng);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let mask = vec![0.0, 1.25, 0.0, 1.25];
        let fwd = net.forward(&x, Some(&mask));
        assert_eq!(fwd.hidden_act[0], 0.0);
        assert_eq!(fwd.hidden_act[2], 0.0);
    }
}
