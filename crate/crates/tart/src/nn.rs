//! Minimal feed-forward networks with explicit backprop and Adam.
//!
//! Everything runs in f64 on flat parameter vectors. Networks here are tiny
//! (tens of units), so plain loops are fast enough and the flat layout makes
//! finite-difference verification and checkpointing straightforward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TartError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Act {
    Tanh,
    Relu,
}

impl Act {
    fn apply(self, x: f64) -> f64 {
        match self {
            Act::Tanh => x.tanh(),
            Act::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed in terms of the activation output.
    fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Act::Tanh => 1.0 - y * y,
            Act::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected network; hidden layers use `act`, output is linear.
///
/// Parameter layout per layer: weight matrix row-major (out x in), then bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub act: Act,
    pub params: Vec<f64>,
}

/// Forward-pass intermediates needed for backprop.
pub struct MlpCache {
    /// activations[0] = input, activations[l] = output of layer l.
    activations: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

impl Mlp {
    pub fn new<R: Rng>(sizes: Vec<usize>, act: Act, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2);
        let mut params = Vec::with_capacity(Self::param_count(&sizes));
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            for _ in 0..n_in * n_out {
                params.push(rng.gen_range(-bound..bound));
            }
            params.extend(std::iter::repeat(0.0).take(n_out));
        }
        Self { sizes, act, params }
    }

    pub fn param_count(sizes: &[usize]) -> usize {
        sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn in_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(TartError::DimensionMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cache(x).activations.pop().unwrap()
    }

    pub fn forward_cache(&self, x: &[f64]) -> MlpCache {
        assert_eq!(x.len(), self.in_dim(), "mlp input width");
        let n_layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let input = activations.last().unwrap();
            let mut out = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                for i in 0..n_in {
                    acc += row[i] * input[i];
                }
                out[o] = if l + 1 == n_layers {
                    acc
                } else {
                    self.act.apply(acc)
                };
            }
            activations.push(out);
        }
        MlpCache { activations }
    }

    /// Backpropagates `dout` (gradient w.r.t. the output), accumulating
    /// parameter gradients into `grad` (same layout as `params`) and
    /// returning the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        assert_eq!(dout.len(), self.out_dim());

        // Per-layer parameter offsets.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }

        let mut delta = dout.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let out_act = &cache.activations[l + 1];
            // Output layer is linear; hidden layers fold the activation
            // derivative into delta.
            if l + 1 != n_layers {
                for o in 0..n_out {
                    delta[o] *= self.act.deriv_from_output(out_act[o]);
                }
            }
            let input = &cache.activations[l];
            let base = offsets[l];
            let w = |o: usize, i: usize| self.params[base + o * n_in + i];
            for o in 0..n_out {
                let d = delta[o];
                let gw = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                for i in 0..n_in {
                    gw[i] += d * input[i];
                }
                grad[base + n_in * n_out + o] += d;
            }
            let mut dinput = vec![0.0; n_in];
            for i in 0..n_in {
                let mut acc = 0.0;
                for o in 0..n_out {
                    acc += w(o, i) * delta[o];
                }
                dinput[i] = acc;
            }
            delta = dinput;
        }
        delta
    }
}

/// Adam optimizer state over one flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grad.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&x| x - log_sum).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).iter().map(|&x| x.exp()).collect()
}

/// L2-normalizes `x`, returning the unit vector and the original norm.
pub fn normalize(x: &[f64]) -> (Vec<f64>, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    (x.iter().map(|v| v / norm).collect(), norm)
}

/// Backprop through `normalize`: given d/d(unit), returns d/dx.
pub fn normalize_backward(unit: &[f64], norm: f64, dunit: &[f64]) -> Vec<f64> {
    let dot: f64 = unit.iter().zip(dunit).map(|(u, d)| u * d).sum();
    unit.iter()
        .zip(dunit)
        .map(|(u, d)| (d - dot * u) / norm)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{finite_diff, max_rel_err};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for act in [Act::Tanh, Act::Relu] {
            let mlp = Mlp::new(vec![5, 7, 3], act, &mut rng);
            let x: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.7).collect();
            // Loss: sum of squared outputs.
            let loss = |params: &[f64]| {
                let m = Mlp {
                    sizes: mlp.sizes.clone(),
                    act,
                    params: params.to_vec(),
                };
                m.forward(&x).iter().map(|v| v * v).sum::<f64>()
            };
            let cache = mlp.forward_cache(&x);
            let dout: Vec<f64> = cache.output().iter().map(|v| 2.0 * v).collect();
            let mut grad = vec![0.0; mlp.n_params()];
            mlp.backward(&cache, &dout, &mut grad);
            let fd = finite_diff(&mlp.params, loss);
            assert!(max_rel_err(&grad, &fd) < 1e-5, "{act:?}");
        }
    }

    #[test]
    fn mlp_input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp = Mlp::new(vec![4, 6, 2], Act::Tanh, &mut rng);
        let x: Vec<f64> = vec![0.2, -0.5, 1.0, 0.1];
        let cache = mlp.forward_cache(&x);
        let dout: Vec<f64> = cache.output().iter().map(|v| 2.0 * v).collect();
        let mut grad = vec![0.0; mlp.n_params()];
        let dx = mlp.backward(&cache, &dout, &mut grad);
        let fd = finite_diff(&x, |xx| {
            mlp.forward(xx).iter().map(|v| v * v).sum::<f64>()
        });
        assert!(max_rel_err(&dx, &fd) < 1e-5);
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let x = vec![0.4, -1.2, 0.8];
        let w = vec![0.3, 0.9, -0.2];
        let loss = |xx: &[f64]| {
            let (u, _) = normalize(xx);
            u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        };
        let (u, norm) = normalize(&x);
        let dx = normalize_backward(&u, norm, &w);
        let fd = finite_diff(&x, loss);
        assert!(max_rel_err(&dx, &fd) < 1e-5);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, 2.0, -3.0, 0.5]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn adam_reduces_quadratic() {
        let mut params = vec![5.0, -3.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let grad: Vec<f64> = params.iter().map(|&p| 2.0 * p).collect();
            opt.step(&mut params, &grad);
        }
        assert!(params.iter().all(|p| p.abs() < 1e-2));
    }
}
