//! Single-layer LSTM regressor with a linear head, trained by full
//! backpropagation through time and Adam.
//!
//! Parameters live in one flat vector: the gate matrix `W` (4H rows of
//! `[x; h]`, gate order input, forget, cell, output), the gate bias (4H),
//! the head weights (H) and the head bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmParams {
    pub hidden: usize,
    pub lookback: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for LstmParams {
    fn default() -> Self {
        LstmParams {
            hidden: 32,
            lookback: 48,
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            clip_norm: Some(5.0),
        }
    }
}

impl LstmParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.lookback == 0 || self.batch_size == 0 {
            return Err(Error::Param("hidden size, lookback and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Param(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Param("clip norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNet {
    pub input_dim: usize,
    pub hidden: usize,
    pub weights: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct Step {
    xh: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmNet {
    pub fn n_params(input_dim: usize, hidden: usize) -> usize {
        4 * hidden * (input_dim + hidden) + 4 * hidden + hidden + 1
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases except a forget
    /// bias of 1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut weights: Vec<f64> = (0..Self::n_params(input_dim, hidden))
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let net_w = 4 * hidden * (input_dim + hidden);
        for k in 0..4 * hidden {
            weights[net_w + k] = if (hidden..2 * hidden).contains(&k) { 1.0 } else { 0.0 };
        }
        let last = weights.len() - 1;
        weights[last] = 0.0;
        LstmNet { input_dim, hidden, weights }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w = 4 * self.hidden * (self.input_dim + self.hidden);
        (w, w + 4 * self.hidden, w + 5 * self.hidden)
    }

    fn forward(&self, seq: &[f64]) -> (Vec<Step>, f64) {
        let (i_dim, h_dim) = (self.input_dim, self.hidden);
        let k_dim = i_dim + h_dim;
        let (b_off, wy_off, by_off) = self.offsets();
        let w = &self.weights;
        let steps = seq.len() / i_dim;
        let mut h = vec![0.0; h_dim];
        let mut c = vec![0.0; h_dim];
        let mut cache = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut xh = Vec::with_capacity(k_dim);
            xh.extend_from_slice(&seq[t * i_dim..(t + 1) * i_dim]);
            xh.extend_from_slice(&h);
            let mut gates = w[b_off..b_off + 4 * h_dim].to_vec();
            for (r, z) in gates.iter_mut().enumerate() {
                let row = &w[r * k_dim..(r + 1) * k_dim];
                *z += row.iter().zip(&xh).map(|(a, b)| a * b).sum::<f64>();
            }
            for (r, z) in gates.iter_mut().enumerate() {
                *z = if (2 * h_dim..3 * h_dim).contains(&r) { z.tanh() } else { sigmoid(*z) };
            }
            let mut tanh_c = vec![0.0; h_dim];
            for u in 0..h_dim {
                let (ig, fg, gg, og) = (gates[u], gates[h_dim + u], gates[2 * h_dim + u], gates[3 * h_dim + u]);
                c[u] = fg * c[u] + ig * gg;
                tanh_c[u] = c[u].tanh();
                h[u] = og * tanh_c[u];
            }
            cache.push(Step {
                xh,
                gates,
                c: c.clone(),
                tanh_c,
            });
        }
        let y = w[by_off] + w[wy_off..wy_off + h_dim].iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        (cache, y)
    }

    /// Output for one window of `lookback × input_dim` values.
    pub fn predict(&self, seq: &[f64]) -> f64 {
        self.forward(seq).1
    }

    /// Adds `scale * d(output)/d(weights)` into `grad` by BPTT.
    fn backward(&self, cache: &[Step], scale: f64, grad: &mut [f64]) {
        let (i_dim, h_dim) = (self.input_dim, self.hidden);
        let k_dim = i_dim + h_dim;
        let (b_off, wy_off, by_off) = self.offsets();
        let w = &self.weights;
        let last = cache.last().expect("non-empty window");
        for u in 0..h_dim {
            grad[wy_off + u] += scale * last.gates[3 * h_dim + u] * last.tanh_c[u];
        }
        grad[by_off] += scale;
        let mut dh: Vec<f64> = w[wy_off..wy_off + h_dim].iter().map(|v| v * scale).collect();
        let mut dc = vec![0.0; h_dim];
        let mut dz = vec![0.0; 4 * h_dim];
        for t in (0..cache.len()).rev() {
            let s = &cache[t];
            for u in 0..h_dim {
                let (ig, fg, gg, og) = (s.gates[u], s.gates[h_dim + u], s.gates[2 * h_dim + u], s.gates[3 * h_dim + u]);
                let c_prev = if t > 0 { cache[t - 1].c[u] } else { 0.0 };
                let tc = s.tanh_c[u];
                let d_o = dh[u] * tc;
                dc[u] += dh[u] * og * (1.0 - tc * tc);
                let (d_i, d_g, d_f) = (dc[u] * gg, dc[u] * ig, dc[u] * c_prev);
                dz[u] = d_i * ig * (1.0 - ig);
                dz[h_dim + u] = d_f * fg * (1.0 - fg);
                dz[2 * h_dim + u] = d_g * (1.0 - gg * gg);
                dz[3 * h_dim + u] = d_o * og * (1.0 - og);
                dc[u] *= fg;
            }
            let mut dxh = vec![0.0; k_dim];
            for (r, &d) in dz.iter().enumerate() {
                grad[b_off + r] += d;
                if d == 0.0 {
                    continue;
                }
                let g_row = &mut grad[r * k_dim..(r + 1) * k_dim];
                for (g, x) in g_row.iter_mut().zip(&s.xh) {
                    *g += d * x;
                }
                for (acc, wv) in dxh.iter_mut().zip(&w[r * k_dim..(r + 1) * k_dim]) {
                    *acc += d * wv;
                }
            }
            dh.copy_from_slice(&dxh[i_dim..]);
        }
    }

    /// Mean squared error over the windows and its gradient. Windows are
    /// processed in parallel and summed in input order.
    pub fn loss_and_gradient(&self, windows: &[&[f64]], targets: &[f64]) -> (f64, Vec<f64>) {
        let n = windows.len() as f64;
        let parts = exec::map_range(windows.len(), |k| {
            let (cache, y) = self.forward(windows[k]);
            let err = y - targets[k];
            let mut g = vec![0.0; self.weights.len()];
            self.backward(&cache, 2.0 * err / n, &mut g);
            (err * err, g)
        });
        let mut grad = vec![0.0; self.weights.len()];
        let mut loss = 0.0;
        for (sq, g) in parts {
            loss += sq;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (loss / n, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub lookback: usize,
    pub net: LstmNet,
    /// Mean training loss per epoch (scaled units).
    pub epoch_loss: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, weights: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let (c1, c2) = (1.0 - Self::B1.powi(self.t), 1.0 - Self::B2.powi(self.t));
        for k in 0..weights.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            weights[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains on windows of `seq` (row-major, `input_dim` values per step).
/// The window ending at step `j` covers steps `j + 1 - lookback ..= j` and
/// is fitted to `targets[j]`.
pub fn train_lstm(seq: &[f64], input_dim: usize, targets: &[f64], window_ends: &[usize], params: &LstmParams, seed: u64) -> Result<Lstm> {
    params.validate()?;
    let l = params.lookback;
    if input_dim == 0 || seq.len() != targets.len() * input_dim {
        return Err(Error::Input("sequence and target lengths disagree".into()));
    }
    if window_ends.is_empty() {
        return Err(Error::Input(format!("sequence too short for lookback {l}: need at least {} consecutive rows", l + 1)));
    }
    if let Some(&j) = window_ends.iter().find(|&&j| j + 1 < l || j >= targets.len()) {
        return Err(Error::Input(format!("window ending at {j} falls outside the sequence")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = LstmNet::init(input_dim, params.hidden, &mut rng);
    let mut adam = Adam {
        m: vec![0.0; net.weights.len()],
        v: vec![0.0; net.weights.len()],
        t: 0,
    };
    let mut order = window_ends.to_vec();
    let mut epoch_loss = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut total = 0.0;
        for batch in order.chunks(params.batch_size) {
            let windows: Vec<&[f64]> = batch.iter().map(|&j| &seq[(j + 1 - l) * input_dim..(j + 1) * input_dim]).collect();
            let ys: Vec<f64> = batch.iter().map(|&j| targets[j]).collect();
            let (loss, mut grad) = net.loss_and_gradient(&windows, &ys);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * batch.len() as f64;
            if let Some(clip) = params.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > clip {
                    grad.iter_mut().for_each(|g| *g *= clip / norm);
                }
            }
            adam.step(&mut net.weights, &grad, params.learning_rate);
        }
        let mean = total / order.len() as f64;
        if !mean.is_finite() || net.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        epoch_loss.push(mean);
    }
    Ok(Lstm {
        lookback: l,
        net,
        epoch_loss,
    })
}

impl Lstm {
    /// Prediction for the window ending at step `j` of `seq`.
    pub fn predict_at(&self, seq: &[f64], j: usize) -> Option<f64> {
        let d = self.net.input_dim;
        (j + 1 >= self.lookback && (j + 1) * d <= seq.len()).then(|| self.net.predict(&seq[(j + 1 - self.lookback) * d..(j + 1) * d]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (LstmNet, Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = LstmNet::init(2, 3, &mut rng);
        for w in net.weights.iter_mut() {
            *w *= 2.0;
        }
        let windows: Vec<Vec<f64>> = (0..3).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        (net, windows, vec![0.3, -0.5, 0.9])
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (net, windows, targets) = toy();
        let refs: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
        let (_, grad) = net.loss_and_gradient(&refs, &targets);
        let h = 1e-4;
        for k in 0..net.weights.len() {
            let mut plus = net.clone();
            plus.weights[k] += h;
            let mut minus = net.clone();
            minus.weights[k] -= h;
            let fd = (plus.loss_and_gradient(&refs, &targets).0 - minus.loss_and_gradient(&refs, &targets).0) / (2.0 * h);
            let denom = grad[k].abs().max(fd.abs()).max(1e-7);
            assert!((grad[k] - fd).abs() / denom < 1e-4, "param {k}: analytic {} vs numeric {fd}", grad[k]);
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let seq: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let targets = seq.clone();
        let ends: Vec<usize> = (4..39).collect();
        let params = LstmParams {
            hidden: 4,
            lookback: 5,
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        };
        let a = train_lstm(&seq, 1, &targets, &ends, &params, 11).unwrap();
        let b = train_lstm(&seq, 1, &targets, &ends, &params, 11).unwrap();
        assert!(a.net.weights.iter().zip(&b.net.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn too_short_is_input_error() {
        let params = LstmParams {
            lookback: 5,
            ..Default::default()
        };
        assert!(matches!(train_lstm(&[0.0; 4], 1, &[0.0; 4], &[], &params, 0), Err(Error::Input(_))));
    }

    #[test]
    fn huge_rate_diverges_with_epoch() {
        let seq: Vec<f64> = (0..30).map(|i| (i as f64) * 1e200).collect();
        let ends: Vec<usize> = (2..30).collect();
        let params = LstmParams {
            hidden: 2,
            lookback: 3,
            epochs: 2,
            clip_norm: None,
            ..Default::default()
        };
        assert!(matches!(train_lstm(&seq, 1, &seq, &ends, &params, 0), Err(Error::Diverged { epoch: 0, .. })));
    }
}
