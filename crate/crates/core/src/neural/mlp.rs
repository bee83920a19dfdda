//! Fully-connected network with rectifier hidden layers and a linear head,
//! trained by plain SGD on per-action squared error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::Features;
use super::kernels::{axpy, dot, gather_rows, masked_dots, outer_acc, rows_times};
use super::NeuralError;

/// Weights are stored input-major: row `i` holds the fan-out of input `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn xavier<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            w: (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect(),
            b: vec![0.0; outputs],
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.outputs..(i + 1) * self.outputs]
    }

    #[inline]
    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.w[input * self.outputs + output]
    }

    fn forward_dense(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.b);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), out);
            }
        }
    }

    fn forward_sparse(&self, x: &Features, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.b);
        gather_rows(&x.idx, &x.val, &self.w, out);
    }

    fn unit(&self, x: &[f64], j: usize) -> f64 {
        let mut s = self.b[j];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                s += xi * self.w[i * self.outputs + j];
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

impl Mlp {
    /// `sizes` lists the input width, every hidden width and the output width.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        Self {
            layers: sizes.windows(2).map(|w| Layer::xavier(w[0], w[1], rng)).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NeuralError> {
        if layers.is_empty() {
            return Err(NeuralError::Shape("no layers".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.w.len() != l.inputs * l.outputs || l.b.len() != l.outputs {
                return Err(NeuralError::Shape(format!("layer {k} buffers do not match its sizes")));
            }
            if k > 0 && layers[k - 1].outputs != l.inputs {
                return Err(NeuralError::Shape(format!("layer {k} input width mismatch")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Every parameter in a fixed order: per layer, weights then biases.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied())
    }

    pub fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.w.len() {
                return &mut l.w[k];
            }
            k -= l.w.len();
            if k < l.b.len() {
                return &mut l.b[k];
            }
            k -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    /// Activations of the last hidden layer; the dense input when the
    /// network has no hidden layer.
    pub fn hidden(&self, x: &Features) -> Vec<f64> {
        let mut cur = Vec::new();
        let mut next = Vec::new();
        self.hidden_into(x, &mut cur, &mut next);
        cur
    }

    fn hidden_into(&self, x: &Features, cur: &mut Vec<f64>, next: &mut Vec<f64>) {
        let n = self.layers.len();
        if n == 1 {
            *cur = x.to_dense(self.input_dim());
            return;
        }
        self.layers[0].forward_sparse(x, cur);
        relu(cur);
        for l in &self.layers[1..n - 1] {
            l.forward_dense(cur, next);
            relu(next);
            std::mem::swap(cur, next);
        }
    }

    /// Output layer applied to last-hidden activations.
    pub fn head(&self, h: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.layers.last().unwrap().forward_dense(h, &mut out);
        out
    }

    pub fn forward(&self, x: &Features) -> Vec<f64> {
        self.head(&self.hidden(x))
    }

    pub fn forward_dense(&self, x: &[f64]) -> Vec<f64> {
        self.forward(&Features::from_dense(x))
    }

    /// Replaces the output unit `j` with the given weights and bias.
    pub fn set_output_unit(&mut self, j: usize, weights: &[f64], bias: f64) {
        let l = self.layers.last_mut().unwrap();
        assert_eq!(weights.len(), l.inputs);
        for (i, &w) in weights.iter().enumerate() {
            l.w[i * l.outputs + j] = w;
        }
        l.b[j] = bias;
    }

    /// Batch loss `(1/m) Σ_j (y_j − f(x_j)[a_j])²`.
    pub fn loss(&self, xs: &[&Features], actions: &[usize], targets: &[f64]) -> f64 {
        let mut cur = Vec::new();
        let mut next = Vec::new();
        let mut s = 0.0;
        for ((x, &a), &y) in xs.iter().zip(actions).zip(targets) {
            self.hidden_into(x, &mut cur, &mut next);
            let d = y - self.layers.last().unwrap().unit(&cur, a);
            s += d * d;
        }
        s / xs.len() as f64
    }

    /// Fills `ws` with the gradient of [`Mlp::loss`] and returns the loss.
    ///
    /// Samples with identical inputs share one pass through the hidden layers.
    pub fn gradient(&self, xs: &[&Features], actions: &[usize], targets: &[f64], ws: &mut Workspace) -> f64 {
        assert_eq!(xs.len(), actions.len());
        assert_eq!(xs.len(), targets.len());
        assert!(!xs.is_empty(), "empty batch");
        ws.prepare(self);
        let m = xs.len();
        let n = self.layers.len();
        let last = &self.layers[n - 1];
        if n == 1 {
            let mut loss = 0.0;
            for ((x, &a), &y) in xs.iter().zip(actions).zip(targets) {
                let mut pred = last.b[a];
                for (&i, &v) in x.idx.iter().zip(&x.val) {
                    pred += v * last.weight(i as usize, a);
                }
                let err = y - pred;
                loss += err * err;
                let g = -2.0 * err / m as f64;
                ws.grads[0].b[a] += g;
                for (&i, &v) in x.idx.iter().zip(&x.val) {
                    let i = i as usize;
                    ws.grads[0].w[i * last.outputs + a] += g * v;
                    ws.touch(i);
                }
            }
            return loss / m as f64;
        }

        // The backward pass is linear in the top delta, so deltas of
        // identical inputs can be summed before it.
        ws.group_of.clear();
        ws.reps.clear();
        for (s, x) in xs.iter().enumerate() {
            let found = ws.reps.iter().position(|&r| {
                let y = xs[r];
                y.key == x.key && y.idx == x.idx && y.val == x.val
            });
            ws.group_of.push(found.unwrap_or_else(|| {
                ws.reps.push(s);
                ws.reps.len() - 1
            }));
        }
        let groups = ws.reps.len();

        // Forward, keeping every hidden activation as a groups × width block.
        for k in 0..n - 1 {
            let layer = &self.layers[k];
            let w = layer.outputs;
            let (done, rest) = ws.acts.split_at_mut(k);
            let out = &mut rest[0];
            out.clear();
            for _ in 0..groups {
                out.extend_from_slice(&layer.b);
            }
            if k == 0 {
                for (g, &r) in ws.reps.iter().enumerate() {
                    let x = xs[r];
                    gather_rows(&x.idx, &x.val, &layer.w, &mut out[g * w..(g + 1) * w]);
                }
            } else {
                rows_times(&done[k - 1], &layer.w, out, groups, layer.inputs, w);
            }
            relu(out);
        }

        // Output unit of each sample; deltas are summed per group.
        let hw = last.inputs;
        let mut loss = 0.0;
        ws.delta.clear();
        ws.delta.resize(groups * hw, 0.0);
        for (s, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let grp = ws.group_of[s];
            let h = &ws.acts[n - 2][grp * hw..(grp + 1) * hw];
            let err = y - last.unit(h, a);
            loss += err * err;
            let g = -2.0 * err / m as f64;
            ws.grads[n - 1].b[a] += g;
            let gw = &mut ws.grads[n - 1].w;
            let d = &mut ws.delta[grp * hw..(grp + 1) * hw];
            for (i, &hi) in h.iter().enumerate() {
                if hi > 0.0 {
                    gw[i * last.outputs + a] += g * hi;
                    d[i] += g * last.w[i * last.outputs + a];
                }
            }
        }

        // Hidden layers, top down; `delta` is dL/d(pre-activation).
        for k in (1..n - 1).rev() {
            let layer = &self.layers[k];
            let (fan_in, w) = (layer.inputs, layer.outputs);
            let input = &ws.acts[k - 1];
            let gl = &mut ws.grads[k];
            for g in 0..groups {
                axpy(1.0, &ws.delta[g * w..(g + 1) * w], &mut gl.b);
            }
            outer_acc(input, &ws.delta, &mut gl.w, groups, fan_in, w);
            ws.delta_prev.clear();
            ws.delta_prev.resize(groups * fan_in, 0.0);
            masked_dots(&ws.delta, &layer.w, input, &mut ws.delta_prev, groups, fan_in, w);
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
        let w0 = self.layers[0].outputs;
        for (g, &r) in ws.reps.iter().enumerate() {
            let x = xs[r];
            let d = &ws.delta[g * w0..(g + 1) * w0];
            axpy(1.0, d, &mut ws.grads[0].b);
            for (&i, &v) in x.idx.iter().zip(&x.val) {
                let i = i as usize;
                axpy(v, d, &mut ws.grads[0].w[i * w0..(i + 1) * w0]);
                if !ws.touched_mask[i] {
                    ws.touched_mask[i] = true;
                    ws.touched.push(i);
                }
            }
        }
        loss / m as f64
    }

    /// One clipped SGD step on the batch. Returns the pre-step loss.
    pub fn train_step(
        &mut self,
        xs: &[&Features],
        actions: &[usize],
        targets: &[f64],
        lr: f64,
        clip_norm: f64,
        ws: &mut Workspace,
    ) -> Result<f64, NeuralError> {
        let loss = self.gradient(xs, actions, targets, ws);
        if !loss.is_finite() {
            return Err(NeuralError::NonFinite(format!("loss {loss}")));
        }
        let norm = ws.grad_norm();
        if !norm.is_finite() {
            return Err(NeuralError::NonFinite(format!("gradient norm {norm}")));
        }
        let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
        let step = -lr * scale;
        if step != 0.0 {
            let first_out = self.layers[0].outputs;
            for &i in &ws.touched {
                let r = i * first_out..(i + 1) * first_out;
                axpy(step, &ws.grads[0].w[r.clone()], &mut self.layers[0].w[r]);
            }
            for (k, l) in self.layers.iter_mut().enumerate() {
                if k > 0 {
                    axpy(step, &ws.grads[k].w, &mut l.w);
                }
                axpy(step, &ws.grads[k].b, &mut l.b);
            }
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, Default)]
struct LayerGrad {
    w: Vec<f64>,
    b: Vec<f64>,
}

/// Scratch buffers for gradient computation. The first layer's gradient is
/// tracked by touched rows so sparse inputs stay cheap.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    grads: Vec<LayerGrad>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    touched: Vec<usize>,
    touched_mask: Vec<bool>,
    group_of: Vec<usize>,
    reps: Vec<usize>,
    shape: Vec<usize>,
}

impl Workspace {
    fn prepare(&mut self, net: &Mlp) {
        let sizes = net.sizes();
        if self.shape != sizes {
            self.shape = sizes;
            self.acts = net.layers[..net.layers.len() - 1]
                .iter()
                .map(|l| Vec::with_capacity(l.outputs))
                .collect();
            self.grads = net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    w: vec![0.0; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect();
            self.touched.clear();
            self.touched_mask = vec![false; net.input_dim()];
            return;
        }
        let first_out = net.layers[0].outputs;
        for &i in &self.touched {
            self.grads[0].w[i * first_out..(i + 1) * first_out].fill(0.0);
            self.touched_mask[i] = false;
        }
        self.touched.clear();
        for (k, g) in self.grads.iter_mut().enumerate() {
            if k > 0 {
                g.w.fill(0.0);
            }
            g.b.fill(0.0);
        }
    }

    #[inline]
    fn touch(&mut self, i: usize) {
        if !self.touched_mask[i] {
            self.touched_mask[i] = true;
            self.touched.push(i);
        }
    }

    fn grad_norm(&self) -> f64 {
        let first_out = self.shape[1];
        let mut s = 0.0;
        for &i in &self.touched {
            let r = &self.grads[0].w[i * first_out..(i + 1) * first_out];
            s += dot(r, r);
        }
        for (k, g) in self.grads.iter().enumerate() {
            if k > 0 {
                s += dot(&g.w, &g.w);
            }
            s += dot(&g.b, &g.b);
        }
        s.sqrt()
    }

    /// The last computed gradient, flattened in [`Mlp::params`] order.
    pub fn flat_gradient(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|g| g.w.iter().chain(&g.b).copied()).collect()
    }
}
