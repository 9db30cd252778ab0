//! A small fully connected critic network with exact analytic gradients
//! with respect to both parameters and input, plus a plain SGD updater.
//!
//! Hidden layers use the exponential linear unit (alpha = 1); the output
//! layer is linear with a single unit. Batches are processed as loops over
//! scalars with pairwise-summed gradient accumulation, so results are
//! bit-stable for a fixed sample order.

use crate::dist::Critic;
use crate::rng::seeded;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

fn elu_deriv(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

/// Weights are stored row-major per output unit: `w[out][in]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseNet {
    pub widths: Vec<usize>,
    pub layers: Vec<Layer>,
}

/// Exact derivatives of an upstream-scaled output with respect to every
/// parameter, plus the derivative with respect to the input (the generator
/// gradient routes through it).
#[derive(Debug, Clone)]
pub struct GradBundle {
    pub layers: Vec<Layer>,
    pub input_grad: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidWidths {
            reason: format!("need input and output widths, got {widths:?}"),
        });
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::InvalidWidths {
            reason: "zero-width layer".into(),
        });
    }
    if *widths.last().unwrap() != 1 {
        return Err(Error::InvalidWidths {
            reason: format!("output width must be 1, got {}", widths.last().unwrap()),
        });
    }
    Ok(())
}

impl DenseNet {
    /// Fan-balanced uniform initialization: weights from
    /// U(-s, s) with s = sqrt(6 / (fan_in + fan_out)), biases zero.
    pub fn init(widths: &[usize], seed: u64) -> Result<DenseNet> {
        check_widths(widths)?;
        let mut rng = seeded(seed);
        let layers = widths
            .windows(2)
            .map(|io| {
                let (n_in, n_out) = (io[0], io[1]);
                let scale = (6.0 / (n_in + n_out) as f64).sqrt();
                let w = (0..n_out)
                    .map(|_| {
                        (0..n_in)
                            .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * scale)
                            .collect()
                    })
                    .collect();
                Layer {
                    w,
                    b: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(DenseNet {
            widths: widths.to_vec(),
            layers,
        })
    }

    pub fn zeros(widths: &[usize]) -> Result<DenseNet> {
        check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|io| Layer {
                w: vec![vec![0.0; io[0]]; io[1]],
                b: vec![0.0; io[1]],
            })
            .collect();
        Ok(DenseNet {
            widths: widths.to_vec(),
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.iter().map(Vec::len).sum::<usize>() + l.b.len())
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim());
        let last = self.layers.len() - 1;
        let mut act = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.b.len());
            for (row, &bias) in layer.w.iter().zip(&layer.b) {
                let mut z = bias;
                for (wi, ai) in row.iter().zip(&act) {
                    z += wi * ai;
                }
                next.push(if l == last { z } else { elu(z) });
            }
            act = next;
        }
        act[0]
    }

    /// Output together with upstream-scaled exact gradients.
    pub fn forward_backward(&self, x: &[f64], upstream: f64) -> (f64, GradBundle) {
        debug_assert_eq!(x.len(), self.input_dim());
        let last = self.layers.len() - 1;

        // Forward pass, keeping pre-activations and activations.
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = acts.last().unwrap();
            let mut z = Vec::with_capacity(layer.b.len());
            for (row, &bias) in layer.w.iter().zip(&layer.b) {
                let mut s = bias;
                for (wi, ai) in row.iter().zip(prev) {
                    s += wi * ai;
                }
                z.push(s);
            }
            let a = if l == last {
                z.clone()
            } else {
                z.iter().map(|&v| elu(v)).collect()
            };
            pres.push(z);
            acts.push(a);
        }
        let output = acts.last().unwrap()[0];

        // Backward pass.
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                w: l.w.iter().map(|row| vec![0.0; row.len()]).collect(),
                b: vec![0.0; l.b.len()],
            })
            .collect();
        let mut delta = vec![upstream];
        for l in (0..self.layers.len()).rev() {
            let prev_act = &acts[l];
            for (o, &d) in delta.iter().enumerate() {
                grads[l].b[o] = d;
                for (i, &a) in prev_act.iter().enumerate() {
                    grads[l].w[o][i] = d * a;
                }
            }
            // Propagate to the previous layer (or the input when l == 0).
            let n_prev = self.layers[l].w[0].len();
            let mut prev_delta = vec![0.0; n_prev];
            for (o, &d) in delta.iter().enumerate() {
                for (i, &wi) in self.layers[l].w[o].iter().enumerate() {
                    prev_delta[i] += wi * d;
                }
            }
            if l > 0 {
                for (i, pd) in prev_delta.iter_mut().enumerate() {
                    *pd *= elu_deriv(pres[l - 1][i]);
                }
            }
            delta = prev_delta;
        }

        (
            output,
            GradBundle {
                layers: grads,
                input_grad: delta,
            },
        )
    }

    /// Reusable forward/backward scratch sized for this network.
    pub fn scratch(&self) -> NetScratch {
        NetScratch {
            acts: self.widths.iter().map(|&w| vec![0.0; w]).collect(),
            pres: self.widths[1..].iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    pub fn zero_bundle(&self) -> GradBundle {
        GradBundle {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    w: l.w.iter().map(|row| vec![0.0; row.len()]).collect(),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
            input_grad: vec![0.0; self.input_dim()],
        }
    }

    /// Allocation-free forward/backward: writes the upstream-scaled grads
    /// into `out` (whose shapes must match) and returns the output.
    pub fn forward_backward_into(
        &self,
        x: &[f64],
        upstream: f64,
        scratch: &mut NetScratch,
        out: &mut GradBundle,
    ) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim());
        let last = self.layers.len() - 1;
        scratch.acts[0].copy_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = scratch.acts.split_at_mut(l + 1);
            let prev = &done[l];
            let act = &mut rest[0];
            let pre = &mut scratch.pres[l];
            for ((row, &bias), (z_slot, a_slot)) in layer
                .w
                .iter()
                .zip(&layer.b)
                .zip(pre.iter_mut().zip(act.iter_mut()))
            {
                let mut z = bias;
                for (wi, ai) in row.iter().zip(prev.iter()) {
                    z += wi * ai;
                }
                *z_slot = z;
                *a_slot = if l == last { z } else { elu(z) };
            }
        }
        let output = scratch.acts[last + 1][0];

        // Reuse out.input_grad and the bias rows of `out` as delta storage:
        // deltas for layer l live in out.layers[l].b before the weight
        // grads of that layer are written.
        out.layers[last].b[0] = upstream;
        for l in (0..self.layers.len()).rev() {
            // Weight grads from this layer's deltas (already in out.layers[l].b).
            let prev_act = &scratch.acts[l];
            for o in 0..self.layers[l].b.len() {
                let d = out.layers[l].b[o];
                for (slot, &a) in out.layers[l].w[o].iter_mut().zip(prev_act.iter()) {
                    *slot = d * a;
                }
            }
            // Deltas for the layer below (or the input).
            let n_prev = self.layers[l].w[0].len();
            if l > 0 {
                let (lower, upper) = out.layers.split_at_mut(l);
                let prev_delta = &mut lower[l - 1].b;
                let delta = &upper[0].b;
                for slot in prev_delta.iter_mut() {
                    *slot = 0.0;
                }
                for (o, &d) in delta.iter().enumerate() {
                    for (i, &wi) in self.layers[l].w[o].iter().enumerate() {
                        prev_delta[i] += wi * d;
                    }
                }
                for (i, pd) in prev_delta.iter_mut().enumerate() {
                    *pd *= elu_deriv(scratch.pres[l - 1][i]);
                }
            } else {
                for slot in out.input_grad.iter_mut().take(n_prev) {
                    *slot = 0.0;
                }
                for (o, &d) in out.layers[0].b.iter().enumerate() {
                    for (i, &wi) in self.layers[0].w[o].iter().enumerate() {
                        out.input_grad[i] += wi * d;
                    }
                }
            }
        }
        output
    }

    /// Output and d(output)/d(input) without materializing parameter
    /// gradients (the generator update only routes through the input).
    pub fn value_and_input_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = acts.last().unwrap();
            let mut z = Vec::with_capacity(layer.b.len());
            for (row, &bias) in layer.w.iter().zip(&layer.b) {
                let mut s = bias;
                for (wi, ai) in row.iter().zip(prev) {
                    s += wi * ai;
                }
                z.push(s);
            }
            let a = if l == last {
                z.clone()
            } else {
                z.iter().map(|&v| elu(v)).collect()
            };
            pres.push(z);
            acts.push(a);
        }
        let output = acts.last().unwrap()[0];

        let mut delta = vec![1.0];
        for l in (0..self.layers.len()).rev() {
            let n_prev = self.layers[l].w[0].len();
            let mut prev_delta = vec![0.0; n_prev];
            for (o, &d) in delta.iter().enumerate() {
                for (i, &wi) in self.layers[l].w[o].iter().enumerate() {
                    prev_delta[i] += wi * d;
                }
            }
            if l > 0 {
                for (i, pd) in prev_delta.iter_mut().enumerate() {
                    *pd *= elu_deriv(pres[l - 1][i]);
                }
            }
            delta = prev_delta;
        }
        (output, delta)
    }

    /// Parameters +- learning_rate * grads; returns the updated network.
    pub fn sgd_step(mut self, grads: &GradBundle, learning_rate: f64, dir: Direction) -> DenseNet {
        let sign = match dir {
            Direction::Ascend => 1.0,
            Direction::Descend => -1.0,
        };
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (row, grow) in layer.w.iter_mut().zip(&g.w) {
                for (w, gw) in row.iter_mut().zip(grow) {
                    *w += sign * learning_rate * gw;
                }
            }
            for (b, gb) in layer.b.iter_mut().zip(&g.b) {
                *b += sign * learning_rate * gb;
            }
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<DenseNet> {
        let net: DenseNet = serde_json::from_str(text)?;
        check_widths(&net.widths)?;
        let shapes_ok = net.layers.len() == net.widths.len() - 1
            && net
                .layers
                .iter()
                .zip(net.widths.windows(2))
                .all(|(l, io)| {
                    l.b.len() == io[1] && l.w.len() == io[1] && l.w.iter().all(|r| r.len() == io[0])
                });
        if !shapes_ok {
            return Err(Error::InvalidWidths {
                reason: "layer shapes do not match widths".into(),
            });
        }
        Ok(net)
    }
}

impl GradBundle {
    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for row in &mut l.w {
                for v in row {
                    *v *= factor;
                }
            }
            for v in &mut l.b {
                *v *= factor;
            }
        }
        for v in &mut self.input_grad {
            *v *= factor;
        }
    }

    pub fn add_in_place(&mut self, other: &GradBundle) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            for (row, orow) in l.w.iter_mut().zip(&o.w) {
                for (v, ov) in row.iter_mut().zip(orow) {
                    *v += ov;
                }
            }
            for (v, ov) in l.b.iter_mut().zip(&o.b) {
                *v += ov;
            }
        }
        for (v, ov) in self.input_grad.iter_mut().zip(&other.input_grad) {
            *v += ov;
        }
    }

    pub fn add(mut self, other: &GradBundle) -> GradBundle {
        self.add_in_place(other);
        self
    }
}

/// Pairwise (tree) reduction of per-sample gradient bundles; the reduction
/// order is fixed by the input order, so accumulation is deterministic.
pub fn pairwise_sum_bundles(bundles: Vec<GradBundle>) -> Option<GradBundle> {
    fn tree(mut v: Vec<GradBundle>) -> GradBundle {
        if v.len() == 1 {
            return v.pop().expect("nonempty");
        }
        let right = v.split_off(v.len() / 2);
        tree(v).add(&tree(right))
    }
    if bundles.is_empty() {
        None
    } else {
        Some(tree(bundles))
    }
}

/// Same reduction tree as [`pairwise_sum_bundles`], but in place: the sum
/// lands in `bundles[0]` and the other entries are left as partial sums
/// (callers overwrite them on the next batch anyway).
pub fn pairwise_sum_bundles_in_place(bundles: &mut [GradBundle]) {
    if bundles.len() <= 1 {
        return;
    }
    let mid = bundles.len() / 2;
    let (left, right) = bundles.split_at_mut(mid);
    pairwise_sum_bundles_in_place(left);
    pairwise_sum_bundles_in_place(right);
    left[0].add_in_place(&right[0]);
}

/// Forward/backward activations and pre-activations, reusable across calls.
#[derive(Debug, Clone)]
pub struct NetScratch {
    acts: Vec<Vec<f64>>,
    pres: Vec<Vec<f64>>,
}

impl Critic for DenseNet {
    fn value(&self, x: &[f64]) -> f64 {
        self.forward(x)
    }

    fn input_grad(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_input_grad(x).1
    }
}
