//! From-scratch multilayer perceptron with seeded mini-batch gradient descent.
//!
//! The network is fully connected with a scalar linear output. Training is
//! plain SGD at a fixed step size; the shuffle order and the weight
//! initialization are both drawn from a ChaCha stream seeded by `train_seed`,
//! so a fit is a pure function of its inputs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Activation;
use crate::data::LabeledPoint;
use crate::error::Result;

struct Layer {
    weights: Vec<f64>, // row-major, out x in
    biases: Vec<f64>,
    fan_in: usize,
    fan_out: usize,
}

fn layer_dims(dimension: usize, hidden_sizes: &[usize]) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(hidden_sizes.len() + 1);
    let mut fan_in = dimension;
    for &h in hidden_sizes {
        dims.push((fan_in, h));
        fan_in = h;
    }
    dims.push((fan_in, 1));
    dims
}

fn unpack(params: &[f64], dimension: usize, hidden_sizes: &[usize]) -> Vec<Layer> {
    let mut layers = Vec::new();
    let mut offset = 0;
    for (fan_in, fan_out) in layer_dims(dimension, hidden_sizes) {
        let w_len = fan_in * fan_out;
        let weights = params[offset..offset + w_len].to_vec();
        offset += w_len;
        let biases = params[offset..offset + fan_out].to_vec();
        offset += fan_out;
        layers.push(Layer {
            weights,
            biases,
            fan_in,
            fan_out,
        });
    }
    layers
}

fn pack(layers: &[Layer]) -> Vec<f64> {
    let mut params = Vec::new();
    for layer in layers {
        params.extend_from_slice(&layer.weights);
        params.extend_from_slice(&layer.biases);
    }
    params
}

fn xavier_init(dimension: usize, hidden_sizes: &[usize], rng: &mut ChaCha8Rng) -> Vec<Layer> {
    layer_dims(dimension, hidden_sizes)
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            Layer {
                weights,
                biases: vec![0.0; fan_out],
                fan_in,
                fan_out,
            }
        })
        .collect()
}

/// Forward pass reading the flat parameter vector directly.
pub(super) fn forward(
    params: &[f64],
    dimension: usize,
    hidden_sizes: &[usize],
    activation: Activation,
    features: &[f64],
) -> f64 {
    let mut input = features.to_vec();
    let mut offset = 0;
    let dims = layer_dims(dimension, hidden_sizes);
    let last = dims.len() - 1;
    for (layer_idx, (fan_in, fan_out)) in dims.into_iter().enumerate() {
        let mut output = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let row = &params[offset + o * fan_in..offset + (o + 1) * fan_in];
            let bias = params[offset + fan_in * fan_out + o];
            let mut z = bias;
            for (w, x) in row.iter().zip(&input) {
                z += w * x;
            }
            output.push(if layer_idx == last { z } else { activation.apply(z) });
        }
        offset += fan_in * fan_out + fan_out;
        input = output;
    }
    input[0]
}

struct ForwardTrace {
    // Pre-activations per layer, then the activated outputs per layer.
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
}

fn forward_trace(layers: &[Layer], activation: Activation, features: &[f64]) -> ForwardTrace {
    let last = layers.len() - 1;
    let mut pre = Vec::with_capacity(layers.len());
    let mut act = Vec::with_capacity(layers.len());
    let mut input = features.to_vec();
    for (idx, layer) in layers.iter().enumerate() {
        let mut z = Vec::with_capacity(layer.fan_out);
        for o in 0..layer.fan_out {
            let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
            let mut sum = layer.biases[o];
            for (w, x) in row.iter().zip(&input) {
                sum += w * x;
            }
            z.push(sum);
        }
        let a: Vec<f64> = if idx == last {
            z.clone()
        } else {
            z.iter().map(|&v| activation.apply(v)).collect()
        };
        pre.push(z);
        act.push(a.clone());
        input = a;
    }
    ForwardTrace { pre, act }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn train(
    points: &[LabeledPoint],
    hidden_sizes: &[usize],
    activation: Activation,
    epochs: usize,
    step_size: f64,
    batch_size: usize,
    train_seed: u64,
    warm_start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let dimension = points[0].dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(train_seed);
    let mut layers = match warm_start {
        Some(params) => unpack(params, dimension, hidden_sizes),
        None => xavier_init(dimension, hidden_sizes, &mut rng),
    };

    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Gradient accumulators mirror the layer shapes.
    let mut grad_w: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.biases.len()]).collect();

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            for g in grad_w.iter_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            for g in grad_b.iter_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let point = &points[i];
                let trace = forward_trace(&layers, activation, point.features());
                let output = trace.act.last().unwrap()[0];
                // d(mean squared error)/d(output) for this point.
                let mut delta = vec![scale * (output - point.target())];
                for l in (0..layers.len()).rev() {
                    let layer = &layers[l];
                    let below: &[f64] = if l == 0 {
                        point.features()
                    } else {
                        &trace.act[l - 1]
                    };
                    for o in 0..layer.fan_out {
                        let d = delta[o];
                        grad_b[l][o] += d;
                        let row = &mut grad_w[l][o * layer.fan_in..(o + 1) * layer.fan_in];
                        for (g, x) in row.iter_mut().zip(below) {
                            *g += d * x;
                        }
                    }
                    if l > 0 {
                        let mut next = vec![0.0; layer.fan_in];
                        for (d, row) in delta.iter().zip(layer.weights.chunks_exact(layer.fan_in))
                        {
                            for (nx, w) in next.iter_mut().zip(row) {
                                *nx += d * w;
                            }
                        }
                        for (nx, z) in next.iter_mut().zip(&trace.pre[l - 1]) {
                            *nx *= activation.derivative(*z);
                        }
                        delta = next;
                    }
                }
            }
            for (layer, (gw, gb)) in layers.iter_mut().zip(grad_w.iter().zip(&grad_b)) {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w -= step_size * g;
                }
                for (b, g) in layer.biases.iter_mut().zip(gb) {
                    *b -= step_size * g;
                }
            }
        }
    }
    Ok(pack(&layers))
}
