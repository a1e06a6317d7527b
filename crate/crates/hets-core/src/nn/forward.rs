//! Plain and encrypted forward passes over a model.
//!
//! The encrypted path plans plaintext scales ahead of time: each square
//! activation wants its input scale to equal the prime its rescale will
//! drop (so the square's output scale returns to that prime), and the
//! nearest preceding convolution mask or linear layer is retargeted to
//! deliver it. On chains whose mid primes sit at the scale (the test
//! profile) the plan degenerates to scale-preserving defaults.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;

use super::model::{Layer, Model};
use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::tensors::{self, EncryptedVector, PlainTensor};

/// One completed pipeline stage: its level cost and wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub name: String,
    pub levels: usize,
    pub ms: f64,
}

/// Rotation steps the pipeline needs beyond the default power-of-two set:
/// the replicate-after-conv doublings and, for non-cyclic folds, the
/// channel placement shifts. Worth requesting at key generation so the
/// hot path never pays a composed rotation.
pub fn hot_rotation_steps(model: &Model, slots: usize) -> Vec<i64> {
    let mut steps = std::collections::BTreeSet::new();
    let mut insert_left = |s: usize| {
        if s > 0 && s < slots && !s.is_power_of_two() {
            steps.insert(s as i64);
        }
    };
    if let Some(geo) = model.conv_geometry() {
        let channels = match &model.layers[0] {
            Layer::Conv2d { kernels, .. } => kernels.len(),
            _ => 1,
        };
        let rounds = crate::tensors::depth_of_power(geo.taps as u32);
        if geo.chunk << rounds != slots {
            // placement shifts for the chunk-0 fold path
            for k in 1..channels {
                insert_left(slots - k * geo.chunk);
            }
        }
        // replicate-after-conv doublings
        let n = (channels - 1) * geo.chunk + geo.windows;
        if slots % n == 0 && (slots / n).is_power_of_two() {
            let mut span = n;
            while span < slots {
                insert_left(slots - span);
                span *= 2;
            }
        }
    }
    steps.into_iter().collect()
}

/// Reference float evaluation; the oracle for the encrypted path.
///
/// Convolution output uses the same packing as the encrypted pipeline:
/// channel k occupies offsets [k·chunk, k·chunk + windows).
pub fn plain_forward(model: &Model, image: &PlainTensor) -> Result<PlainTensor> {
    if image.shape != model.input_shape {
        return Err(Error::ShapeError {
            layer: 0,
            reason: format!(
                "input shape {:?} does not match model {:?}",
                image.shape, model.input_shape
            ),
        });
    }
    let mut state: Vec<f64> = image.data.clone();
    for layer in &model.layers {
        match layer {
            Layer::Conv2d {
                kernels,
                bias,
                stride,
            } => {
                let geo = model.conv_geometry().unwrap();
                let mut out = vec![0.0; (kernels.len() - 1) * geo.chunk + geo.windows];
                for (k, kernel) in kernels.iter().enumerate() {
                    let chan = tensors::conv2d_direct(image, kernel, *stride)?;
                    for (w, v) in chan.iter().enumerate() {
                        out[k * geo.chunk + w] = v + bias[k];
                    }
                }
                state = out;
            }
            Layer::Square => {
                for v in state.iter_mut() {
                    *v *= *v;
                }
            }
            Layer::Linear { weights, bias } => {
                let (n, m) = (weights.shape[0], weights.shape[1]);
                let mut out = vec![0.0; m];
                for (j, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += state[i] * weights.at2(i, j);
                    }
                    *o = acc + bias[j];
                }
                state = out;
            }
        }
    }
    Ok(PlainTensor::vector(state))
}

/// Client-side input preparation: im2col-encode, chunk-pad and encrypt
/// into a single windowed ciphertext (or a replicated flat vector for
/// models without a convolution).
pub fn prepare_input<R: Rng + Send + ?Sized>(
    backend: &Backend,
    model: &Model,
    image: &PlainTensor,
    rng: &mut R,
) -> Result<EncryptedVector> {
    if image.shape != model.input_shape {
        return Err(Error::ShapeError {
            layer: 0,
            reason: format!(
                "input shape {:?} does not match model {:?}",
                image.shape, model.input_shape
            ),
        });
    }
    match &model.layers[0] {
        Layer::Conv2d { kernels, stride, .. } => {
            let im = tensors::im2col_encode(image, kernels[0].shape[0], kernels[0].shape[1], *stride)
                .map_err(|e| Error::ShapeError {
                    layer: 0,
                    reason: e.to_string(),
                })?;
            tensors::encrypt_windowed(backend, &im, rng)
        }
        _ => tensors::encrypt_vector(backend, image, true, rng),
    }
}

/// Per-layer output-scale targets: every square activation asks the
/// nearest preceding retargetable stage for the prime its own rescale
/// will drop.
fn plan_scales(model: &Model, backend: &Backend, start_level: usize) -> HashMap<usize, f64> {
    let mut targets = HashMap::new();
    let mut level = start_level;
    let mut retarget: Option<usize> = None;
    for (idx, layer) in model.layers.iter().enumerate() {
        match layer {
            Layer::Conv2d { .. } => {
                level = level.saturating_sub(2);
                retarget = Some(idx);
            }
            Layer::Linear { .. } => {
                level = level.saturating_sub(1);
                retarget = Some(idx);
            }
            Layer::Square => {
                if let Some(stage) = retarget.take() {
                    if level >= 1 {
                        targets.insert(stage, backend.prime_f64(level));
                    }
                }
                level = level.saturating_sub(1);
            }
        }
    }
    targets
}

/// Run the model on an encrypted input, recording per-stage level costs
/// and wall times. On failure the records cover the stages that completed.
pub fn encrypted_forward_traced(
    backend: &Backend,
    model: &Model,
    input: &EncryptedVector,
) -> (Vec<StageRecord>, Result<EncryptedVector>) {
    let mut records = Vec::new();
    let result = run_forward(backend, model, input, &mut records);
    (records, result)
}

/// Run the model on an encrypted input.
pub fn encrypted_forward(
    backend: &Backend,
    model: &Model,
    input: &EncryptedVector,
) -> Result<EncryptedVector> {
    encrypted_forward_traced(backend, model, input).1
}

fn run_forward(
    backend: &Backend,
    model: &Model,
    input: &EncryptedVector,
    records: &mut Vec<StageRecord>,
) -> Result<EncryptedVector> {
    let targets = plan_scales(model, backend, input.level());
    let mut state = input.clone();
    let mut linear_no = 0usize;
    for (idx, layer) in model.layers.iter().enumerate() {
        match layer {
            Layer::Conv2d {
                kernels,
                bias,
                stride: _,
            } => {
                let before = state.level();
                let t0 = Instant::now();
                state = tensors::conv2d_im2col(
                    backend,
                    &state,
                    kernels,
                    Some(bias),
                    targets.get(&idx).copied(),
                )?;
                // the fully connected layers ahead read a replicated vector
                let needs_replicas = model.layers[idx + 1..]
                    .iter()
                    .any(|l| matches!(l, Layer::Linear { .. }));
                if needs_replicas {
                    state = tensors::replicate_to_fill(backend, &state)?;
                }
                let ms = t0.elapsed().as_secs_f64() * 1e3;
                let consumed = before - state.level();
                debug_assert_eq!(consumed, 2);
                records.push(StageRecord {
                    name: "conv".into(),
                    levels: 1,
                    ms: ms / 2.0,
                });
                records.push(StageRecord {
                    name: "mask".into(),
                    levels: 1,
                    ms: ms / 2.0,
                });
            }
            Layer::Square => {
                let before = state.level();
                let t0 = Instant::now();
                state = tensors::square(backend, &state)?;
                records.push(StageRecord {
                    name: "square".into(),
                    levels: before - state.level(),
                    ms: t0.elapsed().as_secs_f64() * 1e3,
                });
            }
            Layer::Linear { weights, bias } => {
                linear_no += 1;
                let before = state.level();
                let t0 = Instant::now();
                state = tensors::dot_plain_matrix_scaled(
                    backend,
                    &state,
                    weights,
                    targets.get(&idx).copied(),
                )?;
                state = tensors::add_plain(backend, &state, &PlainTensor::vector(bias.clone()))?;
                records.push(StageRecord {
                    name: format!("fc{linear_no}"),
                    levels: before - state.level(),
                    ms: t0.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }
    Ok(state)
}
