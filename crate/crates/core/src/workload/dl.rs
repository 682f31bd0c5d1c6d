//! Deep-learning iteration traces and the calibrated model presets.
//!
//! Each preset is a coarse layer stack whose tensor sizes are solved so that
//! the generated trace reproduces a published (batch, footprint) pair at both
//! its small and large per-GPU batch. FLOP counts and layer shapes are round
//! numbers chosen to give each family a plausible arithmetic intensity; they
//! make no claim about the real networks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AccessOrder, Direction, KernelDescriptor, Precision, TensorAccess, Trace};
use crate::arch::DEFAULT_LINE_SIZE;
use crate::error::{CopaError, Result};
use crate::units::{GB, MB};

/// Output elements one work unit (thread block) produces.
pub const WORK_UNIT_ELEMENTS: u64 = 4096;

/// FP16 activations and weights.
const ELEMENT_BYTES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReuseClass {
    /// GEMM-like layers: one weight tensor serves the whole batch.
    WeightsReusedAcrossBatch,
    /// Elementwise/normalization layers streaming activations.
    ActivationsStreamed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub weight_bytes: u64,
    pub activation_bytes_per_sample: u64,
    pub flops_per_sample: f64,
    pub precision: Precision,
    pub reuse_class: ReuseClass,
    /// Independent output elements per sample.
    pub width_per_sample: u64,
    /// Weights are gathered (embedding lookups) rather than streamed.
    #[serde(default)]
    pub gather_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlModelSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub mode: Mode,
    pub input_bytes_per_sample: u64,
    /// Optimizer state bytes per weight byte (training only).
    pub optimizer_state_multiplier: f64,
    /// Divides every byte and FLOP count at generation time while keeping
    /// parallelism, so that runtime ratios survive desk-scale simulation.
    #[serde(default = "one")]
    pub miniaturization: u64,
}

fn one() -> u64 {
    1
}

impl DlModelSpec {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn miniaturized(mut self, factor: u64) -> Self {
        self.miniaturization = factor.max(1);
        self
    }
}

/// Published batch/footprint calibration points for one preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlPresetInfo {
    pub name: &'static str,
    pub mode: Mode,
    pub small_batch: u64,
    pub small_footprint: u64,
    pub large_batch: u64,
    pub large_footprint: u64,
}

const fn mb(v: u64) -> u64 {
    v * MB
}

const fn gb_tenths(v: u64) -> u64 {
    v * GB / 10
}

pub const DL_PRESETS: [DlPresetInfo; 10] = [
    DlPresetInfo { name: "resnet", mode: Mode::Training, small_batch: 12, small_footprint: mb(989), large_batch: 128, large_footprint: gb_tenths(60) },
    DlPresetInfo { name: "ssd", mode: Mode::Training, small_batch: 4, small_footprint: mb(559), large_batch: 128, large_footprint: gb_tenths(79) },
    DlPresetInfo { name: "maskrcnn", mode: Mode::Training, small_batch: 1, small_footprint: gb_tenths(21), large_batch: 6, large_footprint: gb_tenths(99) },
    DlPresetInfo { name: "gnmt", mode: Mode::Training, small_batch: 32, small_footprint: gb_tenths(30), large_batch: 256, large_footprint: gb_tenths(83) },
    DlPresetInfo { name: "transformer", mode: Mode::Training, small_batch: 640, small_footprint: gb_tenths(45), large_batch: 5120, large_footprint: gb_tenths(79) },
    DlPresetInfo { name: "ncf", mode: Mode::Training, small_batch: 65_526, small_footprint: mb(657), large_batch: 1_048_576, large_footprint: gb_tenths(45) },
    DlPresetInfo { name: "resnet", mode: Mode::Inference, small_batch: 1, small_footprint: mb(49), large_batch: 232, large_footprint: gb_tenths(11) },
    DlPresetInfo { name: "mobilenet", mode: Mode::Inference, small_batch: 1, small_footprint: mb(16), large_batch: 704, large_footprint: gb_tenths(20) },
    DlPresetInfo { name: "ssd", mode: Mode::Inference, small_batch: 1, small_footprint: mb(24), large_batch: 288, large_footprint: gb_tenths(20) },
    DlPresetInfo { name: "gnmt", mode: Mode::Inference, small_batch: 1, small_footprint: mb(300), large_batch: 128, large_footprint: mb(961) },
];

pub fn dl_preset_info(name: &str, mode: Mode) -> Option<&'static DlPresetInfo> {
    DL_PRESETS.iter().find(|p| p.name == name && p.mode == mode)
}

#[derive(Clone, Copy)]
enum Family {
    /// Four stages; activations halve and weights quadruple per stage.
    Cnn,
    /// Uniform recurrent/attention blocks.
    Sequence,
    /// Embedding tables feeding a small MLP.
    Recommender,
}

#[derive(Clone, Copy)]
struct Shape {
    family: Family,
    gemm_layers: usize,
    /// Forward GEMM FLOPs per sample, in GFLOP.
    fwd_gflops: f64,
    optimizer_state_multiplier: f64,
    /// Separate normalization/activation kernels after each GEMM (unfused training graphs).
    elementwise: bool,
    /// Share of the weights held by a leading gathered embedding table.
    embedding_share: f64,
    /// Input bytes relative to the first layer's activation.
    input_ratio: f64,
}

fn shape(name: &str, mode: Mode) -> Option<Shape> {
    use Family::*;
    let s = |family, gemm_layers, fwd_gflops, opt, elementwise, embedding_share, input_ratio| Shape {
        family,
        gemm_layers,
        fwd_gflops,
        optimizer_state_multiplier: opt,
        elementwise,
        embedding_share,
        input_ratio,
    };
    Some(match (name, mode) {
        ("resnet", Mode::Training) => s(Cnn, 16, 8.2, 1.0, true, 0.0, 0.25),
        ("ssd", Mode::Training) => s(Cnn, 16, 14.0, 1.0, true, 0.0, 0.25),
        ("maskrcnn", Mode::Training) => s(Cnn, 16, 300.0, 1.0, true, 0.0, 0.25),
        ("gnmt", Mode::Training) => s(Sequence, 12, 8.0, 2.0, true, 0.3, 0.05),
        ("transformer", Mode::Training) => s(Sequence, 12, 0.42, 2.0, true, 0.3, 0.05),
        ("ncf", Mode::Training) => s(Recommender, 4, 0.0004, 2.0, true, 0.9, 0.05),
        ("resnet", Mode::Inference) => s(Cnn, 16, 8.2, 0.0, false, 0.0, 0.25),
        ("mobilenet", Mode::Inference) => s(Cnn, 16, 1.1, 0.0, false, 0.0, 0.25),
        ("ssd", Mode::Inference) => s(Cnn, 16, 2.5, 0.0, false, 0.0, 0.25),
        ("gnmt", Mode::Inference) => s(Sequence, 12, 8.0, 0.0, false, 0.3, 0.05),
        _ => return None,
    })
}

/// (name, weight units, activation units per sample, GFLOP per sample, gathered weights)
type UnitLayer = (String, f64, f64, f64, bool);

/// Input units per sample plus the layer stack in relative units.
fn unit_layers(shape: &Shape) -> (f64, Vec<UnitLayer>) {
    let n = shape.gemm_layers;
    let mut layers = Vec::new();
    let gemm_share = 1.0 - shape.embedding_share;
    let (weights, acts): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| match shape.family {
            Family::Cnn => {
                let stage = (i * 4 / n) as i32;
                (4f64.powi(stage), 0.5f64.powi(stage))
            }
            Family::Sequence | Family::Recommender => (1.0, 1.0),
        })
        .unzip();
    let weight_total: f64 = weights.iter().sum();
    if shape.embedding_share > 0.0 {
        layers.push(("embedding".to_string(), shape.embedding_share, acts[0], 0.0, true));
    }
    for i in 0..n {
        let w = gemm_share * weights[i] / weight_total;
        layers.push((format!("gemm{i}"), w, acts[i], shape.fwd_gflops / n as f64, false));
        if shape.elementwise {
            layers.push((format!("norm{i}"), 0.0, acts[i], -1.0, false));
        }
    }
    (shape.input_ratio * acts[0], layers)
}

fn build_model(name: &str, mode: Mode, shape: &Shape, weight_scale: f64, act_scale: f64) -> DlModelSpec {
    let (input_units, units) = unit_layers(shape);
    let layers = units
        .into_iter()
        .map(|(lname, w, a, gflops, gather)| {
            let act = (a * act_scale).round().max(ELEMENT_BYTES as f64) as u64;
            let (flops, precision, reuse_class) = if gflops < 0.0 {
                // Normalization + activation: a few FP32 operations per element.
                (4.0 * (act / ELEMENT_BYTES) as f64, Precision::Fp32, ReuseClass::ActivationsStreamed)
            } else {
                (gflops * 1e9, Precision::Fp16, ReuseClass::WeightsReusedAcrossBatch)
            };
            LayerSpec {
                name: lname,
                weight_bytes: (w * weight_scale).round() as u64,
                activation_bytes_per_sample: act,
                flops_per_sample: flops,
                precision,
                reuse_class,
                width_per_sample: (act / ELEMENT_BYTES).max(1),
                gather_weights: gather,
            }
        })
        .collect();
    DlModelSpec {
        name: name.to_string(),
        layers,
        mode,
        input_bytes_per_sample: (input_units * act_scale).round().max(ELEMENT_BYTES as f64) as u64,
        optimizer_state_multiplier: shape.optimizer_state_multiplier,
        miniaturization: 1,
    }
}

/// Returns the named model calibrated for `mode`. Models with only one
/// calibrated mode run the same layers in the other mode.
pub fn dl_preset(name: &str, mode: Mode) -> Result<DlModelSpec> {
    let (info, shape) = match (dl_preset_info(name, mode), shape(name, mode)) {
        (Some(info), Some(shape)) => (info, shape),
        _ => {
            let other = match mode {
                Mode::Training => Mode::Inference,
                Mode::Inference => Mode::Training,
            };
            return match dl_preset_info(name, other) {
                Some(_) => Ok(dl_preset(name, other)?.with_mode(mode)),
                None => {
                    let mut valid: Vec<String> = DL_PRESETS.iter().map(|p| p.name.to_string()).collect();
                    valid.dedup();
                    valid.sort();
                    valid.dedup();
                    Err(CopaError::UnknownPreset { name: name.to_string(), valid })
                }
            };
        }
    };

    // Footprint is affine in batch: F(b) = C * weight_scale + b * P * act_scale.
    // Measure C and P on a unit-scaled probe, then solve for both scales.
    let probe_scale = 64.0 * MB as f64;
    let probe = build_model(name, mode, &shape, probe_scale, probe_scale);
    let f1 = gen_dl_trace(&probe, 1, 0)?.footprint as f64;
    let f2 = gen_dl_trace(&probe, 2, 0)?.footprint as f64;
    let per_sample_units = (f2 - f1) / probe_scale;
    let constant_units = (f1 - (f2 - f1)) / probe_scale;

    let (b1, b2) = (info.small_batch as f64, info.large_batch as f64);
    let (t1, t2) = (info.small_footprint as f64, info.large_footprint as f64);
    let per_sample = (t2 - t1) / (b2 - b1);
    let constant = t1 - per_sample * b1;
    if per_sample <= 0.0 || constant <= 0.0 {
        return Err(CopaError::contract(format!("preset {name} has inconsistent calibration points")));
    }
    Ok(build_model(name, mode, &shape, constant / constant_units, per_sample / per_sample_units))
}

struct Allocator {
    next: u64,
    next_id: u32,
    align: u64,
}

impl Allocator {
    fn alloc(&mut self, bytes: u64) -> (u32, u64) {
        let id = self.next_id;
        let base = self.next;
        self.next_id += 1;
        self.next += bytes.div_ceil(self.align).max(1) * self.align;
        (id, base)
    }
}

#[derive(Clone, Copy)]
struct Tensor {
    id: u32,
    base: u64,
}

impl Tensor {
    fn access(self, extent: u64, direction: Direction, order: AccessOrder) -> TensorAccess {
        TensorAccess { tensor_id: self.id, base_address: self.base, extent, direction, order, repetitions: 1 }
    }

    fn read(self, extent: u64) -> TensorAccess {
        self.access(extent, Direction::Read, AccessOrder::Sequential)
    }

    fn write(self, extent: u64) -> TensorAccess {
        self.access(extent, Direction::Write, AccessOrder::Sequential)
    }

    fn update(self, extent: u64) -> TensorAccess {
        self.access(extent, Direction::ReadWrite, AccessOrder::Sequential)
    }
}

struct Emitter {
    kernels: Vec<KernelDescriptor>,
}

impl Emitter {
    fn push(&mut self, name: String, flops: f64, precision: Precision, parallelism: u64, accesses: Vec<TensorAccess>) {
        let id = self.kernels.len() as u32;
        let mut map = BTreeMap::new();
        if flops > 0.0 {
            map.insert(precision, flops);
        }
        let accesses: Vec<TensorAccess> = accesses.into_iter().filter(|a| a.extent > 0).collect();
        self.kernels.push(KernelDescriptor {
            kernel_id: id,
            name,
            flops: map,
            parallelism: parallelism.max(1),
            accesses,
            dependency: id.checked_sub(1),
        });
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Emits one end-to-end iteration of `model` at `batch`.
pub fn gen_dl_trace(model: &DlModelSpec, batch: u64, seed: u64) -> Result<Trace> {
    if batch < 1 {
        return Err(CopaError::contract("batch must be at least 1"));
    }
    if model.layers.is_empty() {
        return Err(CopaError::contract(format!("model {} has no layers", model.name)));
    }
    let shrink = model.miniaturization.max(1);
    let bytes = |b: u64| b.div_ceil(shrink);
    let parallelism = |width: u64| (batch * width).div_ceil(WORK_UNIT_ELEMENTS);

    let mut alloc = Allocator { next: 0, next_id: 0, align: u64::from(DEFAULT_LINE_SIZE) };
    let mut out = Emitter { kernels: Vec::new() };

    let input_bytes = bytes(model.input_bytes_per_sample) * batch;
    let acts: Vec<u64> = model.layers.iter().map(|l| bytes(l.activation_bytes_per_sample) * batch).collect();
    let (xid, xbase) = alloc.alloc(input_bytes);
    let input = Tensor { id: xid, base: xbase };
    let weights: Vec<Option<Tensor>> = model
        .layers
        .iter()
        .map(|l| {
            (l.weight_bytes > 0).then(|| {
                let (id, base) = alloc.alloc(bytes(l.weight_bytes));
                Tensor { id, base }
            })
        })
        .collect();
    let weight_read = |i: usize, t: Tensor| {
        let layer = &model.layers[i];
        let order = if layer.gather_weights {
            AccessOrder::PseudoRandom { seed: mix_seed(seed, i as u64 + 1) }
        } else {
            AccessOrder::Sequential
        };
        t.access(bytes(layer.weight_bytes), Direction::Read, order)
    };
    let layer_flops = |i: usize| model.layers[i].flops_per_sample / shrink as f64 * batch as f64;

    match model.mode {
        Mode::Inference => {
            // Two ping-pong activation buffers sized for the largest layer of each parity.
            let mut buffers = [None, None];
            for (parity, buffer) in buffers.iter_mut().enumerate() {
                let size = acts.iter().skip(parity).step_by(2).copied().max().unwrap_or(0);
                if size > 0 {
                    let (id, base) = alloc.alloc(size);
                    *buffer = Some(Tensor { id, base });
                }
            }
            for (i, layer) in model.layers.iter().enumerate() {
                let (src, src_bytes) = match i {
                    0 => (input, input_bytes),
                    _ => (buffers[(i - 1) % 2].unwrap(), acts[i - 1]),
                };
                let mut accesses = Vec::new();
                if let Some(w) = weights[i] {
                    accesses.push(weight_read(i, w));
                }
                accesses.push(src.read(src_bytes));
                accesses.push(buffers[i % 2].unwrap().write(acts[i]));
                out.push(
                    format!("fwd.{}", layer.name),
                    layer_flops(i),
                    layer.precision,
                    parallelism(layer.width_per_sample),
                    accesses,
                );
            }
        }
        Mode::Training => {
            let saved: Vec<Tensor> = acts
                .iter()
                .map(|&a| {
                    let (id, base) = alloc.alloc(a);
                    Tensor { id, base }
                })
                .collect();
            let weight_grads: Vec<Option<Tensor>> = model
                .layers
                .iter()
                .map(|l| {
                    (l.weight_bytes > 0).then(|| {
                        let (id, base) = alloc.alloc(bytes(l.weight_bytes));
                        Tensor { id, base }
                    })
                })
                .collect();
            let opt_bytes = |l: &LayerSpec| (bytes(l.weight_bytes) as f64 * model.optimizer_state_multiplier).round() as u64;
            let opt_state: Vec<Option<Tensor>> = model
                .layers
                .iter()
                .map(|l| {
                    (l.weight_bytes > 0 && opt_bytes(l) > 0).then(|| {
                        let (id, base) = alloc.alloc(opt_bytes(l));
                        Tensor { id, base }
                    })
                })
                .collect();
            let grad_size = acts.iter().copied().max().unwrap_or(0);
            let grads = [0, 1].map(|_| {
                let (id, base) = alloc.alloc(grad_size);
                Tensor { id, base }
            });
            let layer_input = |i: usize| match i {
                0 => (input, input_bytes),
                _ => (saved[i - 1], acts[i - 1]),
            };

            for (i, layer) in model.layers.iter().enumerate() {
                let (src, src_bytes) = layer_input(i);
                let mut accesses = Vec::new();
                if let Some(w) = weights[i] {
                    accesses.push(weight_read(i, w));
                }
                accesses.push(src.read(src_bytes));
                accesses.push(saved[i].write(acts[i]));
                out.push(
                    format!("fwd.{}", layer.name),
                    layer_flops(i),
                    layer.precision,
                    parallelism(layer.width_per_sample),
                    accesses,
                );
            }

            let last = model.layers.len() - 1;
            out.push(
                "loss".into(),
                4.0 * (acts[last] / ELEMENT_BYTES) as f64,
                Precision::Fp32,
                parallelism(model.layers[last].width_per_sample),
                vec![saved[last].read(acts[last]), grads[0].write(acts[last])],
            );

            let mut g = 0;
            for (i, layer) in model.layers.iter().enumerate().rev() {
                let (src, src_bytes) = layer_input(i);
                let grad_in = grads[g].read(acts[i]);
                if i > 0 {
                    let mut accesses = vec![grad_in.clone()];
                    match weights[i] {
                        Some(w) => accesses.push(weight_read(i, w)),
                        None => accesses.push(src.read(src_bytes)),
                    }
                    accesses.push(grads[1 - g].write(acts[i - 1]));
                    out.push(
                        format!("dgrad.{}", layer.name),
                        layer_flops(i),
                        layer.precision,
                        parallelism(layer.width_per_sample),
                        accesses,
                    );
                }
                if let Some(dw) = weight_grads[i] {
                    out.push(
                        format!("wgrad.{}", layer.name),
                        layer_flops(i),
                        layer.precision,
                        parallelism(layer.width_per_sample),
                        vec![grad_in, src.read(src_bytes), dw.write(bytes(layer.weight_bytes))],
                    );
                }
                g = 1 - g;
            }

            for (i, layer) in model.layers.iter().enumerate() {
                let (Some(w), Some(dw)) = (weights[i], weight_grads[i]) else { continue };
                let wb = bytes(layer.weight_bytes);
                let mut accesses = vec![dw.read(wb), w.update(wb)];
                if let Some(state) = opt_state[i] {
                    accesses.push(state.update(opt_bytes(layer)));
                }
                // A handful of FP32 operations per parameter; parallel over parameters.
                out.push(
                    format!("optim.{}", layer.name),
                    10.0 * (wb / ELEMENT_BYTES) as f64,
                    Precision::Fp32,
                    (layer.weight_bytes / ELEMENT_BYTES).div_ceil(WORK_UNIT_ELEMENTS),
                    accesses,
                );
            }
        }
    }

    let mode = match model.mode {
        Mode::Training => "train",
        Mode::Inference => "infer",
    };
    Ok(Trace::new(format!("{}-{mode}-b{batch}", model.name), batch, DEFAULT_LINE_SIZE, out.kernels))
}
