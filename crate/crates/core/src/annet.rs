//! Bias-free ConvNet whose forward pass carries both the weighted sum of
//! input rates and its variance, trained by minibatch SGD.
//!
//! Inputs are rates scaled to `x = λ·τ_syn` (τ_syn in seconds), so a unit's
//! `net = Σ w·x` is the mean synaptic current in nA and `var = Σ ½w²·x` its
//! variance. Outputs use the same scaling, which lets a layer's `y` feed the
//! next layer directly.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{ActivationKind, CombinedScale};
use crate::dataset::{encode_labels, Dataset, CLASSES};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LayerKind {
    Conv { out_maps: usize, kernel: usize },
    AvgPool { stride: usize },
    Dense { out_units: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub trainable: bool,
}

impl LayerSpec {
    pub fn conv(out_maps: usize, kernel: usize) -> Self {
        Self { kind: LayerKind::Conv { out_maps, kernel }, trainable: true }
    }

    /// Pooling weights are fixed at `1/stride²`.
    pub fn avg_pool(stride: usize) -> Self {
        Self { kind: LayerKind::AvgPool { stride }, trainable: false }
    }

    pub fn dense(out_units: usize) -> Self {
        Self { kind: LayerKind::Dense { out_units }, trainable: true }
    }

    pub fn has_weights(&self) -> bool {
        !matches!(self.kind, LayerKind::AvgPool { .. })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LayerKind::Conv { out_maps, kernel } => write!(f, "{out_maps}c{kernel}"),
            LayerKind::AvgPool { stride } => write!(f, "{stride}s"),
            LayerKind::Dense { out_units } => write!(f, "{out_units}fc"),
        }
    }
}

/// Feature-map geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub maps: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn new(maps: usize, rows: usize, cols: usize) -> Self {
        Self { maps, rows, cols }
    }

    pub fn len(&self) -> usize {
        self.maps * self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, map: usize, row: usize, col: usize) -> usize {
        (map * self.rows + row) * self.cols + col
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// Parses names such as `6c5-2s-12c5-2s-10fc`.
    pub fn parse(input: Shape, text: &str) -> Result<Self> {
        let bad = |tok: &str| Error::InvalidParameter(alloc::format!("unrecognised layer `{tok}` in `{text}`"));
        let num = |s: &str, tok: &str| s.parse::<usize>().map_err(|_| bad(tok));
        let mut layers = Vec::new();
        for tok in text.split('-').map(str::trim) {
            let layer = if let Some(n) = tok.strip_suffix("fc") {
                LayerSpec::dense(num(n, tok)?)
            } else if let Some(n) = tok.strip_suffix('s') {
                LayerSpec::avg_pool(num(n, tok)?)
            } else if let Some((maps, k)) = tok.split_once('c') {
                LayerSpec::conv(num(maps, tok)?, num(k, tok)?)
            } else {
                return Err(bad(tok));
            };
            layers.push(layer);
        }
        let arch = Self { input, layers };
        arch.shapes()?;
        Ok(arch)
    }

    /// Architecture on single-channel 28×28 images.
    pub fn mnist(text: &str) -> Result<Self> {
        Self::parse(Shape::new(1, 28, 28), text)
    }

    pub fn name(&self) -> String {
        let parts: Vec<String> = self.layers.iter().map(|l| alloc::format!("{l}")).collect();
        parts.join("-")
    }

    /// Identifies the architecture and its input geometry.
    pub fn fingerprint(&self) -> String {
        alloc::format!("{}x{}x{}:{}", self.input.maps, self.input.rows, self.input.cols, self.name())
    }

    /// Output shape of every layer, validating the chain.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        if self.layers.is_empty() {
            return Err(Error::Empty("architecture"));
        }
        if self.input.is_empty() {
            return Err(Error::Shape("input shape is empty".into()));
        }
        let mut cur = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        let mut flat = false;
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match layer.kind {
                LayerKind::Conv { out_maps, kernel } => {
                    if flat {
                        return Err(Error::Shape(alloc::format!("layer {i}: convolution after a dense layer")));
                    }
                    if out_maps == 0 || kernel == 0 || kernel > cur.rows || kernel > cur.cols {
                        return Err(Error::Shape(alloc::format!(
                            "layer {i}: kernel {kernel} does not fit {}x{}",
                            cur.rows,
                            cur.cols
                        )));
                    }
                    Shape::new(out_maps, cur.rows - kernel + 1, cur.cols - kernel + 1)
                }
                LayerKind::AvgPool { stride } => {
                    if flat {
                        return Err(Error::Shape(alloc::format!("layer {i}: pooling after a dense layer")));
                    }
                    if stride == 0 || !cur.rows.is_multiple_of(stride) || !cur.cols.is_multiple_of(stride) {
                        return Err(Error::Shape(alloc::format!(
                            "layer {i}: stride {stride} does not divide {}x{}",
                            cur.rows,
                            cur.cols
                        )));
                    }
                    Shape::new(cur.maps, cur.rows / stride, cur.cols / stride)
                }
                LayerKind::Dense { out_units } => {
                    if out_units == 0 {
                        return Err(Error::Shape(alloc::format!("layer {i}: dense layer without units")));
                    }
                    flat = true;
                    Shape::new(out_units, 1, 1)
                }
            };
            out.push(cur);
        }
        Ok(out)
    }

    /// Input shape of layer `i`.
    pub fn input_of(&self, shapes: &[Shape], i: usize) -> Shape {
        if i == 0 {
            self.input
        } else {
            shapes[i - 1]
        }
    }

    /// Weight tensor dimensions: conv `[out, in, k, k]`, dense `[out, in]`,
    /// pooling none.
    pub fn weight_dims(&self) -> Result<Vec<Vec<usize>>> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let inp = self.input_of(&shapes, i);
                match l.kind {
                    LayerKind::Conv { out_maps, kernel } => vec![out_maps, inp.maps, kernel, kernel],
                    LayerKind::AvgPool { .. } => Vec::new(),
                    LayerKind::Dense { out_units } => vec![out_units, inp.len()],
                }
            })
            .collect())
    }
}

/// One completed training run on a weight store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStage {
    pub activation: ActivationKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub label_offset: f64,
    pub seed: u64,
    pub fine_tune: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMeta {
    /// Output scaling the weights were trained with.
    pub scale: CombinedScale,
    /// Input rate (Hz) of a fully white pixel.
    pub input_rate: f64,
    pub init_seed: u64,
    pub stages: Vec<TrainingStage>,
}

impl WeightMeta {
    /// Activation of the most recent stage.
    pub fn activation(&self) -> Option<ActivationKind> {
        self.stages.last().map(|s| s.activation)
    }

    pub fn epochs(&self) -> usize {
        self.stages.iter().map(|s| s.epochs).sum()
    }
}

/// Per-layer weights, row-major in the order of [`Architecture::weight_dims`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStore {
    pub arch: Architecture,
    pub tensors: Vec<Vec<f64>>,
    pub meta: WeightMeta,
}

impl WeightStore {
    pub fn zeros(arch: Architecture, meta: WeightMeta) -> Result<Self> {
        let tensors = arch
            .weight_dims()?
            .iter()
            .map(|d| if d.is_empty() { Vec::new() } else { vec![0.0; d.iter().product()] })
            .collect();
        Ok(Self { arch, tensors, meta })
    }

    /// Uniform Glorot initialisation in `±√(6/(fan_in + fan_out))`.
    pub fn glorot(arch: Architecture, meta: WeightMeta, seed: u64) -> Result<Self> {
        let mut store = Self::zeros(arch, meta)?;
        let dims = store.arch.weight_dims()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (t, d) in store.tensors.iter_mut().zip(&dims) {
            let (fan_in, fan_out) = match d.len() {
                4 => (d[1] * d[2] * d[3], d[0] * d[2] * d[3]),
                2 => (d[1], d[0]),
                _ => continue,
            };
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            for w in t.iter_mut() {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(store)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.arch.weight_dims()?;
        if dims.len() != self.tensors.len() {
            return Err(Error::Shape(alloc::format!(
                "{} tensors for {} layers",
                self.tensors.len(),
                dims.len()
            )));
        }
        for (i, (t, d)) in self.tensors.iter().zip(&dims).enumerate() {
            let want = if d.is_empty() { 0 } else { d.iter().product() };
            if t.len() != want {
                return Err(Error::Shape(alloc::format!("layer {i}: {} weights, expected {want}", t.len())));
            }
            if t.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite("weight"));
            }
        }
        Ok(())
    }
}

/// Per-unit mean (`net`), variance (`var`) and activation output (`y`) of a
/// layer. `var` is left empty for activations that ignore it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DualSignal {
    pub net: Vec<f64>,
    pub var: Vec<f64>,
    pub y: Vec<f64>,
}

/// Scales pixel intensities to the `x = λ·τ_syn` input convention.
pub fn encode_input(pixels: &[f64], input_rate: f64, tau_syn: f64) -> Vec<f64> {
    let c = input_rate * tau_syn / 1000.0;
    pixels.iter().map(|p| p * c).collect()
}

#[inline]
fn unit_sigma(kind: &ActivationKind, var: &[f64], j: usize) -> Option<f64> {
    if kind.uses_noise() {
        Some(libm::sqrt(var[j]))
    } else {
        None
    }
}

fn conv_forward(w: &[f64], inp: Shape, out: Shape, k: usize, x: &[f64], net: &mut [f64], var: Option<&mut [f64]>) {
    let plane = out.rows * out.cols;
    let mut var = var;
    for o in 0..out.maps {
        for i in 0..inp.maps {
            for ky in 0..k {
                for kx in 0..k {
                    let wv = w[((o * inp.maps + i) * k + ky) * k + kx];
                    let hv = 0.5 * wv * wv;
                    for r in 0..out.rows {
                        let src = &x[inp.index(i, r + ky, kx)..][..out.cols];
                        let base = o * plane + r * out.cols;
                        for (dst, &xv) in net[base..base + out.cols].iter_mut().zip(src) {
                            *dst += wv * xv;
                        }
                        if let Some(v) = var.as_deref_mut() {
                            for (dst, &xv) in v[base..base + out.cols].iter_mut().zip(src) {
                                *dst += hv * xv;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn pool_forward(stride: usize, inp: Shape, out: Shape, x: &[f64], net: &mut [f64], var: Option<&mut [f64]>) {
    let w = 1.0 / (stride * stride) as f64;
    let hv = 0.5 * w * w;
    let mut var = var;
    for m in 0..out.maps {
        for r in 0..out.rows {
            for c in 0..out.cols {
                let j = out.index(m, r, c);
                let mut sum = 0.0;
                let mut raw = 0.0;
                for dy in 0..stride {
                    for dx in 0..stride {
                        let xv = x[inp.index(m, r * stride + dy, c * stride + dx)];
                        sum += w * xv;
                        raw += xv;
                    }
                }
                net[j] = sum;
                if let Some(v) = var.as_deref_mut() {
                    v[j] = hv * raw;
                }
            }
        }
    }
}

fn dense_forward(w: &[f64], n_in: usize, x: &[f64], net: &mut [f64], var: Option<&mut [f64]>) {
    let mut var = var;
    for (o, dst) in net.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        *dst = row.iter().zip(x).map(|(w, x)| w * x).sum();
        if let Some(v) = var.as_deref_mut() {
            v[o] = row.iter().zip(x).map(|(w, x)| 0.5 * w * w * x).sum();
        }
    }
}

fn forward_impl(
    store: &WeightStore,
    input: &[f64],
    kind: &ActivationKind,
    frozen: Option<&[DualSignal]>,
) -> Result<Vec<DualSignal>> {
    let shapes = store.arch.shapes()?;
    if input.len() != store.arch.input.len() {
        return Err(Error::Shape(alloc::format!(
            "input has {} values, architecture expects {}",
            input.len(),
            store.arch.input.len()
        )));
    }
    if store.tensors.len() != shapes.len() {
        return Err(Error::Shape("weight store does not match its architecture".into()));
    }
    if let Some(f) = frozen {
        if f.len() != shapes.len() {
            return Err(Error::Shape("frozen noise does not cover every layer".into()));
        }
    }
    kind.validate()?;
    let scale = store.meta.scale;
    let gain = scale.gain();
    let mut out: Vec<DualSignal> = Vec::with_capacity(shapes.len());
    for (li, layer) in store.arch.layers.iter().enumerate() {
        let inp = store.arch.input_of(&shapes, li);
        let shp = shapes[li];
        let x: &[f64] = if li == 0 { input } else { &out[li - 1].y };
        let mut net = vec![0.0; shp.len()];
        let mut var = if kind.uses_noise() { vec![0.0; shp.len()] } else { Vec::new() };
        let var_slot = if kind.uses_noise() { Some(var.as_mut_slice()) } else { None };
        let w = &store.tensors[li];
        match layer.kind {
            LayerKind::Conv { kernel, .. } => conv_forward(w, inp, shp, kernel, x, &mut net, var_slot),
            LayerKind::AvgPool { stride } => pool_forward(stride, inp, shp, x, &mut net, var_slot),
            LayerKind::Dense { .. } => dense_forward(w, inp.len(), x, &mut net, var_slot),
        }
        if let Some(f) = frozen {
            if kind.uses_noise() {
                if f[li].var.len() != shp.len() {
                    return Err(Error::Shape(alloc::format!("frozen noise of layer {li} has the wrong size")));
                }
                var.copy_from_slice(&f[li].var);
            }
        }
        let y = net
            .iter()
            .enumerate()
            .map(|(j, &n)| kind.value(n, unit_sigma(kind, &var, j)).map(|v| v * gain))
            .collect::<Result<Vec<f64>>>()?;
        out.push(DualSignal { net, var, y });
    }
    Ok(out)
}

/// Dual-channel forward pass: `net = W·x`, `var = (½W∘W)·x` (only for
/// noisy-softplus), `y = S·τ_syn·f(net, √var)`.
pub fn forward(store: &WeightStore, input: &[f64], kind: &ActivationKind) -> Result<Vec<DualSignal>> {
    forward_impl(store, input, kind, None)
}

/// Forward pass that reuses the variance channel of `frozen` instead of
/// recomputing it, i.e. the function differentiated by [`backward`].
pub fn forward_frozen_noise(
    store: &WeightStore,
    input: &[f64],
    kind: &ActivationKind,
    frozen: &[DualSignal],
) -> Result<Vec<DualSignal>> {
    forward_impl(store, input, kind, Some(frozen))
}

/// `½Σ(y − t)²`.
pub fn squared_loss(y: &[f64], target: &[f64]) -> f64 {
    0.5 * y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Gradient tensors laid out like [`WeightStore::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &WeightStore) -> Self {
        Self { tensors: store.tensors.iter().map(|t| vec![0.0; t.len()]).collect() }
    }

    pub fn clear(&mut self) {
        for t in &mut self.tensors {
            t.fill(0.0);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flatten().fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

/// Gradient of `½Σ(y_top − target)²` with the variance channel held fixed.
pub fn backward(
    store: &WeightStore,
    input: &[f64],
    duals: &[DualSignal],
    target: &[f64],
    kind: &ActivationKind,
) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(store);
    accumulate_gradients(store, input, duals, target, kind, 1.0, &mut grads)?;
    Ok(grads)
}

/// Adds `c·∂L/∂w` to `grads`.
pub fn accumulate_gradients(
    store: &WeightStore,
    input: &[f64],
    duals: &[DualSignal],
    target: &[f64],
    kind: &ActivationKind,
    c: f64,
    grads: &mut Gradients,
) -> Result<()> {
    let shapes = store.arch.shapes()?;
    let n = shapes.len();
    if duals.len() != n {
        return Err(Error::Shape("forward pass does not cover every layer".into()));
    }
    let top = &duals[n - 1];
    if target.len() != top.y.len() {
        return Err(Error::Shape(alloc::format!(
            "target has {} entries, output layer has {}",
            target.len(),
            top.y.len()
        )));
    }
    if grads.tensors.len() != n {
        return Err(Error::Shape("gradient store does not match the network".into()));
    }
    let gain = store.meta.scale.gain();
    // dL/dy of the current layer, scaled by c
    let mut dy: Vec<f64> = top.y.iter().zip(target).map(|(y, t)| c * (y - t)).collect();
    for li in (0..n).rev() {
        let d = &duals[li];
        let delta: Vec<f64> = dy
            .iter()
            .enumerate()
            .map(|(j, &g)| kind.grad(d.net[j], unit_sigma(kind, &d.var, j)).map(|f| g * f * gain))
            .collect::<Result<_>>()?;
        let inp = store.arch.input_of(&shapes, li);
        let out = shapes[li];
        let x: &[f64] = if li == 0 { input } else { &duals[li - 1].y };
        let need_dx = li > 0;
        let mut dx = if need_dx { vec![0.0; inp.len()] } else { Vec::new() };
        let w = &store.tensors[li];
        let layer = store.arch.layers[li];
        let gw = &mut grads.tensors[li];
        match layer.kind {
            LayerKind::Conv { kernel: k, .. } => {
                let plane = out.rows * out.cols;
                for o in 0..out.maps {
                    for i in 0..inp.maps {
                        for ky in 0..k {
                            for kx in 0..k {
                                let wi = ((o * inp.maps + i) * k + ky) * k + kx;
                                let wv = w[wi];
                                let mut acc = 0.0;
                                for r in 0..out.rows {
                                    let xs = inp.index(i, r + ky, kx);
                                    let ds = &delta[o * plane + r * out.cols..][..out.cols];
                                    acc += ds.iter().zip(&x[xs..xs + out.cols]).map(|(a, b)| a * b).sum::<f64>();
                                    if need_dx {
                                        for (g, &dv) in dx[xs..xs + out.cols].iter_mut().zip(ds) {
                                            *g += wv * dv;
                                        }
                                    }
                                }
                                gw[wi] += acc;
                            }
                        }
                    }
                }
            }
            LayerKind::AvgPool { stride } => {
                if need_dx {
                    let wp = 1.0 / (stride * stride) as f64;
                    for m in 0..out.maps {
                        for r in 0..out.rows {
                            for cc in 0..out.cols {
                                let dv = delta[out.index(m, r, cc)] * wp;
                                for dyy in 0..stride {
                                    for dxx in 0..stride {
                                        dx[inp.index(m, r * stride + dyy, cc * stride + dxx)] += dv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::Dense { .. } => {
                let n_in = inp.len();
                for (o, &dv) in delta.iter().enumerate() {
                    let row = o * n_in;
                    for (g, &xv) in gw[row..row + n_in].iter_mut().zip(x) {
                        *g += dv * xv;
                    }
                    if need_dx {
                        for (g, &wv) in dx.iter_mut().zip(&w[row..row + n_in]) {
                            *g += wv * dv;
                        }
                    }
                }
            }
        }
        dy = dx;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Learning rate of epoch `e` is `lr0·lr_decay^e`.
    pub lr_decay: f64,
    pub seed: u64,
    /// Added to every entry of the one-hot targets.
    pub label_offset: f64,
    pub activation: ActivationKind,
    pub scale: CombinedScale,
    /// Rate (Hz) of a fully white pixel.
    pub input_rate: f64,
}

impl TrainConfig {
    pub fn new(activation: ActivationKind, scale: CombinedScale) -> Self {
        Self {
            epochs: 20,
            batch_size: 50,
            lr0: 1.0,
            lr_decay: 0.9,
            seed: 0,
            label_offset: 0.0,
            activation,
            scale,
            input_rate: 100.0,
        }
    }

    /// One noisy-softplus epoch on targets offset by 0.01.
    pub fn fine_tune(k: f64, scale: CombinedScale) -> Self {
        Self { epochs: 1, label_offset: 0.01, ..Self::new(ActivationKind::NoisySoftplus { k }, scale) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::InvalidParameter("lr0 must be finite and non-negative".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidParameter("lr_decay must lie in (0, 1]".into()));
        }
        if !(self.label_offset >= 0.0 && self.label_offset.is_finite()) {
            return Err(Error::InvalidParameter("label offset must be finite and non-negative".into()));
        }
        if !(self.input_rate >= 0.0 && self.input_rate.is_finite()) {
            return Err(Error::InvalidParameter("input rate must be finite and non-negative".into()));
        }
        self.activation.validate()
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * libm::pow(self.lr_decay, epoch as f64)
    }

    fn stage(&self, fine_tune: bool) -> TrainingStage {
        TrainingStage {
            activation: self.activation,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            lr_decay: self.lr_decay,
            label_offset: self.label_offset,
            seed: self.seed,
            fine_tune,
        }
    }
}

/// Mean per-image loss of one minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: WeightStore,
    pub loss_curve: Vec<LossPoint>,
}

impl TrainOutcome {
    /// Mean batch loss over the last epoch.
    pub fn final_epoch_loss(&self) -> Option<f64> {
        let last = self.loss_curve.last()?.epoch;
        let pts: Vec<f64> = self.loss_curve.iter().filter(|p| p.epoch == last).map(|p| p.loss).collect();
        Some(pts.iter().sum::<f64>() / pts.len() as f64)
    }
}

/// Glorot-initialised weights (stream `derive_seed(cfg.seed, 0)`) trained by SGD.
pub fn train(ds: &Dataset, arch: &Architecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let meta = WeightMeta { scale: cfg.scale, input_rate: cfg.input_rate, init_seed: cfg.seed, stages: Vec::new() };
    let init = WeightStore::glorot(arch.clone(), meta, derive_seed(cfg.seed, 0))?;
    sgd(init, ds, cfg, false)
}

/// Continues training with noisy-softplus units and offset targets.
pub fn fine_tune(weights: &WeightStore, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if !cfg.activation.uses_noise() {
        return Err(Error::InvalidParameter("fine tuning uses the noisy-softplus activation".into()));
    }
    let mut start = weights.clone();
    start.meta.scale = cfg.scale;
    sgd(start, ds, cfg, true)
}

/// Minibatch SGD from `weights`. Epoch `e` shuffles with stream
/// `derive_seed(cfg.seed, e + 1)`; the last batch may be short.
pub fn sgd(mut weights: WeightStore, ds: &Dataset, cfg: &TrainConfig, fine_tune: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    weights.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if ds.pixels_per_image() != weights.arch.input.len() {
        return Err(Error::Shape(alloc::format!(
            "images have {} pixels, network expects {}",
            ds.pixels_per_image(),
            weights.arch.input.len()
        )));
    }
    let targets = encode_labels(&ds.labels, cfg.label_offset)?;
    let out_len = weights.arch.shapes()?.last().map(Shape::len).unwrap_or(0);
    if out_len != CLASSES {
        return Err(Error::Shape(alloc::format!("output layer has {out_len} units, need {CLASSES}")));
    }
    weights.meta.scale = cfg.scale;
    let trainable: Vec<bool> = weights.arch.layers.iter().map(|l| l.trainable && l.has_weights()).collect();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut grads = Gradients::zeros_like(&weights);
    let mut curve = Vec::new();
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64 + 1));
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            grads.clear();
            let inv = 1.0 / idx.len() as f64;
            let mut loss = 0.0;
            for &i in idx {
                let x = encode_input(ds.image(i), cfg.input_rate, cfg.scale.tau_syn);
                let duals = forward(&weights, &x, &cfg.activation)?;
                loss += squared_loss(&duals[duals.len() - 1].y, &targets[i]);
                accumulate_gradients(&weights, &x, &duals, &targets[i], &cfg.activation, inv, &mut grads)?;
            }
            loss *= inv;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch, loss });
            }
            curve.push(LossPoint { epoch, batch, loss });
            if lr > 0.0 {
                for ((w, g), &on) in weights.tensors.iter_mut().zip(&grads.tensors).zip(&trainable) {
                    if on {
                        for (wv, gv) in w.iter_mut().zip(g) {
                            *wv -= lr * gv;
                        }
                    }
                }
            }
        }
    }
    weights.meta.stages.push(cfg.stage(fine_tune));
    Ok(TrainOutcome { weights, loss_curve: curve })
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnEvaluation {
    pub error_rate: f64,
    pub predictions: Vec<u8>,
}

/// Top-layer output for one image.
pub fn predict_outputs(weights: &WeightStore, pixels: &[f64], kind: &ActivationKind) -> Result<Vec<f64>> {
    let x = encode_input(pixels, weights.meta.input_rate, weights.meta.scale.tau_syn);
    let mut duals = forward(weights, &x, kind)?;
    Ok(duals.pop().map(|d| d.y).unwrap_or_default())
}

/// Classification error of the network evaluated with activation `kind`.
pub fn evaluate_ann(weights: &WeightStore, ds: &Dataset, kind: &ActivationKind) -> Result<AnnEvaluation> {
    weights.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut predictions = Vec::with_capacity(ds.len());
    let mut wrong = 0usize;
    for i in 0..ds.len() {
        let y = predict_outputs(weights, ds.image(i), kind)?;
        let p = argmax(&y) as u8;
        wrong += usize::from(p != ds.labels[i]);
        predictions.push(p);
    }
    Ok(AnnEvaluation { error_rate: wrong as f64 / ds.len() as f64, predictions })
}
