//! Spiking network built directly from trained ANN weights, clock-driven
//! inference on Poisson-coded images, and synaptic-event energy estimates.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::annet::{argmax, encode_input, forward, LayerKind, Shape, WeightStore};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lif::{steps_for, LifParams, NeuronState, Propagator};
use crate::response::Calibration;
use crate::seed::derive_seed;

/// Outgoing connections of one population, grouped by presynaptic neuron.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Connections {
    /// Row `i` spans `offsets[i]..offsets[i + 1]`.
    pub offsets: Vec<usize>,
    pub post: Vec<u32>,
    /// Weights in nA, taken unchanged from the weight store.
    pub weights: Vec<f64>,
}

impl Connections {
    pub fn pre_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post.is_empty()
    }

    #[inline]
    pub fn row(&self, pre: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[pre], self.offsets[pre + 1]);
        (&self.post[a..b], &self.weights[a..b])
    }

    pub fn fan_out(&self, pre: usize) -> usize {
        self.offsets[pre + 1] - self.offsets[pre]
    }

    /// Number of incoming connections of each of `n_post` targets.
    pub fn fan_in(&self, n_post: usize) -> Vec<usize> {
        let mut f = vec![0; n_post];
        for &p in &self.post {
            f[p as usize] += 1;
        }
        f
    }

    /// `out[post] = Σ_pre w·values[pre]`.
    pub fn propagate(&self, values: &[f64], n_post: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_post];
        for (pre, &x) in values.iter().enumerate().take(self.pre_count()) {
            let (post, w) = self.row(pre);
            for (&p, &wv) in post.iter().zip(w) {
                out[p as usize] += wv * x;
            }
        }
        out
    }
}

struct RowBuilder {
    conn: Connections,
}

impl RowBuilder {
    fn new() -> Self {
        Self { conn: Connections { offsets: vec![0], post: Vec::new(), weights: Vec::new() } }
    }

    fn push(&mut self, post: usize, w: f64) {
        self.conn.post.push(post as u32);
        self.conn.weights.push(w);
    }

    fn end_row(&mut self) {
        self.conn.offsets.push(self.conn.post.len());
    }
}

/// LIF populations fed by a Poisson input layer. `connections[l]` links
/// population `l` to `l + 1`, population 0 being the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingNetwork {
    pub params: LifParams,
    /// Shapes of all populations, input first.
    pub populations: Vec<Shape>,
    pub connections: Vec<Connections>,
}

impl SpikingNetwork {
    pub fn neuron_count(&self) -> usize {
        self.populations.iter().map(Shape::len).sum()
    }

    pub fn output_len(&self) -> usize {
        self.populations.last().map(Shape::len).unwrap_or(0)
    }

    /// Total synaptic current (nA) each unit of population `layer + 1`
    /// receives when population `layer` carries `values`.
    pub fn propagate(&self, layer: usize, values: &[f64]) -> Vec<f64> {
        self.connections[layer].propagate(values, self.populations[layer + 1].len())
    }
}

/// Unrolls weight sharing into explicit connections: valid convolution,
/// pooling as `1/stride²` links, dense as full bipartite links.
pub fn build_snn(weights: &WeightStore, params: LifParams) -> Result<SpikingNetwork> {
    params.validate()?;
    weights.validate()?;
    let arch = &weights.arch;
    let shapes = arch.shapes()?;
    let mut populations = vec![arch.input];
    populations.extend_from_slice(&shapes);
    let mut connections = Vec::with_capacity(shapes.len());
    for (li, layer) in arch.layers.iter().enumerate() {
        let inp = arch.input_of(&shapes, li);
        let out = shapes[li];
        let w = &weights.tensors[li];
        let mut b = RowBuilder::new();
        match layer.kind {
            LayerKind::Conv { kernel: k, .. } => {
                for i in 0..inp.maps {
                    for pr in 0..inp.rows {
                        for pc in 0..inp.cols {
                            for o in 0..out.maps {
                                for ky in 0..k {
                                    for kx in 0..k {
                                        if pr < ky || pc < kx || pr - ky >= out.rows || pc - kx >= out.cols {
                                            continue;
                                        }
                                        let wv = w[((o * inp.maps + i) * k + ky) * k + kx];
                                        b.push(out.index(o, pr - ky, pc - kx), wv);
                                    }
                                }
                            }
                            b.end_row();
                        }
                    }
                }
            }
            LayerKind::AvgPool { stride } => {
                let wv = 1.0 / (stride * stride) as f64;
                for m in 0..inp.maps {
                    for r in 0..inp.rows {
                        for c in 0..inp.cols {
                            b.push(out.index(m, r / stride, c / stride), wv);
                            b.end_row();
                        }
                    }
                }
            }
            LayerKind::Dense { out_units } => {
                let n_in = inp.len();
                for pre in 0..n_in {
                    for o in 0..out_units {
                        b.push(o, w[o * n_in + pre]);
                    }
                    b.end_row();
                }
            }
        }
        connections.push(b.conn);
    }
    Ok(SpikingNetwork { params, populations, connections })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferConfig {
    /// Presentation time (ms).
    pub duration: f64,
    pub dt: f64,
    /// Rate (Hz) of a fully white pixel.
    pub rate_scale: f64,
    pub seed: u64,
    /// Times (ms) at which cumulative output counts are recorded.
    pub checkpoints: Vec<f64>,
    /// Silent time (ms) before the input starts; the presentation window
    /// and checkpoints shift with it.
    pub input_delay: f64,
    /// Keep per-neuron spike counts of every population.
    pub record_counts: bool,
}

impl InferConfig {
    /// One-second presentation at 1 ms with checkpoints every 100 ms.
    pub fn new(seed: u64) -> Self {
        Self {
            duration: 1000.0,
            dt: 1.0,
            rate_scale: 100.0,
            seed,
            checkpoints: (1..=10).map(|i| 100.0 * i as f64).collect(),
            input_delay: 0.0,
            record_counts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointCounts {
    pub time: f64,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// Output spike counts per class.
    pub counts: Vec<u32>,
    /// Most active output; ties go to the lowest index.
    pub prediction: usize,
    /// No output neuron fired, so the prediction is only the tie-break.
    pub degenerate: bool,
    pub checkpoints: Vec<CheckpointCounts>,
    /// Spike count of every population, input first.
    pub population_spikes: Vec<u64>,
    /// `Σ spikes × fan-out` over all neurons.
    pub synaptic_events: u64,
    /// Events counted one by one as spikes were delivered.
    pub delivered_events: u64,
    pub duration: f64,
    pub neuron_counts: Option<Vec<Vec<u32>>>,
}

impl InferenceResult {
    /// Output rates (Hz).
    pub fn output_rates(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| 1000.0 * c as f64 / self.duration).collect()
    }

    pub fn events_per_second(&self) -> f64 {
        1000.0 * self.synaptic_events as f64 / self.duration
    }
}

/// Simulates one image. Every layer hands its spikes to the next one step
/// later; inputs are Bernoulli trains with `p = pixel·rate_scale·dt`.
pub fn infer(net: &SpikingNetwork, image: &[f64], cfg: &InferConfig) -> Result<InferenceResult> {
    let input_len = net.populations[0].len();
    if image.len() != input_len {
        return Err(Error::Shape(alloc::format!("image has {} pixels, network expects {input_len}", image.len())));
    }
    if let Some(p) = image.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(alloc::format!("pixel {p} outside [0, 1]")));
    }
    if !(cfg.rate_scale >= 0.0 && cfg.rate_scale.is_finite()) {
        return Err(Error::InvalidParameter("rate scale must be finite and non-negative".into()));
    }
    if !(cfg.input_delay >= 0.0 && cfg.input_delay.is_finite()) {
        return Err(Error::InvalidParameter("input delay must be finite and non-negative".into()));
    }
    let prop = Propagator::new(net.params, cfg.dt)?;
    let steps = steps_for(cfg.duration, cfg.dt)?;
    let delay_steps = if cfg.input_delay > 0.0 { steps_for(cfg.input_delay, cfg.dt)? } else { 0 };
    let total_steps = steps + delay_steps;
    let mut marks = Vec::with_capacity(cfg.checkpoints.len());
    for &t in &cfg.checkpoints {
        if !(t > 0.0 && t <= cfg.duration + 1e-9) {
            return Err(Error::InvalidParameter(alloc::format!(
                "checkpoint {t} ms outside (0, {}] ms",
                cfg.duration
            )));
        }
        marks.push(delay_steps + steps_for(t, cfg.dt)?.max(1) - 1);
    }
    let pixel_p = cfg.rate_scale * cfg.dt / 1000.0;
    if pixel_p >= 1.0 {
        return Err(Error::RateTooHigh { rate: cfg.rate_scale, dt: cfg.dt });
    }
    let active: Vec<(usize, f64)> =
        image.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, &p)| (i, p * pixel_p)).collect();

    let n_pop = net.populations.len();
    let mut states: Vec<Vec<NeuronState>> =
        net.populations[1..].iter().map(|s| vec![NeuronState::resting(&net.params); s.len()]).collect();
    let mut neuron_counts: Vec<Vec<u32>> = net.populations.iter().map(|s| vec![0; s.len()]).collect();
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); n_pop];
    let mut fresh: Vec<Vec<usize>> = vec![Vec::new(); n_pop];
    let mut delivered = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checkpoints = Vec::with_capacity(marks.len());
    let out_pop = n_pop - 1;

    let deliver = |pending: &[Vec<usize>], states: &mut [Vec<NeuronState>], delivered: &mut u64| {
        for l in 0..n_pop - 1 {
            let conn = &net.connections[l];
            let targets = &mut states[l];
            for &pre in &pending[l] {
                let (post, w) = conn.row(pre);
                for (&p, &wv) in post.iter().zip(w) {
                    targets[p as usize].receive(wv);
                }
                *delivered += post.len() as u64;
            }
        }
    };

    for step in 0..total_steps {
        deliver(&pending, &mut states, &mut delivered);
        for f in fresh.iter_mut() {
            f.clear();
        }
        let mut bad = false;
        for (l, pop) in states.iter_mut().enumerate() {
            let out = &mut fresh[l + 1];
            for (i, s) in pop.iter_mut().enumerate() {
                if prop.advance(s, 0.0) {
                    out.push(i);
                }
                bad |= !s.v.is_finite();
            }
        }
        if bad {
            return Err(Error::NonFinite("membrane potential"));
        }
        if step >= delay_steps {
            for &(i, p) in &active {
                if rng.random::<f64>() < p {
                    fresh[0].push(i);
                }
            }
        }
        for (l, f) in fresh.iter().enumerate() {
            for &i in f {
                neuron_counts[l][i] += 1;
            }
        }
        core::mem::swap(&mut pending, &mut fresh);
        for (ci, &m) in marks.iter().enumerate() {
            if m == step {
                checkpoints.push(CheckpointCounts { time: cfg.checkpoints[ci], counts: neuron_counts[out_pop].clone() });
            }
        }
    }
    // spikes of the last step still reach their targets
    deliver(&pending, &mut states, &mut delivered);

    let mut synaptic_events = 0u64;
    for (l, counts) in neuron_counts.iter().enumerate().take(n_pop - 1) {
        let conn = &net.connections[l];
        for (i, &c) in counts.iter().enumerate() {
            synaptic_events += c as u64 * conn.fan_out(i) as u64;
        }
    }
    let counts = neuron_counts[out_pop].clone();
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let population_spikes = neuron_counts.iter().map(|c| c.iter().map(|&v| v as u64).sum()).collect();
    Ok(InferenceResult {
        prediction: argmax(&as_f),
        degenerate: counts.iter().all(|&c| c == 0),
        counts,
        checkpoints,
        population_spikes,
        synaptic_events,
        delivered_events: delivered,
        duration: cfg.duration,
        neuron_counts: if cfg.record_counts { Some(neuron_counts) } else { None },
    })
}

/// Per-image seed of an evaluation run.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageOutcome {
    pub index: usize,
    pub label: u8,
    pub prediction: usize,
    pub degenerate: bool,
    pub counts: Vec<u32>,
    pub synaptic_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnEvaluation {
    pub error_rate: f64,
    /// `(time ms, accuracy)` at every checkpoint.
    pub accuracy_curve: Vec<(f64, f64)>,
    pub images: Vec<ImageOutcome>,
    pub synaptic_events: u64,
    pub duration: f64,
}

impl SnnEvaluation {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.error_rate
    }

    /// Mean synaptic events per second of simulated time.
    pub fn events_per_second(&self) -> f64 {
        1000.0 * self.synaptic_events as f64 / (self.duration * self.images.len() as f64)
    }
}

/// Simulates image `index` of `ds` with its own seed stream.
pub fn infer_image(net: &SpikingNetwork, ds: &Dataset, index: usize, cfg: &InferConfig) -> Result<InferenceResult> {
    let cfg = InferConfig { seed: image_seed(cfg.seed, index), ..cfg.clone() };
    infer(net, ds.image(index), &cfg)
}

/// Aggregates per-image results given in dataset order.
pub fn summarize(ds: &Dataset, results: &[InferenceResult], cfg: &InferConfig) -> Result<SnnEvaluation> {
    if results.len() != ds.len() || results.is_empty() {
        return Err(Error::Shape(alloc::format!("{} results for {} images", results.len(), ds.len())));
    }
    let n = results.len() as f64;
    let mut wrong = 0usize;
    let mut correct_at = vec![0usize; cfg.checkpoints.len()];
    let mut images = Vec::with_capacity(results.len());
    let mut events = 0u64;
    for (i, r) in results.iter().enumerate() {
        let label = ds.labels[i];
        wrong += usize::from(r.prediction != label as usize);
        for (c, cp) in r.checkpoints.iter().enumerate() {
            let f: Vec<f64> = cp.counts.iter().map(|&v| v as f64).collect();
            correct_at[c] += usize::from(argmax(&f) == label as usize);
        }
        events += r.synaptic_events;
        images.push(ImageOutcome {
            index: i,
            label,
            prediction: r.prediction,
            degenerate: r.degenerate,
            counts: r.counts.clone(),
            synaptic_events: r.synaptic_events,
        });
    }
    Ok(SnnEvaluation {
        error_rate: wrong as f64 / n,
        accuracy_curve: cfg.checkpoints.iter().zip(&correct_at).map(|(&t, &c)| (t, c as f64 / n)).collect(),
        images,
        synaptic_events: events,
        duration: cfg.duration,
    })
}

/// Sequential evaluation; image `i` uses seed `image_seed(cfg.seed, i)`.
pub fn evaluate_snn(net: &SpikingNetwork, ds: &Dataset, cfg: &InferConfig) -> Result<SnnEvaluation> {
    if ds.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let results = (0..ds.len()).map(|i| infer_image(net, ds, i, cfg)).collect::<Result<Vec<_>>>()?;
    summarize(ds, &results, cfg)
}

/// Energy drawn by synaptic events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub joules: f64,
    pub watts: f64,
    pub events_per_second: f64,
}

/// `E = events/s · T · E_syn` with `T` in seconds and `E_syn` in nJ.
pub fn energy_estimate(events_per_second: f64, duration_s: f64, e_syn_nj: f64) -> Result<EnergyEstimate> {
    if !(e_syn_nj > 0.0 && e_syn_nj.is_finite()) {
        return Err(Error::InvalidParameter("synaptic event energy must be positive".into()));
    }
    if !(events_per_second >= 0.0 && duration_s >= 0.0 && events_per_second.is_finite() && duration_s.is_finite()) {
        return Err(Error::InvalidParameter("event rate and duration must be finite and non-negative".into()));
    }
    let watts = events_per_second * e_syn_nj * 1e-9;
    Ok(EnergyEstimate { joules: watts * duration_s, watts, events_per_second })
}

/// Synaptic events per second predicted by the ANN: `Σ_j λ_j·N_j` with
/// `λ_j = y_j/τ_syn` for hidden units and `pixel·input_rate` for inputs.
pub fn predicted_event_rate(
    net: &SpikingNetwork,
    weights: &WeightStore,
    pixels: &[f64],
    kind: &ActivationKind,
) -> Result<f64> {
    let tau_s = weights.meta.scale.tau_syn_s();
    let x = encode_input(pixels, weights.meta.input_rate, weights.meta.scale.tau_syn);
    let duals = forward(weights, &x, kind)?;
    let mut rate = 0.0;
    for (l, conn) in net.connections.iter().enumerate() {
        let values: &[f64] = if l == 0 { &x } else { &duals[l - 1].y };
        for (i, &v) in values.iter().enumerate() {
            rate += v / tau_s * conn.fan_out(i) as f64;
        }
    }
    Ok(rate)
}

/// Measured versus predicted rates of one convolution map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub image: usize,
    pub unit: usize,
    pub measured: f64,
    /// Predicted rate per activation, in the order of `ConvolutionReport::kinds`.
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionReport {
    pub kinds: Vec<ActivationKind>,
    /// `√Σ(y/τ_syn − λ)²` over all units and images, per activation.
    pub distances: Vec<f64>,
    pub rows: Vec<RateComparison>,
}

/// Presents each image to a single convolution map of `weights` (layer 0,
/// map `map`) and compares measured output rates with the rate each
/// activation predicts.
pub fn convolve_rates_experiment(
    weights: &WeightStore,
    map: usize,
    images: &Dataset,
    params: LifParams,
    calib: &Calibration,
    kinds: &[ActivationKind],
    cfg: &InferConfig,
) -> Result<ConvolutionReport> {
    let (maps, k) = match weights.arch.layers.first().map(|l| l.kind) {
        Some(LayerKind::Conv { out_maps, kernel }) => (out_maps, kernel),
        _ => return Err(Error::Unsupported("the first layer must be a convolution".into())),
    };
    if map >= maps {
        return Err(Error::InvalidParameter(alloc::format!("map {map} of {maps}")));
    }
    let in_maps = weights.arch.input.maps;
    let per_map = in_maps * k * k;
    let mut sub = WeightStore {
        arch: crate::annet::Architecture {
            input: weights.arch.input,
            layers: vec![crate::annet::LayerSpec::conv(1, k)],
        },
        tensors: vec![weights.tensors[0][map * per_map..(map + 1) * per_map].to_vec()],
        meta: weights.meta.clone(),
    };
    sub.meta.scale = (*calib).into();
    sub.meta.input_rate = cfg.rate_scale;
    let net = build_snn(&sub, params)?;
    let mut rows = Vec::new();
    let mut sq = vec![0.0; kinds.len()];
    for img in 0..images.len() {
        let run = InferConfig { seed: image_seed(cfg.seed, img), record_counts: true, ..cfg.clone() };
        let res = infer(&net, images.image(img), &run)?;
        let counts = res.neuron_counts.as_ref().map(|c| c[1].clone()).unwrap_or_default();
        let x = encode_input(images.image(img), cfg.rate_scale, calib.tau_syn);
        let preds = kinds
            .iter()
            .map(|kind| forward(&sub, &x, kind).map(|d| d[0].y.iter().map(|y| y / sub.meta.scale.tau_syn_s()).collect()))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        for (unit, &c) in counts.iter().enumerate() {
            let measured = 1000.0 * c as f64 / cfg.duration;
            let predicted: Vec<f64> = preds.iter().map(|p| p[unit]).collect();
            for (acc, p) in sq.iter_mut().zip(&predicted) {
                *acc += (p - measured) * (p - measured);
            }
            rows.push(RateComparison { image: img, unit, measured, predicted });
        }
    }
    Ok(ConvolutionReport { kinds: kinds.to_vec(), distances: sq.into_iter().map(libm::sqrt).collect(), rows })
}
