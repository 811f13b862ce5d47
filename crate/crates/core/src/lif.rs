//! Clock-driven current-based LIF neuron with exponentially decaying
//! synaptic current and absolute refractoriness.
//!
//! Units are fixed crate-wide: mV, ms, nA, nF (so `R_m = τ_m / C_m` is in MΩ
//! and `R_m·I` is in mV).
//!
//! Each step integrates the membrane exactly: the external and offset
//! currents are held constant over the step, and the synaptic current decays
//! as `i_syn·exp(-t/τ_syn)` inside it. Spikes delivered to a neuron are added
//! to its synaptic current at the start of the step in which they arrive.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stimulus::PoissonEnsembleSpec;

/// Biophysical constants of the current-based LIF neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane capacitance (nF).
    pub c_m: f64,
    /// Membrane time constant (ms).
    pub tau_m: f64,
    /// Absolute refractory period (ms).
    pub tau_refrac: f64,
    /// Reset potential (mV).
    pub v_reset: f64,
    /// Resting potential (mV).
    pub v_rest: f64,
    /// Firing threshold (mV).
    pub v_thresh: f64,
    /// Constant bias current (nA).
    pub i_offset: f64,
    /// Synaptic time constant (ms).
    pub tau_syn: f64,
}

impl Default for LifParams {
    /// The standard parameter set (cm 0.25 nF, τ_m 20 ms, t_ref 1 ms,
    /// V_reset = V_rest = -65 mV, V_th -50 mV, i_offset 0.1 nA) with τ_syn 5 ms.
    fn default() -> Self {
        Self {
            c_m: 0.25,
            tau_m: 20.0,
            tau_refrac: 1.0,
            v_reset: -65.0,
            v_rest: -65.0,
            v_thresh: -50.0,
            i_offset: 0.1,
            tau_syn: 5.0,
        }
    }
}

impl LifParams {
    pub fn with_i_offset(mut self, i_offset: f64) -> Self {
        self.i_offset = i_offset;
        self
    }

    pub fn with_tau_syn(mut self, tau_syn: f64) -> Self {
        self.tau_syn = tau_syn;
        self
    }

    /// Membrane resistance in MΩ.
    pub fn r_m(&self) -> f64 {
        self.tau_m / self.c_m
    }

    /// Smallest constant total current (nA) that eventually reaches threshold.
    pub fn rheobase(&self) -> f64 {
        (self.v_thresh - self.v_rest) / self.r_m()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.c_m,
            self.tau_m,
            self.tau_refrac,
            self.v_reset,
            self.v_rest,
            self.v_thresh,
            self.i_offset,
            self.tau_syn,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LifParams"));
        }
        if self.tau_m <= 0.0 || self.c_m <= 0.0 || self.tau_syn <= 0.0 {
            return Err(invalid("tau_m, c_m and tau_syn must be positive"));
        }
        if self.tau_refrac < 0.0 {
            return Err(invalid("tau_refrac must be non-negative"));
        }
        if self.v_thresh <= self.v_rest {
            return Err(invalid("v_thresh must exceed v_rest"));
        }
        if self.v_reset > self.v_thresh {
            return Err(invalid("v_reset must not exceed v_thresh"));
        }
        Ok(())
    }
}

fn invalid(msg: &str) -> Error {
    Error::InvalidParameter(msg.into())
}

/// Dynamic state of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub v: f64,
    pub i_syn_exc: f64,
    pub i_syn_inh: f64,
    pub refrac_remaining: f64,
    pub last_spike: Option<f64>,
}

impl NeuronState {
    /// Neuron at rest with no synaptic current.
    pub fn resting(params: &LifParams) -> Self {
        Self {
            v: params.v_rest,
            i_syn_exc: 0.0,
            i_syn_inh: 0.0,
            refrac_remaining: 0.0,
            last_spike: None,
        }
    }

    /// Adds a synaptic increment (nA); the sign selects the channel.
    #[inline]
    pub fn receive(&mut self, weight: f64) {
        if weight >= 0.0 {
            self.i_syn_exc += weight;
        } else {
            self.i_syn_inh += weight;
        }
    }

    #[inline]
    pub fn i_syn(&self) -> f64 {
        self.i_syn_exc + self.i_syn_inh
    }
}

/// Spike times of one source or neuron, strictly increasing, in ms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub source_id: usize,
    pub times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(source_id: usize) -> Self {
        Self { source_id, times: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Mean rate in Hz over `duration` ms.
    pub fn rate(&self, duration: f64) -> f64 {
        self.times.len() as f64 * 1000.0 / duration
    }

    pub fn intervals(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_interval(&self) -> Option<f64> {
        self.intervals().reduce(f64::min)
    }
}

/// Sampled current (nA) at a fixed step `dt` (ms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl CurrentTrace {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        let trace = Self { dt, samples };
        trace.validate()?;
        Ok(trace)
    }

    pub fn constant(value: f64, duration: f64, dt: f64) -> Result<Self> {
        Self::new(dt, alloc::vec![value; steps_for(duration, dt)?])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("trace dt must be positive"));
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("current trace"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

/// Number of whole steps of `dt` in `duration`.
pub fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt must be positive"));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid("duration must be non-negative"));
    }
    Ok(libm::round(duration / dt) as usize)
}

/// Per-step propagator constants for one `(params, dt)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub params: LifParams,
    pub dt: f64,
    /// exp(-dt/τ_m)
    leak: f64,
    /// exp(-dt/τ_syn)
    syn_decay: f64,
    /// ΔV per nA of current held constant over the step.
    const_gain: f64,
    /// ΔV per nA of synaptic current present at the step start.
    syn_gain: f64,
    /// Step-mean synaptic current per nA at the step start.
    syn_mean: f64,
}

impl Propagator {
    pub fn new(params: LifParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        let leak = libm::exp(-dt / params.tau_m);
        let syn_decay = libm::exp(-dt / params.tau_syn);
        let const_gain = params.r_m() * -libm::expm1(-dt / params.tau_m);
        // ∫₀^dt e^{-(dt-t)/τ_m} e^{-t/τ_syn} dt / C_m
        let z = dt * (1.0 / params.tau_m - 1.0 / params.tau_syn);
        let ratio = if z.abs() < 1e-12 { 1.0 } else { libm::expm1(z) / z };
        let syn_gain = leak * dt * ratio / params.c_m;
        let syn_mean = -libm::expm1(-dt / params.tau_syn) * params.tau_syn / dt;
        Ok(Self { params, dt, leak, syn_decay, const_gain, syn_gain, syn_mean })
    }

    /// Number of steps a neuron stays clamped after a spike.
    pub fn refractory_steps(&self) -> usize {
        libm::ceil(self.params.tau_refrac / self.dt - 1e-9).max(0.0) as usize
    }

    /// Step-averaged synaptic current for the state at the start of a step.
    #[inline]
    pub fn mean_syn_current(&self, state: &NeuronState) -> f64 {
        state.i_syn() * self.syn_mean
    }

    /// Advances `state` by one step with external current `i_ext` (nA) held
    /// constant. Returns whether the neuron fired at the end of the step.
    #[inline]
    pub fn advance(&self, state: &mut NeuronState, i_ext: f64) -> bool {
        let p = &self.params;
        let mut fired = false;
        if state.refrac_remaining > 1e-9 {
            state.v = p.v_reset;
            state.refrac_remaining = (state.refrac_remaining - self.dt).max(0.0);
        } else {
            state.refrac_remaining = 0.0;
            state.v = p.v_rest
                + (state.v - p.v_rest) * self.leak
                + (i_ext + p.i_offset) * self.const_gain
                + state.i_syn() * self.syn_gain;
            if state.v >= p.v_thresh {
                state.v = p.v_reset;
                state.refrac_remaining = p.tau_refrac;
                fired = true;
            }
        }
        state.i_syn_exc *= self.syn_decay;
        state.i_syn_inh *= self.syn_decay;
        fired
    }
}

/// One exact-integration step of a single neuron.
///
/// Spikes that arrive in this step must already have been added to the
/// synaptic current (see [`NeuronState::receive`]).
pub fn lif_step(state: NeuronState, params: &LifParams, i_ext: f64, dt: f64) -> Result<(NeuronState, bool)> {
    if !i_ext.is_finite() {
        return Err(Error::NonFinite("input current"));
    }
    let prop = Propagator::new(*params, dt)?;
    let mut next = state;
    let fired = prop.advance(&mut next, i_ext);
    Ok((next, fired))
}

/// Spike train with a fixed synaptic weight (nA) onto the simulated neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTrain {
    pub weight: f64,
    pub train: SpikeTrain,
}

/// Input driving [`simulate_neuron`].
#[derive(Debug, Clone, Copy)]
pub enum Drive<'a> {
    /// Only the neuron's own `i_offset`.
    None,
    /// Injected current, sampled at the simulation step.
    Current(&'a CurrentTrace),
    /// Explicit input spike trains.
    Spikes(&'a [WeightedTrain]),
    /// Poisson sources generated on the fly (Bernoulli per step, per source).
    Ensemble(&'a PoissonEnsembleSpec),
}

/// Recorded per-step quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSample {
    /// Membrane potential at the end of the step (mV).
    pub v: f64,
    /// Synaptic current averaged over the step (nA).
    pub i_syn: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub spikes: SpikeTrain,
    pub trace: Option<Vec<StateSample>>,
    pub duration: f64,
}

impl Simulation {
    pub fn rate(&self) -> f64 {
        self.spikes.rate(self.duration)
    }
}

/// Simulates one neuron from rest for `duration` ms at step `dt`.
///
/// Results depend only on the inputs (ensemble drives carry their own seed).
pub fn simulate_neuron(params: &LifParams, drive: Drive<'_>, duration: f64, dt: f64, record: bool) -> Result<Simulation> {
    if !(duration > 0.0) {
        return Err(invalid("duration must be positive"));
    }
    let prop = Propagator::new(*params, dt)?;
    let steps = steps_for(duration, dt)?;
    let mut state = NeuronState::resting(params);
    let mut spikes = SpikeTrain::new(0);
    let mut trace = if record { Some(Vec::with_capacity(steps)) } else { None };

    let mut run = |state: &mut NeuronState, k: usize, i_ext: f64, trace: &mut Option<Vec<StateSample>>| {
        let i_syn = prop.mean_syn_current(state);
        if prop.advance(state, i_ext) {
            let t = (k + 1) as f64 * dt;
            spikes.times.push(t);
            state.last_spike = Some(t);
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(StateSample { v: state.v, i_syn });
        }
    };

    match drive {
        Drive::None => {
            for k in 0..steps {
                run(&mut state, k, 0.0, &mut trace);
            }
        }
        Drive::Current(current) => {
            current.validate()?;
            if (current.dt - dt).abs() > 1e-9 * dt {
                return Err(invalid("current trace dt must equal the simulation dt"));
            }
            for k in 0..steps {
                let i = current.samples.get(k).copied().unwrap_or(0.0);
                run(&mut state, k, i, &mut trace);
            }
        }
        Drive::Spikes(inputs) => {
            let (exc, inh) = bin_spikes(inputs, steps, dt, duration)?;
            for k in 0..steps {
                state.i_syn_exc += exc[k];
                state.i_syn_inh += inh[k];
                run(&mut state, k, 0.0, &mut trace);
            }
        }
        Drive::Ensemble(spec) => {
            let groups = spec.grouped(dt)?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for k in 0..steps {
                for g in &groups {
                    let n = g.sampler.sample(&mut rng);
                    if n > 0 {
                        state.receive(g.weight * n as f64);
                    }
                }
                run(&mut state, k, 0.0, &mut trace);
            }
        }
    }
    Ok(Simulation { spikes, trace, duration })
}

/// Sums input weights per step, separately for excitatory and inhibitory inputs.
pub fn bin_spikes(inputs: &[WeightedTrain], steps: usize, dt: f64, duration: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut exc = alloc::vec![0.0; steps];
    let mut inh = alloc::vec![0.0; steps];
    for input in inputs {
        if !input.weight.is_finite() {
            return Err(Error::NonFinite("input weight"));
        }
        for &t in &input.train.times {
            if !(0.0..=duration).contains(&t) {
                return Err(Error::SpikeOutOfRange { time: t, duration });
            }
            let k = libm::floor(t / dt + 1e-9) as usize;
            if k >= steps {
                continue;
            }
            if input.weight >= 0.0 {
                exc[k] += input.weight;
            } else {
                inh[k] += input.weight;
            }
        }
    }
    Ok((exc, inh))
}

/// Sources of an ensemble sharing one `(weight, rate)` pair.
pub(crate) struct SourceGroup {
    pub weight: f64,
    pub sampler: Binomial,
}

impl PoissonEnsembleSpec {
    /// Groups identical sources so each step draws one binomial count per
    /// group, which is the sum of the members' per-step Bernoulli draws.
    pub(crate) fn grouped(&self, dt: f64) -> Result<Vec<SourceGroup>> {
        self.validate()?;
        let mut pairs: Vec<(f64, f64, u64)> = Vec::new();
        for (&w, &rate) in self.weights.iter().zip(&self.rates) {
            let p = rate * dt / 1000.0;
            if p >= 1.0 {
                return Err(Error::RateTooHigh { rate, dt });
            }
            if p == 0.0 || w == 0.0 {
                continue;
            }
            match pairs.iter_mut().find(|(pw, pr, _)| *pw == w && *pr == rate) {
                Some(entry) => entry.2 += 1,
                None => pairs.push((w, rate, 1)),
            }
        }
        pairs
            .into_iter()
            .map(|(weight, rate, n)| {
                let sampler = Binomial::new(n, rate * dt / 1000.0)
                    .map_err(|_| invalid("binomial parameters out of range"))?;
                Ok(SourceGroup { weight, sampler })
            })
            .collect()
    }
}
