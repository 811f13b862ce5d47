//! Noisy current sources, Poisson spike trains, the ensemble ↔ current
//! statistics mapping, and trace diagnostics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lif::{steps_for, CurrentTrace, SpikeTrain};

/// Gaussian current drawn every `sample_dt` and held in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyCurrentSpec {
    /// Mean current m_I (nA).
    pub mean: f64,
    /// Standard deviation s_I (nA).
    pub std: f64,
    /// Resolution at which values are drawn (ms).
    pub sample_dt: f64,
    pub seed: u64,
}

/// Independent Poisson sources projecting onto one neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonEnsembleSpec {
    /// Synaptic weight of each source (nA, signed).
    pub weights: Vec<f64>,
    /// Firing rate of each source (Hz).
    pub rates: Vec<f64>,
    /// Duration (ms).
    pub duration: f64,
    pub seed: u64,
}

impl PoissonEnsembleSpec {
    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.rates.len() {
            return Err(Error::Shape(alloc::format!(
                "{} weights but {} rates",
                self.weights.len(),
                self.rates.len()
            )));
        }
        if self.rates.iter().chain(&self.weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ensemble spec"));
        }
        if self.rates.iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidParameter("rates must be non-negative".into()));
        }
        Ok(())
    }

    /// Independent spike trains realising the ensemble (Bernoulli per step).
    pub fn spike_trains(&self, dt: f64) -> Result<Vec<SpikeTrain>> {
        self.validate()?;
        self.rates
            .iter()
            .enumerate()
            .map(|(i, &rate)| {
                let mut train = poisson_train(rate, self.duration, dt, self.seed ^ i as u64)?;
                train.source_id = i;
                Ok(train)
            })
            .collect()
    }
}

/// Mean and variance of a current (nA, nA²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentStats {
    pub mean: f64,
    pub var: f64,
}

impl CurrentStats {
    pub fn std(&self) -> f64 {
        libm::sqrt(self.var)
    }
}

/// Held-Gaussian current trace sampled at `sim_dt`.
pub fn noisy_current(spec: &NoisyCurrentSpec, duration: f64, sim_dt: f64) -> Result<CurrentTrace> {
    if !(spec.std >= 0.0) || !spec.mean.is_finite() || !spec.std.is_finite() {
        return Err(Error::InvalidParameter("noisy current needs finite mean and std >= 0".into()));
    }
    let hold = hold_steps(spec.sample_dt, sim_dt)?;
    let steps = steps_for(duration, sim_dt)?;
    let mut samples = Vec::with_capacity(steps);
    if spec.std == 0.0 {
        samples.resize(steps, spec.mean);
    } else {
        let normal = Normal::new(spec.mean, spec.std).map_err(|_| Error::InvalidParameter("normal".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        while samples.len() < steps {
            let value = normal.sample(&mut rng);
            let n = hold.min(steps - samples.len());
            samples.extend(core::iter::repeat_n(value, n));
        }
    }
    CurrentTrace::new(sim_dt, samples)
}

fn hold_steps(sample_dt: f64, sim_dt: f64) -> Result<usize> {
    if !(sim_dt > 0.0) || !(sample_dt > 0.0) {
        return Err(Error::InvalidParameter("sample_dt and sim_dt must be positive".into()));
    }
    let ratio = sample_dt / sim_dt;
    let hold = libm::round(ratio);
    if hold < 1.0 || (ratio - hold).abs() > 1e-9 * hold {
        return Err(Error::ResolutionMismatch { sample_dt, sim_dt });
    }
    Ok(hold as usize)
}

/// Poisson spike train realised as one Bernoulli(rate·dt) trial per step.
/// Spikes carry the start time of their step.
pub fn poisson_train(rate: f64, duration: f64, dt: f64, seed: u64) -> Result<SpikeTrain> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter("rate must be finite and non-negative".into()));
    }
    let p = rate * dt / 1000.0;
    if p >= 1.0 {
        return Err(Error::RateTooHigh { rate, dt });
    }
    let steps = steps_for(duration, dt)?;
    let mut train = SpikeTrain::new(0);
    if p == 0.0 {
        return Ok(train);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..steps {
        if rng.random::<f64>() < p {
            train.times.push(k as f64 * dt);
        }
    }
    Ok(train)
}

/// Shot-noise statistics of the summed exponential synaptic current:
/// `m = τ_syn·Σ wᵢλᵢ`, `s² = ½·τ_syn·Σ wᵢ²λᵢ` (τ_syn in ms, λ converted to kHz).
pub fn ensemble_to_stats(spec: &PoissonEnsembleSpec, tau_syn: f64) -> CurrentStats {
    let (sum_w, sum_w2) = spec
        .weights
        .iter()
        .zip(&spec.rates)
        .fold((0.0, 0.0), |(a, b), (&w, &r)| (a + w * r, b + w * w * r));
    CurrentStats {
        mean: tau_syn * sum_w / 1000.0,
        var: 0.5 * tau_syn * sum_w2 / 1000.0,
    }
}

/// Layout used to realise target current statistics with Poisson sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleLayout {
    /// Number of sources.
    pub count: usize,
    /// Fraction of sources that are excitatory.
    pub excitatory_fraction: f64,
    /// Common synaptic weight magnitude |w| (nA).
    pub weight: f64,
    pub duration: f64,
    pub seed: u64,
}

impl EnsembleLayout {
    /// 100 sources, half excitatory, half inhibitory.
    pub fn balanced(weight: f64, duration: f64, seed: u64) -> Self {
        Self { count: 100, excitatory_fraction: 0.5, weight, duration, seed }
    }

    fn split(&self) -> (usize, usize) {
        let n_exc = libm::round(self.count as f64 * self.excitatory_fraction) as usize;
        (n_exc.min(self.count), self.count - n_exc.min(self.count))
    }
}

/// Solves for the excitatory and inhibitory rates that give mean `m` and
/// standard deviation `s` with every source at weight ±|w|.
pub fn stats_to_ensemble(m: f64, s: f64, tau_syn: f64, layout: &EnsembleLayout) -> Result<PoissonEnsembleSpec> {
    let infeasible = |reason: String| Error::InfeasibleEnsemble { m, s, reason };
    if !(s >= 0.0) || !m.is_finite() || !s.is_finite() {
        return Err(infeasible("m must be finite and s non-negative".into()));
    }
    if !(tau_syn > 0.0) || !(layout.weight > 0.0) {
        return Err(infeasible("tau_syn and weight must be positive".into()));
    }
    if !(0.0..=1.0).contains(&layout.excitatory_fraction) {
        return Err(infeasible("excitatory fraction must lie in [0, 1]".into()));
    }
    let w = layout.weight;
    // net = n_e·λ_e − n_i·λ_i, total = n_e·λ_e + n_i·λ_i, both in Hz
    let net = 1000.0 * m / (tau_syn * w);
    let total = 2000.0 * s * s / (tau_syn * w * w);
    if total + 1e-12 * total.abs().max(1.0) < net.abs() {
        return Err(infeasible(alloc::format!(
            "requires s^2 >= |m|*w/2 = {:.6} nA^2 (have {:.6})",
            m.abs() * w / 2.0,
            s * s
        )));
    }
    let exc_total = (0.5 * (total + net)).max(0.0);
    let inh_total = (0.5 * (total - net)).max(0.0);
    let (n_exc, n_inh) = layout.split();
    if exc_total > 0.0 && n_exc == 0 {
        return Err(infeasible("excitatory drive needed but no excitatory sources".into()));
    }
    if inh_total > 0.0 && n_inh == 0 {
        return Err(infeasible("inhibitory drive needed but no inhibitory sources".into()));
    }
    let rate_exc = if n_exc > 0 { exc_total / n_exc as f64 } else { 0.0 };
    let rate_inh = if n_inh > 0 { inh_total / n_inh as f64 } else { 0.0 };
    let mut weights = Vec::with_capacity(layout.count);
    let mut rates = Vec::with_capacity(layout.count);
    weights.extend(core::iter::repeat_n(w, n_exc));
    rates.extend(core::iter::repeat_n(rate_exc, n_exc));
    weights.extend(core::iter::repeat_n(-w, n_inh));
    rates.extend(core::iter::repeat_n(rate_inh, n_inh));
    Ok(PoissonEnsembleSpec { weights, rates, duration: layout.duration, seed: layout.seed })
}

/// Histogram with Freedman–Diaconis bins: width `2·IQR·n^{-1/3}`, first edge
/// at the sample minimum. A zero IQR yields a single bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Counts normalised to a probability density.
    pub density: Vec<f64>,
}

/// Diagnostics of a sampled current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub mean: f64,
    pub std: f64,
    pub histogram: Histogram,
    /// `(lag ms, normalised autocorrelation)`; `None` when the trace has zero variance.
    pub autocorrelation: Option<Vec<(f64, f64)>>,
    /// One-sided periodogram `(frequency Hz, PSD nA²/Hz)` of the mean-removed trace.
    pub spectrum: Vec<(f64, f64)>,
}

impl TraceDiagnostics {
    pub fn autocorrelation_defined(&self) -> bool {
        self.autocorrelation.is_some()
    }

    /// Mean PSD over bins with `0 < f < max_hz`.
    pub fn mean_psd_below(&self, max_hz: f64) -> f64 {
        let (sum, n) = self
            .spectrum
            .iter()
            .filter(|(f, _)| *f > 0.0 && *f < max_hz)
            .fold((0.0, 0usize), |(s, n), (_, p)| (s + p, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Histogram, autocorrelation up to `max_lag` ms, and a direct-DFT
/// periodogram evaluated up to `max_freq` Hz (capped at Nyquist).
pub fn trace_diagnostics(trace: &CurrentTrace, max_lag: f64, max_freq: f64) -> Result<TraceDiagnostics> {
    trace.validate()?;
    let x = &trace.samples;
    let n = x.len();
    if n == 0 {
        return Err(Error::Empty("current trace"));
    }
    let max_lag_steps = libm::floor(max_lag / trace.dt + 1e-9) as usize;
    if n < 2 * max_lag_steps {
        return Err(Error::InvalidParameter(alloc::format!(
            "trace of {n} samples is shorter than twice the maximum lag ({max_lag_steps} steps)"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = centered.iter().map(|v| v * v).sum();
    let std = libm::sqrt(ss / n as f64);

    let autocorrelation = if ss > 0.0 {
        Some(
            (0..=max_lag_steps)
                .map(|k| {
                    let c: f64 = centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
                    (k as f64 * trace.dt, c / ss)
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(TraceDiagnostics {
        mean,
        std,
        histogram: histogram(x),
        autocorrelation,
        spectrum: periodogram(&centered, trace.dt, max_freq),
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn histogram(x: &[f64]) -> Histogram {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr / libm::cbrt(n as f64);
    let bins = if width > 0.0 && hi > lo {
        (libm::ceil((hi - lo) / width) as usize).max(1)
    } else {
        1
    };
    let step = if bins > 1 { width } else { (hi - lo).max(f64::MIN_POSITIVE) };
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * step).collect();
    let mut counts = vec![0usize; bins];
    for &v in &sorted {
        let idx = (libm::floor((v - lo) / step) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let density = counts.iter().map(|&c| c as f64 / (n as f64 * step)).collect();
    Histogram { edges, counts, density }
}

fn periodogram(centered: &[f64], dt_ms: f64, max_freq: f64) -> Vec<(f64, f64)> {
    let n = centered.len();
    let dt = dt_ms / 1000.0;
    let df = 1.0 / (n as f64 * dt);
    let nyquist_bin = n / 2;
    let last = (libm::floor(max_freq / df) as usize).min(nyquist_bin);
    let mut out = Vec::with_capacity(last + 1);
    for k in 0..=last {
        let theta = -2.0 * core::f64::consts::PI * k as f64 / n as f64;
        let (s1, c1) = (libm::sin(theta), libm::cos(theta));
        // rotate the twiddle incrementally, renormalising every 1024 samples
        let (mut c, mut s) = (1.0f64, 0.0f64);
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &v) in centered.iter().enumerate() {
            re += v * c;
            im += v * s;
            let next_c = c * c1 - s * s1;
            s = c * s1 + s * c1;
            c = next_c;
            if j % 1024 == 1023 {
                let a = theta * (j + 1) as f64;
                c = libm::cos(a);
                s = libm::sin(a);
            }
        }
        let mut psd = (re * re + im * im) * dt / n as f64;
        if k != 0 && !(n.is_multiple_of(2) && k == nyquist_bin) {
            psd *= 2.0;
        }
        out.push((k as f64 * df, psd));
    }
    out
}
