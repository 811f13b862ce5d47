//! LIF response functions, empirical tuning curves and the (k, S)
//! calibration of Noisy Softplus.
//!
//! Throughout, `m` and `s` denote the mean and standard deviation (nA) of the
//! *input* current; the neuron's own `i_offset` is added on top of `m`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activation::noisy_softplus;
use crate::error::{Error, Result};
use crate::lif::{simulate_neuron, Drive, LifParams};
use crate::quad;
use crate::seed::derive_seed;
use crate::special::siegert_integrand;
use crate::stimulus::{noisy_current, stats_to_ensemble, EnsembleLayout, NoisyCurrentSpec};

/// Drift μ (mV/ms) and noise amplitude σ (mV/√ms) of the membrane diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionStats {
    pub mu: f64,
    pub sigma: f64,
}

/// Firing rate (Hz) for a constant input current `i` (nA) plus `i_offset`.
pub fn rate_constant_current(params: &LifParams, i: f64) -> f64 {
    let drive = (i + params.i_offset) * params.r_m();
    let gap = params.v_thresh - params.v_rest;
    if !(drive > gap) {
        return 0.0;
    }
    let period = params.tau_refrac - params.tau_m * libm::log1p(-gap / drive);
    1000.0 / period
}

/// `μ = m/C_m`, `σ = s·√dt / C_m`. `dt` is the resolution at which the
/// current noise is sampled; it anchors σ and has to be stated explicitly.
pub fn current_stats_to_diffusion(m: f64, s: f64, dt: f64, params: &LifParams) -> DiffusionStats {
    DiffusionStats {
        mu: m / params.c_m,
        sigma: s * libm::sqrt(dt) / params.c_m,
    }
}

/// Relative tolerance of the first-passage integral.
pub const SIEGERT_REL_TOL: f64 = 1e-8;

/// Mean firing rate (Hz) under white-noise drive, via the Siegert
/// first-passage formula.
///
/// The integral runs between `(V_rest − μτ_m)/(σ√τ_m)` and
/// `(V_th − μτ_m)/(σ√τ_m)` with potentials measured from rest, and the
/// integrand is evaluated as `√π·erfcx(−u)`. `i_offset/C_m` is added to μ.
/// σ = 0 falls back to [`rate_constant_current`].
pub fn siegert_rate(params: &LifParams, stats: DiffusionStats) -> Result<f64> {
    siegert_rate_with_tol(params, stats, SIEGERT_REL_TOL)
}

pub fn siegert_rate_with_tol(params: &LifParams, stats: DiffusionStats, rel_tol: f64) -> Result<f64> {
    if !stats.mu.is_finite() || !stats.sigma.is_finite() {
        return Err(Error::NonFinite("diffusion statistics"));
    }
    if stats.sigma < 0.0 {
        return Err(Error::InvalidParameter("sigma must be non-negative".into()));
    }
    if stats.sigma == 0.0 {
        return Ok(rate_constant_current(params, stats.mu * params.c_m));
    }
    let mu = stats.mu + params.i_offset / params.c_m;
    let mu_tau = mu * params.tau_m;
    let scale = stats.sigma * libm::sqrt(params.tau_m);
    let lower = -mu_tau / scale;
    let upper = (params.v_thresh - params.v_rest - mu_tau) / scale;
    // Beyond u ≈ 26.5 the integrand exceeds f64 range: the rate is below 1e-300 Hz.
    if upper > 26.5 {
        return Ok(0.0);
    }
    let integral = quad::integrate(siegert_integrand, lower, upper, rel_tol, 0.0, 2000)?;
    let period = params.tau_refrac + params.tau_m * integral.value;
    if !(period > 0.0) {
        return Err(Error::Quadrature {
            a: lower,
            b: upper,
            estimate: integral.value,
            error_estimate: integral.error_estimate,
            intervals: integral.intervals,
        });
    }
    let max_rate = if params.tau_refrac > 0.0 { 1000.0 / params.tau_refrac } else { f64::INFINITY };
    Ok((1000.0 / period).clamp(0.0, max_rate))
}

/// Measured response at one `(m, s)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningSample {
    pub m_i: f64,
    pub s_i: f64,
    /// Mean rate over trials (Hz).
    pub rate: f64,
    pub trials: usize,
    pub rate_min: f64,
    pub rate_max: f64,
}

/// How the noisy input current is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TuningMode {
    /// Held Gaussian current redrawn every `sample_dt` ms.
    CurrentSource { sample_dt: f64 },
    /// Balanced ensemble of `count` Poisson sources onto exponential synapses.
    PoissonEnsemble { count: usize, weight: EnsembleWeight },
}

impl TuningMode {
    /// 100 Poisson sources with the default weight policy.
    pub fn poisson() -> Self {
        TuningMode::PoissonEnsemble { count: 100, weight: EnsembleWeight::default() }
    }
}

/// Synaptic weight magnitude used to realise a target `(m, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "kebab-case")]
pub enum EnsembleWeight {
    /// `|w| = c·s`, which fixes the event count per `tau_syn` at `2/c²`.
    PerStd(f64),
    /// Same `|w|` (nA) at every point.
    Fixed(f64),
}

impl Default for EnsembleWeight {
    fn default() -> Self {
        EnsembleWeight::PerStd(0.25)
    }
}

impl EnsembleWeight {
    pub fn weight(&self, s: f64) -> f64 {
        match *self {
            EnsembleWeight::PerStd(c) => c * s,
            EnsembleWeight::Fixed(w) => w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub params: LifParams,
    pub mode: TuningMode,
    /// Duration of each trial (ms).
    pub duration: f64,
    pub trials: usize,
    /// Simulation step (ms).
    pub dt: f64,
    pub seed: u64,
}

/// Tuning samples plus the grid points that could not be realised.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TuningCurve {
    pub samples: Vec<TuningSample>,
    pub skipped: Vec<SkippedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub m_i: f64,
    pub s_i: f64,
    pub reason: String,
}

/// Seed of trial `trial` at grid point `point`: `seed ⊕ (point << 20) ⊕ trial`.
pub fn tuning_trial_seed(seed: u64, point: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(seed, (point as u64) << 20), trial as u64)
}

/// Simulates all trials of one grid point.
pub fn measure_tuning_point(cfg: &TuningConfig, m: f64, s: f64, point: usize) -> Result<TuningSample> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let mut rates = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let seed = tuning_trial_seed(cfg.seed, point, trial);
        let sim = match cfg.mode {
            TuningMode::CurrentSource { sample_dt } => {
                let spec = NoisyCurrentSpec { mean: m, std: s, sample_dt, seed };
                let trace = noisy_current(&spec, cfg.duration, cfg.dt)?;
                simulate_neuron(&cfg.params, Drive::Current(&trace), cfg.duration, cfg.dt, false)?
            }
            TuningMode::PoissonEnsemble { count, weight } => {
                let layout = EnsembleLayout {
                    count,
                    excitatory_fraction: 0.5,
                    weight: weight.weight(s),
                    duration: cfg.duration,
                    seed,
                };
                let spec = stats_to_ensemble(m, s, cfg.params.tau_syn, &layout)?;
                simulate_neuron(&cfg.params, Drive::Ensemble(&spec), cfg.duration, cfg.dt, false)?
            }
        };
        rates.push(sim.rate());
    }
    let rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let rate_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let rate_max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TuningSample { m_i: m, s_i: s, rate, trials: cfg.trials, rate_min, rate_max })
}

/// Grid points in row-major `(s, m)` order; the index feeds the seed.
pub fn tuning_grid(m_grid: &[f64], s_grid: &[f64]) -> Vec<(usize, f64, f64)> {
    s_grid
        .iter()
        .flat_map(|&s| m_grid.iter().map(move |&m| (m, s)))
        .enumerate()
        .map(|(i, (m, s))| (i, m, s))
        .collect()
}

/// Sequential tuning-curve measurement. Infeasible Poisson targets are
/// skipped and reported rather than failing the whole grid.
pub fn measure_tuning_curve(cfg: &TuningConfig, m_grid: &[f64], s_grid: &[f64]) -> Result<TuningCurve> {
    if m_grid.is_empty() || s_grid.is_empty() {
        return Err(Error::Empty("tuning grid"));
    }
    collect_tuning_curve(
        tuning_grid(m_grid, s_grid).into_iter().map(|(point, m, s)| ((m, s), measure_tuning_point(cfg, m, s, point))),
    )
}

/// Folds per-point results, in grid order, into a curve. Points that cannot
/// be realised are reported as skipped; any other error is returned.
pub fn collect_tuning_curve(
    points: impl IntoIterator<Item = ((f64, f64), Result<TuningSample>)>,
) -> Result<TuningCurve> {
    let mut curve = TuningCurve::default();
    for ((m, s), res) in points {
        match res {
            Ok(sample) => curve.samples.push(sample),
            Err(e @ (Error::InfeasibleEnsemble { .. } | Error::RateTooHigh { .. })) => {
                curve.skipped.push(SkippedPoint { m_i: m, s_i: s, reason: alloc::format!("{e}") })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

/// Fitted Noisy Softplus shape `k` and rate scale `S` (Hz per nA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub k: f64,
    pub s: f64,
    pub tau_syn: f64,
    /// Root-mean-square residual of the fit (Hz).
    pub fit_rmse: f64,
}

impl Calibration {
    /// Values used for the recognition network at τ_syn = 5 ms.
    pub const RECOGNITION_5MS: Calibration = Calibration { k: 0.30, s: 201.0, tau_syn: 5.0, fit_rmse: 0.0 };
}

/// Search interval for `k`.
pub const K_RANGE: (f64, f64) = (0.01, 2.0);

/// Least-squares fit of `rate ≈ S·f_ns(m, s; k)`.
///
/// For each `k` the optimal `S` is closed form (`Σ f·r / Σ f²`), so only `k`
/// is searched: a log-spaced scan locates the basin, then golden-section
/// search refines it.
pub fn calibrate(samples: &[TuningSample], tau_syn: f64) -> Result<Calibration> {
    if samples.len() < 10 {
        return Err(Error::DegenerateSamples(alloc::format!("need at least 10 samples, got {}", samples.len())));
    }
    let mut sigmas: Vec<f64> = samples.iter().map(|s| s.s_i).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    if sigmas.len() < 2 {
        return Err(Error::DegenerateSamples("samples must span at least two noise levels".into()));
    }
    if samples.iter().any(|s| !s.rate.is_finite() || !s.m_i.is_finite() || !s.s_i.is_finite()) {
        return Err(Error::NonFinite("tuning samples"));
    }
    if samples.iter().all(|s| s.rate == 0.0) {
        return Err(Error::DegenerateSamples("all rates are zero".into()));
    }

    let fit = |k: f64| -> (f64, f64) {
        let (mut fr, mut ff) = (0.0, 0.0);
        for s in samples {
            let f = noisy_softplus(s.m_i, s.s_i, k);
            fr += f * s.rate;
            ff += f * f;
        }
        let scale = if ff > 0.0 { fr / ff } else { 0.0 };
        let sse: f64 = samples
            .iter()
            .map(|s| {
                let r = scale * noisy_softplus(s.m_i, s.s_i, k) - s.rate;
                r * r
            })
            .sum();
        (scale, sse)
    };

    let (lo, hi) = (libm::log(K_RANGE.0), libm::log(K_RANGE.1));
    const SCAN: usize = 400;
    let grid = |i: usize| libm::exp(lo + (hi - lo) * i as f64 / SCAN as f64);
    let best = (0..=SCAN)
        .map(|i| (i, fit(grid(i)).1))
        .fold((0, f64::INFINITY), |acc, (i, e)| if e < acc.1 { (i, e) } else { acc })
        .0;
    let mut a = grid(best.saturating_sub(1));
    let mut b = grid((best + 1).min(SCAN));

    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (fit(c).1, fit(d).1);
    while (b - a) > 1e-12 * (a + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = fit(c).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = fit(d).1;
        }
    }
    let k = 0.5 * (a + b);
    let (s, sse) = fit(k);
    if !(s > 0.0) {
        return Err(Error::DegenerateSamples("fitted scale is not positive".into()));
    }
    Ok(Calibration { k, s, tau_syn, fit_rmse: libm::sqrt(sse / samples.len() as f64) })
}
