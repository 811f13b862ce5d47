//! `nsp` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nsp_core::activation::{ActivationKind, CombinedScale};
use nsp_core::annet::{self, Architecture, TrainConfig, WeightStore};
use nsp_core::dataset::{holdout_split, subsample, Dataset};
use nsp_core::lif::{simulate_neuron, CurrentTrace, Drive, LifParams};
use nsp_core::response::{
    calibrate, current_stats_to_diffusion, siegert_rate, Calibration, EnsembleWeight, TuningConfig, TuningMode,
    TuningSample,
};
use nsp_core::seed::derive_seed;
use nsp_core::snn::{build_snn, energy_estimate, InferConfig};
use nsp_core::stimulus::{noisy_current, stats_to_ensemble, trace_diagnostics, EnsembleLayout, NoisyCurrentSpec};
use serde::Serialize;

use crate::output::{read_csv, write_csv, write_json, write_run};
use crate::weights::{load_weights, load_weights_for, round_to_f32, save_weights};
use crate::{idx, parallel};

#[derive(Debug, Parser)]
#[command(name = "nsp", version, about = "Noisy Softplus tuning, calibration, training and spiking inference")]
pub struct Cli {
    /// Worker threads for parallel grids and evaluations (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// JSON object of flag defaults, e.g. `{"dt": 0.1}`; command-line flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure LIF response rates over an (m, s) grid of noisy input currents.
    TuningCurve(TuningArgs),
    /// Fit Noisy Softplus (k, S) to tuning samples.
    Calibrate(CalibrateArgs),
    /// Train a bias-free ConvNet.
    Train(TrainArgs),
    /// One noisy-softplus epoch on offset labels.
    Finetune(FinetuneArgs),
    /// Classification error of the ANN.
    EvalAnn(EvalAnnArgs),
    /// Classification error of the spiking network built from the weights.
    EvalSnn(EvalSnnArgs),
    /// Synaptic-event energy estimate.
    Energy(EnergyArgs),
}

/// Not a runtime failure: the request itself is invalid (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// A list of values given as `a,b,c` or `start:stop:step` (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl std::ops::Deref for Grid {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn parse_grid(text: &str) -> Result<Grid, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"));
    let values = if let [a, b, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !step.is_finite() || step <= 0.0 || b < a {
            return Err(format!("range `{text}` needs start <= stop and a positive step"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + step * i as f64).map(|v| (v * 1e12).round() / 1e12).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(format!("grid `{text}` is empty or not finite"));
    }
    Ok(Grid(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Current,
    Poisson,
}

#[derive(Debug, Args, Serialize)]
pub struct TuningArgs {
    #[arg(long, value_enum, default_value = "current")]
    pub mode: ModeArg,
    /// Simulation step (ms).
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Hold time of each noise sample (ms); defaults to --dt.
    #[arg(long)]
    pub sample_dt: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tau_syn: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Trial duration (ms).
    #[arg(long, default_value_t = 10000.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mean currents (nA): `a,b,c` or `start:stop:step`.
    #[arg(long, default_value = "-0.5:1.0:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    pub m_grid: Grid,
    /// Current standard deviations (nA).
    #[arg(long, default_value = "0.1:1.0:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    pub s_grid: Grid,
    #[arg(long, default_value_t = 0.1)]
    pub i_offset: f64,
    /// Poisson mode: synaptic weight |w| = ratio·s.
    #[arg(long, default_value_t = 0.25)]
    pub weight_ratio: f64,
    /// Poisson mode: use this |w| (nA) at every point instead.
    #[arg(long)]
    pub fixed_weight: Option<f64>,
    /// Mean of the probe trace whose statistics are written.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub probe_m: f64,
    #[arg(long, default_value_t = 0.2)]
    pub probe_s: f64,
    #[arg(long)]
    pub out: PathBuf,
}

impl TuningArgs {
    fn params(&self) -> LifParams {
        LifParams::default().with_tau_syn(self.tau_syn).with_i_offset(self.i_offset)
    }

    fn mode(&self) -> TuningMode {
        match self.mode {
            ModeArg::Current => TuningMode::CurrentSource { sample_dt: self.sample_dt.unwrap_or(self.dt) },
            ModeArg::Poisson => TuningMode::PoissonEnsemble {
                count: 100,
                weight: match self.fixed_weight {
                    Some(w) => EnsembleWeight::Fixed(w),
                    None => EnsembleWeight::PerStd(self.weight_ratio),
                },
            },
        }
    }

    fn config(&self) -> TuningConfig {
        TuningConfig {
            params: self.params(),
            mode: self.mode(),
            duration: self.duration,
            trials: self.trials,
            dt: self.dt,
            seed: self.seed,
        }
    }

    /// Resolution the Siegert prediction assumes for the noise.
    fn noise_dt(&self) -> f64 {
        match self.mode() {
            TuningMode::CurrentSource { sample_dt } => sample_dt,
            TuningMode::PoissonEnsemble { .. } => self.dt,
        }
    }
}

#[derive(Debug, Serialize)]
struct TuningRow {
    m_i: f64,
    s_i: f64,
    rate: f64,
    rate_min: f64,
    rate_max: f64,
    trials: usize,
    siegert: f64,
}

#[derive(Debug, Serialize)]
struct SkippedRow {
    m_i: f64,
    s_i: f64,
    reason: String,
}

#[derive(Debug, Serialize)]
struct LagRow {
    lag_ms: f64,
    r: f64,
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    freq_hz: f64,
    psd: f64,
}

#[derive(Debug, Serialize)]
struct BinRow {
    lo: f64,
    hi: f64,
    count: usize,
    density: f64,
}

fn check_positive(name: &str, v: f64) -> anyhow::Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(usage(format!("--{name} must be positive")));
    }
    Ok(())
}

fn prepare_out(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn tuning_rows(samples: &[TuningSample], params: &LifParams, noise_dt: f64) -> anyhow::Result<Vec<TuningRow>> {
    samples
        .iter()
        .map(|s| {
            let d = current_stats_to_diffusion(s.m_i, s.s_i, noise_dt, params);
            Ok(TuningRow {
                m_i: s.m_i,
                s_i: s.s_i,
                rate: s.rate,
                rate_min: s.rate_min,
                rate_max: s.rate_max,
                trials: s.trials,
                siegert: siegert_rate(params, d)?,
            })
        })
        .collect()
}

/// Synaptic or injected current of the probe point, as the neuron sees it.
fn probe_trace(args: &TuningArgs) -> anyhow::Result<CurrentTrace> {
    let seed = derive_seed(args.seed, u64::MAX);
    let params = args.params();
    Ok(match args.mode() {
        TuningMode::CurrentSource { sample_dt } => {
            let spec = NoisyCurrentSpec { mean: args.probe_m, std: args.probe_s, sample_dt, seed };
            noisy_current(&spec, args.duration, args.dt)?
        }
        TuningMode::PoissonEnsemble { count, weight } => {
            let layout = EnsembleLayout {
                count,
                excitatory_fraction: 0.5,
                weight: weight.weight(args.probe_s),
                duration: args.duration,
                seed,
            };
            let spec = stats_to_ensemble(args.probe_m, args.probe_s, params.tau_syn, &layout)?;
            let sim = simulate_neuron(&params, Drive::Ensemble(&spec), args.duration, args.dt, true)?;
            let samples = sim.trace.unwrap_or_default().iter().map(|s| s.i_syn).collect();
            CurrentTrace::new(args.dt, samples)?
        }
    })
}

fn cmd_tuning_curve(args: &TuningArgs, threads: usize) -> anyhow::Result<()> {
    let start = Instant::now();
    check_positive("dt", args.dt)?;
    check_positive("duration", args.duration)?;
    if let Some(s) = args.sample_dt {
        check_positive("sample-dt", s)?;
    }
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if args.s_grid.iter().any(|&s| s < 0.0) {
        return Err(usage("--s-grid values must be non-negative"));
    }
    prepare_out(&args.out)?;
    let cfg = args.config();
    let curve = parallel::tuning_curve(&cfg, &args.m_grid, &args.s_grid, threads)?;
    let rows = tuning_rows(&curve.samples, &cfg.params, args.noise_dt())?;
    write_csv(&args.out.join("tuning.csv"), &rows)?;
    let skipped: Vec<SkippedRow> =
        curve.skipped.iter().map(|s| SkippedRow { m_i: s.m_i, s_i: s.s_i, reason: s.reason.clone() }).collect();
    write_csv(&args.out.join("skipped.csv"), &skipped)?;

    let trace = probe_trace(args)?;
    let diag = trace_diagnostics(&trace, 50.0, 500.0)?;
    let lags: Vec<LagRow> =
        diag.autocorrelation.clone().unwrap_or_default().into_iter().map(|(lag_ms, r)| LagRow { lag_ms, r }).collect();
    write_csv(&args.out.join("autocorrelation.csv"), &lags)?;
    let spectrum: Vec<SpectrumRow> = diag.spectrum.iter().map(|&(freq_hz, psd)| SpectrumRow { freq_hz, psd }).collect();
    write_csv(&args.out.join("spectrum.csv"), &spectrum)?;
    let h = &diag.histogram;
    let bins: Vec<BinRow> = (0..h.counts.len())
        .map(|i| BinRow { lo: h.edges[i], hi: h.edges[i + 1], count: h.counts[i], density: h.density[i] })
        .collect();
    write_csv(&args.out.join("histogram.csv"), &bins)?;

    #[derive(Serialize)]
    struct Results {
        points: usize,
        skipped: usize,
        probe_mean: f64,
        probe_std: f64,
        probe_autocorrelation_defined: bool,
    }
    let results = Results {
        points: curve.samples.len(),
        skipped: curve.skipped.len(),
        probe_mean: diag.mean,
        probe_std: diag.std,
        probe_autocorrelation_defined: diag.autocorrelation_defined(),
    };
    write_run(&args.out, "tuning-curve", args.seed, args, &results, start.elapsed())?;
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 5.0)]
    pub tau_syn: f64,
    /// Tuning samples (CSV with m_i, s_i, rate columns). Without it a
    /// Poisson-ensemble sweep is run first.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 10000.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub i_offset: f64,
    #[arg(long, default_value_t = 0.25)]
    pub weight_ratio: f64,
    #[arg(long, default_value = "-0.5:1.0:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    pub m_grid: Grid,
    #[arg(long, default_value = "0.1:1.0:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    pub s_grid: Grid,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, serde::Deserialize)]
struct SampleRow {
    m_i: f64,
    s_i: f64,
    rate: f64,
}

fn cmd_calibrate(args: &CalibrateArgs, threads: usize) -> anyhow::Result<()> {
    let start = Instant::now();
    check_positive("tau-syn", args.tau_syn)?;
    prepare_out(&args.out)?;
    let samples: Vec<TuningSample> = match &args.samples {
        Some(path) => read_csv::<SampleRow>(path)?
            .into_iter()
            .map(|r| TuningSample { m_i: r.m_i, s_i: r.s_i, rate: r.rate, trials: 1, rate_min: r.rate, rate_max: r.rate })
            .collect(),
        None => {
            check_positive("dt", args.dt)?;
            check_positive("duration", args.duration)?;
            let cfg = TuningConfig {
                params: LifParams::default().with_tau_syn(args.tau_syn).with_i_offset(args.i_offset),
                mode: TuningMode::PoissonEnsemble { count: 100, weight: EnsembleWeight::PerStd(args.weight_ratio) },
                duration: args.duration,
                trials: args.trials,
                dt: args.dt,
                seed: args.seed,
            };
            let curve = parallel::tuning_curve(&cfg, &args.m_grid, &args.s_grid, threads)?;
            let rows = tuning_rows(&curve.samples, &cfg.params, args.dt)?;
            write_csv(&args.out.join("tuning.csv"), &rows)?;
            curve.samples
        }
    };
    let calib = calibrate(&samples, args.tau_syn)?;
    write_json(&args.out.join("calibration.json"), &calib)?;
    write_run(&args.out, "calibrate", args.seed, args, &calib, start.elapsed())?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    #[arg(long, default_value = "data/mnist-10k-images-idx3-ubyte.gz")]
    pub train_images: PathBuf,
    #[arg(long, default_value = "data/mnist-10k-labels-idx1-ubyte.gz")]
    pub train_labels: PathBuf,
    /// Separate test files; without them a stratified hold-out of the
    /// training files is used.
    #[arg(long, requires = "test_labels")]
    pub test_images: Option<PathBuf>,
    #[arg(long, requires = "test_images")]
    pub test_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub holdout: usize,
    #[arg(long, default_value_t = 42)]
    pub split_seed: u64,
}

impl DataArgs {
    /// `(train, test)` sets.
    pub fn load(&self) -> anyhow::Result<(Dataset, Dataset)> {
        let full = idx::load_idx(&self.train_images, &self.train_labels)?;
        match (&self.test_images, &self.test_labels) {
            (Some(i), Some(l)) => Ok((full, idx::load_idx(i, l)?)),
            _ => {
                if self.holdout >= full.len() {
                    return Err(usage(format!("--holdout {} leaves no training images", self.holdout)));
                }
                Ok(holdout_split(&full, self.holdout, self.split_seed)?)
            }
        }
    }
}

fn limit(ds: Dataset, n: Option<usize>, seed: u64) -> anyhow::Result<Dataset> {
    match n {
        Some(n) if n > ds.len() => Err(usage(format!("requested {n} images but only {} are available", ds.len()))),
        Some(n) => Ok(subsample(&ds, n, seed)?),
        None => Ok(ds),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationArg {
    Relu,
    NoisySoftplus,
    Softplus,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ActivationArgs {
    /// Noisy Softplus shape k.
    #[arg(long, default_value_t = 0.30)]
    pub k: f64,
    /// Fixed noise level of the plain Softplus.
    #[arg(long, default_value_t = 0.45)]
    pub softplus_sigma: f64,
}

impl ActivationArgs {
    fn kind(&self, a: ActivationArg) -> ActivationKind {
        match a {
            ActivationArg::Relu => ActivationKind::Relu,
            ActivationArg::NoisySoftplus => ActivationKind::NoisySoftplus { k: self.k },
            ActivationArg::Softplus => ActivationKind::Softplus { k: self.k, fixed_sigma: self.softplus_sigma },
        }
    }
}

#[derive(Debug, Serialize)]
struct LossRow {
    epoch: usize,
    batch: usize,
    loss: f64,
}

fn write_loss(path: &Path, curve: &[annet::LossPoint]) -> anyhow::Result<()> {
    let rows: Vec<LossRow> = curve.iter().map(|p| LossRow { epoch: p.epoch, batch: p.batch, loss: p.loss }).collect();
    Ok(write_csv(path, &rows)?)
}

#[derive(Debug, Args, Serialize)]
pub struct SgdArgs {
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr0: f64,
    #[arg(long, default_value_t = 0.9)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Stratified subset of the training set.
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long, default_value = "6c5-2s-12c5-2s-10fc")]
    pub arch: String,
    #[arg(long, value_enum, default_value = "relu")]
    pub activation: ActivationArg,
    #[command(flatten)]
    pub act: ActivationArgs,
    /// Rate scale S (Hz per nA) of the combined activation.
    #[arg(long, default_value_t = 201.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 5.0)]
    pub tau_syn: f64,
    /// Calibration JSON; overrides --k, --scale and --tau-syn.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[arg(long, default_value_t = 0.0)]
    pub label_offset: f64,
    /// Rate (Hz) of a white pixel.
    #[arg(long, default_value_t = 100.0)]
    pub input_rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let arch = Architecture::mnist(&args.arch).map_err(|e| usage(e.to_string()))?;
    let (mut k, mut s, mut tau) = (args.act.k, args.scale, args.tau_syn);
    if let Some(path) = &args.calibration {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let c: Calibration = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        (k, s, tau) = (c.k, c.s, c.tau_syn);
    }
    let act = ActivationArgs { k, ..args.act.clone() };
    let scale = CombinedScale::new(s, tau).map_err(|e| usage(e.to_string()))?;
    prepare_out(&args.out)?;
    let (train_set, test_set) = args.data.load()?;
    let train_set = limit(train_set, args.train_size, derive_seed(args.data.split_seed, 1))?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.sgd.batch_size,
        lr0: args.sgd.lr0,
        lr_decay: args.sgd.lr_decay,
        seed: args.sgd.seed,
        label_offset: args.label_offset,
        activation: act.kind(args.activation),
        scale,
        input_rate: args.input_rate,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let out = annet::train(&train_set, &arch, &cfg)?;
    let weights = round_to_f32(&out.weights);
    save_weights(&weights, &args.out.join("weights.json"))?;
    write_loss(&args.out.join("loss.csv"), &out.loss_curve)?;
    let eval = parallel::evaluate_ann(&weights, &test_set, &cfg.activation, 1)?;

    #[derive(Serialize)]
    struct Results {
        architecture: String,
        activation: ActivationKind,
        train_images: usize,
        test_images: usize,
        first_batch_loss: f64,
        final_epoch_loss: f64,
        test_error: f64,
    }
    let results = Results {
        architecture: arch.fingerprint(),
        activation: cfg.activation,
        train_images: train_set.len(),
        test_images: test_set.len(),
        first_batch_loss: out.loss_curve.first().map(|p| p.loss).unwrap_or(f64::NAN),
        final_epoch_loss: out.final_epoch_loss().unwrap_or(f64::NAN),
        test_error: eval.error_rate,
    };
    write_run(&args.out, "train", args.sgd.seed, args, &results, start.elapsed())?;
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Reject weights that do not belong to this architecture.
    #[arg(long)]
    pub arch: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long, default_value_t = 0.30)]
    pub k: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub label_offset: f64,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn cmd_finetune(args: &FinetuneArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let weights = load_checked(&args.weights, args.arch.as_deref())?;
    prepare_out(&args.out)?;
    let (train_set, test_set) = args.data.load()?;
    let train_set = limit(train_set, args.train_size, derive_seed(args.data.split_seed, 1))?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.sgd.batch_size,
        lr0: args.sgd.lr0,
        lr_decay: args.sgd.lr_decay,
        seed: args.sgd.seed,
        label_offset: args.label_offset,
        input_rate: weights.meta.input_rate,
        ..TrainConfig::fine_tune(args.k, weights.meta.scale)
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let out = annet::fine_tune(&weights, &train_set, &cfg)?;
    let tuned = round_to_f32(&out.weights);
    save_weights(&tuned, &args.out.join("weights.json"))?;
    write_loss(&args.out.join("loss.csv"), &out.loss_curve)?;
    let eval = parallel::evaluate_ann(&tuned, &test_set, &cfg.activation, 1)?;

    #[derive(Serialize)]
    struct Results {
        epochs: usize,
        label_offset: f64,
        final_epoch_loss: f64,
        test_error: f64,
    }
    let results = Results {
        epochs: cfg.epochs,
        label_offset: cfg.label_offset,
        final_epoch_loss: out.final_epoch_loss().unwrap_or(f64::NAN),
        test_error: eval.error_rate,
    };
    write_run(&args.out, "finetune", args.sgd.seed, args, &results, start.elapsed())?;
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct EvalAnnArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Reject weights that do not belong to this architecture.
    #[arg(long)]
    pub arch: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Stratified subset of the test set.
    #[arg(long)]
    pub eval_size: Option<usize>,
    /// Defaults to the activation the weights were last trained with.
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    #[command(flatten)]
    pub act: ActivationArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_checked(path: &Path, arch: Option<&str>) -> anyhow::Result<WeightStore> {
    match arch {
        Some(text) => {
            let arch = Architecture::mnist(text).map_err(|e| usage(e.to_string()))?;
            Ok(load_weights_for(path, &arch)?)
        }
        None => Ok(load_weights(path)?),
    }
}

fn resolve_activation(weights: &WeightStore, arg: Option<ActivationArg>, act: &ActivationArgs) -> ActivationKind {
    match arg {
        Some(a) => act.kind(a),
        None => weights.meta.activation().unwrap_or(ActivationKind::Relu),
    }
}

#[derive(Debug, Serialize)]
struct PredictionRow {
    index: usize,
    label: u8,
    prediction: u8,
}

fn cmd_eval_ann(args: &EvalAnnArgs, threads: usize) -> anyhow::Result<()> {
    let start = Instant::now();
    let weights = load_checked(&args.weights, args.arch.as_deref())?;
    prepare_out(&args.out)?;
    let (_, test_set) = args.data.load()?;
    let test_set = limit(test_set, args.eval_size, derive_seed(args.data.split_seed, 2))?;
    let kind = resolve_activation(&weights, args.activation, &args.act);
    let eval = parallel::evaluate_ann(&weights, &test_set, &kind, threads)?;
    let rows: Vec<PredictionRow> = eval
        .predictions
        .iter()
        .enumerate()
        .map(|(index, &prediction)| PredictionRow { index, label: test_set.labels[index], prediction })
        .collect();
    write_csv(&args.out.join("predictions.csv"), &rows)?;

    #[derive(Serialize)]
    struct Results {
        activation: ActivationKind,
        images: usize,
        error_rate: f64,
    }
    let results = Results { activation: kind, images: test_set.len(), error_rate: eval.error_rate };
    write_run(&args.out, "eval-ann", 0, args, &results, start.elapsed())?;
    Ok(())
}

fn parse_checkpoints(text: &str) -> Result<Grid, String> {
    let v = parse_grid(text)?;
    if v.iter().any(|&t| t <= 0.0) {
        return Err("checkpoints must be positive".into());
    }
    Ok(v)
}

#[derive(Debug, Args, Serialize)]
pub struct EvalSnnArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Reject weights that do not belong to this architecture.
    #[arg(long)]
    pub arch: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub eval_size: Option<usize>,
    /// Presentation time per image (ms).
    #[arg(long, default_value_t = 1000.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Rate (Hz) of a white pixel; defaults to the training input rate.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub i_offset: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Times (ms) at which accuracy is recorded.
    #[arg(long, default_value = "100:1000:100", value_parser = parse_checkpoints)]
    pub checkpoints: Grid,
    /// Energy per synaptic event (nJ) for the energy estimate.
    #[arg(long, default_value_t = 8.0)]
    pub esyn_nj: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    time_ms: f64,
    accuracy: f64,
}

fn cmd_eval_snn(args: &EvalSnnArgs, threads: usize) -> anyhow::Result<()> {
    let start = Instant::now();
    check_positive("duration", args.duration)?;
    check_positive("dt", args.dt)?;
    if args.checkpoints.iter().any(|&t| t > args.duration) {
        return Err(usage("checkpoints must not exceed --duration"));
    }
    let weights = load_checked(&args.weights, args.arch.as_deref())?;
    prepare_out(&args.out)?;
    let (_, test_set) = args.data.load()?;
    let test_set = limit(test_set, args.eval_size, derive_seed(args.data.split_seed, 2))?;
    let params = LifParams::default().with_tau_syn(weights.meta.scale.tau_syn).with_i_offset(args.i_offset);
    let net = build_snn(&weights, params)?;
    let cfg = InferConfig {
        duration: args.duration,
        dt: args.dt,
        rate_scale: args.rate.unwrap_or(weights.meta.input_rate),
        seed: args.seed,
        checkpoints: args.checkpoints.0.clone(),
        input_delay: 0.0,
        record_counts: false,
    };
    let snn = parallel::evaluate_snn(&net, &test_set, &cfg, threads)?;
    let kind = weights.meta.activation().unwrap_or(ActivationKind::Relu);
    let ann = parallel::evaluate_ann(&weights, &test_set, &kind, threads)?;
    let curve: Vec<CurveRow> =
        snn.accuracy_curve.iter().map(|&(time_ms, accuracy)| CurveRow { time_ms, accuracy }).collect();
    write_csv(&args.out.join("accuracy_curve.csv"), &curve)?;
    write_json(&args.out.join("predictions.json"), &snn.images)?;
    let eps = snn.events_per_second();
    let energy = energy_estimate(eps, args.duration / 1000.0 * test_set.len() as f64, args.esyn_nj)?;
    // 1.25/τ_syn: the rate band of correct-class outputs
    let band = 1250.0 / weights.meta.scale.tau_syn;
    let correct: Vec<_> = snn.images.iter().filter(|i| i.prediction == i.label as usize).collect();
    let in_band = correct
        .iter()
        .filter(|i| 1000.0 * i.counts[i.label as usize] as f64 / args.duration < band)
        .count();

    #[derive(Serialize)]
    struct Results {
        images: usize,
        snn_error: f64,
        ann_activation: ActivationKind,
        ann_error: f64,
        /// SNN error minus ANN error on the same images.
        accuracy_drop: f64,
        accuracy_curve: Vec<(f64, f64)>,
        degenerate: usize,
        correct_in_rate_band: f64,
        rate_band_hz: f64,
        events_per_second: f64,
        energy_joules: f64,
        energy_watts: f64,
    }
    let results = Results {
        images: test_set.len(),
        snn_error: snn.error_rate,
        ann_activation: kind,
        ann_error: ann.error_rate,
        accuracy_drop: snn.error_rate - ann.error_rate,
        accuracy_curve: snn.accuracy_curve.clone(),
        degenerate: snn.images.iter().filter(|i| i.degenerate).count(),
        correct_in_rate_band: if correct.is_empty() { 0.0 } else { in_band as f64 / correct.len() as f64 },
        rate_band_hz: band,
        events_per_second: eps,
        energy_joules: energy.joules,
        energy_watts: energy.watts,
    };
    write_run(&args.out, "eval-snn", args.seed, args, &results, start.elapsed())?;
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct EnergyArgs {
    #[arg(long)]
    pub events_per_sec: f64,
    /// Running time (s).
    #[arg(long)]
    pub duration: f64,
    #[arg(long, default_value_t = 8.0)]
    pub esyn_nj: f64,
    /// Also write the report and run record to this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_energy(args: &EnergyArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let e = energy_estimate(args.events_per_sec, args.duration, args.esyn_nj).map_err(|e| usage(e.to_string()))?;
    print!("{}", crate::output::to_json(&e, Path::new("stdout"))?);
    if let Some(out) = &args.out {
        prepare_out(out)?;
        write_json(&out.join("energy.json"), &e)?;
        write_run(out, "energy", 0, args, &e, start.elapsed())?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let t = cli.threads;
    match &cli.command {
        Command::TuningCurve(a) => cmd_tuning_curve(a, t),
        Command::Calibrate(a) => cmd_calibrate(a, t),
        Command::Train(a) => cmd_train(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::EvalAnn(a) => cmd_eval_ann(a, t),
        Command::EvalSnn(a) => cmd_eval_snn(a, t),
        Command::Energy(a) => cmd_energy(a),
    }
}

/// Flags from a JSON object (`{"dt": 0.1, "m-grid": "0:1:0.1"}`) appended to
/// `args` unless given on the command line already.
pub fn merge_config(args: Vec<String>, config: &serde_json::Value) -> Result<Vec<String>, String> {
    let obj = config.as_object().ok_or("config file must hold a JSON object")?;
    let mut out = args;
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if out.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        let text = match value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Array(items) => {
                items.iter().map(|v| v.to_string().trim_matches('"').to_string()).collect::<Vec<_>>().join(",")
            }
            other => return Err(format!("config key `{key}` has unsupported value {other}")),
        };
        out.push(flag);
        out.push(text);
    }
    Ok(out)
}

/// Removes `--config PATH` from `args` and merges the file it names.
fn expand_config(mut args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => {
            let p = p.to_string();
            args.remove(pos);
            p
        }
        None => {
            if pos + 1 >= args.len() {
                return Err("--config needs a path".into());
            }
            args.remove(pos);
            args.remove(pos)
        }
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("reading {path}: {e}"))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("parsing {path}: {e}"))?;
    merge_config(args, &value)
}

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
pub fn main_entry() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
