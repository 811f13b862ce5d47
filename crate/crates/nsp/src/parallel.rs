//! Order-preserving parallel maps. Every item carries its own seed, so
//! results do not depend on the number of threads.

use nsp_core::activation::ActivationKind;
use nsp_core::annet::{argmax, predict_outputs, AnnEvaluation, WeightStore};
use nsp_core::dataset::Dataset;
use nsp_core::response::{collect_tuning_curve, measure_tuning_point, tuning_grid, TuningConfig, TuningCurve};
use nsp_core::snn::{infer_image, summarize, InferConfig, SnnEvaluation, SpikingNetwork};
use nsp_core::{Error, Result};
use rayon::prelude::*;

/// `f(0..n)` in index order on `threads` workers (0 = all cores).
pub fn par_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

pub fn tuning_curve(cfg: &TuningConfig, m_grid: &[f64], s_grid: &[f64], threads: usize) -> Result<TuningCurve> {
    if m_grid.is_empty() || s_grid.is_empty() {
        return Err(Error::Empty("tuning grid"));
    }
    let grid = tuning_grid(m_grid, s_grid);
    let results = par_map(grid.len(), threads, |i| {
        let (point, m, s) = grid[i];
        ((m, s), measure_tuning_point(cfg, m, s, point))
    });
    collect_tuning_curve(results)
}

pub fn evaluate_snn(net: &SpikingNetwork, ds: &Dataset, cfg: &InferConfig, threads: usize) -> Result<SnnEvaluation> {
    if ds.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let results = par_map(ds.len(), threads, |i| infer_image(net, ds, i, cfg)).into_iter().collect::<Result<Vec<_>>>()?;
    summarize(ds, &results, cfg)
}

pub fn evaluate_ann(weights: &WeightStore, ds: &Dataset, kind: &ActivationKind, threads: usize) -> Result<AnnEvaluation> {
    weights.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let outputs = par_map(ds.len(), threads, |i| predict_outputs(weights, ds.image(i), kind))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let predictions: Vec<u8> = outputs.iter().map(|y| argmax(y) as u8).collect();
    let wrong = predictions.iter().zip(&ds.labels).filter(|(p, l)| p != l).count();
    Ok(AnnEvaluation { error_rate: wrong as f64 / ds.len() as f64, predictions })
}
