//! In-memory labelled image sets, target encoding and stratified sampling.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASSES: usize = 10;

/// Images stored row-major, one after another, with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(rows: usize, cols: usize, images: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let ds = Self { rows, cols, images, labels };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let side = self.rows * self.cols;
        if side == 0 {
            return Err(Error::Shape("images must have at least one pixel".into()));
        }
        if self.images.len() != side * self.labels.len() {
            return Err(Error::Shape(alloc::format!(
                "{} pixels do not hold {} images of {}x{}",
                self.images.len(),
                self.labels.len(),
                self.rows,
                self.cols
            )));
        }
        if let Some(p) = self.images.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(alloc::format!("pixel {p} outside [0, 1]")));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l as usize >= CLASSES) {
            return Err(Error::InvalidParameter(alloc::format!("label {l} outside 0..{CLASSES}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.pixels_per_image();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut counts = [0; CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// New dataset holding the given items in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.pixels_per_image();
        let mut images = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Shape(alloc::format!("index {i} out of {} items", self.len())));
            }
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Ok(Self { rows: self.rows, cols: self.cols, images, labels })
    }
}

/// One-hot targets with `offset` added to every entry.
pub fn encode_labels(labels: &[u8], offset: f64) -> Result<Vec<[f64; CLASSES]>> {
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(Error::InvalidParameter("label offset must be finite and non-negative".into()));
    }
    labels
        .iter()
        .map(|&l| {
            if l as usize >= CLASSES {
                return Err(Error::InvalidParameter(alloc::format!("label {l} outside 0..{CLASSES}")));
            }
            let mut t = [offset; CLASSES];
            t[l as usize] += 1.0;
            Ok(t)
        })
        .collect()
}

/// Per-class quotas summing to `n`: `n / 10` each, the remainder going to
/// the classes that come first in a seeded order. Classes short of their
/// quota hand the deficit to the others.
fn class_quotas(counts: &[usize; CLASSES], n: usize, rng: &mut ChaCha8Rng) -> [usize; CLASSES] {
    let mut order: Vec<usize> = (0..CLASSES).collect();
    order.shuffle(rng);
    let mut quota = [0usize; CLASSES];
    let mut left = n;
    // Water-filling: repeatedly share what is left among classes with spare items.
    while left > 0 {
        let open: Vec<usize> = order.iter().copied().filter(|&c| quota[c] < counts[c]).collect();
        if open.is_empty() {
            break;
        }
        let share = left / open.len();
        let extra = left % open.len();
        for (rank, &c) in open.iter().enumerate() {
            let want = share + usize::from(rank < extra);
            let take = want.min(counts[c] - quota[c]);
            quota[c] += take;
            left -= take;
        }
    }
    quota
}

/// Indices of a stratified sample of size `n`, in ascending order.
/// `n == len` returns every index.
pub fn stratified_indices(labels: &[u8], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > labels.len() {
        return Err(Error::InvalidParameter(alloc::format!("cannot sample {n} of {} items", labels.len())));
    }
    if n == labels.len() {
        return Ok((0..n).collect());
    }
    let mut by_class: [Vec<usize>; CLASSES] = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        if l as usize >= CLASSES {
            return Err(Error::InvalidParameter(alloc::format!("label {l} outside 0..{CLASSES}")));
        }
        by_class[l as usize].push(i);
    }
    let counts = core::array::from_fn(|c| by_class[c].len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quota = class_quotas(&counts, n, &mut rng);
    let mut picked = Vec::with_capacity(n);
    for (c, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        picked.extend_from_slice(&members[..quota[c]]);
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Stratified subsample of `n` items; the original order is kept.
pub fn subsample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == ds.len() {
        return Ok(ds.clone());
    }
    ds.select(&stratified_indices(&ds.labels, n, seed)?)
}

/// Splits off a stratified held-out set of `n_holdout` items.
/// Returns `(train, holdout)`; both keep the original order.
pub fn holdout_split(ds: &Dataset, n_holdout: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let held = stratified_indices(&ds.labels, n_holdout, seed)?;
    let mut keep = alloc::vec![true; ds.len()];
    for &i in &held {
        keep[i] = false;
    }
    let train: Vec<usize> = (0..ds.len()).filter(|&i| keep[i]).collect();
    Ok((ds.select(&train)?, ds.select(&held)?))
}
