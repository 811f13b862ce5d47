//! IDX image and label files, optionally gzip-compressed (`.gz` suffix).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nsp_core::dataset::Dataset;

use crate::error::{io_err, Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw 8-bit images as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut bytes = Vec::new();
    if is_gz(path) {
        GzDecoder::new(file).read_to_end(&mut bytes).map_err(io_err(path))?;
    } else {
        let mut file = file;
        file.read_to_end(&mut bytes).map_err(io_err(path))?;
    }
    Ok(bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes).map_err(io_err(path))?;
        enc.finish().map_err(io_err(path))?;
    } else {
        let mut file = file;
        file.write_all(bytes).map_err(io_err(path))?;
    }
    Ok(())
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn header(bytes: &[u8], path: &Path, magic: u32, len: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { path: path.into(), expected: len, actual: bytes.len() });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::BadMagic { path: path.into(), expected: magic, found });
    }
    if bytes.len() < len {
        return Err(Error::Truncated { path: path.into(), expected: len, actual: bytes.len() });
    }
    Ok(())
}

fn exact_len(bytes: &[u8], path: &Path, expected: usize) -> Result<()> {
    match bytes.len() {
        n if n < expected => Err(Error::Truncated { path: path.into(), expected, actual: n }),
        n if n > expected => Err(Error::Format {
            path: path.into(),
            message: format!("{} trailing bytes after the declared payload", n - expected),
        }),
        _ => Ok(()),
    }
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    header(bytes, path, IMAGE_MAGIC, 16)?;
    let count = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    exact_len(bytes, path, 16 + count * rows * cols)?;
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..].to_vec() })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    header(bytes, path, LABEL_MAGIC, 8)?;
    let count = be_u32(bytes, 4) as usize;
    exact_len(bytes, path, 8 + count)?;
    Ok(bytes[8..].to_vec())
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    parse_images(&read_file(path)?, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    parse_labels(&read_file(path)?, path)
}

pub fn write_images(path: &Path, images: &IdxImages) -> Result<()> {
    write_file(path, &encode_images(images))
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    write_file(path, &encode_labels(labels))
}

/// Pixels divided by 255, labels cross-checked against the image count.
pub fn to_dataset(images: &IdxImages, labels: Vec<u8>) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::CountMismatch { images: images.count, labels: labels.len() });
    }
    let pixels = images.pixels.iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Dataset::new(images.rows, images.cols, pixels, labels)?)
}

/// Inverse of [`to_dataset`] for pixels that are multiples of 1/255.
pub fn from_dataset(ds: &Dataset) -> (IdxImages, Vec<u8>) {
    let pixels = ds.images.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    (IdxImages { count: ds.len(), rows: ds.rows, cols: ds.cols, pixels }, ds.labels.clone())
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    to_dataset(&read_images(images_path)?, read_labels(labels_path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> IdxImages {
        IdxImages { count: 3, rows: 2, cols: 2, pixels: (0..12).map(|i| (i * 21) as u8).collect() }
    }

    #[test]
    fn round_trip_bytes() {
        let img = sample();
        let p = Path::new("mem");
        assert_eq!(parse_images(&encode_images(&img), p).unwrap(), img);
        assert_eq!(parse_labels(&encode_labels(&[1, 2, 3]), p).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn distinct_errors() {
        let p = Path::new("mem");
        let mut bytes = encode_images(&sample());
        assert!(matches!(parse_labels(&bytes, p), Err(Error::BadMagic { .. })));
        bytes.truncate(20);
        match parse_images(&bytes, p) {
            Err(Error::Truncated { expected, actual, .. }) => assert_eq!((expected, actual), (28, 20)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_images(&bytes[..10], p), Err(Error::Truncated { expected: 16, .. })));
        assert!(matches!(
            to_dataset(&sample(), vec![0, 1]),
            Err(Error::CountMismatch { images: 3, labels: 2 })
        ));
    }

    #[test]
    fn dataset_round_trip() {
        let ds = to_dataset(&sample(), vec![0, 5, 9]).unwrap();
        assert!(ds.images.iter().all(|p| (0.0..=1.0).contains(p)));
        let (img, labels) = from_dataset(&ds);
        assert_eq!(img, sample());
        assert_eq!(labels, vec![0, 5, 9]);
    }
}
