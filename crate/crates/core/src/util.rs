use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Rounds to nine significant decimal digits, the precision every on-disk
/// weight is stored at.
pub(crate) fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Min-max maps `values` onto `[0, hi]`. A constant input maps to all zeros.
pub(crate) fn min_max_scale(values: &[f64], hi: f64) -> Vec<f64> {
    let (lo, top) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, top), &v| {
            (lo.min(v), top.max(v))
        });
    let range = top - lo;
    values
        .iter()
        .map(|&v| {
            if range > 0.0 {
                ((v - lo) / range * hi).clamp(0.0, hi)
            } else {
                0.0
            }
        })
        .collect()
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let owned = path.to_path_buf();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, line)| (i + 1, line.map_err(|e| Error::io(&owned, e)))))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_rounding_is_stable() {
        let x = 0.123_456_789_123_f64;
        let r = round_sig9(x);
        assert_eq!(r.to_string(), "0.123456789");
        assert_eq!(round_sig9(r), r);
    }

    #[test]
    fn min_max_endpoints() {
        let s = min_max_scale(&[3.0, 1.0, 2.0], 2.0);
        assert_eq!(s, vec![2.0, 0.0, 1.0]);
        assert_eq!(min_max_scale(&[4.0, 4.0], 1.0), vec![0.0, 0.0]);
    }
}
