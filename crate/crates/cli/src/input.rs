//! Seed matrix files: `{"m": <int>, "entries": [[...], ...]}`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use permlab_core::{DenseMatrix, PositiveBlockMatrix};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedFile {
    m: usize,
    entries: Vec<Vec<f64>>,
}

/// Reads a seed, checking `m` against the entries; zeros are allowed here.
pub fn read_seed(path: &Path) -> Result<DenseMatrix> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_seed(&text).with_context(|| format!("malformed seed file {}", path.display()))
}

pub fn parse_seed(text: &str) -> Result<DenseMatrix> {
    let seed: SeedFile = serde_json::from_str(text)?;
    if seed.m == 0 {
        bail!("m must be at least 1");
    }
    if seed.entries.len() != seed.m || seed.entries.iter().any(|r| r.len() != seed.m) {
        bail!("entries must form a {m}x{m} array", m = seed.m);
    }
    let b = DenseMatrix::from_rows(seed.entries)?;
    if let Some(x) = b.as_slice().iter().find(|&&x| x < 0.0) {
        bail!("entries must be nonnegative, found {x}");
    }
    Ok(b)
}

/// Reads a strictly positive seed.
pub fn read_positive_seed(path: &Path) -> Result<PositiveBlockMatrix> {
    let b = read_seed(path)?;
    PositiveBlockMatrix::new(b)
        .with_context(|| format!("seed in {} must be strictly positive", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let b = parse_seed(r#"{"m": 2, "entries": [[1, 2], [3, 4]]}"#).unwrap();
        assert_eq!(b.to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        for bad in [
            r#"{"m": 3, "entries": [[1, 2], [3, 4]]}"#,
            r#"{"m": 2, "entries": [[1, 2], [3]]}"#,
            r#"{"m": 0, "entries": []}"#,
            r#"{"m": 1, "entries": [[-1]]}"#,
            r#"{"m": 1, "entries": [[1]], "extra": 0}"#,
            r#"{"entries": [[1]]}"#,
            "not json",
        ] {
            assert!(parse_seed(bad).is_err(), "{bad}");
        }
    }
}
