// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use anyhow::{bail, Context};
use odmr_core::fitting::Dataset;

/// Parses a curve table with columns `x`, `y` and optionally `sigma`.
/// With `y_column` set, the first column is the abscissa and the named
/// column the ordinate. Extra columns are ignored; blank lines are skipped.
pub fn parse_dataset(text: &str, y_column: Option<&str>) -> anyhow::Result<Dataset> {
    if text.trim().is_empty() {
        bail!("fit: data file is empty (expected a header row `x,y`)");
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().context("fit: unreadable header row")?.clone();
    let column = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let found = || header.iter().collect::<Vec<_>>().join(",");
    let (ix, iy) = match y_column {
        Some(name) => match column(name) {
            Some(i) if i > 0 => (0, i),
            _ => bail!("fit: line 1: no data column `{name}` after the abscissa, found `{}`", found()),
        },
        None => match (column("x"), column("y")) {
            (Some(ix), Some(iy)) => (ix, iy),
            _ => bail!("fit: line 1: header must name columns `x` and `y`, found `{}`", found()),
        },
    };
    let isigma = column("sigma");
    let (mut x, mut y, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            anyhow::anyhow!("fit: line {line}: {e}")
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, name: &str| -> anyhow::Result<f64> {
            let raw = record.get(i).with_context(|| format!("fit: line {line}: missing column `{name}`"))?;
            let v: f64 = raw.parse().map_err(|_| anyhow::anyhow!("fit: line {line}: cannot parse `{raw}` as a number in column `{name}`"))?;
            if !v.is_finite() {
                bail!("fit: line {line}: column `{name}` must be finite");
            }
            Ok(v)
        };
        x.push(field(ix, "x")?);
        y.push(field(iy, "y")?);
        if let Some(i) = isigma {
            sigma.push(field(i, "sigma")?);
        }
    }
    if x.is_empty() {
        bail!("fit: data file has a header but no rows");
    }
    Ok(Dataset { x, y, y_sigma: isigma.map(|_| sigma) })
}

pub fn read_dataset(path: &Path, y_column: Option<&str>) -> anyhow::Result<Dataset> {
    let text = std::fs::read_to_string(path).with_context(|| format!("fit: cannot read {}", path.display()))?;
    parse_dataset(&text, y_column).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_columns() {
        let d = parse_dataset("x,y,sigma\n0,1,0.1\n1,2,0.1\n", None).unwrap();
        assert_eq!(d.x, vec![0.0, 1.0]);
        assert_eq!(d.y_sigma, Some(vec![0.1, 0.1]));
    }

    #[test]
    fn empty_file() {
        assert!(format!("{:#}", parse_dataset("", None).unwrap_err()).contains("empty"));
        assert!(parse_dataset("x,y\n", None).is_err());
    }

    #[test]
    fn bad_number_names_line() {
        let err = parse_dataset("x,y\n0,1\n1,abc\n", None).unwrap_err();
        assert!(format!("{err:#}").contains("line 3"), "{err:#}");
    }

    #[test]
    fn named_column() {
        let d = parse_dataset("t_us,d21,d34\n0,0.1,0.2\n1,0.3,0.4\n", Some("d34")).unwrap();
        assert_eq!((d.x, d.y), (vec![0.0, 1.0], vec![0.2, 0.4]));
        assert!(parse_dataset("t_us,d21\n0,0.1\n", Some("t_us")).is_err());
    }

    #[test]
    fn missing_column() {
        assert!(parse_dataset("t,signal\n0,1\n", None).is_err());
    }
}
