use std::fs;
use std::path::Path;

use super::{Dataset, Provenance};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Reads `f0,…,f{d-1},label` rows after a header line. Blank lines are skipped.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = columns.len().saturating_sub(1);
    if d == 0 || columns[d] != "label" {
        return Err(parse_err(
            1,
            format!("header must be f0,…,f{{d-1}},label; got {header:?}"),
        ));
    }
    for (j, c) in columns[..d].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(parse_err(
                1,
                format!("column {j} should be f{j}, got {c:?}"),
            ));
        }
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(parse_err(
                i + 1,
                format!("expected {} fields, got {}", d + 1, fields.len()),
            ));
        }
        for f in &fields[..d] {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad number {f:?}")))?;
            data.push(v);
        }
        let y: usize = fields[d]
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad label {:?}", fields[d])))?;
        labels.push(y);
    }
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    let n = labels.len();
    Dataset::new(
        Tensor::matrix(n, d, data)?,
        labels,
        classes,
        Provenance::Csv,
        0,
    )
}
