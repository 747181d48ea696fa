use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problems::LabeledDataset;

/// Maps raw libsvm labels to `{−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMap {
    /// `> 0 → +1`, otherwise `−1`.
    Sign,
    /// `1 → +1`, `2 → −1`; anything else is an error.
    OneTwo,
    /// [`LabelMap::OneTwo`] if every label is 1 or 2, else [`LabelMap::Sign`].
    #[default]
    Auto,
}

impl std::str::FromStr for LabelMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sign" => Ok(LabelMap::Sign),
            "one-two" | "onetwo" | "12" => Ok(LabelMap::OneTwo),
            "auto" => Ok(LabelMap::Auto),
            other => Err(Error::invalid(format!("unknown label map `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LibsvmOptions {
    /// Feature count; rows may not use a larger index. Defaults to the largest
    /// index seen.
    pub expected_dim: Option<usize>,
    pub label_map: LabelMap,
    /// Append a constant-one column after the features.
    pub append_bias: bool,
}

/// One parsed line: raw label and `(1-based index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub label: f64,
    pub entries: Vec<(usize, f64)>,
}

fn parse_row(line: &str, line_no: usize, path: &Path) -> Result<Option<SparseRow>> {
    let err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let mut tokens = content.split_whitespace();
    let label_tok = tokens.next().expect("nonempty line has a token");
    let label: f64 = label_tok
        .parse()
        .map_err(|_| err(format!("label `{label_tok}` is not a number")))?;
    if !label.is_finite() {
        return Err(err(format!("label `{label_tok}` is not finite")));
    }
    let mut entries = Vec::new();
    let mut prev = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("token `{tok}` is not index:value")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| err(format!("index `{idx}` is not a positive integer")))?;
        if idx == 0 {
            return Err(err("feature indices are 1-based".into()));
        }
        if idx <= prev {
            return Err(err(format!("index {idx} does not increase after {prev}")));
        }
        let val: f64 = val.parse().map_err(|_| err(format!("value `{val}` is not a number")))?;
        if !val.is_finite() {
            return Err(err(format!("value `{val}` is not finite")));
        }
        entries.push((idx, val));
        prev = idx;
    }
    Ok(Some(SparseRow { label, entries }))
}

fn map_label(label: f64, map: LabelMap) -> Option<f64> {
    match map {
        LabelMap::Sign | LabelMap::Auto => Some(if label > 0.0 { 1.0 } else { -1.0 }),
        LabelMap::OneTwo if label == 1.0 => Some(1.0),
        LabelMap::OneTwo if label == 2.0 => Some(-1.0),
        LabelMap::OneTwo => None,
    }
}

/// Parses libsvm text. `path` is only used in error messages.
pub fn parse_libsvm_str(text: &str, options: &LibsvmOptions, path: &Path) -> Result<LabeledDataset> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(row) = parse_row(line, n + 1, path)? {
            rows.push((n + 1, row));
        }
    }
    let max_idx = rows
        .iter()
        .filter_map(|(_, r)| r.entries.last().map(|e| e.0))
        .max()
        .unwrap_or(0);
    let dim = match options.expected_dim {
        Some(d) => {
            if let Some((line, _)) = rows.iter().find(|(_, r)| r.entries.last().is_some_and(|e| e.0 > d)) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *line,
                    message: format!("feature index exceeds expected dimension {d}"),
                });
            }
            d
        }
        None => max_idx,
    };
    let map = match options.label_map {
        LabelMap::Auto if !rows.is_empty() && rows.iter().all(|(_, r)| r.label == 1.0 || r.label == 2.0) => LabelMap::OneTwo,
        other => other,
    };
    let total = dim + usize::from(options.append_bias);
    let mut features = DMatrix::zeros(rows.len(), total);
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (line, row)) in rows.iter().enumerate() {
        let y = map_label(row.label, map).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: *line,
            message: format!("label {} cannot be mapped to +1/-1", row.label),
        })?;
        labels.push(y);
        for &(idx, val) in &row.entries {
            features[(i, idx - 1)] = val;
        }
        if options.append_bias {
            features[(i, dim)] = 1.0;
        }
    }
    LabeledDataset::new(features, labels)
}

pub fn load_libsvm(path: impl AsRef<Path>, options: &LibsvmOptions) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_libsvm_str(&text, options, path)
}

/// Writes nonzero features in libsvm form, one row per line.
pub fn to_libsvm_string(dataset: &LabeledDataset) -> String {
    let mut out = String::new();
    let x = dataset.features();
    for (i, &y) in dataset.labels().iter().enumerate() {
        out.push_str(if y > 0.0 { "+1" } else { "-1" });
        for j in 0..x.ncols() {
            let v = x[(i, j)];
            if v != 0.0 {
                out.push_str(&format!(" {}:{}", j + 1, v));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, options: &LibsvmOptions) -> Result<LabeledDataset> {
        parse_libsvm_str(text, options, Path::new("mem"))
    }

    #[test]
    fn sparse_line_to_dense_row() {
        let opts = LibsvmOptions {
            expected_dim: Some(12),
            ..Default::default()
        };
        let ds = parse("+1 3:1 11:1\n", &opts).unwrap();
        assert_eq!(ds.labels(), &[1.0]);
        assert_eq!(ds.dim(), 12);
        let row: Vec<f64> = ds.features().row(0).iter().copied().collect();
        let mut expect = vec![0.0; 12];
        expect[2] = 1.0;
        expect[10] = 1.0;
        assert_eq!(row, expect);
    }

    #[test]
    fn negative_label_and_inferred_dim() {
        let ds = parse("-1 1:0.5\n", &LibsvmOptions::default()).unwrap();
        assert_eq!(ds.labels(), &[-1.0]);
        assert_eq!(ds.features()[(0, 0)], 0.5);
        assert_eq!(ds.dim(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let opts = LibsvmOptions::default();
        for (text, line) in [("+1 1:1\n-1 2:x\n", 2), ("+1 3:1 2:1\n", 1), ("\n\nabc 1:1\n", 3), ("+1 0:1\n", 1), ("+1 1\n", 1)] {
            match parse(text, &opts) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
        let dim = LibsvmOptions {
            expected_dim: Some(2),
            ..Default::default()
        };
        assert!(matches!(parse("+1 3:1\n", &dim), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn label_maps() {
        let one_two = LibsvmOptions {
            label_map: LabelMap::OneTwo,
            ..Default::default()
        };
        assert_eq!(parse("1 1:1\n2 1:1\n", &one_two).unwrap().labels(), &[1.0, -1.0]);
        assert!(matches!(parse("0 1:1\n", &one_two), Err(Error::Parse { .. })));
        let auto = LibsvmOptions {
            label_map: LabelMap::Auto,
            ..Default::default()
        };
        assert_eq!(parse("1 1:1\n2 1:1\n", &auto).unwrap().labels(), &[1.0, -1.0]);
        assert_eq!(parse("1 1:1\n0 1:1\n", &auto).unwrap().labels(), &[1.0, -1.0]);
        assert_eq!(parse("0 1:1\n", &LibsvmOptions::default()).unwrap().labels(), &[-1.0]);
    }

    #[test]
    fn bias_column_and_blank_lines() {
        let opts = LibsvmOptions {
            append_bias: true,
            ..Default::default()
        };
        let ds = parse("+1 2:3\n\n-1 1:1 # note\n", &opts).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.features().column(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_libsvm("/nonexistent/file.svm", &LibsvmOptions::default()),
            Err(Error::Io { .. })
        ));
    }
}
