use std::path::Path;

use crate::error::{Error, Result};
use crate::oracle::TraceRecord;

pub const TRACE_HEADER: [&str; 8] = [
    "k",
    "effective_passes",
    "objective_gap",
    "grad_norm",
    "surrogate_error",
    "error_bound",
    "step_size",
    "wall_time_s",
];

fn real(v: f64) -> String {
    // `{:e}` is the shortest representation that parses back to the same bits.
    format!("{v:e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn write_records<W: std::io::Write>(records: &[TraceRecord], sink: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            real(r.effective_passes),
            optional(r.objective_gap),
            real(r.grad_norm),
            optional(r.surrogate_error),
            optional(r.error_bound),
            real(r.step_size),
            optional(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV text for `records` in the trace schema.
pub fn trace_to_csv_string(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_records(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn write_trace_csv(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_records(records, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a trace written by [`write_trace_csv`]; `dist_sq` is not stored and
/// comes back as `None`.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let headers = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    if headers.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected trace header".into(),
        });
    }
    let mut out = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let err = |field: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad value in column {field}"),
        };
        let req = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| err(TRACE_HEADER[i])) };
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i].parse().map(Some).map_err(|_| err(TRACE_HEADER[i]))
            }
        };
        out.push(TraceRecord {
            k: rec[0].parse().map_err(|_| err("k"))?,
            effective_passes: req(1)?,
            objective_gap: opt(2)?,
            grad_norm: req(3)?,
            surrogate_error: opt(4)?,
            error_bound: opt(5)?,
            step_size: req(6)?,
            wall_time_s: opt(7)?,
            dist_sq: None,
        });
    }
    Ok(out)
}
