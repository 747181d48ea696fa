//! libsvm datasets, trace CSV files and run configuration.

mod config;
mod libsvm;
mod trace;

pub use config::{default_step, parse_config_str, DatasetSpec, RunConfig, StepSpec};
pub use libsvm::{load_libsvm, parse_libsvm_str, to_libsvm_string, LabelMap, LibsvmOptions, SparseRow};
pub use trace::{read_trace_csv, trace_to_csv_string, write_trace_csv, TRACE_HEADER};
