//! Dataset files, run configuration and report conversion.

mod config;
mod files;
mod report;

use thiserror::Error;

use crate::sme::SmeError;

pub use config::{
    DataSection, GeneratorSpec, ModelSection, PackKindDefault, RunConfig, StudySection, TrainSection, CONFIG_VERSION,
};
pub use files::{
    decode_records, decode_truth, encode_records, encode_truth, load_dataset, load_meta, major, save_dataset,
    write_file, META_FILE, RECORDS_FILE, TRUTH_FILE,
};
pub use report::{report_to_csv, train_csv};

#[derive(Debug, Error)]
pub enum DataioError {
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: String },
    #[error("stream ends inside shot {shot}")]
    TruncatedStream { shot: usize },
    #[error("checksum mismatch in {file}")]
    ChecksumMismatch { file: String },
    #[error("dataset holds {found} shots, meta describes {expected}")]
    CountMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sme(#[from] SmeError),
}
