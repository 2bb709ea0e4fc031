//! Readers and writers for sequences, maps and metric reports.

mod jsonl;
mod metrics;
mod pfm;
mod pgm;
mod png;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use jsonl::{parse_sequence, parse_sequence_str, sequence_to_string, write_sequence};
pub use metrics::{
    metrics_from_csv, metrics_from_json, metrics_to_csv, metrics_to_json, write_metrics,
    MetricsFormat, CSV_COLUMNS,
};
pub use pfm::{decode_direction_pfm, encode_direction_pfm, write_direction_pfm};
pub use pgm::{decode_pgm, encode_pgm16, read_pgm, write_pgm16, Pgm, PGM16_MAXVAL};
pub use png::{heatmap_to_gray8, overlay, read_rgb, write_png8, write_rgb_png};

use crate::grid::Grid;
use crate::sequence::{Sequence, SequenceError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("non-finite or negative value {value} at ({row}, {col})")]
    InvalidValue { row: usize, col: usize, value: f64 },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("image: {0}")]
    Image(String),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            IoError::Format(msg) => IoError::Format(format!("{}: {msg}", path.display())),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapFormat {
    Pgm16,
    Png8,
}

impl HeatmapFormat {
    pub fn extension(self) -> &'static str {
        match self {
            HeatmapFormat::Pgm16 => "pgm",
            HeatmapFormat::Png8 => "png",
        }
    }
}

pub fn write_heatmap(map: &Grid<f64>, path: &Path, format: HeatmapFormat) -> Result<(), IoError> {
    match format {
        HeatmapFormat::Pgm16 => write_pgm16(map, path),
        HeatmapFormat::Png8 => write_png8(map, path),
    }
}

pub fn read_sequence(path: &Path) -> Result<Sequence, SequenceError> {
    let file = std::fs::File::open(path)?;
    parse_sequence(std::io::BufReader::new(file))
}
