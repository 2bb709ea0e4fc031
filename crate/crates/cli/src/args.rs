use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use footprint_core::evaluation::{DEFAULT_KL_EPSILON, DEFAULT_THRESHOLD, DEFAULT_WINDOW};
use footprint_core::propagation::{DEFAULT_DOWNSAMPLE, DEFAULT_SIGMA};
use footprint_core::geometry::DEFAULT_Z_MIN;

#[derive(Debug, Parser)]
#[command(name = "footprint", version, about = "Propagate pedestrian footprints across posed camera sequences and evaluate walkability maps")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Gaussian standard deviation, in label-grid cells.
    #[arg(long, global = true, default_value_t = DEFAULT_SIGMA)]
    pub sigma: f64,

    /// Image pixels per label-grid cell.
    #[arg(long, global = true, default_value_t = DEFAULT_DOWNSAMPLE, value_parser = clap::value_parser!(u32).range(1..))]
    pub downsample: u32,

    /// Kernel support in cells [default: 3 * sigma]. Accepts "inf".
    #[arg(long, global = true)]
    pub support_radius: Option<f64>,

    /// Near-plane cutoff in meters.
    #[arg(long, global = true, default_value_t = DEFAULT_Z_MIN)]
    pub zmin: f64,

    /// Scores strictly above this count as predicted positives.
    #[arg(long, global = true, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,

    /// Side of the square window used to pick a location's semantic class, in pixels (odd).
    #[arg(long, global = true, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,

    /// Additive smoothing applied to both histograms before the KL divergence.
    #[arg(long, global = true, default_value_t = DEFAULT_KL_EPSILON)]
    pub epsilon: f64,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads [default: available cores].
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,

    /// Output format: pgm or png for maps, json or csv for reports.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Pgm,
    Png,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one footprint heatmap per frame plus diagnostics.json.
    Propagate {
        sequence: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Use only each frame's own observations.
        #[arg(long)]
        single_frame: bool,
    },
    /// Write one walking-direction map (PFM) per frame plus diagnostics.json.
    Directions {
        sequence: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Expansion ratios of binarized predictions against ground-truth maps.
    EvalExpansion(EvalPairs),
    /// Mean average precision of score maps against ground-truth maps.
    EvalMap(EvalPairs),
    /// KL divergence between semantic-class histograms of locations sampled
    /// from ground-truth and predicted maps.
    EvalKl {
        #[command(flatten)]
        pairs: EvalPairs,
        /// Per-pixel class-id maps (PGM), one per pair, at full image resolution.
        #[arg(long, required = true, num_args = 1..)]
        semantic: Vec<PathBuf>,
        /// Number of classes [default: largest id seen + 1].
        #[arg(long)]
        classes: Option<usize>,
        /// Locations sampled per map.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Generate a synthetic sequence and ground-truth masks from a scene spec.
    Synth {
        /// Scene spec JSON; omitted fields take their defaults.
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render a PGM heatmap as PNG, optionally blended over an image.
    Render {
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long, default_value_t = 0.6)]
        opacity: f64,
    },
    /// Check every loss gradient against central finite differences.
    LossesCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct EvalPairs {
    /// Predicted maps (PGM).
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth maps (PGM), one per prediction; nonzero cells are positive.
    #[arg(long, required = true, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    /// Report path [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
