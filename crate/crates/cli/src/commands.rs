use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use footprint_core::evaluation::{
    expansion_counts, kl_divergence, mean_ap, sample_locations, semantic_class_counts,
    ClassHistogram, ExpansionCounts, MetricsReport, SemanticMap,
};
use footprint_core::grid::{BinaryMap, Grid, ScoreMap};
use footprint_core::io::{
    metrics_to_csv, metrics_to_json, overlay, read_pgm, read_rgb, read_sequence, write_direction_pfm,
    write_heatmap, write_metrics, write_png8, write_rgb_png, write_sequence, HeatmapFormat,
    MetricsFormat,
};
use footprint_core::losses::gradcheck::{run_all, GradCheckConfig, MAX_REL_ERROR};
use footprint_core::propagation::{
    propagate_directions, propagate_footprints, single_frame_footprints,
    PropagationParams, SkipCounts,
};
use footprint_core::sequence::Sequence;
use footprint_core::synth::{coverage_check, generate_scene, SceneSpec};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Cli, Command, EvalPairs, Format, GlobalOpts};
use crate::failure::{input_error, internal_error, Classify, Outcome};

pub fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = g.jobs {
        pool = pool.num_threads(jobs as usize);
    }
    let pool = pool.build().internal()?;
    pool.install(|| match &cli.command {
        Command::Propagate {
            sequence,
            output,
            single_frame,
        } => propagate(g, sequence, output, *single_frame),
        Command::Directions { sequence, output } => directions(g, sequence, output),
        Command::EvalExpansion(pairs) => eval_expansion(g, pairs),
        Command::EvalMap(pairs) => eval_map(g, pairs),
        Command::EvalKl {
            pairs,
            semantic,
            classes,
            samples,
        } => eval_kl(g, pairs, semantic, *classes, *samples),
        Command::Synth { spec, output } => synth(g, spec, output),
        Command::Render {
            map,
            output,
            background,
            opacity,
        } => render(g, map, output, background.as_deref(), *opacity),
        Command::LossesCheck { trials } => losses_check(g, *trials),
    })
}

fn params(g: &GlobalOpts) -> Outcome<PropagationParams> {
    let mut p = PropagationParams::new(g.sigma, g.downsample);
    if let Some(r) = g.support_radius {
        p.support_radius = r;
    }
    p.z_min = g.zmin;
    p.validate().input()?;
    Ok(p)
}

fn heatmap_format(g: &GlobalOpts, command: &str) -> Outcome<HeatmapFormat> {
    match g.format {
        None | Some(Format::Pgm) => Ok(HeatmapFormat::Pgm16),
        Some(Format::Png) => Ok(HeatmapFormat::Png8),
        Some(f) => Err(input_error(format!("--format {f:?} does not apply to {command}; use pgm or png"))),
    }
}

fn metrics_format(g: &GlobalOpts, command: &str) -> Outcome<MetricsFormat> {
    match g.format {
        None | Some(Format::Json) => Ok(MetricsFormat::Json),
        Some(Format::Csv) => Ok(MetricsFormat::Csv),
        Some(f) => Err(input_error(format!("--format {f:?} does not apply to {command}; use json or csv"))),
    }
}

fn load_sequence(path: &Path) -> Outcome<Sequence> {
    read_sequence(path)
        .with_context(|| format!("reading sequence {}", path.display()))
        .input()
}

fn create_dir(path: &Path) -> Outcome {
    fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .input()
}

/// Keeps output names inside the output directory whatever the sequence id holds.
fn file_stem(seq_id: &str) -> String {
    seq_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn frame_file(seq_id: &str, frame_index: u32, ext: &str) -> String {
    format!("{}_{frame_index:06}.{ext}", file_stem(seq_id))
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).internal()?;
    text.push('\n');
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .input()
}

#[derive(Serialize)]
struct FrameDiagnostics {
    frame_index: u32,
    file: String,
    skipped: SkipCounts,
    nonzero_cells: usize,
}

#[derive(Serialize)]
struct Diagnostics {
    sequence_id: String,
    params: PropagationParams,
    grid: [usize; 2],
    single_frame: bool,
    frames: Vec<FrameDiagnostics>,
}

fn propagate(g: &GlobalOpts, sequence: &Path, output: &Path, single_frame: bool) -> Outcome {
    let params = params(g)?;
    let format = heatmap_format(g, "propagate")?;
    let seq = load_sequence(sequence)?;
    create_dir(output)?;
    info!(
        "propagating {} observations into {} frames",
        seq.observations().len(),
        seq.frames().len()
    );
    let frames = seq
        .frames()
        .par_iter()
        .map(|f| {
            let map = if single_frame {
                single_frame_footprints(&seq, f.frame_index, &params)
            } else {
                propagate_footprints(&seq, f.frame_index, &params)
            }
            .internal()?;
            let file = frame_file(seq.sequence_id(), f.frame_index, format.extension());
            write_heatmap(&map.grid, &output.join(&file), format).input()?;
            Ok(FrameDiagnostics {
                frame_index: f.frame_index,
                file,
                skipped: map.skipped,
                nonzero_cells: map.grid.as_slice().iter().filter(|&&v| v > 0.0).count(),
            })
        })
        .collect::<Outcome<Vec<_>>>()?;
    let k = seq.intrinsics();
    let (rows, cols) = params.grid_shape(k.width, k.height);
    write_json(
        &output.join("diagnostics.json"),
        &Diagnostics {
            sequence_id: seq.sequence_id().to_owned(),
            params,
            grid: [rows, cols],
            single_frame,
            frames,
        },
    )
}

fn directions(g: &GlobalOpts, sequence: &Path, output: &Path) -> Outcome {
    let params = params(g)?;
    if g.format.is_some() {
        return Err(input_error("directions always writes PFM; drop --format"));
    }
    let seq = load_sequence(sequence)?;
    create_dir(output)?;
    let frames = seq
        .frames()
        .par_iter()
        .map(|f| {
            let map = propagate_directions(&seq, f.frame_index, &params).internal()?;
            let file = frame_file(seq.sequence_id(), f.frame_index, "pfm");
            write_direction_pfm(&map.grid, &output.join(&file)).input()?;
            Ok(FrameDiagnostics {
                frame_index: f.frame_index,
                file,
                skipped: map.skipped,
                nonzero_cells: map.grid.as_slice().iter().filter(|d| d.is_some()).count(),
            })
        })
        .collect::<Outcome<Vec<_>>>()?;
    let k = seq.intrinsics();
    let (rows, cols) = params.grid_shape(k.width, k.height);
    write_json(
        &output.join("diagnostics.json"),
        &Diagnostics {
            sequence_id: seq.sequence_id().to_owned(),
            params,
            grid: [rows, cols],
            single_frame: false,
            frames,
        },
    )
}

fn read_values(path: &Path) -> Outcome<Grid<f64>> {
    Ok(read_pgm(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()?
        .values())
}

/// Rescales by the peak when a map is not already within `[0, 1]`.
fn unit_scores(values: Grid<f64>, path: &Path) -> Outcome<ScoreMap> {
    let peak = values.as_slice().iter().cloned().fold(0.0, f64::max);
    let values = if peak > 1.0 { values.map(|v| v / peak) } else { values };
    ScoreMap::new(values)
        .with_context(|| format!("scores in {}", path.display()))
        .input()
}

fn checked_pairs(pairs: &EvalPairs) -> Outcome<Vec<(&Path, &Path)>> {
    if pairs.pred.len() != pairs.gt.len() {
        return Err(input_error(format!(
            "{} --pred maps but {} --gt maps",
            pairs.pred.len(),
            pairs.gt.len()
        )));
    }
    Ok(pairs
        .pred
        .iter()
        .zip(&pairs.gt)
        .map(|(p, g)| (p.as_path(), g.as_path()))
        .collect())
}

fn emit_report(report: &MetricsReport, output: Option<&Path>, format: MetricsFormat) -> Outcome {
    match output {
        Some(path) => write_metrics(report, path, format).input(),
        None => {
            let text = match format {
                MetricsFormat::Json => metrics_to_json(report),
                MetricsFormat::Csv => metrics_to_csv(report),
            }
            .input()?;
            std::io::stdout().write_all(text.as_bytes()).input()
        }
    }
}

fn same_shape<A, B>(a: &Grid<A>, b: &Grid<B>, pa: &Path, pb: &Path) -> Outcome {
    if a.shape() != b.shape() {
        return Err(input_error(format!(
            "{} is {:?} but {} is {:?} (rows, cols)",
            pa.display(),
            a.shape(),
            pb.display(),
            b.shape()
        )));
    }
    Ok(())
}

fn eval_expansion(g: &GlobalOpts, pairs: &EvalPairs) -> Outcome {
    let format = metrics_format(g, "eval-expansion")?;
    if !g.threshold.is_finite() {
        return Err(input_error("--threshold must be finite"));
    }
    let mut total = ExpansionCounts::default();
    for (p, t) in checked_pairs(pairs)? {
        let (pred, gt) = (read_values(p)?, read_values(t)?);
        same_shape(&pred, &gt, p, t)?;
        let pred = BinaryMap::from_threshold(&pred, g.threshold);
        let gt = BinaryMap::from_threshold(&gt, 0.0);
        total += expansion_counts(&pred, &gt).internal()?;
    }
    let report = total
        .report()
        .context("ground truth has no positive cells")
        .input()?;
    emit_report(&report, pairs.output.as_deref(), format)
}

fn eval_map(g: &GlobalOpts, pairs: &EvalPairs) -> Outcome {
    let format = metrics_format(g, "eval-map")?;
    let mut maps = Vec::new();
    for (p, t) in checked_pairs(pairs)? {
        let (pred, gt) = (read_values(p)?, read_values(t)?);
        same_shape(&pred, &gt, p, t)?;
        maps.push((unit_scores(pred, p)?, BinaryMap::from_threshold(&gt, 0.0)));
    }
    let map = mean_ap(&maps).input()?;
    let report = MetricsReport {
        map: Some(map),
        ..Default::default()
    };
    emit_report(&report, pairs.output.as_deref(), format)
}

fn eval_kl(
    g: &GlobalOpts,
    pairs: &EvalPairs,
    semantic: &[PathBuf],
    classes: Option<usize>,
    samples: usize,
) -> Outcome {
    let format = metrics_format(g, "eval-kl")?;
    let output = pairs.output.as_deref();
    let pairs = checked_pairs(pairs)?;
    if semantic.len() != pairs.len() {
        return Err(input_error(format!(
            "{} --semantic maps for {} prediction/ground-truth pairs",
            semantic.len(),
            pairs.len()
        )));
    }
    if samples == 0 {
        return Err(input_error("--samples must be at least 1"));
    }
    let sem_ids = semantic
        .iter()
        .map(|path| {
            read_pgm(path)
                .with_context(|| format!("reading {}", path.display()))
                .input()
                .map(|pgm| pgm.raw)
        })
        .collect::<Outcome<Vec<_>>>()?;
    let seen = sem_ids
        .iter()
        .flat_map(|m| m.as_slice().iter())
        .map(|&id| usize::from(id) + 1)
        .max()
        .unwrap_or(1);
    let num_classes = classes.unwrap_or(seen);

    let mut gt_counts = vec![0u64; num_classes];
    let mut pred_counts = vec![0u64; num_classes];
    for (i, ((p, t), (ids, sem_path))) in pairs.iter().zip(sem_ids.into_iter().zip(semantic)).enumerate() {
        let sem = SemanticMap::new(ids, num_classes)
            .with_context(|| format!("classes in {}", sem_path.display()))
            .input()?;
        let (pred, gt) = (read_values(p)?, read_values(t)?);
        same_shape(&pred, &gt, p, t)?;
        if gt.as_slice().iter().all(|&v| v == 0.0) {
            return Err(input_error(format!("{} has no positive cells", t.display())));
        }
        let (pred, gt) = (unit_scores(pred, p)?, unit_scores(gt, t)?);
        let base = g.seed.wrapping_add(2 * i as u64);
        for (scores, seed, counts) in [(&gt, base, &mut gt_counts), (&pred, base + 1, &mut pred_counts)] {
            let locations = sample_locations(scores, samples, seed, g.downsample);
            let c = semantic_class_counts(&locations, &sem, g.window)
                .with_context(|| format!("sampling classes from {}", sem_path.display()))
                .input()?;
            counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
    }
    let gt_hist = ClassHistogram::from_counts(&gt_counts).input()?;
    let pred_hist = ClassHistogram::from_counts(&pred_counts).input()?;
    let kl = kl_divergence(&gt_hist, &pred_hist, g.epsilon).input()?;
    let report = MetricsReport {
        kl: Some(kl),
        ..Default::default()
    };
    emit_report(&report, output, format)
}

fn synth(g: &GlobalOpts, spec_path: &Path, output: &Path) -> Outcome {
    let params = params(g)?;
    let format = heatmap_format(g, "synth")?;
    let text = fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))
        .input()?;
    let spec: SceneSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing scene spec {}", spec_path.display()))
        .input()?;
    let (seq, masks) = generate_scene(&spec, &params).input()?;
    info!(
        "generated {} frames with {} observations",
        seq.frames().len(),
        seq.observations().len()
    );
    let mask_dir = output.join("masks");
    create_dir(&mask_dir)?;

    let seq_path = output.join("seq.jsonl");
    let file = fs::File::create(&seq_path)
        .with_context(|| format!("creating {}", seq_path.display()))
        .input()?;
    let mut writer = std::io::BufWriter::new(file);
    write_sequence(&seq, &mut writer)
        .and_then(|()| writer.flush())
        .with_context(|| format!("writing {}", seq_path.display()))
        .input()?;

    masks.par_iter().try_for_each(|m| {
        let path = mask_dir.join(frame_file(seq.sequence_id(), m.frame_index, format.extension()));
        write_heatmap(&m.mask.to_f64(), &path, format).input()
    })?;
    let coverage = coverage_check(&seq, &masks, &params).internal()?;
    write_json(&output.join("coverage.json"), &coverage)
}

fn render(g: &GlobalOpts, map: &Path, output: &Path, background: Option<&Path>, opacity: f64) -> Outcome {
    if !matches!(g.format, None | Some(Format::Png)) {
        return Err(input_error("render always writes PNG; drop --format"));
    }
    let values = read_values(map)?;
    match background {
        None => write_png8(&values, output).input(),
        Some(bg) => {
            let img = read_rgb(bg).input()?;
            write_rgb_png(&overlay(&values, &img, opacity).input()?, output).input()
        }
    }
}

fn losses_check(g: &GlobalOpts, trials: usize) -> Outcome {
    let json = match g.format {
        None => false,
        Some(Format::Json) => true,
        Some(f) => return Err(input_error(format!("--format {f:?} does not apply to losses-check; use json"))),
    };
    if trials == 0 {
        return Err(input_error("--trials must be at least 1"));
    }
    let cfg = GradCheckConfig {
        trials,
        seed: g.seed,
        ..Default::default()
    };
    let checks = run_all(&cfg);
    let mut out = String::new();
    if json {
        out = serde_json::to_string_pretty(&checks).internal()?;
        out.push('\n');
    } else {
        out.push_str(&format!(
            "{:<28} {:>7} {:>12} {:>14}  {}\n",
            "check", "trials", "coordinates", "max_rel_error", "status"
        ));
        for c in &checks {
            out.push_str(&format!(
                "{:<28} {:>7} {:>12} {:>14.3e}  {}\n",
                c.name,
                c.trials,
                c.coordinates,
                c.max_rel_error,
                if c.passed() { "ok" } else { "FAIL" }
            ));
        }
    }
    std::io::stdout().write_all(out.as_bytes()).input()?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(internal_error(format!(
            "gradient checks above {MAX_REL_ERROR:e}: {}",
            failed.join(", ")
        )))
    }
}
