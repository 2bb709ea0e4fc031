//! Synthetic driving scenes with known walkable ground.
//!
//! The world is z-up with the ground at `z = 0`. Pedestrians walk between
//! random waypoints inside axis-aligned walkable rectangles; a forward-facing
//! camera drives along a constant-curvature path. Every observation is a
//! ground point, so its reprojection into any frame lands on the projected
//! rectangle it came from, which is what [`coverage_check`] verifies.

use rand::{distributions::WeightedIndex, prelude::Distribution, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    invert, project, CameraIntrinsics, Mat3, Point3, RigidTransform, Vec3,
};
use crate::grid::{BinaryMap, Cell};
use crate::propagation::{FrameTransforms, PropagationError, PropagationParams};
use crate::sequence::{Frame, PersonObservation, Sequence};

/// Ground sampling step used to rasterize walkable rectangles, in meters.
pub const MASK_SAMPLE_STEP: f64 = 0.05;
/// Rectangles narrower than this (meters) cannot host a walk.
pub const MIN_WALK_EXTENT: f64 = 0.5;
pub const MIN_SPEED: f64 = 0.5;
pub const MAX_SPEED: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible scene spec: {0}")]
    InfeasibleSpec(String),
}

/// Axis-aligned rectangle on the ground plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        [
            rng.gen_range(self.x_min..=self.x_max),
            rng.gen_range(self.y_min..=self.y_max),
        ]
    }
}

/// Constant-speed, constant-yaw-rate camera trajectory at a fixed height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraPath {
    /// Ground position at `t = 0`, meters.
    pub start: [f64; 2],
    /// Initial heading, degrees counter-clockwise from +x.
    pub heading_deg: f64,
    /// Meters per second.
    pub speed: f64,
    /// Degrees per second.
    pub yaw_rate_deg: f64,
    /// Camera height above the ground, meters.
    pub height: f64,
    /// Downward tilt, degrees.
    pub pitch_deg: f64,
}

impl Default for CameraPath {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0],
            heading_deg: 90.0,
            speed: 0.5,
            yaw_rate_deg: 0.0,
            height: 1.8,
            pitch_deg: 5.0,
        }
    }
}

impl CameraPath {
    /// Camera-to-world pose at time `t`. Camera axes: x right, y down, z forward.
    pub fn pose_at(&self, t: f64) -> RigidTransform {
        let psi0 = self.heading_deg.to_radians();
        let omega = self.yaw_rate_deg.to_radians();
        let psi = psi0 + omega * t;
        let [x0, y0] = self.start;
        let (x, y) = if omega == 0.0 {
            (
                x0 + self.speed * t * psi0.cos(),
                y0 + self.speed * t * psi0.sin(),
            )
        } else {
            let r = self.speed / omega;
            (
                x0 + r * (psi.sin() - psi0.sin()),
                y0 - r * (psi.cos() - psi0.cos()),
            )
        };
        let theta = self.pitch_deg.to_radians();
        let forward = Vec3::new(psi.cos() * theta.cos(), psi.sin() * theta.cos(), -theta.sin());
        let right = Vec3::new(psi.sin(), -psi.cos(), 0.0);
        let down = forward.cross(&right);
        let rotation = Mat3::from_columns(&[right, down, forward]);
        RigidTransform::new(rotation, Vec3::new(x, y, self.height))
            .expect("camera axes are orthonormal by construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub sequence_id: String,
    pub walkable_rects: Vec<Rect>,
    pub n_pedestrians: usize,
    pub n_frames: usize,
    /// Seconds between frames.
    pub frame_dt: f64,
    pub camera_path: CameraPath,
    pub intrinsics: CameraIntrinsics,
    pub seed: u64,
}

impl Default for SceneSpec {
    /// A car creeping toward a pedestrian plaza that fills most of its view.
    fn default() -> Self {
        Self {
            sequence_id: "synth".into(),
            walkable_rects: vec![Rect::new(-8.0, 6.0, 8.0, 24.0)],
            n_pedestrians: 5,
            n_frames: 20,
            frame_dt: 1.0,
            camera_path: CameraPath::default(),
            intrinsics: CameraIntrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: 320.0,
                cy: 240.0,
                width: 640,
                height: 480,
            },
            seed: 7,
        }
    }
}

impl SceneSpec {
    /// The 200-frame, 50-pedestrian workload used for throughput measurements.
    pub fn throughput() -> Self {
        Self {
            sequence_id: "throughput".into(),
            n_pedestrians: 50,
            n_frames: 200,
            frame_dt: 0.1,
            // Seed 7 leaves one pedestrian outside the view for all 200 frames.
            seed: 1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_frames < 2 {
            return invalid(format!("n_frames must be >= 2, got {}", self.n_frames));
        }
        if !(self.frame_dt > 0.0 && self.frame_dt.is_finite()) {
            return invalid(format!("frame_dt must be positive, got {}", self.frame_dt));
        }
        if u32::try_from(self.n_frames).is_err() {
            return invalid("too many frames".into());
        }
        for (i, r) in self.walkable_rects.iter().enumerate() {
            let finite = [r.x_min, r.y_min, r.x_max, r.y_max].iter().all(|v| v.is_finite());
            if !finite || !(r.width() > 0.0 && r.height() > 0.0) {
                return invalid(format!("walkable_rects[{i}] must have positive area"));
            }
        }
        let c = &self.camera_path;
        let finite = [c.start[0], c.start[1], c.heading_deg, c.speed, c.yaw_rate_deg, c.height, c.pitch_deg]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return invalid("camera_path has non-finite values".into());
        }
        self.intrinsics
            .validate()
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        Ok(())
    }
}

/// Walkable ground projected into one frame's label grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMask {
    pub frame_index: u32,
    pub mask: BinaryMap,
}

/// Ground-plane position of every pedestrian in every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    /// `positions[p][k]` is pedestrian `p` at frame `k`.
    pub positions: Vec<Vec<[f64; 2]>>,
    /// Index into the spec's rectangles each pedestrian walks in.
    pub rect_index: Vec<usize>,
}

pub fn object_id(pedestrian: usize) -> String {
    format!("ped{pedestrian:03}")
}

fn walk<R: Rng>(rect: &Rect, n_frames: usize, dt: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let speed = rng.gen_range(MIN_SPEED..=MAX_SPEED);
    let mut pos = rect.sample(rng);
    let mut target = rect.sample(rng);
    let mut out = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        out.push(pos);
        let mut budget = speed * dt;
        // Bounded so that a degenerate stream of near-coincident waypoints cannot spin.
        for _ in 0..1000 {
            let (dx, dy) = (target[0] - pos[0], target[1] - pos[1]);
            let d = dx.hypot(dy);
            if d > budget {
                pos = [pos[0] + dx / d * budget, pos[1] + dy / d * budget];
                break;
            }
            pos = target;
            budget -= d;
            target = rect.sample(rng);
        }
    }
    out
}

/// Seeded pedestrian walks. Pedestrians pick a rectangle with probability
/// proportional to its area among the rectangles wide enough to walk in.
pub fn pedestrian_trajectories(spec: &SceneSpec) -> Result<Trajectories, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let feasible: Vec<usize> = (0..spec.walkable_rects.len())
        .filter(|&i| {
            let r = &spec.walkable_rects[i];
            r.width() >= MIN_WALK_EXTENT && r.height() >= MIN_WALK_EXTENT
        })
        .collect();
    if spec.n_pedestrians > 0 && feasible.is_empty() {
        return Err(SynthError::InfeasibleSpec(format!(
            "no walkable rectangle is at least {MIN_WALK_EXTENT} m on each side"
        )));
    }
    let mut traj = Trajectories {
        positions: Vec::with_capacity(spec.n_pedestrians),
        rect_index: Vec::with_capacity(spec.n_pedestrians),
    };
    if spec.n_pedestrians == 0 {
        return Ok(traj);
    }
    let pick = WeightedIndex::new(feasible.iter().map(|&i| spec.walkable_rects[i].area()))
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    for _ in 0..spec.n_pedestrians {
        let r = feasible[pick.sample(&mut rng)];
        traj.rect_index.push(r);
        traj.positions
            .push(walk(&spec.walkable_rects[r], spec.n_frames, spec.frame_dt, &mut rng));
    }
    Ok(traj)
}

fn in_image(k: &CameraIntrinsics, u: f64, v: f64) -> bool {
    u >= 0.0 && u < f64::from(k.width) && v >= 0.0 && v < f64::from(k.height)
}

/// Cells of the label grid covered by the projected rectangles.
pub fn walkable_mask(
    rects: &[Rect],
    k: &CameraIntrinsics,
    pose: &RigidTransform,
    params: &PropagationParams,
) -> BinaryMap {
    let (rows, cols) = params.grid_shape(k.width, k.height);
    let mut mask = BinaryMap::zeros(rows, cols);
    let world_to_cam = invert(pose).expect("validated pose");
    let s = f64::from(params.downsample);
    let steps = |extent: f64| (extent / MASK_SAMPLE_STEP).ceil().max(1.0) as usize;
    for r in rects {
        let (nx, ny) = (steps(r.width()), steps(r.height()));
        for i in 0..=nx {
            let x = r.x_min + r.width() * i as f64 / nx as f64;
            for j in 0..=ny {
                let y = r.y_min + r.height() * j as f64 / ny as f64;
                let p = world_to_cam.apply(&Point3::new(x, y, 0.0));
                let Ok(px) = project(k, &p, params.z_min) else {
                    continue;
                };
                if in_image(k, px.u, px.v) {
                    let (row, col) = ((px.v / s) as usize, (px.u / s) as usize);
                    if row < rows && col < cols {
                        mask.grid_mut()[(row, col)] = true;
                    }
                }
            }
        }
    }
    mask
}

/// Sequence plus one ground-truth mask per frame, laid out on the label grid
/// of `params`.
pub fn generate_scene(
    spec: &SceneSpec,
    params: &PropagationParams,
) -> Result<(Sequence, Vec<GroundTruthMask>), SynthError> {
    params
        .validate()
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let traj = pedestrian_trajectories(spec)?;
    let k = spec.intrinsics;
    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut observations = Vec::new();
    let mut masks = Vec::with_capacity(spec.n_frames);
    for f in 0..spec.n_frames {
        let frame_index = f as u32;
        let timestamp = f as f64 * spec.frame_dt;
        let pose = spec.camera_path.pose_at(timestamp);
        let world_to_cam = invert(&pose).expect("pose is orthonormal");
        for (p, track) in traj.positions.iter().enumerate() {
            let [x, y] = track[f];
            let foot = world_to_cam.apply(&Point3::new(x, y, 0.0));
            if matches!(project(&k, &foot, params.z_min), Ok(px) if in_image(&k, px.u, px.v)) {
                observations.push(PersonObservation {
                    object_id: object_id(p),
                    frame_index,
                    foot_point: foot,
                });
            }
        }
        masks.push(GroundTruthMask {
            frame_index,
            mask: walkable_mask(&spec.walkable_rects, &k, &pose, params),
        });
        frames.push(Frame {
            frame_index,
            timestamp,
            pose,
        });
    }
    let seq = Sequence::new(spec.sequence_id.clone(), k, frames, observations)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok((seq, masks))
}

/// An observation whose splat center falls outside the dilated mask of one
/// or more reference frames.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageViolation {
    pub object_id: String,
    pub frame_index: u32,
    pub ref_frames: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Splat centers that landed on a grid and were checked.
    pub checked: usize,
    pub violations: Vec<CoverageViolation>,
}

impl CoverageReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn near_mask(mask: &BinaryMap, cell: Cell, radius: f64) -> bool {
    let (rows, cols) = mask.shape();
    let reach = radius.floor().min(rows.max(cols) as f64) as usize;
    let r2 = radius * radius;
    let rows_in = cell.row.saturating_sub(reach)..=(cell.row + reach).min(rows - 1);
    rows_in.into_iter().any(|r| {
        (cell.col.saturating_sub(reach)..=(cell.col + reach).min(cols - 1)).any(|c| {
            let (dr, dc) = (r as f64 - cell.row as f64, c as f64 - cell.col as f64);
            dr * dr + dc * dc <= r2 && mask.grid()[(r, c)]
        })
    })
}

/// Checks, for every reference frame, that each observation's projected
/// splat center (when on the grid) lies within `support_radius` cells of the
/// frame's walkable mask. Violations are grouped per observation.
pub fn coverage_check(
    seq: &Sequence,
    masks: &[GroundTruthMask],
    params: &PropagationParams,
) -> Result<CoverageReport, PropagationError> {
    params.validate()?;
    let k = seq.intrinsics();
    let (rows, cols) = params.grid_shape(k.width, k.height);
    let s = f64::from(params.downsample);
    let mut report = CoverageReport::default();
    let mut bad: Vec<Vec<u32>> = vec![Vec::new(); seq.observations().len()];
    for m in masks {
        if m.mask.shape() != (rows, cols) {
            return Err(PropagationError::InvalidParams(format!(
                "mask for frame {} is {:?}, label grid is {:?}",
                m.frame_index,
                m.mask.shape(),
                (rows, cols)
            )));
        }
        let transforms = FrameTransforms::new(seq, m.frame_index)?;
        for (i, obs) in seq.observations().iter().enumerate() {
            let Ok(px) = project(k, &transforms.to_reference(obs), params.z_min) else {
                continue;
            };
            let (cu, cv) = (px.u / s, px.v / s);
            if !(cu >= 0.0 && cu < cols as f64 && cv >= 0.0 && cv < rows as f64) {
                continue;
            }
            report.checked += 1;
            let cell = Cell::new(cv as usize, cu as usize);
            if !near_mask(&m.mask, cell, params.support_radius) {
                bad[i].push(m.frame_index);
            }
        }
    }
    report.violations = seq
        .observations()
        .iter()
        .zip(bad)
        .filter(|(_, refs)| !refs.is_empty())
        .map(|(o, ref_frames)| CoverageViolation {
            object_id: o.object_id.clone(),
            frame_index: o.frame_index,
            ref_frames,
        })
        .collect();
    Ok(report)
}
