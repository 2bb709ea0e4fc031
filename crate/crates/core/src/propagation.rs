//! Footprint propagation.
//!
//! For a reference frame `t`, every person observation of the sequence is
//! carried into `t`'s camera frame, projected, and splatted with an
//! unnormalized Gaussian onto the downsampled label grid:
//!
//! ```text
//! L_t(cell) = Σ_i Σ_o exp(-‖x_{o,i}/s − center(cell)‖² / 2σ²)
//! ```
//!
//! where `x_{o,i}` is the projection of observation `o` from frame `i` and
//! `center(r, c) = (c + 0.5, r + 0.5)` in cell units (image point
//! `((c + 0.5)·s, (r + 0.5)·s)`). The kernel is zero beyond
//! `support_radius` cells, which is what makes "non-zero" a meaningful
//! binarization rule.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    project, relative_transform, GeometryError, Pixel, Point3, RigidTransform, Vec3,
    DEFAULT_Z_MIN,
};
use crate::grid::{BinaryMap, Grid};
use crate::sequence::{PersonObservation, Sequence};

pub const DEFAULT_SIGMA: f64 = 2.0;
pub const DEFAULT_DOWNSAMPLE: u32 = 4;
/// Displacements shorter than this (meters) carry no walking direction.
pub const STATIONARY_EPS: f64 = 0.01;
/// Accumulated direction sums shorter than this are reported as absent.
pub const DIRECTION_CANCEL_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("reference frame {0} is not in the sequence")]
    UnknownFrame(u32),
    #[error("invalid propagation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Gaussian standard deviation, in label-grid cells.
    pub sigma: f64,
    /// Image pixels per label-grid cell.
    pub downsample: u32,
    /// Kernel support, in cells. May be `f64::INFINITY`.
    pub support_radius: f64,
    /// Near-plane cutoff, in meters.
    pub z_min: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self::new(DEFAULT_SIGMA, DEFAULT_DOWNSAMPLE)
    }
}

impl PropagationParams {
    /// Support defaults to `3σ`.
    pub fn new(sigma: f64, downsample: u32) -> Self {
        Self {
            sigma,
            downsample,
            support_radius: 3.0 * sigma,
            z_min: DEFAULT_Z_MIN,
        }
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(PropagationError::InvalidParams(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if self.downsample < 1 {
            return Err(PropagationError::InvalidParams("downsample must be >= 1".into()));
        }
        if !(self.support_radius >= self.sigma) {
            return Err(PropagationError::InvalidParams(format!(
                "support_radius {} is smaller than sigma {}",
                self.support_radius, self.sigma
            )));
        }
        if !self.z_min.is_finite() {
            return Err(PropagationError::InvalidParams("z_min must be finite".into()));
        }
        Ok(())
    }

    /// `(ceil(height / s), ceil(width / s))`.
    pub fn grid_shape(&self, width: u32, height: u32) -> (usize, usize) {
        let s = self.downsample.max(1);
        (height.div_ceil(s) as usize, width.div_ceil(s) as usize)
    }
}

/// Observations dropped while building one map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub behind_camera: usize,
    pub off_grid: usize,
    /// Direction maps only: no successor movement of at least [`STATIONARY_EPS`].
    pub stationary: usize,
    /// Direction maps only: both endpoints project to the same pixel.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootprintMap {
    pub grid: Grid<f64>,
    pub params: PropagationParams,
    pub ref_frame: u32,
    pub skipped: SkipCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMap {
    /// Unit image-plane `(du, dv)` per cell, or `None` where no direction is known.
    pub grid: Grid<Option<[f64; 2]>>,
    pub params: PropagationParams,
    pub ref_frame: u32,
    pub skipped: SkipCounts,
}

/// Transforms from every frame's camera into the reference camera.
pub(crate) struct FrameTransforms(HashMap<u32, RigidTransform>);

impl FrameTransforms {
    pub(crate) fn new(seq: &Sequence, ref_frame: u32) -> Result<Self, PropagationError> {
        let reference = seq
            .frame(ref_frame)
            .ok_or(PropagationError::UnknownFrame(ref_frame))?;
        let mut map = HashMap::with_capacity(seq.frames().len());
        for f in seq.frames() {
            map.insert(f.frame_index, relative_transform(&f.pose, &reference.pose)?);
        }
        Ok(Self(map))
    }

    pub(crate) fn to_reference(&self, obs: &PersonObservation) -> Point3 {
        // Sequence validation guarantees every observation's frame exists.
        self.0[&obs.frame_index].apply(&obs.foot_point)
    }
}

/// Reusable Gaussian splatting on a label grid.
struct Splatter {
    rows: usize,
    cols: usize,
    inv_two_sigma_sq: f64,
    radius: f64,
    row_w: Vec<f64>,
    col_w: Vec<f64>,
}

impl Splatter {
    fn new(rows: usize, cols: usize, params: &PropagationParams) -> Self {
        Self {
            rows,
            cols,
            inv_two_sigma_sq: 1.0 / (2.0 * params.sigma * params.sigma),
            radius: params.support_radius,
            row_w: Vec::with_capacity(rows),
            col_w: Vec::with_capacity(cols),
        }
    }

    /// Whether a kernel centered at `(cu, cv)` (cell units) is entirely off the grid.
    fn off_grid(&self, cu: f64, cv: f64) -> bool {
        let r = self.radius;
        !(cu >= -r && cu <= self.cols as f64 + r && cv >= -r && cv <= self.rows as f64 + r)
    }

    /// Calls `emit(row, col, weight)` for every cell within the support.
    fn splat(&mut self, cu: f64, cv: f64, mut emit: impl FnMut(usize, usize, f64)) {
        if self.rows == 0 || self.cols == 0 {
            return;
        }
        let r = self.radius;
        let span = |center: f64, n: usize| -> Option<(usize, usize)> {
            let lo = (center - r - 0.5).ceil().max(0.0);
            let hi = (center + r - 0.5).floor().min((n - 1) as f64);
            (lo <= hi).then_some((lo as usize, hi as usize))
        };
        let (Some((r0, r1)), Some((c0, c1))) = (span(cv, self.rows), span(cu, self.cols)) else {
            return;
        };
        let k = self.inv_two_sigma_sq;
        self.row_w.clear();
        self.row_w
            .extend((r0..=r1).map(|row| (-(cv - (row as f64 + 0.5)).powi(2) * k).exp()));
        self.col_w.clear();
        self.col_w
            .extend((c0..=c1).map(|col| (-(cu - (col as f64 + 0.5)).powi(2) * k).exp()));
        let r2 = r * r;
        for (i, row) in (r0..=r1).enumerate() {
            let dv = cv - (row as f64 + 0.5);
            let dv2 = dv * dv;
            let wr = self.row_w[i];
            for (j, col) in (c0..=c1).enumerate() {
                let du = cu - (col as f64 + 0.5);
                if du * du + dv2 <= r2 {
                    emit(row, col, wr * self.col_w[j]);
                }
            }
        }
    }
}

fn checked_grid_shape(
    seq: &Sequence,
    params: &PropagationParams,
) -> Result<(usize, usize), PropagationError> {
    params.validate()?;
    let k = seq.intrinsics();
    Ok(params.grid_shape(k.width, k.height))
}

pub fn propagate_footprints(
    seq: &Sequence,
    ref_frame: u32,
    params: &PropagationParams,
) -> Result<FootprintMap, PropagationError> {
    propagate_footprints_from(seq, ref_frame, params, |_| true)
}

/// Only observations from the reference frame itself (no propagation).
pub fn single_frame_footprints(
    seq: &Sequence,
    ref_frame: u32,
    params: &PropagationParams,
) -> Result<FootprintMap, PropagationError> {
    propagate_footprints_from(seq, ref_frame, params, |i| i == ref_frame)
}

/// Restricts the outer sum to source frames accepted by `include`.
pub fn propagate_footprints_from(
    seq: &Sequence,
    ref_frame: u32,
    params: &PropagationParams,
    include: impl Fn(u32) -> bool,
) -> Result<FootprintMap, PropagationError> {
    let (rows, cols) = checked_grid_shape(seq, params)?;
    let transforms = FrameTransforms::new(seq, ref_frame)?;
    let k = seq.intrinsics();
    let s = f64::from(params.downsample);
    let mut grid = Grid::<f64>::new(rows, cols);
    let mut skipped = SkipCounts::default();
    let mut splatter = Splatter::new(rows, cols, params);

    for obs in seq.observations().iter().filter(|o| include(o.frame_index)) {
        let Ok(px) = project(k, &transforms.to_reference(obs), params.z_min) else {
            skipped.behind_camera += 1;
            continue;
        };
        let (cu, cv) = (px.u / s, px.v / s);
        if splatter.off_grid(cu, cv) {
            skipped.off_grid += 1;
            continue;
        }
        let data = grid.as_mut_slice();
        splatter.splat(cu, cv, |r, c, w| data[r * cols + c] += w);
    }

    Ok(FootprintMap {
        grid,
        params: *params,
        ref_frame,
        skipped,
    })
}

/// Footprint maps for every frame, in frame order. Runs on the current rayon
/// pool; each map is computed independently so the result does not depend on
/// the pool size.
pub fn propagate_all_frames(
    seq: &Sequence,
    params: &PropagationParams,
    single_frame: bool,
) -> Result<Vec<FootprintMap>, PropagationError> {
    seq.frames()
        .par_iter()
        .map(|f| {
            if single_frame {
                single_frame_footprints(seq, f.frame_index, params)
            } else {
                propagate_footprints(seq, f.frame_index, params)
            }
        })
        .collect()
}

/// Cells with a non-zero footprint value become positive.
pub fn binarize(map: &FootprintMap) -> BinaryMap {
    BinaryMap::from_threshold(&map.grid, 0.0)
}

/// The observation moved less than [`STATIONARY_EPS`].
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("displacement {distance} m is below the stationary threshold")]
pub struct Stationary {
    pub distance: f64,
}

/// Unit 3D walking direction between consecutive world positions.
pub fn walking_direction(p_now: &Point3, p_next: &Point3) -> Result<Vec3, Stationary> {
    let d = p_next - p_now;
    let distance = d.norm();
    if !(distance >= STATIONARY_EPS) {
        return Err(Stationary { distance });
    }
    Ok(d / distance)
}

/// Pairs each observation with the same object's next annotated observation,
/// ordered by frame index. Ties keep input order.
fn successor_pairs(seq: &Sequence) -> Vec<(&PersonObservation, &PersonObservation)> {
    let mut tracks: BTreeMap<&str, Vec<&PersonObservation>> = BTreeMap::new();
    for o in seq.observations() {
        tracks.entry(o.object_id.as_str()).or_default().push(o);
    }
    let mut pairs = Vec::new();
    for track in tracks.values_mut() {
        track.sort_by_key(|o| o.frame_index);
        for (i, now) in track.iter().enumerate() {
            if let Some(next) = track[i + 1..]
                .iter()
                .find(|o| o.frame_index > now.frame_index)
            {
                pairs.push((*now, *next));
            }
        }
    }
    pairs
}

pub fn propagate_directions(
    seq: &Sequence,
    ref_frame: u32,
    params: &PropagationParams,
) -> Result<DirectionMap, PropagationError> {
    let (rows, cols) = checked_grid_shape(seq, params)?;
    let transforms = FrameTransforms::new(seq, ref_frame)?;
    let k = seq.intrinsics();
    let s = f64::from(params.downsample);
    let mut acc = Grid::<[f64; 2]>::new(rows, cols);
    let mut skipped = SkipCounts::default();
    let mut splatter = Splatter::new(rows, cols, params);
    let world = |o: &PersonObservation| {
        let pose = &seq.frame(o.frame_index).expect("validated sequence").pose;
        pose.apply(&o.foot_point)
    };

    for (now, next) in successor_pairs(seq) {
        if walking_direction(&world(now), &world(next)).is_err() {
            skipped.stationary += 1;
            continue;
        }
        let project_ref = |o| project(k, &transforms.to_reference(o), params.z_min);
        let (Ok(a), Ok(b)) = (project_ref(now), project_ref(next)) else {
            skipped.behind_camera += 1;
            continue;
        };
        let Some(dir) = image_direction(a, b) else {
            skipped.degenerate += 1;
            continue;
        };
        let (cu, cv) = (a.u / s, a.v / s);
        if splatter.off_grid(cu, cv) {
            skipped.off_grid += 1;
            continue;
        }
        let data = acc.as_mut_slice();
        splatter.splat(cu, cv, |r, c, w| {
            let cell = &mut data[r * cols + c];
            cell[0] += w * dir[0];
            cell[1] += w * dir[1];
        });
    }

    let grid = acc.map(|&[x, y]| {
        let n = x.hypot(y);
        (n >= DIRECTION_CANCEL_EPS).then(|| [x / n, y / n])
    });
    Ok(DirectionMap {
        grid,
        params: *params,
        ref_frame,
        skipped,
    })
}

fn image_direction(from: Pixel, to: Pixel) -> Option<[f64; 2]> {
    let (du, dv) = (to.u - from.u, to.v - from.v);
    let n = du.hypot(dv);
    (n > 0.0 && n.is_finite()).then(|| [du / n, dv / n])
}

pub fn propagate_all_directions(
    seq: &Sequence,
    params: &PropagationParams,
) -> Result<Vec<DirectionMap>, PropagationError> {
    seq.frames()
        .par_iter()
        .map(|f| propagate_directions(seq, f.frame_index, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compose, CameraIntrinsics};
    use crate::sequence::Frame;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap()
    }

    fn obs(id: &str, frame: u32, p: [f64; 3]) -> PersonObservation {
        PersonObservation {
            object_id: id.into(),
            frame_index: frame,
            foot_point: Point3::new(p[0], p[1], p[2]),
        }
    }

    fn static_seq(n: u32, observations: Vec<PersonObservation>) -> Sequence {
        let frames = (0..n)
            .map(|i| Frame {
                frame_index: i,
                timestamp: f64::from(i) * 0.1,
                pose: RigidTransform::identity(),
            })
            .collect();
        Sequence::new("t", k(), frames, observations).unwrap()
    }

    fn unit() -> PropagationParams {
        PropagationParams::new(2.0, 1)
    }

    #[test]
    fn axis_point_peaks_at_principal_point() {
        let seq = static_seq(1, vec![obs("a", 0, [0.0, 0.0, 5.0])]);
        let map = propagate_footprints(&seq, 0, &unit()).unwrap();
        assert_eq!(map.grid.shape(), (48, 64));
        let (mut best, mut at) = (0.0, (0, 0));
        for (r, c, &v) in map.grid.cells() {
            if v > best {
                best = v;
                at = (r, c);
            }
        }
        // Principal point (32, 24) lies on a cell corner; the four touching
        // cells tie and row-major scan keeps the first.
        assert_eq!(at, (23, 31));
        let half_cell = (-(0.5f64 * 0.5 + 0.5 * 0.5) / 8.0).exp();
        assert!((best - half_cell).abs() < 1e-15);
        assert!(best <= 1.0);
    }

    #[test]
    fn peak_is_one_at_cell_center() {
        // (32.5, 24.5) is the center of cell (24, 32).
        let seq = static_seq(1, vec![obs("a", 0, [0.025, 0.025, 5.0])]);
        let map = propagate_footprints(&seq, 0, &unit()).unwrap();
        assert!((map.grid[(24, 32)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_observations_give_zero_map() {
        let seq = static_seq(3, vec![]);
        let map = propagate_footprints(&seq, 1, &unit()).unwrap();
        assert!(map.grid.as_slice().iter().all(|&v| v == 0.0));
        assert!(binarize(&map).grid().as_slice().iter().all(|&b| !b));
    }

    #[test]
    fn unknown_frame_and_bad_params() {
        let seq = static_seq(2, vec![]);
        assert_eq!(
            propagate_footprints(&seq, 7, &unit()),
            Err(PropagationError::UnknownFrame(7))
        );
        let mut p = unit();
        p.support_radius = 1.0;
        assert!(matches!(
            propagate_footprints(&seq, 0, &p),
            Err(PropagationError::InvalidParams(_))
        ));
        p = unit();
        p.sigma = 0.0;
        assert!(propagate_footprints(&seq, 0, &p).is_err());
        p = unit();
        p.downsample = 0;
        assert!(propagate_footprints(&seq, 0, &p).is_err());
    }

    #[test]
    fn binarize_matches_disk_membership() {
        // Splat center exactly at cell-center coordinates (20.5, 10.5) in
        // cell units, i.e. cell (10, 20).
        // Depth 6.25 gives fx/z = 16, keeping the projection exact in binary.
        let seq = static_seq(1, vec![obs("a", 0, [-11.5 / 16.0, -13.5 / 16.0, 6.25])]);
        let p = PropagationParams {
            sigma: 2.0,
            downsample: 1,
            support_radius: 6.0,
            z_min: 0.1,
        };
        let bin = binarize(&propagate_footprints(&seq, 0, &p).unwrap());
        let mut count = 0;
        for (r, c, &b) in bin.grid().cells() {
            let (dr, dc) = (r as i64 - 10, c as i64 - 20);
            assert_eq!(b, dr * dr + dc * dc <= 36, "cell ({r},{c})");
            count += usize::from(b);
        }
        // Lattice points in a radius-6 disk.
        assert_eq!(count, 113);
    }

    #[test]
    fn behind_and_off_grid_are_counted() {
        let seq = static_seq(
            1,
            vec![
                obs("a", 0, [0.0, 0.0, -2.0]),
                obs("b", 0, [100.0, 0.0, 1.0]),
                obs("c", 0, [0.0, 0.0, 4.0]),
            ],
        );
        let map = propagate_footprints(&seq, 0, &unit()).unwrap();
        assert_eq!(map.skipped.behind_camera, 1);
        assert_eq!(map.skipped.off_grid, 1);
        assert!(map.grid.as_slice().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn splat_just_outside_grid_still_reaches_border_cells() {
        // Projected to u = -2 (cell units): 2.5 cells from column 0 center.
        let seq = static_seq(1, vec![obs("a", 0, [-0.34 * 5.0, 0.0, 5.0])]);
        let map = propagate_footprints(&seq, 0, &unit()).unwrap();
        assert_eq!(map.skipped.off_grid, 0);
        assert!(map.grid[(24, 0)] > 0.0);
    }

    #[test]
    fn walking_direction_cases() {
        let d = walking_direction(&Point3::origin(), &Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(d, Vec3::new(1.0, 0.0, 0.0));
        assert!(walking_direction(&Point3::origin(), &Point3::origin()).is_err());
        assert!(walking_direction(&Point3::origin(), &Point3::new(0.005, 0.0, 0.0)).is_err());
        let d = walking_direction(&Point3::new(1.0, 1.0, 0.0), &Point3::new(2.0, 2.0, 0.0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((d - Vec3::new(h, h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn directions_follow_motion() {
        // Identity poses: camera frame is the world frame, +x maps to +u.
        let o: Vec<_> = (0..4)
            .map(|i| obs("w", i, [-0.6 + 0.3 * f64::from(i), 1.0, 6.0]))
            .collect();
        let seq = static_seq(4, o);
        let dm = propagate_directions(&seq, 2, &unit()).unwrap();
        let present: Vec<_> = dm.grid.as_slice().iter().flatten().collect();
        assert!(!present.is_empty());
        for d in present {
            assert!((d[0] - 1.0).abs() < 1e-6 && d[1].abs() < 1e-6, "{d:?}");
        }
    }

    #[test]
    fn directions_absent_without_motion() {
        let seq = static_seq(3, (0..3).map(|i| obs("s", i, [0.0, 1.0, 5.0])).collect());
        let dm = propagate_directions(&seq, 0, &unit()).unwrap();
        assert!(dm.grid.as_slice().iter().all(Option::is_none));
        assert_eq!(dm.skipped.stationary, 2);
        let seq = static_seq(2, vec![]);
        let dm = propagate_directions(&seq, 0, &unit()).unwrap();
        assert!(dm.grid.as_slice().iter().all(Option::is_none));
    }

    #[test]
    fn opposite_walkers_cancel() {
        // Two walkers starting at the same point, moving in opposite directions.
        let seq = static_seq(
            2,
            vec![
                obs("a", 0, [0.0, 1.0, 5.0]),
                obs("a", 1, [0.5, 1.0, 5.0]),
                obs("b", 0, [0.0, 1.0, 5.0]),
                obs("b", 1, [-0.5, 1.0, 5.0]),
            ],
        );
        let dm = propagate_directions(&seq, 0, &unit()).unwrap();
        // Projected start (32, 44); the cell containing it must be absent.
        assert_eq!(dm.grid[(44, 32)], None);
        assert!(dm.grid.as_slice().iter().all(Option::is_none));
    }

    #[test]
    fn global_rigid_change_preserves_map() {
        let moving = |i: u32| {
            compose(
                &RigidTransform::from_axis_angle(Vec3::y(), 0.05 * f64::from(i)),
                &RigidTransform::from_translation(0.2 * f64::from(i), 0.0, 0.5 * f64::from(i)),
            )
            .unwrap()
        };
        let frames = (0..4)
            .map(|i| Frame {
                frame_index: i,
                timestamp: f64::from(i),
                pose: moving(i),
            })
            .collect();
        let observations = (0..4).map(|i| obs("a", i, [0.3, 1.2, 6.0 - f64::from(i) * 0.4])).collect();
        let seq = Sequence::new("g", k(), frames, observations).unwrap();
        let g = compose(
            &RigidTransform::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), 1.3),
            &RigidTransform::from_translation(100.0, -40.0, 7.0),
        )
        .unwrap();
        let moved = seq.map_poses(|p| compose(&g, p).unwrap()).unwrap();
        let a = propagate_footprints(&seq, 1, &unit()).unwrap();
        let b = propagate_footprints(&moved, 1, &unit()).unwrap();
        for (x, y) in a.grid.as_slice().iter().zip(b.grid.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
