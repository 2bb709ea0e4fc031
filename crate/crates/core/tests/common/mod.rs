//! Scene builders and brute-force oracles shared by the integration tests.
//!
//! The oracles deliberately avoid the library's geometry and splatting code:
//! poses are read out as raw numbers and every formula is evaluated directly.
#![allow(dead_code)]

use footprint_core::geometry::{invert, CameraIntrinsics, Point3, RigidTransform, Vec3};
use footprint_core::sequence::{Frame, PersonObservation, Sequence};
use rand::Rng;

/// 256×192 image, i.e. a 64×48 label grid at downsample 4.
pub fn small_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(200.0, 200.0, 128.0, 96.0, 256, 192).unwrap()
}

/// Rotation about a uniformly random axis by an angle in `[-max_angle, max_angle]`.
pub fn random_rotation<R: Rng>(rng: &mut R, max_angle: f64) -> RigidTransform {
    let axis = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    RigidTransform::from_axis_angle(axis, rng.gen_range(-max_angle..=max_angle))
}

/// Arbitrary rigid transform with a full-range rotation.
pub fn random_transform<R: Rng>(rng: &mut R, max_translation: f64) -> RigidTransform {
    let r = random_rotation(rng, std::f64::consts::PI);
    let t = Vec3::new(
        rng.gen_range(-max_translation..=max_translation),
        rng.gen_range(-max_translation..=max_translation),
        rng.gen_range(-max_translation..=max_translation),
    );
    RigidTransform::new(*r.rotation(), t).unwrap()
}

/// A camera creeping forward with small random wobble, and objects walking
/// in front of it. Some observations fall behind the camera or outside the
/// image; some objects skip frames.
pub fn random_sequence<R: Rng>(rng: &mut R, id: &str, n_frames: usize, n_objects: usize) -> Sequence {
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let wobble = random_rotation(rng, 0.15);
        let t = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.3..0.3),
            0.5 * i as f64 + rng.gen_range(-0.2..0.2),
        );
        frames.push(Frame {
            frame_index: i as u32,
            timestamp: 0.1 * i as f64,
            pose: RigidTransform::new(*wobble.rotation(), t).unwrap(),
        });
    }
    let mut observations = Vec::new();
    for o in 0..n_objects {
        let start = Point3::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(1.0..1.8),
            rng.gen_range(-1.0..14.0),
        );
        let velocity = Vec3::new(rng.gen_range(-0.3..0.3), 0.0, rng.gen_range(-0.3..0.3));
        for f in &frames {
            if rng.gen_bool(0.2) {
                continue;
            }
            let world = start + velocity * f64::from(f.frame_index);
            observations.push(PersonObservation {
                object_id: format!("{id}-obj{o}"),
                frame_index: f.frame_index,
                foot_point: invert(&f.pose).unwrap().apply(&world),
            });
        }
    }
    Sequence::new(id, small_intrinsics(), frames, observations).unwrap()
}

fn mat_vec(r: &[f64; 9], v: [f64; 3]) -> [f64; 3] {
    [
        r[0] * v[0] + r[1] * v[1] + r[2] * v[2],
        r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
        r[6] * v[0] + r[7] * v[1] + r[8] * v[2],
    ]
}

fn mat_t_vec(r: &[f64; 9], v: [f64; 3]) -> [f64; 3] {
    [
        r[0] * v[0] + r[3] * v[1] + r[6] * v[2],
        r[1] * v[0] + r[4] * v[1] + r[7] * v[2],
        r[2] * v[0] + r[5] * v[1] + r[8] * v[2],
    ]
}

/// Observation `o` expressed in the camera frame of `ref_frame`, going
/// through world coordinates: `X_ref = R_refᵀ (R_i X + T_i − T_ref)`.
pub fn to_reference(seq: &Sequence, o: &PersonObservation, ref_frame: u32) -> [f64; 3] {
    let src = seq.frame(o.frame_index).unwrap().pose;
    let dst = seq.frame(ref_frame).unwrap().pose;
    let x = [o.foot_point.x, o.foot_point.y, o.foot_point.z];
    let w = mat_vec(&src.rotation_row_major(), x);
    let (ts, td) = (src.translation(), dst.translation());
    let d = [w[0] + ts.x - td.x, w[1] + ts.y - td.y, w[2] + ts.z - td.z];
    mat_t_vec(&dst.rotation_row_major(), d)
}

/// Pinhole projection `K·X / Z`, or `None` at or behind `z_min`.
pub fn pinhole(k: &CameraIntrinsics, p: [f64; 3], z_min: f64) -> Option<[f64; 2]> {
    (p[2] > z_min).then(|| [k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy])
}

/// Row-major label grid with every cell evaluated against every
/// observation, no truncation.
pub fn brute_force_footprints(seq: &Sequence, ref_frame: u32, sigma: f64, downsample: u32, z_min: f64) -> (usize, usize, Vec<f64>) {
    let k = seq.intrinsics();
    let s = f64::from(downsample);
    let rows = (f64::from(k.height) / s).ceil() as usize;
    let cols = (f64::from(k.width) / s).ceil() as usize;
    let centers: Vec<[f64; 2]> = seq
        .observations()
        .iter()
        .filter_map(|o| pinhole(k, to_reference(seq, o, ref_frame), z_min))
        .map(|[u, v]| [u / s, v / s])
        .collect();
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
            out[r * cols + c] = centers
                .iter()
                .map(|[u, v]| (-((u - x).powi(2) + (v - y).powi(2)) / (2.0 * sigma * sigma)).exp())
                .sum();
        }
    }
    (rows, cols, out)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// One pedestrian walking a straight line at constant velocity past a
/// moving, turning camera. A straight 3D line stays straight under any
/// projection, so every direction contribution shares one image direction.
pub fn straight_walker_sequence() -> (Sequence, [f64; 3], [f64; 3]) {
    let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
    let start = [-3.0, 1.6, 12.0];
    let step = [0.35, 0.0, -0.1];
    let n = 12;
    let mut frames = Vec::new();
    let mut observations = Vec::new();
    for i in 0..n {
        let yaw = RigidTransform::from_axis_angle(Vec3::y(), 0.02 * i as f64);
        let pose = RigidTransform::new(*yaw.rotation(), Vec3::new(0.05 * i as f64, 0.0, 0.2 * i as f64)).unwrap();
        let world = Point3::new(
            start[0] + step[0] * i as f64,
            start[1] + step[1] * i as f64,
            start[2] + step[2] * i as f64,
        );
        observations.push(PersonObservation {
            object_id: "walker".into(),
            frame_index: i,
            foot_point: invert(&pose).unwrap().apply(&world),
        });
        frames.push(Frame {
            frame_index: i,
            timestamp: 0.5 * f64::from(i),
            pose,
        });
    }
    let last = [
        start[0] + step[0] * f64::from(n - 1),
        start[1] + step[1] * f64::from(n - 1),
        start[2] + step[2] * f64::from(n - 1),
    ];
    (Sequence::new("walker", k, frames, observations).unwrap(), start, last)
}

/// Unit image direction from the projection of `a` to that of `b` (world
/// points) in the camera of `ref_frame`.
pub fn endpoint_direction(seq: &Sequence, ref_frame: u32, a: [f64; 3], b: [f64; 3]) -> [f64; 2] {
    let pose = seq.frame(ref_frame).unwrap().pose;
    let r = pose.rotation_row_major();
    let t = pose.translation();
    let cam = |w: [f64; 3]| mat_t_vec(&r, [w[0] - t.x, w[1] - t.y, w[2] - t.z]);
    let k = seq.intrinsics();
    let pa = pinhole(k, cam(a), 0.1).unwrap();
    let pb = pinhole(k, cam(b), 0.1).unwrap();
    let (du, dv) = (pb[0] - pa[0], pb[1] - pa[1]);
    let n = du.hypot(dv);
    [du / n, dv / n]
}

/// Average precision by enumerating, for every positive, the precision of
/// the threshold set at its own score. Scores must be distinct.
pub fn exhaustive_ap(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let positives: Vec<usize> = (0..scores.len()).filter(|&i| labels[i]).collect();
    if positives.is_empty() {
        return None;
    }
    let sum: f64 = positives
        .iter()
        .map(|&i| {
            let retrieved = scores.iter().filter(|&&s| s >= scores[i]).count();
            let hits = positives.iter().filter(|&&j| scores[j] >= scores[i]).count();
            hits as f64 / retrieved as f64
        })
        .sum();
    Some(sum / positives.len() as f64)
}
