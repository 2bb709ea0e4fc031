//! Capture sequences: intrinsics, per-frame poses and person observations.

use std::collections::HashSet;

use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Point3, RigidTransform};

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("{}invariant violated: {kind}", line_prefix(*.line))]
    InvariantViolation { line: Option<usize>, kind: String },
    #[error("{}duplicate frame_index {frame_index}", line_prefix(*.line))]
    DuplicateFrameIndex { line: Option<usize>, frame_index: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl SequenceError {
    pub(crate) fn invariant(line: Option<usize>, kind: impl Into<String>) -> Self {
        SequenceError::InvariantViolation {
            line,
            kind: kind.into(),
        }
    }
}

/// A person's foot point, in the camera coordinates of the frame that annotated it.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonObservation {
    pub object_id: String,
    pub frame_index: u32,
    pub foot_point: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_index: u32,
    /// Seconds.
    pub timestamp: f64,
    /// Camera-to-world.
    pub pose: RigidTransform,
}

/// One capture episode. Only constructible through validation, so every
/// instance satisfies the ordering and reference invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    sequence_id: String,
    intrinsics: CameraIntrinsics,
    frames: Vec<Frame>,
    observations: Vec<PersonObservation>,
}

impl Sequence {
    pub fn new(
        sequence_id: impl Into<String>,
        intrinsics: CameraIntrinsics,
        frames: Vec<Frame>,
        observations: Vec<PersonObservation>,
    ) -> Result<Self, SequenceError> {
        intrinsics
            .validate()
            .map_err(|e| SequenceError::invariant(None, e.to_string()))?;
        if frames.is_empty() {
            return Err(SequenceError::invariant(None, "sequence has no frames"));
        }
        let mut seen = HashSet::new();
        for pair in frames.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.frame_index == b.frame_index {
                return Err(SequenceError::DuplicateFrameIndex {
                    line: None,
                    frame_index: b.frame_index,
                });
            }
            if b.frame_index < a.frame_index {
                return Err(SequenceError::invariant(
                    None,
                    format!(
                        "frames out of order: {} after {}",
                        b.frame_index, a.frame_index
                    ),
                ));
            }
            if !(b.timestamp > a.timestamp) {
                return Err(SequenceError::invariant(
                    None,
                    format!(
                        "timestamps must increase with frame_index (frame {} at {} after frame {} at {})",
                        b.frame_index, b.timestamp, a.frame_index, a.timestamp
                    ),
                ));
            }
        }
        for f in &frames {
            if !f.timestamp.is_finite() {
                return Err(SequenceError::invariant(
                    None,
                    format!("frame {} has a non-finite timestamp", f.frame_index),
                ));
            }
            seen.insert(f.frame_index);
        }
        for (i, o) in observations.iter().enumerate() {
            if !seen.contains(&o.frame_index) {
                return Err(SequenceError::invariant(
                    None,
                    format!(
                        "observation {i} ({}) references unknown frame {}",
                        o.object_id, o.frame_index
                    ),
                ));
            }
            if !o.foot_point.iter().all(|v| v.is_finite()) {
                return Err(SequenceError::invariant(
                    None,
                    format!("observation {i} ({}) has a non-finite foot point", o.object_id),
                ));
            }
        }
        Ok(Self {
            sequence_id: sequence_id.into(),
            intrinsics,
            frames,
            observations,
        })
    }

    pub fn sequence_id(&self) -> &str {
        &self.sequence_id
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    /// Ordered by increasing `frame_index`.
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn observations(&self) -> &[PersonObservation] {
        &self.observations
    }

    pub fn frame(&self, frame_index: u32) -> Option<&Frame> {
        self.frames
            .binary_search_by_key(&frame_index, |f| f.frame_index)
            .ok()
            .map(|i| &self.frames[i])
    }

    /// A copy keeping only the listed frames and the observations they annotate.
    pub fn restricted_to_frames(&self, keep: &[u32]) -> Result<Sequence, SequenceError> {
        let keep: HashSet<u32> = keep.iter().copied().collect();
        Sequence::new(
            self.sequence_id.clone(),
            self.intrinsics,
            self.frames
                .iter()
                .filter(|f| keep.contains(&f.frame_index))
                .cloned()
                .collect(),
            self.observations
                .iter()
                .filter(|o| keep.contains(&o.frame_index))
                .cloned()
                .collect(),
        )
    }

    /// Same sequence with every pose replaced by `f(pose)`.
    pub fn map_poses(
        &self,
        mut f: impl FnMut(&RigidTransform) -> RigidTransform,
    ) -> Result<Sequence, SequenceError> {
        let frames = self
            .frames
            .iter()
            .map(|fr| Frame {
                pose: f(&fr.pose),
                ..fr.clone()
            })
            .collect();
        Sequence::new(
            self.sequence_id.clone(),
            self.intrinsics,
            frames,
            self.observations.clone(),
        )
    }

    /// Same sequence with a different observation list.
    pub fn with_observations(
        &self,
        observations: Vec<PersonObservation>,
    ) -> Result<Sequence, SequenceError> {
        Sequence::new(
            self.sequence_id.clone(),
            self.intrinsics,
            self.frames.clone(),
            observations,
        )
    }
}
