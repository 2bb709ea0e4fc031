//! JSON Lines sequence format.
//!
//! One record per line, discriminated by `"type"`:
//!
//! ```text
//! {"type":"header","sequence_id":"s0","intrinsics":{"fx":500.0,"fy":500.0,"cx":320.0,"cy":240.0,"width":640,"height":480}}
//! {"type":"frame","frame_index":0,"timestamp":0.0,"rotation":[1.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0],"translation":[0.0,0.0,0.0]}
//! {"type":"observation","object_id":"p0","frame_index":0,"foot_point":[0.5,1.6,8.0]}
//! ```
//!
//! The header comes first, frames follow in increasing `frame_index`, and
//! observations may appear anywhere after the header. Rotations are row-major
//! camera-to-world matrices; all quantities are SI. Numbers are written in
//! shortest round-trip form, so `parse(write(s)) == s` exactly.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, Point3, RigidTransform};
use crate::sequence::{Frame, PersonObservation, Sequence, SequenceError};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Header {
        sequence_id: String,
        intrinsics: CameraIntrinsics,
    },
    Frame {
        frame_index: u32,
        timestamp: f64,
        rotation: [f64; 9],
        translation: [f64; 3],
    },
    Observation {
        object_id: String,
        frame_index: u32,
        foot_point: [f64; 3],
    },
}

pub fn parse_sequence<R: BufRead>(input: R) -> Result<Sequence, SequenceError> {
    let mut header: Option<(String, CameraIntrinsics)> = None;
    let mut frames: Vec<Frame> = Vec::new();
    let mut observations = Vec::new();
    let mut observation_lines = Vec::new();
    let mut frame_lines: HashMap<u32, usize> = HashMap::new();

    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| SequenceError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        match record {
            Record::Header {
                sequence_id,
                intrinsics,
            } => {
                if header.is_some() {
                    return Err(SequenceError::MalformedRecord {
                        line: line_no,
                        reason: "second header record".into(),
                    });
                }
                intrinsics
                    .validate()
                    .map_err(|e| SequenceError::invariant(Some(line_no), e.to_string()))?;
                header = Some((sequence_id, intrinsics));
            }
            _ if header.is_none() => {
                return Err(SequenceError::MalformedRecord {
                    line: line_no,
                    reason: "the header record must come first".into(),
                });
            }
            Record::Frame {
                frame_index,
                timestamp,
                rotation,
                translation,
            } => {
                if let Some(prev) = frames.last() {
                    if frame_index == prev.frame_index {
                        return Err(SequenceError::DuplicateFrameIndex {
                            line: Some(line_no),
                            frame_index,
                        });
                    }
                    if frame_index < prev.frame_index {
                        return Err(SequenceError::invariant(
                            Some(line_no),
                            format!(
                                "frame_index {frame_index} follows {}; frames must be increasing",
                                prev.frame_index
                            ),
                        ));
                    }
                    if !(timestamp > prev.timestamp) {
                        return Err(SequenceError::invariant(
                            Some(line_no),
                            format!(
                                "timestamp {timestamp} does not increase past {}",
                                prev.timestamp
                            ),
                        ));
                    }
                }
                if !timestamp.is_finite() {
                    return Err(SequenceError::invariant(
                        Some(line_no),
                        "non-finite timestamp",
                    ));
                }
                let pose = RigidTransform::from_row_major(rotation, translation)
                    .map_err(|e| SequenceError::invariant(Some(line_no), e.to_string()))?;
                frame_lines.insert(frame_index, line_no);
                frames.push(Frame {
                    frame_index,
                    timestamp,
                    pose,
                });
            }
            Record::Observation {
                object_id,
                frame_index,
                foot_point,
            } => {
                if !foot_point.iter().all(|v| v.is_finite()) {
                    return Err(SequenceError::invariant(
                        Some(line_no),
                        "non-finite foot_point",
                    ));
                }
                observation_lines.push(line_no);
                observations.push(PersonObservation {
                    object_id,
                    frame_index,
                    foot_point: Point3::new(foot_point[0], foot_point[1], foot_point[2]),
                });
            }
        }
    }

    let Some((sequence_id, intrinsics)) = header else {
        return Err(SequenceError::MalformedRecord {
            line: 0,
            reason: "empty input: no header record".into(),
        });
    };
    if frames.is_empty() {
        return Err(SequenceError::invariant(None, "sequence has no frames"));
    }
    for (o, &line) in observations.iter().zip(&observation_lines) {
        if !frame_lines.contains_key(&o.frame_index) {
            return Err(SequenceError::invariant(
                Some(line),
                format!(
                    "observation of {} references unknown frame {}",
                    o.object_id, o.frame_index
                ),
            ));
        }
    }
    Sequence::new(sequence_id, intrinsics, frames, observations)
}

pub fn parse_sequence_str(input: &str) -> Result<Sequence, SequenceError> {
    parse_sequence(input.as_bytes())
}

pub fn write_sequence<W: Write>(seq: &Sequence, mut out: W) -> std::io::Result<()> {
    let mut emit = |record: &Record| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")
    };
    emit(&Record::Header {
        sequence_id: seq.sequence_id().to_owned(),
        intrinsics: *seq.intrinsics(),
    })?;
    for f in seq.frames() {
        let t = f.pose.translation();
        emit(&Record::Frame {
            frame_index: f.frame_index,
            timestamp: f.timestamp,
            rotation: f.pose.rotation_row_major(),
            translation: [t.x, t.y, t.z],
        })?;
    }
    for o in seq.observations() {
        emit(&Record::Observation {
            object_id: o.object_id.clone(),
            frame_index: o.frame_index,
            foot_point: [o.foot_point.x, o.foot_point.y, o.foot_point.z],
        })?;
    }
    out.flush()
}

pub fn sequence_to_string(seq: &Sequence) -> String {
    let mut buf = Vec::new();
    write_sequence(seq, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
