//! Workloads shared by the benchmarks.

use footprint_core::propagation::PropagationParams;
use footprint_core::synth::{generate_scene, SceneSpec};
use footprint_core::Sequence;

/// 200 frames and 50 pedestrians at 640×480, labelled on the default 160×120 grid.
pub fn throughput_sequence() -> (Sequence, PropagationParams) {
    let params = PropagationParams::default();
    let (seq, _) = generate_scene(&SceneSpec::throughput(), &params).expect("throughput scene is valid");
    (seq, params)
}

/// The first `n` frames of the throughput scene.
pub fn prefix(seq: &Sequence, n: usize) -> Sequence {
    let keep: Vec<u32> = seq.frames().iter().take(n).map(|f| f.frame_index).collect();
    seq.restricted_to_frames(&keep).expect("prefix frames exist")
}
