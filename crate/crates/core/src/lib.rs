//! Hidden-footprint propagation: reproject pedestrian foot points observed
//! anywhere in a posed camera sequence into every frame, splat them onto a
//! label grid, and score walkability predictions against the result.

pub mod evaluation;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod losses;
pub mod propagation;
pub mod sequence;
pub mod synth;

pub use evaluation::{EvalError, MetricsReport};
pub use geometry::{CameraIntrinsics, Pixel, Point3, RigidTransform, Vec3};
pub use grid::{BinaryMap, Cell, Grid, ScoreMap};
pub use io::IoError;
pub use losses::LossError;
pub use propagation::{DirectionMap, FootprintMap, PropagationError, PropagationParams, SkipCounts};
pub use sequence::{Frame, PersonObservation, Sequence, SequenceError};
pub use synth::{GroundTruthMask, SceneSpec, SynthError};
