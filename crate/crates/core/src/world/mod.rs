//! Deterministic tick-driven tabletop simulation and synthetic perception.
//!
//! Frame convention: x to the right, y away from the camera, z up, meters.

mod camera;
mod motion;
mod observe;
mod scene;
mod scene_graph;
mod state;

pub use camera::{pixel_to_real, project, Camera, CameraError, CameraIntrinsics, Extrinsic, PixelCoord, WorldPoint};
pub use motion::{apply_effect, apply_tool, Motion, MotionStep};
pub use observe::{synth_observation, NoiseModel, Observation};
pub use scene::{bundled_scene, spawn_random, spawn_scene, ObjectSpec, SceneError, SceneSpec, BUNDLED_SCENES};
pub use scene_graph::{
    derive_scene_graph, graph_from_footprints, metric_relations, Footprint, Relation, SceneGraph,
    SpatialPredicate, DEFAULT_TOLERANCE,
};
pub use state::{
    is_container_class, named_location, ArmLocation, RobotState, Support, WorldObject, WorldState,
    CONTAINER_CLASSES, DEFAULT_TICK_MS, NAMED_LOCATIONS, TABLE_X, TABLE_Y,
};
