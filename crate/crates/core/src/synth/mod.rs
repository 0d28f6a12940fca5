//! Procedural paired scenes (with and without target objects), their
//! ground-truth masks and naive remover outputs.

mod emit;
mod remover;
mod scene;

pub use emit::{emit_benchmark, scene_id, BenchmarkPlan, MANIFEST_NAME};
pub use remover::{apply_remover, Remover};
pub use scene::{
    generate_scene_pair, ScenePair, SceneSpec, Shape, BACKGROUND, OTHER_PALETTE, TARGET_PALETTE,
};
