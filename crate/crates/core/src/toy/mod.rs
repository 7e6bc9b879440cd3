//! Deterministic tabletop world and a toy attention policy.
//!
//! The scene is a flat table seen by a pinhole camera, with colored blocks
//! aligned to the policy's patch grid. The instruction names the target
//! color; success means bringing the end-effector within
//! [`SUCCESS_RADIUS`] of the target block.

mod env;
mod policy;
mod scene;
mod suite;

pub use env::{env_step, reached, EnvConfig, ExecutionMode, ToyEnv, SUCCESS_RADIUS};
pub use policy::{
    chroma, patch_embeddings, plan_chunk, toy_policy_step, PolicyOutput, ToyPolicy, ToyPolicyConfig, MATCH_LAYER,
    NUM_LAYERS, READOUT_LAYER,
};
pub use scene::{
    cell_bounds, cell_world, color_token, parse_color_token, render, SceneObject, SceneSpec, ToyState, Workspace,
    MARKER_COLOR, MARKER_SIZE, NAMED_COLORS, TABLE_LEVEL, TABLE_NORMAL_AXIS,
};
pub use suite::{
    default_camera, designed_scene, generate_scene, generate_suite, hue_color, SuiteParams, DEFAULT_GRID, DEFAULT_SIZE,
    EEF_START, TABLE_COLOR,
};

use crate::error::Result;

/// Policy wired to a scene's camera and grid.
pub fn policy_for(scene: &SceneSpec, config: &ToyPolicyConfig) -> Result<ToyPolicy> {
    ToyPolicy::new(config.clone(), scene.camera.clone(), scene.grid_shape())
}
