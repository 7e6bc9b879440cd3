use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scene::{render, SceneSpec, ToyState};
use crate::error::{AtaError, Result};
use crate::roi::{CameraModel, EefPose};
use crate::scheduler::{Action, ActionChunk, Environment, Observation, RobotState};

/// Distance to the target below which the task counts as solved, meters.
pub const SUCCESS_RADIUS: f64 = 0.02;

/// How much of a predicted chunk runs per inference step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// Every action of the chunk, stopping early on success.
    #[default]
    Chunk,
    /// Only the first action.
    ClosedLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub execution: ExecutionMode,
}

/// Applies one action. The step index is left to the caller.
pub fn env_step(scene: &SceneSpec, state: &ToyState, action: &Action) -> Result<(ToyState, bool)> {
    if !action.is_finite() {
        return Err(AtaError::contract(format!("non-finite action {action:?}")));
    }
    let moved = std::array::from_fn(|i| state.eef[i] + action.dx[i]);
    let next = ToyState {
        eef: scene.workspace.clamp(moved),
        grip: (state.grip + action.dgrip).clamp(0.0, 1.0),
        step: state.step,
    };
    let success = reached(scene, &next)?;
    Ok((next, success))
}

pub fn reached(scene: &SceneSpec, state: &ToyState) -> Result<bool> {
    let target = scene.target_world()?;
    Ok((Vector3::from(state.eef) - target).norm() < SUCCESS_RADIUS)
}

/// Single-owner episode state over one scene.
#[derive(Debug, Clone)]
pub struct ToyEnv {
    scene: SceneSpec,
    config: EnvConfig,
    state: ToyState,
    actions_executed: usize,
}

impl ToyEnv {
    pub fn new(scene: SceneSpec, config: EnvConfig) -> Result<Self> {
        scene.validate()?;
        scene.target_world()?;
        let state = ToyState::start(&scene);
        Ok(Self {
            scene,
            config,
            state,
            actions_executed: 0,
        })
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    pub fn state(&self) -> &ToyState {
        &self.state
    }

    /// Individual actions applied so far, over all inference steps.
    pub fn actions_executed(&self) -> usize {
        self.actions_executed
    }

    pub fn reset(&mut self) {
        self.state = ToyState::start(&self.scene);
        self.actions_executed = 0;
    }
}

impl Environment for ToyEnv {
    fn observe(&mut self) -> Result<Observation> {
        Ok(Observation {
            image: render(&self.scene, &self.state),
            state: RobotState {
                pose: EefPose {
                    position: self.state.eef,
                    orientation: self.scene.eef_orientation,
                },
                grip: self.state.grip,
            },
        })
    }

    fn step(&mut self, chunk: &ActionChunk) -> Result<bool> {
        chunk.validate()?;
        let run = match self.config.execution {
            ExecutionMode::Chunk => &chunk.actions[..],
            ExecutionMode::ClosedLoop => &chunk.actions[..1],
        };
        let mut success = false;
        for action in run {
            let (next, done) = env_step(&self.scene, &self.state, action)?;
            self.state = next;
            self.actions_executed += 1;
            if done {
                success = true;
                break;
            }
        }
        self.state.step += 1;
        Ok(success)
    }

    fn camera(&self) -> &CameraModel {
        &self.scene.camera
    }
}
