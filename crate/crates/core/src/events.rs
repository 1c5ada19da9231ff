//! Events published on the `trial_event` topic.

use serde::{Deserialize, Serialize};

use crate::nlu::{CommandKind, ReplyAnomaly};
use crate::planner::{ActionKind, AtomicAction, Disposition, Goal};
use crate::world::{LocationId, WorldEvent, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TrialEvent {
    WorldSnapshot {
        label: String,
        world: WorldState,
    },
    Disposition {
        command_seq: Option<u64>,
        kind: CommandKind,
        disposition: Disposition,
    },
    PlanStarted {
        command_seq: Option<u64>,
        goals: Vec<Goal>,
        steps: Vec<AtomicAction>,
    },
    ActionStarted {
        index: usize,
        action: AtomicAction,
        from: LocationId,
    },
    ActionCompleted {
        index: usize,
        kind: ActionKind,
        world_events: Vec<WorldEvent>,
    },
    ActionAbandoned {
        index: usize,
        kind: ActionKind,
        remaining_ticks: u32,
    },
    /// The not-yet-executed part of the plan was rebuilt.
    Replanned {
        command_seq: Option<u64>,
        goals: Vec<Goal>,
        steps: Vec<AtomicAction>,
    },
    GraspFailed {
        index: usize,
        failures: u32,
    },
    Retry {
        index: usize,
        failures: u32,
    },
    PlanCompleted,
    PlanFailed {
        reason: String,
    },
    /// `command_seq` is absent when the stop came from the interrupt topic.
    Stopped {
        command_seq: Option<u64>,
    },
    Reset,
    Superseded {
        command_seq: Option<u64>,
        by: Option<u64>,
    },
    NluAnomaly {
        source_seq: u64,
        anomaly: ReplyAnomaly,
    },
    BackendError {
        source_seq: u64,
        message: String,
    },
    BackendExchange {
        source_seq: u64,
        request: String,
        reply: String,
    },
}
