//! Designator-based plan compiler and tick-driven executor.
//!
//! A plan keeps its goals (designators) separately from the atomic steps they
//! expand to. Any change to the goals, or any surprise at runtime, rebuilds the
//! not-yet-executed steps from the goals and the current world, so completed
//! steps are never re-run.

mod compile;
mod executor;
mod node;

pub use compile::{compile, expand, Unplannable};
pub use executor::{Executor, InFlight, Mode};
pub use node::PlannerNode;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::nlu::{Command, CommandKind};
use crate::world::{LocationId, ObjectId, ObjectQuery, ObjectType, Placement, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Navigate,
    OpenContainer,
    CloseContainer,
    Perceive,
    Grasp,
    Place,
    ReturnObject,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::Navigate,
        ActionKind::OpenContainer,
        ActionKind::CloseContainer,
        ActionKind::Perceive,
        ActionKind::Grasp,
        ActionKind::Place,
        ActionKind::ReturnObject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Navigate => "navigate",
            ActionKind::OpenContainer => "open_container",
            ActionKind::CloseContainer => "close_container",
            ActionKind::Perceive => "perceive",
            ActionKind::Grasp => "grasp",
            ActionKind::Place => "place",
            ActionKind::ReturnObject => "return_object",
        }
    }

    pub fn moves_arm(self) -> bool {
        matches!(self, ActionKind::Grasp | ActionKind::Place | ActionKind::ReturnObject)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicAction {
    pub kind: ActionKind,
    /// Navigation target, container, perception site or placement target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectQuery>,
    /// Index of the goal this step serves.
    pub goal: usize,
    pub interruptable: bool,
    pub duration_ticks: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignatorType {
    Transport,
    Search,
    Open,
    Close,
    Place,
}

/// Symbolic action description; `resolution` is filled by perception.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Designator {
    pub action_type: DesignatorType,
    pub constraints: ObjectQuery,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<LocationId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ObjectId>,
}

impl Designator {
    pub fn transport(constraints: ObjectQuery, destination: LocationId) -> Self {
        Self {
            action_type: DesignatorType::Transport,
            constraints,
            destination: Some(destination),
            resolution: None,
        }
    }

    /// Put a held object back where it was grasped.
    pub fn put_back(world: &WorldState, object: ObjectId) -> Self {
        let spec = world.object(object).map(|o| o.spec);
        Self {
            action_type: DesignatorType::Place,
            constraints: ObjectQuery {
                object_type: spec.map(|s| s.object_type),
                color: spec.map(|s| s.color),
                size: spec.map(|s| s.size),
                source_location: None,
            },
            destination: None,
            resolution: Some(object),
        }
    }

    pub fn resolve(&mut self, id: ObjectId) {
        self.resolution = Some(id);
    }

    pub fn is_return(&self) -> bool {
        self.action_type == DesignatorType::Place
    }

    /// Whether a delete query refers to this designator's object.
    pub fn refers_to(&self, q: &ObjectQuery, world: &WorldState) -> bool {
        if let Some(obj) = self.resolution.and_then(|id| world.object(id)) {
            return q.matches_spec(&obj.spec);
        }
        let c = &self.constraints;
        agree(q.object_type, c.object_type) && agree(q.color, c.color) && agree(q.size, c.size)
    }
}

fn agree<T: PartialEq>(a: Option<T>, b: Option<T>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a == b,
        (Some(_), None) => false,
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Pending,
    Done,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub designator: Designator,
    pub status: GoalStatus,
    /// Storage locations already searched without a match.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub searched: Vec<LocationId>,
}

impl Goal {
    pub fn new(designator: Designator) -> Self {
        Self { designator, status: GoalStatus::Pending, searched: Vec::new() }
    }

    pub fn is_pending(&self) -> bool {
        self.status == GoalStatus::Pending
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub goals: Vec<Goal>,
    pub steps: Vec<AtomicAction>,
    pub cursor: usize,
    pub originating_command: Command,
}

impl Plan {
    pub fn remaining(&self) -> &[AtomicAction] {
        &self.steps[self.cursor..]
    }

    pub fn total_ticks(&self) -> u64 {
        self.steps.iter().map(|s| u64::from(s.duration_ticks)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgnoreReason {
    ClassifiedOther,
    UnknownCommandType,
    UnavailableObject,
    CriteriaMismatch,
    TooLate,
    Malformed,
}

impl IgnoreReason {
    pub const ALL: [IgnoreReason; 6] = [
        IgnoreReason::Malformed,
        IgnoreReason::ClassifiedOther,
        IgnoreReason::UnknownCommandType,
        IgnoreReason::UnavailableObject,
        IgnoreReason::CriteriaMismatch,
        IgnoreReason::TooLate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IgnoreReason::ClassifiedOther => "classified_other",
            IgnoreReason::UnknownCommandType => "unknown_command_type",
            IgnoreReason::UnavailableObject => "unavailable_object",
            IgnoreReason::CriteriaMismatch => "criteria_mismatch",
            IgnoreReason::TooLate => "too_late",
            IgnoreReason::Malformed => "malformed",
        }
    }
}

impl fmt::Display for IgnoreReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Disposition {
    Applied,
    Queued,
    Ignored(IgnoreReason),
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptMsg {
    Stop,
    Reset,
}

/// One value per atomic action kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerAction<T> {
    pub navigate: T,
    pub open_container: T,
    pub close_container: T,
    pub perceive: T,
    pub grasp: T,
    pub place: T,
    pub return_object: T,
}

impl<T: Copy> PerAction<T> {
    pub fn get(&self, kind: ActionKind) -> T {
        match kind {
            ActionKind::Navigate => self.navigate,
            ActionKind::OpenContainer => self.open_container,
            ActionKind::CloseContainer => self.close_container,
            ActionKind::Perceive => self.perceive,
            ActionKind::Grasp => self.grasp,
            ActionKind::Place => self.place,
            ActionKind::ReturnObject => self.return_object,
        }
    }
}

impl Default for PerAction<u32> {
    fn default() -> Self {
        Self {
            navigate: 3,
            open_container: 2,
            close_container: 2,
            perceive: 1,
            grasp: 2,
            place: 2,
            return_object: 2,
        }
    }
}

impl Default for PerAction<bool> {
    fn default() -> Self {
        Self {
            navigate: true,
            open_container: false,
            close_container: false,
            perceive: true,
            grasp: false,
            place: false,
            return_object: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub durations: PerAction<u32>,
    pub interruptable: PerAction<bool>,
    pub max_retries: u32,
    pub p_grasp_fail: f64,
    pub search_order: Vec<LocationId>,
    pub breakfast_set: Vec<ObjectType>,
    pub default_destination: LocationId,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            durations: PerAction::default(),
            interruptable: PerAction::default(),
            max_retries: 2,
            p_grasp_fail: 0.0,
            search_order: vec![LocationId::Countertop, LocationId::Cabinet, LocationId::Dishwasher],
            breakfast_set: vec![ObjectType::Bowl, ObjectType::Cereal, ObjectType::Milk, ObjectType::Spoon],
            default_destination: LocationId::Table,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if ActionKind::ALL.iter().any(|&k| self.durations.get(k) == 0) {
            return Err("action durations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p_grasp_fail) {
            return Err("p_grasp_fail must be a probability".into());
        }
        if self.search_order.is_empty() || self.search_order.iter().any(|l| !l.is_storage()) {
            return Err("search_order must list storage locations".into());
        }
        if !self.default_destination.is_placement() {
            return Err("default_destination must be a placement target".into());
        }
        Ok(())
    }

    pub fn action(&self, kind: ActionKind, location: Option<LocationId>, object: Option<ObjectQuery>, goal: usize) -> AtomicAction {
        AtomicAction {
            kind,
            location,
            object,
            goal,
            interruptable: self.interruptable.get(kind),
            duration_ticks: self.durations.get(kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetryDecision {
    RetryWithReperceive,
    FailPlan,
}

/// Recovery after a failed grasp. `failures` counts consecutive failures
/// including the one just observed.
pub fn monitor_retry(failures: u32, max_retries: u32) -> RetryDecision {
    if failures <= max_retries {
        RetryDecision::RetryWithReperceive
    } else {
        RetryDecision::FailPlan
    }
}

/// Objects the robot may still fetch: those resting at storage locations.
pub(crate) fn fetchable<'w>(world: &'w WorldState, q: &ObjectQuery) -> Vec<&'w crate::world::ObjectInstance> {
    world
        .find_objects(q)
        .into_iter()
        .filter(|o| matches!(o.placement, Placement::At(l) if l.is_storage()))
        .collect()
}

/// Why a requested object cannot be fetched, if it cannot.
pub fn availability(world: &WorldState, q: &ObjectQuery) -> Option<IgnoreReason> {
    if !fetchable(world, q).is_empty() {
        return None;
    }
    let by_type = q.object_type.map(ObjectQuery::of_type);
    match by_type {
        Some(t) if fetchable(world, &t).is_empty() => Some(IgnoreReason::UnavailableObject),
        _ => Some(IgnoreReason::CriteriaMismatch),
    }
}

/// Reason a command will not be executed, or `None` if it is executable.
pub fn classify_ignored(c: &Command, world: &WorldState, x: &Executor) -> Option<IgnoreReason> {
    if c.validate().is_err() {
        return Some(IgnoreReason::Malformed);
    }
    match c.kind {
        CommandKind::Other if c.unrecognized_kind.is_none() => return Some(IgnoreReason::ClassifiedOther),
        CommandKind::Other => return Some(IgnoreReason::UnknownCommandType),
        CommandKind::Stop => return None,
        _ => {}
    }
    if c.kind == CommandKind::SettingBreakfast {
        let cfg = x.config();
        let any = cfg
            .breakfast_set
            .iter()
            .any(|t| availability(world, &ObjectQuery::of_type(*t)).is_none());
        if !any {
            return Some(IgnoreReason::UnavailableObject);
        }
    }
    if let Some(add) = &c.add {
        if let Some(reason) = availability(world, add) {
            return Some(reason);
        }
    }
    if x.mode() == Mode::Stopped {
        return Some(IgnoreReason::TooLate);
    }
    match c.kind {
        CommandKind::ReplaceObject => {
            let Some(del) = &c.delete else { return None };
            let active = x.pending_transport_matching(del, world).is_some();
            let delivered = x
                .delivered()
                .iter()
                .filter_map(|id| world.object(*id))
                .any(|o| del.matches_spec(&o.spec));
            (!active && delivered).then_some(IgnoreReason::TooLate)
        }
        CommandKind::ChangeLocation => {
            (!x.has_pending_transport()).then_some(IgnoreReason::TooLate)
        }
        _ => None,
    }
}
