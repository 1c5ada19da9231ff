use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::events::TrialEvent;
use crate::nlu::{Command, CommandKind, SymbolicState};
use crate::world::{LocationId, ObjectId, ObjectQuery, WorldEvent, WorldState};

use super::compile::goals_for;
use super::{
    classify_ignored, compile, expand, monitor_retry, ActionKind, Designator, Disposition, Goal,
    GoalStatus, IgnoreReason, InterruptMsg, Plan, PlannerConfig, RetryDecision,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Executing,
    Stopped,
    Failed,
}

/// The step currently being carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InFlight {
    pub index: usize,
    pub remaining: u32,
}

/// Tick-driven plan executor with an interrupt client.
///
/// World events of a step are applied only when the step completes, so an
/// abandoned step leaves no trace in the world.
#[derive(Debug, Clone)]
pub struct Executor {
    cfg: PlannerConfig,
    mode: Mode,
    plan: Option<Plan>,
    current: Option<InFlight>,
    opened: BTreeSet<LocationId>,
    pending_minor: Vec<(Option<u64>, Command)>,
    retry_counts: BTreeMap<usize, u32>,
    delivered: Vec<ObjectId>,
}

impl Executor {
    pub fn new(cfg: PlannerConfig) -> Self {
        Self {
            cfg,
            mode: Mode::Idle,
            plan: None,
            current: None,
            opened: BTreeSet::new(),
            pending_minor: Vec::new(),
            retry_counts: BTreeMap::new(),
            delivered: Vec::new(),
        }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }

    pub fn current(&self) -> Option<InFlight> {
        self.current
    }

    pub fn pending_minor(&self) -> &[(Option<u64>, Command)] {
        &self.pending_minor
    }

    /// Objects placed at their destination since the last reset.
    pub fn delivered(&self) -> &[ObjectId] {
        &self.delivered
    }

    /// Whether the step in progress may be cut short.
    pub fn in_atomic_action(&self) -> bool {
        match (self.current, &self.plan) {
            (Some(c), Some(p)) => !p.steps[c.index].interruptable,
            _ => false,
        }
    }

    fn active_goals(&self) -> impl Iterator<Item = (usize, &Goal)> {
        let active = self.mode == Mode::Executing;
        self.plan
            .iter()
            .filter(move |_| active)
            .flat_map(|p| p.goals.iter().enumerate())
            .filter(|(_, g)| g.is_pending() && !g.designator.is_return())
    }

    pub fn has_pending_transport(&self) -> bool {
        self.active_goals().next().is_some()
    }

    /// Index of the first pending transport goal whose object `del` describes.
    pub fn pending_transport_matching(&self, del: &ObjectQuery, world: &WorldState) -> Option<usize> {
        self.active_goals()
            .find(|(_, g)| g.designator.refers_to(del, world))
            .map(|(i, _)| i)
    }

    /// Handles one command from the dialogue bridge.
    pub fn handle_command(&mut self, seq: Option<u64>, cmd: &Command, world: &WorldState) -> (Disposition, Vec<TrialEvent>) {
        let mut events = Vec::new();
        let disposition = if cmd.kind.is_major() && cmd.validate().is_ok() {
            self.stop(seq, &mut events);
            Disposition::Stopped
        } else if let Some(reason) = classify_ignored(cmd, world, self) {
            Disposition::Ignored(reason)
        } else if self.mode == Mode::Executing && self.in_atomic_action() {
            if let Some(pos) = self.pending_minor.iter().position(|(_, c)| c.kind == cmd.kind) {
                let (old_seq, old) = self.pending_minor.remove(pos);
                events.push(TrialEvent::Superseded { command_seq: old_seq, by: seq });
                events.push(disposition_event(old_seq, old.kind, Disposition::Ignored(IgnoreReason::TooLate)));
            }
            self.pending_minor.push((seq, cmd.clone()));
            Disposition::Queued
        } else {
            self.apply(seq, cmd, world, &mut events)
        };
        events.push(disposition_event(seq, cmd.kind, disposition));
        (disposition, events)
    }

    /// Handles a stop or reset arriving on the interrupt topic.
    pub fn interrupt(&mut self, msg: InterruptMsg) -> Vec<TrialEvent> {
        let mut events = Vec::new();
        match msg {
            InterruptMsg::Stop => self.stop(None, &mut events),
            InterruptMsg::Reset => self.reset(&mut events),
        }
        events
    }

    fn stop(&mut self, seq: Option<u64>, events: &mut Vec<TrialEvent>) {
        self.abandon_in_flight(events);
        self.drop_pending(events);
        self.mode = Mode::Stopped;
        events.push(TrialEvent::Stopped { command_seq: seq });
    }

    /// Leaves any mode for idle. Held objects stay held.
    pub fn reset(&mut self, events: &mut Vec<TrialEvent>) {
        self.abandon_in_flight(events);
        self.drop_pending(events);
        self.mode = Mode::Idle;
        self.plan = None;
        self.opened.clear();
        self.retry_counts.clear();
        self.delivered.clear();
        events.push(TrialEvent::Reset);
    }

    fn drop_pending(&mut self, events: &mut Vec<TrialEvent>) {
        for (seq, c) in self.pending_minor.drain(..) {
            events.push(disposition_event(seq, c.kind, Disposition::Ignored(IgnoreReason::TooLate)));
        }
    }

    fn abandon_in_flight(&mut self, events: &mut Vec<TrialEvent>) {
        if let (Some(c), Some(p)) = (self.current.take(), &self.plan) {
            events.push(TrialEvent::ActionAbandoned {
                index: c.index,
                kind: p.steps[c.index].kind,
                remaining_ticks: c.remaining,
            });
        }
    }

    fn apply(&mut self, seq: Option<u64>, cmd: &Command, world: &WorldState, events: &mut Vec<TrialEvent>) -> Disposition {
        if self.mode == Mode::Stopped {
            return Disposition::Ignored(IgnoreReason::TooLate);
        }
        let executing = self.mode == Mode::Executing && self.plan.is_some();
        if !executing {
            return match cmd.kind {
                CommandKind::BringMe | CommandKind::SettingBreakfast => self.start_plan(seq, cmd.clone(), world, events),
                CommandKind::ReplaceObject => {
                    let fetch = Command { delete: None, ..cmd.clone() };
                    let fetch = Command { kind: CommandKind::BringMe, ..fetch };
                    self.start_plan(seq, fetch, world, events)
                }
                _ => Disposition::Ignored(IgnoreReason::TooLate),
            };
        }
        let plan = self.plan.as_ref().expect("executing plan");
        let mut goals = plan.goals.clone();
        let default_dest = self.cfg.default_destination;
        match cmd.kind {
            CommandKind::BringMe | CommandKind::SettingBreakfast => match goals_for(cmd, world, &self.cfg) {
                Ok(extra) => goals.extend(extra),
                Err(u) => return Disposition::Ignored(u.reason),
            },
            CommandKind::ReplaceObject => {
                let target = match &cmd.delete {
                    Some(del) => self.pending_transport_matching(del, world),
                    None => self.active_goals().next().map(|(i, _)| i),
                };
                let mut dest = cmd.destination;
                if let Some(ti) = target {
                    let d = &goals[ti].designator;
                    dest = dest.or(d.destination);
                    let held = d.resolution.filter(|id| world.robot.holding == Some(*id));
                    goals[ti].status = GoalStatus::Dropped;
                    if let Some(id) = held {
                        goals.push(Goal::new(Designator::put_back(world, id)));
                    }
                }
                let add = cmd.add.expect("validated replace has add");
                goals.push(Goal::new(Designator::transport(add, dest.unwrap_or(default_dest))));
            }
            CommandKind::ChangeLocation => {
                let to = cmd.destination.expect("validated change_location has destination");
                for g in goals.iter_mut().filter(|g| g.is_pending() && !g.designator.is_return()) {
                    g.designator.destination = Some(to);
                }
            }
            CommandKind::Stop | CommandKind::Other => return Disposition::Ignored(IgnoreReason::Malformed),
        }
        match expand(&goals, world, &self.opened, &self.cfg) {
            Ok(steps) => {
                self.abandon_in_flight(events);
                let plan = self.plan.as_mut().expect("executing plan");
                plan.goals = goals;
                plan.steps.truncate(plan.cursor);
                plan.steps.extend(steps);
                events.push(TrialEvent::Replanned {
                    command_seq: seq,
                    goals: plan.goals.clone(),
                    steps: plan.remaining().to_vec(),
                });
                Disposition::Applied
            }
            Err(u) => Disposition::Ignored(u.reason),
        }
    }

    fn start_plan(&mut self, seq: Option<u64>, cmd: Command, world: &WorldState, events: &mut Vec<TrialEvent>) -> Disposition {
        match compile(&cmd, world, &self.cfg) {
            Ok(plan) => {
                events.push(TrialEvent::PlanStarted {
                    command_seq: seq,
                    goals: plan.goals.clone(),
                    steps: plan.steps.clone(),
                });
                self.plan = Some(plan);
                self.mode = Mode::Executing;
                self.current = None;
                self.opened.clear();
                self.retry_counts.clear();
                Disposition::Applied
            }
            Err(u) => Disposition::Ignored(u.reason),
        }
    }

    /// Advances the executor by one tick.
    pub fn tick<R: Rng + ?Sized>(&mut self, world: &mut WorldState, rng: &mut R) -> Vec<TrialEvent> {
        let mut events = Vec::new();
        if self.mode != Mode::Executing {
            return events;
        }
        if self.current.is_none() {
            let plan = self.plan.as_ref().expect("executing plan");
            if plan.cursor >= plan.steps.len() {
                self.finish(&mut events);
                return events;
            }
            let action = plan.steps[plan.cursor].clone();
            self.current = Some(InFlight { index: plan.cursor, remaining: action.duration_ticks });
            events.push(TrialEvent::ActionStarted {
                index: plan.cursor,
                action,
                from: world.robot.base_location,
            });
        }
        let cur = self.current.as_mut().expect("in-flight step");
        cur.remaining -= 1;
        if cur.remaining > 0 {
            return events;
        }
        self.current = None;
        self.complete_step(world, rng, &mut events);
        if self.mode != Mode::Executing {
            return events;
        }
        for (seq, cmd) in std::mem::take(&mut self.pending_minor) {
            let disposition = match classify_ignored(&cmd, world, self) {
                Some(reason) => Disposition::Ignored(reason),
                None => self.apply(seq, &cmd, world, &mut events),
            };
            events.push(disposition_event(seq, cmd.kind, disposition));
        }
        let plan = self.plan.as_ref().expect("executing plan");
        if self.mode == Mode::Executing && plan.cursor >= plan.steps.len() {
            self.finish(&mut events);
        }
        events
    }

    fn finish(&mut self, events: &mut Vec<TrialEvent>) {
        self.mode = Mode::Idle;
        events.push(TrialEvent::PlanCompleted);
    }

    fn fail(&mut self, reason: String, events: &mut Vec<TrialEvent>) {
        self.mode = Mode::Failed;
        self.drop_pending(events);
        events.push(TrialEvent::PlanFailed { reason });
    }

    fn complete_step<R: Rng + ?Sized>(&mut self, world: &mut WorldState, rng: &mut R, events: &mut Vec<TrialEvent>) {
        let plan = self.plan.as_mut().expect("executing plan");
        let index = plan.cursor;
        let action = plan.steps[index].clone();
        let gi = action.goal;
        let loc = action.location.expect("every step has a location");
        let resolution = plan.goals[gi].designator.resolution;
        let ev = match action.kind {
            ActionKind::Navigate => Some(WorldEvent::Navigate { to: loc }),
            ActionKind::OpenContainer => Some(WorldEvent::Open { at: loc }),
            ActionKind::CloseContainer => Some(WorldEvent::Close { at: loc }),
            ActionKind::Perceive => None,
            ActionKind::Grasp | ActionKind::Place | ActionKind::ReturnObject => {
                let Some(id) = resolution else {
                    self.fail(format!("{} without a resolved object", action.kind), events);
                    return;
                };
                match action.kind {
                    ActionKind::Grasp => Some(WorldEvent::Grasp { object: id }),
                    ActionKind::Place => Some(WorldEvent::Place { object: id, at: loc }),
                    _ => Some(WorldEvent::Return { object: id }),
                }
            }
        };

        if action.kind == ActionKind::Grasp {
            let failed = rng.random::<f64>() < self.cfg.p_grasp_fail;
            if failed {
                let failures = self.retry_counts.get(&gi).copied().unwrap_or(0) + 1;
                self.retry_counts.insert(gi, failures);
                plan.cursor += 1;
                events.push(TrialEvent::GraspFailed { index, failures });
                match monitor_retry(failures, self.cfg.max_retries) {
                    RetryDecision::RetryWithReperceive => {
                        let retry = [
                            self.cfg.action(ActionKind::Perceive, Some(loc), action.object, gi),
                            self.cfg.action(ActionKind::Grasp, Some(loc), action.object, gi),
                        ];
                        let at = plan.cursor;
                        plan.steps.splice(at..at, retry);
                        events.push(TrialEvent::Retry { index, failures });
                    }
                    RetryDecision::FailPlan => {
                        self.fail(format!("grasp failed {failures} times in a row"), events);
                    }
                }
                return;
            }
            self.retry_counts.remove(&gi);
        }

        if let Some(ev) = ev {
            if let Err(e) = world.apply_event(ev) {
                self.fail(e.to_string(), events);
                return;
            }
        }
        events.push(TrialEvent::ActionCompleted {
            index,
            kind: action.kind,
            world_events: ev.into_iter().collect(),
        });
        plan.cursor += 1;
        match action.kind {
            ActionKind::OpenContainer => {
                self.opened.insert(loc);
            }
            ActionKind::CloseContainer => {
                self.opened.remove(&loc);
            }
            ActionKind::Place => {
                plan.goals[gi].status = GoalStatus::Done;
                self.delivered.extend(resolution);
            }
            ActionKind::ReturnObject => plan.goals[gi].status = GoalStatus::Done,
            ActionKind::Perceive => {
                self.perceive(gi, loc, world);
                self.refresh(world, events);
            }
            _ => {}
        }
    }

    /// Fills or re-checks the goal's designator from what is at `loc`.
    fn perceive(&mut self, gi: usize, loc: LocationId, world: &WorldState) {
        let plan = self.plan.as_mut().expect("executing plan");
        let claimed: BTreeSet<ObjectId> = plan
            .goals
            .iter()
            .enumerate()
            .filter(|(i, g)| *i != gi && g.is_pending())
            .filter_map(|(_, g)| g.designator.resolution)
            .collect();
        let goal = &mut plan.goals[gi];
        if let Some(id) = goal.designator.resolution {
            if world.object(id).and_then(|o| o.placement.location()) == Some(loc) {
                return;
            }
            goal.designator.resolution = None;
        }
        let found = world
            .objects_at(loc)
            .find(|o| goal.designator.constraints.matches_spec(&o.spec) && !claimed.contains(&o.id))
            .map(|o| o.id);
        match found {
            Some(id) => goal.designator.resolve(id),
            None => {
                if !goal.searched.contains(&loc) {
                    goal.searched.push(loc);
                }
            }
        }
    }

    /// Rebuilds the remaining steps; logs a replan only if they changed.
    fn refresh(&mut self, world: &WorldState, events: &mut Vec<TrialEvent>) {
        let plan = self.plan.as_ref().expect("executing plan");
        match expand(&plan.goals, world, &self.opened, &self.cfg) {
            Ok(steps) if steps.as_slice() == plan.remaining() => {}
            Ok(steps) => {
                let plan = self.plan.as_mut().expect("executing plan");
                plan.steps.truncate(plan.cursor);
                plan.steps.extend(steps);
                events.push(TrialEvent::Replanned {
                    command_seq: None,
                    goals: plan.goals.clone(),
                    steps: plan.remaining().to_vec(),
                });
            }
            Err(u) => self.fail(u.to_string(), events),
        }
    }

    /// Current symbolic state for the dialogue bridge.
    pub fn symbolic_state(&self, world: &WorldState) -> SymbolicState {
        let here = Some(world.robot.base_location);
        let label = |s: &str| SymbolicState {
            step: s.into(),
            interruptable: true,
            move_arm: false,
            move_base: false,
            current_location: here,
            destination_location: None,
        };
        let plan = match (self.mode, &self.plan) {
            (Mode::Stopped, _) => return label("stopped"),
            (Mode::Failed, _) => return label("failed"),
            (Mode::Idle, _) | (_, None) => return label("idle"),
            (Mode::Executing, Some(p)) => p,
        };
        let index = self.current.map_or(plan.cursor, |c| c.index);
        let Some(action) = plan.steps.get(index) else { return label("idle") };
        let running = self.current.is_some();
        let goal_dest = plan.goals.get(action.goal).and_then(|g| g.designator.destination);
        SymbolicState {
            step: action.kind.as_str().into(),
            interruptable: !running || action.interruptable,
            move_arm: running && action.kind.moves_arm(),
            move_base: running && action.kind == ActionKind::Navigate,
            current_location: here,
            destination_location: if action.kind == ActionKind::Navigate { action.location } else { goal_dest },
        }
    }
}

fn disposition_event(seq: Option<u64>, kind: CommandKind, disposition: Disposition) -> TrialEvent {
    TrialEvent::Disposition { command_seq: seq, kind, disposition }
}
