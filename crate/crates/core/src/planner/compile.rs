use std::collections::BTreeSet;

use thiserror::Error;

use crate::nlu::{Command, CommandKind};
use crate::world::{LocationId, ObjectId, ObjectQuery, Placement, WorldEvent, WorldState};

use super::{availability, ActionKind, AtomicAction, Designator, Goal, IgnoreReason, Plan, PlannerConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unplannable ({reason}): {detail}")]
pub struct Unplannable {
    pub reason: IgnoreReason,
    pub detail: String,
}

impl Unplannable {
    fn new(reason: IgnoreReason, detail: impl Into<String>) -> Self {
        Self { reason, detail: detail.into() }
    }
}

/// Goals a fresh plan needs for `c`. A held object is put back first.
pub(crate) fn goals_for(c: &Command, w: &WorldState, cfg: &PlannerConfig) -> Result<Vec<Goal>, Unplannable> {
    let dest = c.destination.unwrap_or(cfg.default_destination);
    let mut goals = Vec::new();
    match c.kind {
        CommandKind::BringMe | CommandKind::ReplaceObject => {
            let add = c.add.ok_or_else(|| Unplannable::new(IgnoreReason::Malformed, "no object"))?;
            if let Some(reason) = availability(w, &add) {
                return Err(Unplannable::new(reason, format!("no {} to fetch", add.describe())));
            }
            goals.push(Goal::new(Designator::transport(add, dest)));
        }
        CommandKind::SettingBreakfast => {
            for t in &cfg.breakfast_set {
                let q = ObjectQuery::of_type(*t);
                if availability(w, &q).is_none() {
                    goals.push(Goal::new(Designator::transport(q, dest)));
                }
            }
            if goals.is_empty() {
                return Err(Unplannable::new(IgnoreReason::UnavailableObject, "no breakfast items"));
            }
        }
        k => return Err(Unplannable::new(IgnoreReason::Malformed, format!("cannot compile {k}"))),
    }
    Ok(goals)
}

/// Compiles a fresh plan for a `bring_me` or `setting_breakfast` command.
pub fn compile(c: &Command, w: &WorldState, cfg: &PlannerConfig) -> Result<Plan, Unplannable> {
    let mut goals = goals_for(c, w, cfg)?;
    if let Some(held) = w.robot.holding {
        goals.insert(0, Goal::new(Designator::put_back(w, held)));
    }
    let steps = expand(&goals, w, &BTreeSet::new(), cfg)?;
    Ok(Plan { goals, steps, cursor: 0, originating_command: c.clone() })
}

struct Expansion<'a> {
    sim: WorldState,
    opened: BTreeSet<LocationId>,
    steps: Vec<AtomicAction>,
    cfg: &'a PlannerConfig,
}

impl Expansion<'_> {
    fn push(&mut self, kind: ActionKind, loc: LocationId, object: Option<ObjectQuery>, goal: usize, ev: Option<WorldEvent>) -> Result<(), Unplannable> {
        if let Some(ev) = ev {
            self.sim
                .apply_event(ev)
                .map_err(|e| Unplannable::new(IgnoreReason::Malformed, e.to_string()))?;
        }
        self.steps.push(self.cfg.action(kind, Some(loc), object, goal));
        Ok(())
    }

    /// Navigates to `loc`, closing first whatever the plan opened here.
    fn go(&mut self, loc: LocationId, goal: usize) -> Result<(), Unplannable> {
        let here = self.sim.robot.base_location;
        if here != loc {
            self.close_if_opened(here, goal)?;
            self.push(ActionKind::Navigate, loc, None, goal, Some(WorldEvent::Navigate { to: loc }))?;
        }
        Ok(())
    }

    fn ensure_open(&mut self, loc: LocationId, goal: usize) -> Result<(), Unplannable> {
        if loc.is_container() && !self.sim.is_open(loc) {
            self.push(ActionKind::OpenContainer, loc, None, goal, Some(WorldEvent::Open { at: loc }))?;
            self.opened.insert(loc);
        }
        Ok(())
    }

    fn close_if_opened(&mut self, loc: LocationId, goal: usize) -> Result<(), Unplannable> {
        if self.opened.remove(&loc) {
            self.push(ActionKind::CloseContainer, loc, None, goal, Some(WorldEvent::Close { at: loc }))?;
        }
        Ok(())
    }

    fn put_back(&mut self, gi: usize, d: &Designator) -> Result<(), Unplannable> {
        let Some(id) = d.resolution else { return Ok(()) };
        if self.sim.robot.holding != Some(id) {
            return Ok(());
        }
        let origin = self
            .sim
            .object(id)
            .and_then(|o| o.origin)
            .unwrap_or(self.cfg.search_order[0]);
        self.go(origin, gi)?;
        self.ensure_open(origin, gi)?;
        self.push(ActionKind::ReturnObject, origin, Some(d.constraints), gi, Some(WorldEvent::Return { object: id }))?;
        self.close_if_opened(origin, gi)
    }

    fn transport(&mut self, gi: usize, goal: &Goal, claimed: &mut BTreeSet<ObjectId>) -> Result<(), Unplannable> {
        let d = &goal.designator;
        let dest = d.destination.unwrap_or(self.cfg.default_destination);
        let held = d.resolution.filter(|id| self.sim.robot.holding == Some(*id));
        let id = match held {
            Some(id) => id,
            None => {
                if self.sim.robot.holding.is_some() {
                    return Err(Unplannable::new(IgnoreReason::TooLate, "hand is occupied"));
                }
                let resolved_site = d
                    .resolution
                    .and_then(|id| self.sim.object(id))
                    .and_then(|o| match o.placement {
                        Placement::At(l) if l.is_storage() => Some((l, o.id)),
                        _ => None,
                    });
                let (site, id, visit) = match resolved_site {
                    Some((site, id)) => (site, id, vec![site]),
                    None => {
                        let order = match d.constraints.source_location {
                            Some(l) => vec![l],
                            None => self.cfg.search_order.clone(),
                        };
                        let found = order.iter().find_map(|&loc| {
                            self.sim
                                .objects_at(loc)
                                .find(|o| d.constraints.matches_spec(&o.spec) && !claimed.contains(&o.id))
                                .map(|o| (loc, o.id))
                        });
                        let Some((site, id)) = found else {
                            let reason = availability(&self.sim, &d.constraints).unwrap_or(IgnoreReason::CriteriaMismatch);
                            return Err(Unplannable::new(reason, format!("no {} left", d.constraints.describe())));
                        };
                        let upto = order.iter().position(|&l| l == site).unwrap_or(0);
                        let visit = order[..=upto]
                            .iter()
                            .copied()
                            .filter(|l| *l == site || !goal.searched.contains(l))
                            .collect();
                        (site, id, visit)
                    }
                };
                let unresolved = d.resolution.is_none();
                for loc in visit {
                    self.go(loc, gi)?;
                    self.ensure_open(loc, gi)?;
                    if unresolved {
                        self.push(ActionKind::Perceive, loc, Some(d.constraints), gi, None)?;
                    }
                }
                self.push(ActionKind::Grasp, site, Some(d.constraints), gi, Some(WorldEvent::Grasp { object: id }))?;
                self.close_if_opened(site, gi)?;
                id
            }
        };
        claimed.insert(id);
        self.go(dest, gi)?;
        self.push(ActionKind::Place, dest, Some(d.constraints), gi, Some(WorldEvent::Place { object: id, at: dest }))
    }
}

/// Expands the pending goals into atomic steps, starting from `world`.
/// `opened` lists containers the plan opened earlier and should close again.
/// Put-back goals run before anything else since they free the hand.
pub fn expand(
    goals: &[Goal],
    world: &WorldState,
    opened: &BTreeSet<LocationId>,
    cfg: &PlannerConfig,
) -> Result<Vec<AtomicAction>, Unplannable> {
    let mut ex = Expansion { sim: world.clone(), opened: opened.clone(), steps: Vec::new(), cfg };
    let mut claimed: BTreeSet<ObjectId> = goals
        .iter()
        .filter(|g| g.is_pending())
        .filter_map(|g| g.designator.resolution)
        .collect();
    let pending = goals.iter().enumerate().filter(|(_, g)| g.is_pending());
    let (returns, transports): (Vec<_>, Vec<_>) = pending.partition(|(_, g)| g.designator.is_return());
    for (gi, g) in returns {
        ex.put_back(gi, &g.designator)?;
    }
    for (gi, g) in transports {
        // The goal's own resolution must stay selectable for itself.
        if let Some(id) = g.designator.resolution {
            claimed.remove(&id);
        }
        ex.transport(gi, g, &mut claimed)?;
    }
    Ok(ex.steps)
}
