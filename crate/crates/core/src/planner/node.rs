use rand_chacha::ChaCha8Rng;

use crate::bus::{Bus, Payload, Subscription, Topic};
use crate::events::TrialEvent;
use crate::world::WorldState;

use super::{Executor, PlannerConfig};

/// Bus node owning the executor and the world it acts on.
pub struct PlannerNode {
    executor: Executor,
    world: WorldState,
    rng: ChaCha8Rng,
    inbox: Subscription,
}

impl PlannerNode {
    pub fn new(bus: &Bus, world: WorldState, cfg: PlannerConfig, rng: ChaCha8Rng) -> Self {
        Self {
            executor: Executor::new(cfg),
            world,
            rng,
            inbox: bus.subscribe(&[Topic::Command, Topic::Interrupt]),
        }
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    /// Applies pending commands and interrupts in bus order, advances one
    /// tick, then publishes the resulting events and the symbolic state.
    pub fn step(&mut self, bus: &Bus) {
        let mut events = Vec::new();
        for env in bus.drain(&self.inbox) {
            match env.payload {
                Payload::Command(msg) => {
                    let (_, evs) = self.executor.handle_command(Some(env.seq), &msg.command, &self.world);
                    events.extend(evs);
                }
                Payload::Interrupt(msg) => events.extend(self.executor.interrupt(msg)),
                _ => {}
            }
        }
        events.extend(self.executor.tick(&mut self.world, &mut self.rng));
        for ev in events {
            bus.publish(Topic::TrialEvent, Payload::TrialEvent(ev)).expect("trial_event topic");
        }
        self.publish_state(bus);
    }

    pub fn publish_state(&self, bus: &Bus) {
        let state = self.executor.symbolic_state(&self.world);
        bus.publish(Topic::RobotState, Payload::RobotState(state)).expect("robot_state topic");
    }

    pub fn publish_snapshot(&self, bus: &Bus, label: &str) {
        let ev = TrialEvent::WorldSnapshot { label: label.into(), world: self.world.clone() };
        bus.publish(Topic::TrialEvent, Payload::TrialEvent(ev)).expect("trial_event topic");
    }
}
