//! One running pipeline: speech front end, dialogue bridge and planner on a
//! shared bus, advanced one tick at a time.
//!
//! Within a tick the order is fixed: speech, command routing, planner,
//! narration. Inputs published before [`Session::step`] are therefore seen in
//! the same tick.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bus::{Bus, Payload, Topic};
use crate::config::{BackendKind, RunConfig};
use crate::nlu::llm::ExternalBackend;
use crate::nlu::stub::StubBackend;
use crate::nlu::{BackendError, DialogueBridge, GrammarBackend, NluBackend};
use crate::planner::{Executor, InterruptMsg, PlannerNode};
use crate::speech::{AgeGroup, SpeechFrontEnd, UtteranceMsg};
use crate::world::WorldState;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Speech = 0,
    Planner = 1,
    Backend = 2,
    Script = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Builds the NLU backend selected in `cfg`.
pub fn make_backend(cfg: &RunConfig, seed: u64) -> Result<Box<dyn NluBackend>, BackendError> {
    Ok(match cfg.nlu.backend {
        BackendKind::Grammar => Box::new(GrammarBackend),
        BackendKind::Stub => Box::new(StubBackend::new(cfg.nlu.stub.clone(), stream_rng(seed, Stream::Backend))),
        BackendKind::External => Box::new(ExternalBackend::new(cfg.nlu.external.clone())?),
    })
}

pub struct Session {
    bus: Bus,
    speech: SpeechFrontEnd,
    bridge: DialogueBridge,
    planner: PlannerNode,
    speech_rng: ChaCha8Rng,
    tick: u64,
}

impl Session {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self, BackendError> {
        Ok(Self::with_backend(cfg, seed, make_backend(cfg, seed)?))
    }

    pub fn with_backend(cfg: &RunConfig, seed: u64, backend: Box<dyn NluBackend>) -> Self {
        Self::on_bus(Bus::new(), cfg, seed, backend)
    }

    /// Builds a session on an existing bus, so callers can subscribe first.
    pub fn on_bus(bus: Bus, cfg: &RunConfig, seed: u64, backend: Box<dyn NluBackend>) -> Self {
        let speech = SpeechFrontEnd::new(&bus, cfg.noise.clone(), cfg.age_noise.clone());
        let bridge = DialogueBridge::new(
            &bus,
            backend,
            cfg.verbosity.clone(),
            cfg.nlu.route.clone(),
            cfg.nlu.log_exchanges,
        );
        let planner = PlannerNode::new(&bus, cfg.world.build(), cfg.planner.clone(), stream_rng(seed, Stream::Planner));
        Self { speech, bridge, planner, speech_rng: stream_rng(seed, Stream::Speech), tick: bus.tick(), bus }
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    /// The tick the next [`Session::step`] will run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn world(&self) -> &WorldState {
        self.planner.world()
    }

    pub fn executor(&self) -> &Executor {
        self.planner.executor()
    }

    pub fn bridge(&self) -> &DialogueBridge {
        &self.bridge
    }

    /// Publishes a user line for the current tick; returns its seq.
    pub fn say(&self, text: &str, true_age: AgeGroup, attempt: u32) -> u64 {
        let msg = UtteranceMsg { text: text.to_string(), true_age, attempt };
        self.bus.publish(Topic::UtteranceIn, Payload::Utterance(msg)).expect("utterance topic")
    }

    pub fn interrupt(&self, msg: InterruptMsg) -> u64 {
        self.bus.publish(Topic::Interrupt, Payload::Interrupt(msg)).expect("interrupt topic")
    }

    pub fn snapshot(&self, label: &str) {
        self.planner.publish_snapshot(&self.bus, label);
    }

    pub fn step(&mut self) {
        self.bus.set_tick(self.tick).expect("session owns the tick");
        self.speech.step(&self.bus, &mut self.speech_rng);
        self.bridge.step_route(&self.bus);
        self.planner.step(&self.bus);
        self.bridge.step_narrate(&self.bus);
        self.tick += 1;
        self.bus.set_tick(self.tick).expect("session owns the tick");
    }
}
