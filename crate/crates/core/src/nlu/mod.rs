//! Dialogue bridge: `(utterance, symbolic state, age) -> (response, command)`.
//!
//! Command extraction is delegated to an [`NluBackend`]. The default backend is
//! the offline [`grammar`]; [`llm::ExternalBackend`] talks to a chat-completion
//! endpoint and [`stub::StubBackend`] reproduces an LLM's confusion rates
//! locally. Responses always come from the fixed templates in [`respond`].

pub mod grammar;
pub mod llm;
pub mod respond;
pub mod stub;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Bus, Payload, Subscription, Topic};
use crate::events::TrialEvent;
use crate::speech::{BinaryAge, Transcript};
use crate::world::{LocationId, ObjectQuery};

pub use grammar::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    BringMe,
    SettingBreakfast,
    ReplaceObject,
    ChangeLocation,
    Stop,
    Other,
}

impl CommandKind {
    pub const ALL: [CommandKind; 6] = [
        CommandKind::BringMe,
        CommandKind::SettingBreakfast,
        CommandKind::ReplaceObject,
        CommandKind::ChangeLocation,
        CommandKind::Stop,
        CommandKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::BringMe => "bring_me",
            CommandKind::SettingBreakfast => "setting_breakfast",
            CommandKind::ReplaceObject => "replace_object",
            CommandKind::ChangeLocation => "change_location",
            CommandKind::Stop => "stop",
            CommandKind::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_major(self) -> bool {
        self == CommandKind::Stop
    }

    pub fn is_minor(self) -> bool {
        !matches!(self, CommandKind::Stop | CommandKind::Other)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A command (C) with its target properties (P).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub kind: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub add: Option<ObjectQuery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delete: Option<ObjectQuery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<LocationId>,
    /// Set when a backend named a command outside the known set; `kind` is then `other`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unrecognized_kind: Option<String>,
}

impl Command {
    pub fn bare(kind: CommandKind) -> Self {
        Self { kind, add: None, delete: None, destination: None, unrecognized_kind: None }
    }

    pub fn bring_me(add: ObjectQuery) -> Self {
        Self { add: Some(add), ..Self::bare(CommandKind::BringMe) }
    }

    pub fn replace(add: ObjectQuery, delete: ObjectQuery) -> Self {
        Self { add: Some(add), delete: Some(delete), ..Self::bare(CommandKind::ReplaceObject) }
    }

    pub fn change_location(to: LocationId) -> Self {
        Self { destination: Some(to), ..Self::bare(CommandKind::ChangeLocation) }
    }

    /// Checks the structural invariants of each kind.
    pub fn validate(&self) -> Result<(), String> {
        for (name, q) in [("add", &self.add), ("delete", &self.delete)] {
            if q.is_some_and(|q| !q.is_well_formed()) {
                return Err(format!("empty {name} query"));
            }
        }
        if self.destination.is_some_and(|d| !d.is_placement()) {
            return Err("destination must be a placement target".into());
        }
        match self.kind {
            CommandKind::BringMe | CommandKind::ReplaceObject if self.add.is_none() => {
                Err(format!("{} requires an object", self.kind))
            }
            CommandKind::BringMe if self.delete.is_some() => Err("bring_me cannot delete".into()),
            CommandKind::ChangeLocation if self.destination.is_none() => {
                Err("change_location requires a destination".into())
            }
            CommandKind::ChangeLocation | CommandKind::SettingBreakfast
                if self.add.is_some() || self.delete.is_some() =>
            {
                Err(format!("{} carries no objects", self.kind))
            }
            CommandKind::Stop | CommandKind::Other
                if self.add.is_some() || self.delete.is_some() || self.destination.is_some() =>
            {
                Err(format!("{} carries no slots", self.kind))
            }
            _ => Ok(()),
        }
    }
}

/// Robot state as published by the planner every tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicState {
    pub step: String,
    pub interruptable: bool,
    pub move_arm: bool,
    pub move_base: bool,
    pub current_location: Option<LocationId>,
    pub destination_location: Option<LocationId>,
}

impl SymbolicState {
    pub fn idle(at: LocationId) -> Self {
        Self {
            step: "idle".into(),
            interruptable: true,
            move_arm: false,
            move_base: false,
            current_location: Some(at),
            destination_location: None,
        }
    }

    pub fn is_busy(&self) -> bool {
        !matches!(self.step.as_str(), "idle" | "stopped" | "failed")
    }
}

impl Default for SymbolicState {
    fn default() -> Self {
        Self {
            step: "idle".into(),
            interruptable: true,
            move_arm: false,
            move_base: false,
            current_location: None,
            destination_location: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseCategory {
    Confirmation,
    Narration,
    Refusal,
    Completion,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub text: String,
    pub category: ResponseCategory,
}

impl Response {
    pub fn new(category: ResponseCategory, text: impl Into<String>) -> Self {
        Self { text: text.into(), category }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Confirmations,
    Narrate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbosityPolicy(pub BTreeMap<BinaryAge, Verbosity>);

impl Default for VerbosityPolicy {
    fn default() -> Self {
        Self(
            [(BinaryAge::Young, Verbosity::Confirmations), (BinaryAge::Old, Verbosity::Narrate)]
                .into(),
        )
    }
}

impl VerbosityPolicy {
    pub fn level(&self, age: BinaryAge) -> Verbosity {
        self.0.get(&age).copied().unwrap_or(Verbosity::Confirmations)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueContext {
    pub last_add: Option<ObjectQuery>,
    pub age: BinaryAge,
    pub turns: u64,
    pub commands_forwarded: u64,
}

impl Default for DialogueContext {
    fn default() -> Self {
        Self { last_add: None, age: BinaryAge::Young, turns: 0, commands_forwarded: 0 }
    }
}

impl DialogueContext {
    pub fn record(&mut self, cmd: &Command) {
        self.turns += 1;
        if cmd.validate().is_err() {
            return;
        }
        match cmd.kind {
            CommandKind::BringMe | CommandKind::ReplaceObject => self.last_add = cmd.add,
            CommandKind::SettingBreakfast => self.last_add = None,
            _ => {}
        }
    }
}

/// Problems in a backend reply that were absorbed rather than raised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyAnomaly {
    /// The reply did not follow the command schema; degraded to `other`.
    MalformedReply,
    /// A replacement came back as two objects to fetch.
    DoubleFetch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub command: Command,
    pub anomaly: Option<ReplyAnomaly>,
    /// Request and reply bodies, when the backend exchanged any.
    pub exchange: Option<(String, String)>,
}

impl Extraction {
    pub fn plain(command: Command) -> Self {
        Self { command, anomaly: None, exchange: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

pub trait NluBackend: Send {
    fn name(&self) -> &str;

    fn extract(
        &mut self,
        transcript: &Transcript,
        state: &SymbolicState,
        ctx: &DialogueContext,
    ) -> Result<Extraction, BackendError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GrammarBackend;

impl NluBackend for GrammarBackend {
    fn name(&self) -> &str {
        "grammar"
    }

    fn extract(
        &mut self,
        transcript: &Transcript,
        _state: &SymbolicState,
        ctx: &DialogueContext,
    ) -> Result<Extraction, BackendError> {
        Ok(Extraction::plain(parse(&transcript.text, ctx)))
    }
}

/// Settings for [`route`] beyond the backend itself.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RouteSettings {
    /// Drop `other` commands instead of forwarding them to the planner.
    pub prefilter: bool,
    /// Ask the user to repeat when transcript confidence is below this value.
    pub reask_below: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteOutcome {
    pub response: Response,
    pub command: Command,
    pub anomaly: Option<ReplyAnomaly>,
    pub exchange: Option<(String, String)>,
    pub backend_error: Option<String>,
}

/// One dialogue turn. Always yields exactly one response and one command.
pub fn route(
    backend: &mut dyn NluBackend,
    transcript: &Transcript,
    state: &SymbolicState,
    ctx: &mut DialogueContext,
    settings: &RouteSettings,
) -> RouteOutcome {
    if settings.reask_below.is_some_and(|th| transcript.confidence < th) {
        ctx.turns += 1;
        return RouteOutcome {
            response: respond::reask(),
            command: Command::bare(CommandKind::Other),
            anomaly: None,
            exchange: None,
            backend_error: None,
        };
    }
    match backend.extract(transcript, state, ctx) {
        Ok(ex) => {
            let response = respond::acknowledge(&ex.command, &transcript.text, state, ctx.age);
            ctx.record(&ex.command);
            RouteOutcome {
                response,
                command: ex.command,
                anomaly: ex.anomaly,
                exchange: ex.exchange,
                backend_error: None,
            }
        }
        Err(e) => {
            ctx.turns += 1;
            RouteOutcome {
                response: respond::backend_error(),
                command: Command::bare(CommandKind::Other),
                anomaly: None,
                exchange: None,
                backend_error: Some(e.to_string()),
            }
        }
    }
}

pub use respond::narrate;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandMsg {
    /// Sequence number of the utterance this command was extracted from.
    pub in_reply_to: Option<u64>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseMsg {
    #[serde(flatten)]
    pub response: Response,
    pub in_reply_to: Option<u64>,
    /// The command this response acknowledges, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo: Option<Command>,
}

/// Bus node wrapping a backend.
pub struct DialogueBridge {
    backend: Box<dyn NluBackend>,
    ctx: DialogueContext,
    policy: VerbosityPolicy,
    settings: RouteSettings,
    log_exchanges: bool,
    latest_state: SymbolicState,
    transcripts: Subscription,
    states: Subscription,
    events: Subscription,
}

impl DialogueBridge {
    pub fn new(
        bus: &Bus,
        backend: Box<dyn NluBackend>,
        policy: VerbosityPolicy,
        settings: RouteSettings,
        log_exchanges: bool,
    ) -> Self {
        Self {
            backend,
            ctx: DialogueContext::default(),
            policy,
            settings,
            log_exchanges,
            latest_state: SymbolicState::default(),
            transcripts: bus.subscribe(&[Topic::Transcript]),
            states: bus.subscribe(&[Topic::RobotState]),
            events: bus.subscribe(&[Topic::TrialEvent]),
        }
    }

    pub fn context(&self) -> &DialogueContext {
        &self.ctx
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Routes every pending transcript.
    pub fn step_route(&mut self, bus: &Bus) {
        if let Some(env) = bus.drain(&self.states).pop() {
            if let Payload::RobotState(s) = env.payload {
                self.latest_state = s;
            }
        }
        for env in bus.drain(&self.transcripts) {
            let Payload::Transcript(msg) = env.payload else { continue };
            self.ctx.age = msg.age;
            let out = route(
                self.backend.as_mut(),
                &msg.transcript,
                &self.latest_state,
                &mut self.ctx,
                &self.settings,
            );
            let source = Some(msg.source_seq);
            if let Some(anomaly) = out.anomaly.clone() {
                publish_event(bus, TrialEvent::NluAnomaly { source_seq: msg.source_seq, anomaly });
            }
            if let Some(message) = out.backend_error.clone() {
                publish_event(bus, TrialEvent::BackendError { source_seq: msg.source_seq, message });
            }
            if let (true, Some((request, reply))) = (self.log_exchanges, out.exchange.clone()) {
                publish_event(bus, TrialEvent::BackendExchange { source_seq: msg.source_seq, request, reply });
            }
            let forward = !(self.settings.prefilter && out.command.kind == CommandKind::Other);
            if forward {
                self.ctx.commands_forwarded += 1;
                bus.publish(
                    Topic::Command,
                    Payload::Command(CommandMsg { in_reply_to: source, command: out.command.clone() }),
                )
                .expect("command topic");
            }
            bus.publish(
                Topic::ResponseOut,
                Payload::Response(ResponseMsg {
                    response: out.response,
                    in_reply_to: source,
                    echo: Some(out.command),
                }),
            )
            .expect("response topic");
        }
    }

    /// Voices planner events according to the current age policy.
    pub fn step_narrate(&mut self, bus: &Bus) {
        for env in bus.drain(&self.events) {
            let Payload::TrialEvent(ev) = &env.payload else { continue };
            if let Some(response) = narrate(ev, self.ctx.age, &self.policy) {
                bus.publish(
                    Topic::ResponseOut,
                    Payload::Response(ResponseMsg { response, in_reply_to: None, echo: None }),
                )
                .expect("response topic");
            }
        }
    }
}

fn publish_event(bus: &Bus, ev: TrialEvent) {
    bus.publish(Topic::TrialEvent, Payload::TrialEvent(ev)).expect("trial_event topic");
}
