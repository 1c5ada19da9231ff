//! In-process topic bus.
//!
//! Delivery is pull-based: publishers append envelopes, each subscriber drains
//! its own FIFO queue. A single global sequence number orders every envelope,
//! which is what makes trial logs replayable. The same JSON object written for
//! an envelope is used for log lines and for gateway frames.

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::events::TrialEvent;
use crate::nlu::{CommandMsg, ResponseMsg, SymbolicState};
use crate::planner::InterruptMsg;
use crate::speech::{TranscriptMsg, UtteranceMsg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    UtteranceIn,
    Transcript,
    Command,
    RobotState,
    ResponseOut,
    Interrupt,
    TrialEvent,
}

impl Topic {
    pub const ALL: [Topic; 7] = [
        Topic::UtteranceIn,
        Topic::Transcript,
        Topic::Command,
        Topic::RobotState,
        Topic::ResponseOut,
        Topic::Interrupt,
        Topic::TrialEvent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::UtteranceIn => "utterance_in",
            Topic::Transcript => "transcript",
            Topic::Command => "command",
            Topic::RobotState => "robot_state",
            Topic::ResponseOut => "response_out",
            Topic::Interrupt => "interrupt",
            Topic::TrialEvent => "trial_event",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Typed message carried by an envelope. Each variant belongs to exactly one
/// topic.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Utterance(UtteranceMsg),
    Transcript(TranscriptMsg),
    Command(CommandMsg),
    RobotState(SymbolicState),
    Response(ResponseMsg),
    Interrupt(InterruptMsg),
    TrialEvent(TrialEvent),
}

impl Payload {
    pub fn topic(&self) -> Topic {
        match self {
            Payload::Utterance(_) => Topic::UtteranceIn,
            Payload::Transcript(_) => Topic::Transcript,
            Payload::Command(_) => Topic::Command,
            Payload::RobotState(_) => Topic::RobotState,
            Payload::Response(_) => Topic::ResponseOut,
            Payload::Interrupt(_) => Topic::Interrupt,
            Payload::TrialEvent(_) => Topic::TrialEvent,
        }
    }

    pub fn from_value(topic: Topic, value: serde_json::Value) -> Result<Self, serde_json::Error> {
        Ok(match topic {
            Topic::UtteranceIn => Payload::Utterance(serde_json::from_value(value)?),
            Topic::Transcript => Payload::Transcript(serde_json::from_value(value)?),
            Topic::Command => Payload::Command(serde_json::from_value(value)?),
            Topic::RobotState => Payload::RobotState(serde_json::from_value(value)?),
            Topic::ResponseOut => Payload::Response(serde_json::from_value(value)?),
            Topic::Interrupt => Payload::Interrupt(serde_json::from_value(value)?),
            Topic::TrialEvent => Payload::TrialEvent(serde_json::from_value(value)?),
        })
    }
}

impl Serialize for Payload {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Payload::Utterance(m) => m.serialize(s),
            Payload::Transcript(m) => m.serialize(s),
            Payload::Command(m) => m.serialize(s),
            Payload::RobotState(m) => m.serialize(s),
            Payload::Response(m) => m.serialize(s),
            Payload::Interrupt(m) => m.serialize(s),
            Payload::TrialEvent(m) => m.serialize(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub seq: u64,
    pub tick: u64,
    pub topic: Topic,
    pub payload: Payload,
}

impl<'de> Deserialize<'de> for Envelope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            seq: u64,
            tick: u64,
            topic: Topic,
            payload: serde_json::Value,
        }
        let raw = Raw::deserialize(d)?;
        let payload = Payload::from_value(raw.topic, raw.payload).map_err(D::Error::custom)?;
        Ok(Envelope { seq: raw.seq, tick: raw.tick, topic: raw.topic, payload })
    }
}

impl Envelope {
    /// One JSON Lines record (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("envelopes always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("payload for {payload} published on topic {topic}")]
    TypeMismatch { topic: Topic, payload: Topic },
    #[error("tick moved backwards from {current} to {requested}")]
    TickRegression { current: u64, requested: u64 },
}

/// Handle returned by [`Bus::subscribe`]. Not `Clone`: each handle owns one
/// queue and every envelope is delivered to it at most once.
#[derive(Debug)]
pub struct Subscription {
    id: usize,
}

#[derive(Debug)]
struct Subscriber {
    topics: u8,
    queue: VecDeque<Envelope>,
    active: bool,
}

#[derive(Debug, Default)]
struct Inner {
    next_seq: u64,
    tick: u64,
    subscribers: Vec<Subscriber>,
}

/// Cheap to clone; all clones share one bus.
#[derive(Debug, Clone, Default)]
pub struct Bus {
    inner: Arc<Mutex<Inner>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // A panicking subscriber must not wedge the other threads.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn subscribe(&self, topics: &[Topic]) -> Subscription {
        let mut inner = self.lock();
        let mask = topics.iter().fold(0u8, |m, t| m | t.bit());
        inner.subscribers.push(Subscriber { topics: mask, queue: VecDeque::new(), active: true });
        Subscription { id: inner.subscribers.len() - 1 }
    }

    pub fn subscribe_all(&self) -> Subscription {
        self.subscribe(&Topic::ALL)
    }

    pub fn unsubscribe(&self, sub: Subscription) {
        let mut inner = self.lock();
        if let Some(s) = inner.subscribers.get_mut(sub.id) {
            s.active = false;
            s.queue.clear();
        }
    }

    pub fn tick(&self) -> u64 {
        self.lock().tick
    }

    pub fn set_tick(&self, tick: u64) -> Result<(), BusError> {
        let mut inner = self.lock();
        if tick < inner.tick {
            return Err(BusError::TickRegression { current: inner.tick, requested: tick });
        }
        inner.tick = tick;
        Ok(())
    }

    pub fn publish(&self, topic: Topic, payload: Payload) -> Result<u64, BusError> {
        if payload.topic() != topic {
            return Err(BusError::TypeMismatch { topic, payload: payload.topic() });
        }
        let mut inner = self.lock();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        let env = Envelope { seq, tick: inner.tick, topic, payload };
        let bit = topic.bit();
        for sub in inner.subscribers.iter_mut().filter(|s| s.active && s.topics & bit != 0) {
            sub.queue.push_back(env.clone());
        }
        Ok(seq)
    }

    pub fn drain(&self, sub: &Subscription) -> Vec<Envelope> {
        let mut inner = self.lock();
        inner
            .subscribers
            .get_mut(sub.id)
            .map(|s| s.queue.drain(..).collect())
            .unwrap_or_default()
    }

    pub fn pending(&self, sub: &Subscription) -> usize {
        self.lock().subscribers.get(sub.id).map_or(0, |s| s.queue.len())
    }
}
