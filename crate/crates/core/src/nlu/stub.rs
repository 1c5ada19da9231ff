//! A local stand-in for the chat-completion model.
//!
//! [`ConfusionModel`] perturbs the grammar's reading of a sentence with
//! per-field error rates and renders it in the reply schema of [`super::llm`].
//! [`StubBackend`] applies it in process; [`StubServer`] serves it (or a
//! fixed script of replies) over HTTP for the external client.

use std::collections::{BTreeMap, VecDeque};
use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::post;
use axum::{Json, Router};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::speech::Transcript;
use crate::world::{Color, LocationId, ObjectQuery, ObjectType, Size};

use super::llm::{parse_reply, query_json, reply_json, user_message, user_text};
use super::{grammar, BackendError, Command, CommandKind, DialogueContext, Extraction, NluBackend, SymbolicState};

/// Probability that each slot comes back right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRates {
    #[serde(rename = "type")]
    pub object_type: f64,
    pub color: f64,
    pub size: f64,
    pub location: f64,
}

impl FieldRates {
    pub const PERFECT: FieldRates = FieldRates { object_type: 1.0, color: 1.0, size: 1.0, location: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfusionModel {
    pub command_accuracy: f64,
    pub add: FieldRates,
    pub delete: FieldRates,
    /// Relative weight of each wrong command kind when the command is misread.
    pub misroute_weights: BTreeMap<CommandKind, f64>,
    /// A replacement misread as `bring_me` names both objects to fetch.
    pub double_fetch: bool,
    pub p_no_response: f64,
}

impl Default for ConfusionModel {
    /// Rates measured for gpt-3.5-turbo-1106 on the generated benchmark.
    fn default() -> Self {
        Self {
            command_accuracy: 0.8157,
            add: FieldRates { object_type: 0.8908, color: 0.8660, size: 0.6840, location: 0.8453 },
            delete: FieldRates { object_type: 0.8312, color: 0.8554, size: 0.8377, location: 0.9996 },
            misroute_weights: [
                (CommandKind::Other, 0.6),
                (CommandKind::BringMe, 0.2),
                (CommandKind::ReplaceObject, 0.1),
                (CommandKind::SettingBreakfast, 0.05),
                (CommandKind::ChangeLocation, 0.05),
                (CommandKind::Stop, 0.0),
            ]
            .into(),
            double_fetch: true,
            p_no_response: 0.0,
        }
    }
}

impl ConfusionModel {
    pub fn perfect() -> Self {
        Self {
            command_accuracy: 1.0,
            add: FieldRates::PERFECT,
            delete: FieldRates::PERFECT,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let rates = [
            self.command_accuracy,
            self.p_no_response,
            self.add.object_type,
            self.add.color,
            self.add.size,
            self.add.location,
            self.delete.object_type,
            self.delete.color,
            self.delete.size,
            self.delete.location,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err("confusion rates must be probabilities".into());
        }
        if self.misroute_weights.values().any(|w| *w < 0.0) {
            return Err("misroute weights must be non-negative".into());
        }
        Ok(())
    }

    fn misroute<R: Rng + ?Sized>(&self, kind: CommandKind, rng: &mut R) -> CommandKind {
        let options: Vec<(CommandKind, f64)> = self
            .misroute_weights
            .iter()
            .filter(|(k, w)| **k != kind && **w > 0.0)
            .map(|(k, w)| (*k, *w))
            .collect();
        let total: f64 = options.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return if kind == CommandKind::Other { CommandKind::BringMe } else { CommandKind::Other };
        }
        let mut x = rng.random::<f64>() * total;
        for (k, w) in &options {
            if x < *w {
                return *k;
            }
            x -= w;
        }
        options.last().expect("non-empty").0
    }

    /// Reply content for a sentence the grammar reads as `gold`.
    pub fn render<R: Rng + ?Sized>(&self, gold: &Command, rng: &mut R) -> String {
        let mut kind = gold.kind;
        if rng.random::<f64>() >= self.command_accuracy {
            kind = self.misroute(kind, rng);
        }
        let add = gold.add.and_then(|q| corrupt_query(q, &self.add, rng));
        let delete = gold.delete.and_then(|q| corrupt_query(q, &self.delete, rng));
        let mut reply = reply_json(&Command {
            kind,
            add,
            delete,
            destination: gold.destination,
            unrecognized_kind: None,
        });
        if self.double_fetch && gold.kind == CommandKind::ReplaceObject && kind == CommandKind::BringMe {
            let items: Vec<Value> = add.iter().chain(delete.iter()).map(query_json).collect();
            reply["add"] = Value::Array(items);
        }
        reply.to_string()
    }
}

fn corrupt_field<T: Copy + PartialEq, R: Rng + ?Sized>(v: Option<T>, all: &[T], acc: f64, rng: &mut R) -> Option<T> {
    if rng.random::<f64>() < acc {
        return v;
    }
    match v {
        Some(x) if rng.random::<bool>() => {
            let others: Vec<T> = all.iter().copied().filter(|y| *y != x).collect();
            others.choose(rng).copied()
        }
        Some(_) => None,
        None => all.choose(rng).copied(),
    }
}

fn corrupt_query<R: Rng + ?Sized>(q: ObjectQuery, rates: &FieldRates, rng: &mut R) -> Option<ObjectQuery> {
    let out = ObjectQuery {
        object_type: corrupt_field(q.object_type, &ObjectType::ALL, rates.object_type, rng),
        color: corrupt_field(q.color, &Color::ALL, rates.color, rng),
        size: corrupt_field(q.size, &Size::ALL, rates.size, rng),
        source_location: corrupt_field(q.source_location, &LocationId::STORAGE, rates.location, rng),
    };
    out.is_well_formed().then_some(out)
}

/// In-process confusion backend.
pub struct StubBackend {
    model: ConfusionModel,
    rng: ChaCha8Rng,
}

impl StubBackend {
    pub fn new(model: ConfusionModel, rng: ChaCha8Rng) -> Self {
        Self { model, rng }
    }

    pub fn seeded(model: ConfusionModel, seed: u64) -> Self {
        Self::new(model, ChaCha8Rng::seed_from_u64(seed))
    }
}

impl NluBackend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn extract(
        &mut self,
        transcript: &Transcript,
        state: &SymbolicState,
        ctx: &DialogueContext,
    ) -> Result<Extraction, BackendError> {
        if self.model.p_no_response > 0.0 && self.rng.random::<f64>() < self.model.p_no_response {
            return Err(BackendError::Unavailable("no response".into()));
        }
        let gold = grammar::parse(&transcript.text, ctx);
        let content = self.model.render(&gold, &mut self.rng);
        let (command, anomaly) = parse_reply(&content);
        let request = user_message(&transcript.text, state, ctx);
        Ok(Extraction { command, anomaly, exchange: Some((request, content)) })
    }
}

/// What the stub server answers with.
#[derive(Debug, Clone, PartialEq)]
pub enum StubReply {
    /// Assistant message content, wrapped in a completion envelope.
    Content(String),
    /// A verbatim HTTP response.
    Raw { status: u16, body: String },
}

#[derive(Debug, Clone)]
pub enum StubMode {
    Model { model: ConfusionModel, seed: u64 },
    /// Replies served in order; once exhausted the server answers 503.
    Script(Vec<StubReply>),
}

struct ServerState {
    model: Option<(ConfusionModel, ChaCha8Rng)>,
    script: VecDeque<StubReply>,
    requests: Vec<Value>,
}

type Shared = Arc<Mutex<ServerState>>;

fn envelope(model: &str, content: &str) -> Value {
    json!({
        "id": "stub-completion",
        "object": "chat.completion",
        "model": model,
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop",
        }],
    })
}

async fn completions(State(state): State<Shared>, Json(body): Json<Value>) -> HttpResponse {
    let mut st = state.lock().expect("stub state");
    st.requests.push(body.clone());
    let model_name = body.get("model").and_then(Value::as_str).unwrap_or("stub").to_string();
    let reply = if let Some(r) = st.script.pop_front() {
        r
    } else if let Some((model, rng)) = st.model.as_mut() {
        if model.p_no_response > 0.0 && rng.random::<f64>() < model.p_no_response {
            return (StatusCode::SERVICE_UNAVAILABLE, "no response").into_response();
        }
        let user = body
            .pointer("/messages")
            .and_then(Value::as_array)
            .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default();
        let gold = grammar::parse(user_text(user), &DialogueContext::default());
        StubReply::Content(model.render(&gold, rng))
    } else {
        return (StatusCode::SERVICE_UNAVAILABLE, "script exhausted").into_response();
    };
    match reply {
        StubReply::Content(c) => Json(envelope(&model_name, &c)).into_response(),
        StubReply::Raw { status, body } => {
            let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, body).into_response()
        }
    }
}

/// OpenAI-style completion server on a loopback port, stopped on drop.
pub struct StubServer {
    addr: SocketAddr,
    state: Shared,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(mode: StubMode) -> io::Result<Self> {
        let (model, script) = match mode {
            StubMode::Model { model, seed } => (Some((model, ChaCha8Rng::seed_from_u64(seed))), VecDeque::new()),
            StubMode::Script(s) => (None, s.into()),
        };
        let state: Shared = Arc::new(Mutex::new(ServerState { model, script, requests: Vec::new() }));
        let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let app = Router::new()
            .route("/chat/completions", post(completions))
            .route("/v1/chat/completions", post(completions))
            .with_state(state.clone());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("tokio listener");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("stub server");
            });
        });
        Ok(Self { addr, state, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Request bodies received so far.
    pub fn requests(&self) -> Vec<Value> {
        self.state.lock().expect("stub state").requests.clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
