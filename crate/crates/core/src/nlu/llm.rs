//! Chat-completion backend and the reply schema shared with the stub.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::speech::Transcript;
use crate::world::{Color, LocationId, ObjectQuery, ObjectType, Size};

use super::{BackendError, Command, CommandKind, DialogueContext, Extraction, NluBackend, ReplyAnomaly, SymbolicState};

pub const SYSTEM_PROMPT: &str = r#"You are the dialogue bridge of a kitchen robot. Read the user's sentence and the robot state and answer with one JSON object and nothing else:
{"command": <"bring_me" | "setting_breakfast" | "replace_object" | "change_location" | "stop" | "other">,
 "add": {"type": ..., "color": ..., "size": ..., "location": ...},
 "delete": {"type": ..., "color": ..., "size": ..., "location": ...},
 "destination": <"table" | "counter">,
 "response": <short reply to the user>}
Object types: milk, bowl, cereal, spoon, cup. Colors: green, blue, red, white. Sizes: small, normal, big. Locations: countertop, dishwasher, cabinet. Omit unknown fields.
"add" is the object the user wants, "delete" is the object being replaced. "stop" halts the robot. Anything else is "other".
Examples:
User: Bring me the small red cup.
{"command": "bring_me", "add": {"type": "cup", "color": "red", "size": "small"}, "response": "Getting the small red cup."}
User: Bring me a cup instead of a bowl.
{"command": "replace_object", "add": {"type": "cup"}, "delete": {"type": "bowl"}, "response": "Okay, the cup instead of the bowl."}
User: Stop!
{"command": "stop", "response": "Stopping."}"#;

/// Builds the user turn sent alongside the system prompt.
pub fn user_message(text: &str, state: &SymbolicState, ctx: &DialogueContext) -> String {
    let state = serde_json::to_string(state).expect("state serializes");
    let age = serde_json::to_value(ctx.age).expect("age serializes");
    format!("State: {state}\nAge: {}\nUser: {text}", age.as_str().unwrap_or_default())
}

/// Recovers the user's sentence from a [`user_message`].
pub fn user_text(message: &str) -> &str {
    message.rsplit_once("User: ").map_or(message, |(_, t)| t)
}

fn query_from(v: &Value) -> Option<ObjectQuery> {
    let obj = v.as_object()?;
    let word = |k: &str| obj.get(k).and_then(Value::as_str).map(str::to_lowercase);
    let q = ObjectQuery {
        object_type: word("type").and_then(|w| ObjectType::from_word(&w)),
        color: word("color").and_then(|w| Color::from_word(&w)),
        size: word("size").and_then(|w| Size::from_word(&w)),
        source_location: word("location").and_then(|w| LocationId::from_word(&w)).filter(|l| l.is_storage()),
    };
    q.is_well_formed().then_some(q)
}

pub fn query_json(q: &ObjectQuery) -> Value {
    let mut m = Map::new();
    if let Some(t) = q.object_type {
        m.insert("type".into(), t.as_str().into());
    }
    if let Some(c) = q.color {
        m.insert("color".into(), c.as_str().into());
    }
    if let Some(s) = q.size {
        m.insert("size".into(), s.as_str().into());
    }
    if let Some(l) = q.source_location {
        m.insert("location".into(), l.as_str().into());
    }
    Value::Object(m)
}

/// Reply content a well-behaved model would give for `cmd`.
pub fn reply_json(cmd: &Command) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), cmd.unrecognized_kind.as_deref().unwrap_or(cmd.kind.as_str()).into());
    if let Some(q) = &cmd.add {
        m.insert("add".into(), query_json(q));
    }
    if let Some(q) = &cmd.delete {
        m.insert("delete".into(), query_json(q));
    }
    if let Some(d) = cmd.destination {
        m.insert("destination".into(), d.as_str().into());
    }
    Value::Object(m)
}

fn extract_object(content: &str) -> Option<Map<String, Value>> {
    let start = content.find('{')?;
    let end = content.rfind('}')?;
    if end < start {
        return None;
    }
    match serde_json::from_str(&content[start..=end]).ok()? {
        Value::Object(m) => Some(m),
        _ => None,
    }
}

/// Parses a model reply into a command. Never fails: anything that does not
/// follow the schema becomes `other` with [`ReplyAnomaly::MalformedReply`].
pub fn parse_reply(content: &str) -> (Command, Option<ReplyAnomaly>) {
    let malformed = || (Command::bare(CommandKind::Other), Some(ReplyAnomaly::MalformedReply));
    let Some(obj) = extract_object(content) else { return malformed() };
    let Some(name) = obj.get("command").and_then(Value::as_str) else { return malformed() };
    let name = name.trim().to_lowercase();
    let Some(kind) = CommandKind::parse(&name) else {
        let mut c = Command::bare(CommandKind::Other);
        c.unrecognized_kind = Some(name);
        return (c, None);
    };
    let mut anomaly = None;
    let add = match obj.get("add") {
        Some(Value::Array(items)) if items.len() > 1 => {
            anomaly = Some(ReplyAnomaly::DoubleFetch);
            items.first().and_then(query_from)
        }
        Some(Value::Array(items)) => items.first().and_then(query_from),
        Some(v) => query_from(v),
        None => None,
    };
    let mut cmd = Command {
        kind,
        add,
        delete: obj.get("delete").and_then(query_from),
        destination: obj
            .get("destination")
            .and_then(Value::as_str)
            .and_then(|w| LocationId::from_word(&w.to_lowercase()))
            .filter(|l| l.is_placement()),
        unrecognized_kind: None,
    };
    if anomaly == Some(ReplyAnomaly::DoubleFetch) {
        cmd.kind = CommandKind::BringMe;
    }
    match cmd.kind {
        CommandKind::Stop | CommandKind::Other => {
            cmd.add = None;
            cmd.delete = None;
            cmd.destination = None;
        }
        CommandKind::SettingBreakfast | CommandKind::ChangeLocation => {
            cmd.add = None;
            cmd.delete = None;
        }
        CommandKind::BringMe => cmd.delete = None,
        CommandKind::ReplaceObject => {}
    }
    (cmd, anomaly)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo-1106".into(),
            api_key_env: Some("HRI_LLM_API_KEY".into()),
            timeout_ms: 10_000,
        }
    }
}

pub struct ExternalBackend {
    cfg: ExternalConfig,
    client: reqwest::blocking::Client,
}

impl ExternalBackend {
    pub fn new(cfg: ExternalConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(Self { cfg, client })
    }

    pub fn request_body(&self, text: &str, state: &SymbolicState, ctx: &DialogueContext) -> Value {
        json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": user_message(text, state, ctx)},
            ],
        })
    }
}

impl NluBackend for ExternalBackend {
    fn name(&self) -> &str {
        "external"
    }

    fn extract(
        &mut self,
        transcript: &Transcript,
        state: &SymbolicState,
        ctx: &DialogueContext,
    ) -> Result<Extraction, BackendError> {
        let body = self.request_body(&transcript.text, state, ctx);
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut req = self.client.post(url).json(&body);
        if let Some(var) = &self.cfg.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| BackendError::Unavailable(format!("credential variable {var} is not set")))?;
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = resp.status();
        let raw = resp.text().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("HTTP {status}")));
        }
        let content = serde_json::from_str::<Value>(&raw).ok().and_then(|v| {
            v.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_string)
        });
        let (command, anomaly) = match &content {
            Some(c) => parse_reply(c),
            None => (Command::bare(CommandKind::Other), Some(ReplyAnomaly::MalformedReply)),
        };
        Ok(Extraction { command, anomaly, exchange: Some((body.to_string(), raw)) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_replace_reply() {
        let (c, a) = parse_reply(r#"{"command": "replace_object", "add": {"type": "cup"}, "delete": {"type": "bowl"}}"#);
        assert_eq!(c, Command::replace(ObjectQuery::of_type(ObjectType::Cup), ObjectQuery::of_type(ObjectType::Bowl)));
        assert_eq!(a, None);
    }

    #[test]
    fn prose_degrades_to_other() {
        let (c, a) = parse_reply("Sure! I will bring you the cup right away.");
        assert_eq!(c.kind, CommandKind::Other);
        assert_eq!(a, Some(ReplyAnomaly::MalformedReply));
    }

    #[test]
    fn json_inside_prose_is_found() {
        let (c, _) = parse_reply("Here you go: {\"command\": \"stop\"} done");
        assert_eq!(c.kind, CommandKind::Stop);
    }

    #[test]
    fn double_add_is_a_double_fetch() {
        let (c, a) = parse_reply(r#"{"command": "bring_me", "add": [{"type": "cup"}, {"type": "bowl"}]}"#);
        assert_eq!(c, Command::bring_me(ObjectQuery::of_type(ObjectType::Cup)));
        assert_eq!(a, Some(ReplyAnomaly::DoubleFetch));
    }

    #[test]
    fn unknown_command_name_is_kept() {
        let (c, a) = parse_reply(r#"{"command": "dance"}"#);
        assert_eq!(c.kind, CommandKind::Other);
        assert_eq!(c.unrecognized_kind.as_deref(), Some("dance"));
        assert_eq!(a, None);
    }

    #[test]
    fn reply_round_trip() {
        let cmd = Command {
            destination: Some(LocationId::Counter),
            ..Command::bring_me(ObjectQuery::of_type(ObjectType::Milk).with_size(Size::Big).from_location(LocationId::Cabinet))
        };
        assert_eq!(parse_reply(&reply_json(&cmd).to_string()), (cmd, None));
    }

    #[test]
    fn user_text_recovers_sentence() {
        let m = user_message("Bring me a cup", &SymbolicState::default(), &DialogueContext::default());
        assert_eq!(user_text(&m), "Bring me a cup");
    }
}
