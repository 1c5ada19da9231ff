//! Scripted system trials.
//!
//! A trial runs the full pipeline with a scripted user who speaks each line
//! at its scheduled tick and repeats it when no confirming response arrives.
//! The resulting log is a header (enough to rerun the trial), every bus
//! envelope in order, and the outcome.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bus::{Bus, Envelope, Payload, Subscription, Topic};
use crate::config::RunConfig;
use crate::events::TrialEvent;
use crate::nlu::{parse, CommandKind, DialogueContext, ResponseCategory, ResponseMsg};
use crate::planner::Mode;
use crate::session::{make_backend, stream_rng, Session, Stream};
use crate::speech::AgeGroup;
use crate::world::{ObjectType, Placement, WorldState};

use super::{BenchError, Scenario};

/// What a confirming response must echo back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub kind: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub add: Option<ObjectType>,
}

impl Expectation {
    pub fn confirmed_by(&self, r: &ResponseMsg) -> bool {
        let Some(echo) = &r.echo else { return false };
        r.response.category == ResponseCategory::Confirmation
            && echo.kind == self.kind
            && (self.add.is_none() || echo.add.and_then(|q| q.object_type) == self.add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub tick: u64,
    pub text: String,
    pub true_age: AgeGroup,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialScript {
    pub scenario: Scenario,
    pub lines: Vec<ScriptLine>,
}

impl TrialScript {
    /// Builds the scenario script for one trial; the jittered line times come
    /// from the trial seed.
    pub fn generate(scenario: Scenario, cfg: &RunConfig, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Script);
        let t = &cfg.trials;
        let timed: Vec<(u64, &str)> = match scenario {
            Scenario::ReplaceCup => {
                let [lo, hi] = t.scenario1.replace_at;
                vec![(0, t.scenario1.request.as_str()), (rng.random_range(lo..=hi), t.scenario1.replacement.as_str())]
            }
            Scenario::BreakfastStop => {
                let [lo, hi] = t.scenario2.add_at;
                vec![
                    (0, t.scenario2.request.as_str()),
                    (rng.random_range(lo..=hi), t.scenario2.addition.as_str()),
                    (t.scenario2.stop_at, t.scenario2.stop.as_str()),
                ]
            }
        };
        let mut ctx = DialogueContext::default();
        let lines = timed
            .into_iter()
            .map(|(tick, text)| {
                let gold = parse(text, &ctx);
                ctx.record(&gold);
                ScriptLine {
                    tick,
                    text: text.to_string(),
                    true_age: t.true_age,
                    expect: Expectation { kind: gold.kind, add: gold.add.and_then(|q| q.object_type) },
                }
            })
            .collect();
        Self { scenario, lines }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub trial: usize,
    pub seed: u64,
    pub config: RunConfig,
    pub script: TrialScript,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub header: TrialHeader,
    pub envelopes: Vec<Envelope>,
    pub outcome: TrialOutcome,
}

impl TrialLog {
    pub fn scenario(&self) -> Scenario {
        self.header.script.scenario
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &serde_json::json!({ "header": self.header }))?;
        w.write_all(b"\n")?;
        for env in &self.envelopes {
            w.write_all(env.to_json_line().as_bytes())?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &serde_json::json!({ "outcome": self.outcome }))?;
        w.write_all(b"\n")
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Inputs and seed from the header alone reproduce the trial.
    pub fn rerun(&self) -> TrialLog {
        run_trial(&self.header.config, self.header.trial, self.header.seed, self.header.script.clone())
    }
}

/// Reads one or more concatenated trial logs.
pub fn read_logs<R: BufRead>(r: R) -> Result<Vec<TrialLog>, BenchError> {
    let mut out = Vec::new();
    let mut current: Option<(TrialHeader, Vec<Envelope>)> = None;
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| BenchError::io("<log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| BenchError::Format { line: n + 1, message };
        let v: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if let Some(h) = v.get("header") {
            if current.is_some() {
                return Err(bad("header before the previous trial's outcome".into()));
            }
            current = Some((serde_json::from_value(h.clone()).map_err(|e| bad(e.to_string()))?, Vec::new()));
        } else if let Some(o) = v.get("outcome") {
            let (header, envelopes) = current.take().ok_or_else(|| bad("outcome without header".into()))?;
            let outcome = serde_json::from_value(o.clone()).map_err(|e| bad(e.to_string()))?;
            out.push(TrialLog { header, envelopes, outcome });
        } else {
            let env: Envelope = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
            current.as_mut().ok_or_else(|| bad("envelope without header".into()))?.1.push(env);
        }
    }
    if current.is_some() {
        return Err(BenchError::Format { line: 0, message: "log ends without an outcome".into() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineStatus {
    Pending,
    Confirmed,
    GaveUp,
}

#[derive(Debug)]
struct LineState {
    next_at: Option<u64>,
    attempts: u32,
    awaiting: Option<(u64, u64)>,
    status: LineStatus,
}

/// The scripted user.
struct Agent {
    script: TrialScript,
    lines: Vec<LineState>,
    timeout: u64,
    max_attempts: u32,
    responses: Subscription,
}

impl Agent {
    fn new(bus: &Bus, script: TrialScript, cfg: &RunConfig) -> Self {
        let lines = script
            .lines
            .iter()
            .map(|l| LineState { next_at: Some(l.tick), attempts: 0, awaiting: None, status: LineStatus::Pending })
            .collect();
        Self {
            script,
            lines,
            timeout: cfg.trials.confirm_timeout,
            max_attempts: cfg.trials.max_attempts,
            responses: bus.subscribe(&[Topic::ResponseOut]),
        }
    }

    fn act(&mut self, session: &Session, tick: u64) {
        for (line, st) in self.script.lines.iter().zip(&mut self.lines) {
            if st.status == LineStatus::Pending && st.next_at == Some(tick) {
                let seq = session.say(&line.text, line.true_age, st.attempts);
                st.attempts += 1;
                st.awaiting = Some((seq, tick + self.timeout));
                st.next_at = None;
            }
        }
    }

    fn retry(&self, st: &mut LineState, at: u64) {
        st.awaiting = None;
        if st.attempts < self.max_attempts {
            st.next_at = Some(at);
        } else {
            st.status = LineStatus::GaveUp;
        }
    }

    fn observe(&mut self, bus: &Bus, tick: u64) {
        let responses = bus.drain(&self.responses);
        let mut lines = std::mem::take(&mut self.lines);
        for env in responses {
            let Payload::Response(r) = env.payload else { continue };
            let Some(src) = r.in_reply_to else { continue };
            for (line, st) in self.script.lines.iter().zip(lines.iter_mut()) {
                if st.awaiting.map(|(seq, _)| seq) != Some(src) {
                    continue;
                }
                if line.expect.confirmed_by(&r) {
                    st.awaiting = None;
                    st.status = LineStatus::Confirmed;
                } else {
                    self.retry(st, tick + self.timeout);
                }
            }
        }
        for st in lines.iter_mut() {
            if let Some((_, deadline)) = st.awaiting {
                if deadline <= tick {
                    self.retry(st, tick + 1);
                }
            }
        }
        self.lines = lines;
    }

    fn abandon(&mut self) {
        for st in &mut self.lines {
            if st.status == LineStatus::Pending {
                st.status = LineStatus::GaveUp;
            }
        }
    }

    fn done(&self) -> bool {
        self.lines.iter().all(|s| s.status != LineStatus::Pending)
    }
}

/// Per-trial seed derived from the run seed.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs one trial of `script`.
pub fn run_trial(cfg: &RunConfig, trial: usize, seed: u64, script: TrialScript) -> TrialLog {
    let bus = Bus::new();
    let all = bus.subscribe_all();
    let backend = match make_backend(cfg, seed) {
        Ok(b) => b,
        // An unreachable backend is a trial outcome, not a harness error.
        Err(e) => Box::new(Unavailable(e.to_string())),
    };
    let mut session = Session::on_bus(bus.clone(), cfg, seed, backend);
    let mut agent = Agent::new(&bus, script.clone(), cfg);
    let scenario = script.scenario;
    session.snapshot("initial");
    let mut quiet = 0;
    while session.tick() < cfg.trials.max_ticks {
        let tick = session.tick();
        agent.act(&session, tick);
        session.step();
        agent.observe(&bus, tick);
        let mode = session.executor().mode();
        let broken = mode == Mode::Failed || (scenario == Scenario::ReplaceCup && mode == Mode::Stopped);
        if broken {
            agent.abandon();
        }
        if agent.done() && mode != Mode::Executing {
            quiet += 1;
            if quiet > cfg.trials.settle_ticks {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    session.snapshot("final");
    let ticks = session.tick();
    let header = TrialHeader { trial, seed, config: cfg.clone(), script };
    let mut log = TrialLog { header, envelopes: bus.drain(&all), outcome: TrialOutcome { success: false, ticks } };
    log.outcome.success = score_trial(&log, scenario);
    log
}

struct Unavailable(String);

impl crate::nlu::NluBackend for Unavailable {
    fn name(&self) -> &str {
        "unavailable"
    }

    fn extract(
        &mut self,
        _: &crate::speech::Transcript,
        _: &crate::nlu::SymbolicState,
        _: &DialogueContext,
    ) -> Result<crate::nlu::Extraction, crate::nlu::BackendError> {
        Err(crate::nlu::BackendError::Unavailable(self.0.clone()))
    }
}

/// Runs `n` independent trials. Trials run on worker threads; the result is
/// ordered by trial index and does not depend on scheduling.
pub fn run_trials(scenario: Scenario, n: usize, seed: u64, cfg: &RunConfig) -> Vec<TrialLog> {
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    let mut slots: Vec<Option<TrialLog>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w..n)
                        .step_by(workers)
                        .map(|i| {
                            let ts = trial_seed(seed, i);
                            (i, run_trial(cfg, i, ts, TrialScript::generate(scenario, cfg, ts)))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, log) in h.join().expect("trial worker panicked") {
                slots[i] = Some(log);
            }
        }
    });
    slots.into_iter().map(|l| l.expect("every trial ran")).collect()
}

fn snapshot<'a>(log: &'a TrialLog, label: &str) -> Option<&'a WorldState> {
    log.envelopes.iter().rev().find_map(|e| match &e.payload {
        Payload::TrialEvent(TrialEvent::WorldSnapshot { label: l, world }) if l == label => Some(world),
        _ => None,
    })
}

/// Success rule for a finished trial. Depends only on the log.
///
/// Scenario 1: exactly one object was delivered, it has the replacement's
/// type, and every other object is back where it started. Scenario 2: every
/// breakfast item and the added object were delivered and the robot ended up
/// stopped by a stop command.
pub fn score_trial(log: &TrialLog, scenario: Scenario) -> bool {
    let (Some(before), Some(after)) = (snapshot(log, "initial"), snapshot(log, "final")) else {
        return false;
    };
    let dest = log.header.config.planner.default_destination;
    let at_dest = |w: &WorldState, id| w.object(id).map(|o| o.placement) == Some(Placement::At(dest));
    let delivered: Vec<_> = after.objects.values().filter(|o| at_dest(after, o.id) && !at_dest(before, o.id)).collect();
    let wanted = |kind: CommandKind| {
        log.header
            .script
            .lines
            .iter()
            .filter(|l| l.expect.kind == kind)
            .filter_map(|l| l.expect.add)
            .collect::<BTreeSet<_>>()
    };
    match scenario {
        Scenario::ReplaceCup => {
            let replacement = wanted(CommandKind::ReplaceObject);
            let [only] = delivered.as_slice() else { return false };
            replacement.contains(&only.spec.object_type)
                && after.robot.holding.is_none()
                && after
                    .objects
                    .values()
                    .filter(|o| o.id != only.id)
                    .all(|o| before.object(o.id).map(|b| b.placement) == Some(o.placement))
        }
        Scenario::BreakfastStop => {
            let mut required: BTreeSet<ObjectType> = log.header.config.planner.breakfast_set.iter().copied().collect();
            required.extend(wanted(CommandKind::BringMe));
            let got: BTreeSet<ObjectType> = delivered.iter().map(|o| o.spec.object_type).collect();
            let stop_command = log.envelopes.iter().any(|e| {
                matches!(e.payload, Payload::TrialEvent(TrialEvent::Stopped { command_seq: Some(_) }))
            });
            let last_state = log.envelopes.iter().rev().find_map(|e| match &e.payload {
                Payload::RobotState(s) => Some(s.step.as_str()),
                _ => None,
            });
            required.is_subset(&got) && stop_command && last_state == Some("stopped")
        }
    }
}
