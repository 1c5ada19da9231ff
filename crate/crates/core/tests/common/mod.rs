//! Hand-built trial logs for the metrics oracle.
//!
//! Each fixture spells out its envelopes one by one. The expected numbers
//! next to them were worked out by hand from the listed transcripts,
//! utterance attempts and planner dispositions.

#![allow(dead_code)]

use adaptive_hri::bench::trials::{TrialHeader, TrialLog, TrialOutcome, TrialScript};
use adaptive_hri::bench::{score_trial, Scenario};
use adaptive_hri::bus::{Envelope, Payload, Topic};
use adaptive_hri::config::RunConfig;
use adaptive_hri::events::TrialEvent;
use adaptive_hri::nlu::{Command, CommandKind, CommandMsg, SymbolicState};
use adaptive_hri::planner::{Disposition, IgnoreReason};
use adaptive_hri::speech::{to_binary, AgeGroup, Corruption, Transcript, TranscriptMsg, UtteranceMsg};
use adaptive_hri::world::{LocationId, ObjectType, Placement, WorldState};

pub struct Fixture {
    cfg: RunConfig,
    scenario: Scenario,
    envelopes: Vec<Envelope>,
    initial: WorldState,
    tick: u64,
}

impl Fixture {
    pub fn new(scenario: Scenario) -> Self {
        let cfg = RunConfig::default();
        let initial = cfg.world.build();
        let mut f = Fixture { cfg, scenario, envelopes: Vec::new(), initial: initial.clone(), tick: 0 };
        f.push(Payload::TrialEvent(TrialEvent::WorldSnapshot { label: "initial".into(), world: initial }));
        f
    }

    fn push(&mut self, payload: Payload) -> u64 {
        let seq = self.envelopes.len() as u64;
        let topic: Topic = payload.topic();
        self.envelopes.push(Envelope { seq, tick: self.tick, topic, payload });
        self.tick += 1;
        seq
    }

    pub fn utter(&mut self, text: &str, attempt: u32) -> &mut Self {
        self.push(Payload::Utterance(UtteranceMsg { text: text.into(), true_age: AgeGroup::Twenties, attempt }));
        self
    }

    /// Transcript of the most recent utterance.
    pub fn heard(&mut self, corrupted: bool) -> &mut Self {
        let source_seq = self.envelopes.len() as u64 - 1;
        let corruption = if corrupted { Corruption::Cutoff } else { Corruption::Clean };
        let transcript = Transcript { text: "...".into(), confidence: 0.9, corruption };
        let age_group = AgeGroup::Twenties;
        self.push(Payload::Transcript(TranscriptMsg { source_seq, transcript, age_group, age: to_binary(age_group) }));
        self
    }

    /// Says `text` and hears it back; shorthand for the common case.
    pub fn exchange(&mut self, attempt: u32, corrupted: bool) -> &mut Self {
        self.utter("line", attempt).heard(corrupted)
    }

    /// Publishes a command of `kind` and returns its seq.
    pub fn command(&mut self, kind: CommandKind) -> u64 {
        self.push(Payload::Command(CommandMsg { in_reply_to: None, command: Command::bare(kind) }))
    }

    pub fn decide(&mut self, seq: u64, kind: CommandKind, disposition: Disposition) -> &mut Self {
        self.push(Payload::TrialEvent(TrialEvent::Disposition { command_seq: Some(seq), kind, disposition }));
        self
    }

    /// A command followed by its disposition.
    pub fn resolve(&mut self, kind: CommandKind, disposition: Disposition) -> u64 {
        let seq = self.command(kind);
        self.decide(seq, kind, disposition);
        seq
    }

    pub fn stopped(&mut self, command_seq: Option<u64>) -> &mut Self {
        self.push(Payload::TrialEvent(TrialEvent::Stopped { command_seq }));
        self
    }

    pub fn state(&mut self, step: &str) -> &mut Self {
        let s = SymbolicState { step: step.into(), ..SymbolicState::idle(LocationId::Table) };
        self.push(Payload::RobotState(s));
        self
    }

    /// Appends the final snapshot: `edit` turns the initial world into the final one.
    pub fn finish(mut self, edit: impl FnOnce(&mut WorldState)) -> TrialLog {
        let mut world = self.initial.clone();
        edit(&mut world);
        self.push(Payload::TrialEvent(TrialEvent::WorldSnapshot { label: "final".into(), world }));
        let script = TrialScript::generate(self.scenario, &self.cfg, 0);
        let header = TrialHeader { trial: 0, seed: 0, config: self.cfg, script };
        let mut log = TrialLog { header, envelopes: self.envelopes, outcome: TrialOutcome { success: false, ticks: self.tick } };
        log.outcome.success = score_trial(&log, self.scenario);
        log
    }
}

fn ids(w: &WorldState, types: &[ObjectType]) -> Vec<adaptive_hri::world::ObjectId> {
    w.objects.values().filter(|o| types.contains(&o.spec.object_type)).map(|o| o.id).collect()
}

pub fn deliver(w: &mut WorldState, types: &[ObjectType]) {
    for id in ids(w, types) {
        w.objects.get_mut(&id).unwrap().placement = Placement::At(LocationId::Table);
    }
}

pub fn hold(w: &mut WorldState, t: ObjectType) {
    let id = ids(w, &[t])[0];
    w.objects.get_mut(&id).unwrap().placement = Placement::HeldByRobot;
    w.robot.holding = Some(id);
}

pub fn move_to(w: &mut WorldState, t: ObjectType, loc: LocationId) {
    let id = ids(w, &[t])[0];
    w.objects.get_mut(&id).unwrap().placement = Placement::At(loc);
}

use CommandKind::*;
use Disposition::{Applied, Queued, Stopped};
use IgnoreReason::*;
use ObjectType::*;

const BREAKFAST: [ObjectType; 4] = [Bowl, Cereal, Milk, Spoon];
const FULL: [ObjectType; 5] = [Bowl, Cereal, Milk, Spoon, Cup];

fn ig(r: IgnoreReason) -> Disposition {
    Disposition::Ignored(r)
}

/// Hand-computed values for one fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expected {
    pub success: bool,
    pub transcripts: usize,
    pub corrupted: usize,
    pub resubmissions: usize,
    pub commands: usize,
}

const fn ex(success: bool, transcripts: usize, corrupted: usize, resubmissions: usize, commands: usize) -> Expected {
    Expected { success, transcripts, corrupted, resubmissions, commands }
}

/// Ten scenario-1 fixtures (cup requested, replaced by a bowl).
pub fn scenario_one() -> Vec<(&'static str, TrialLog, Expected)> {
    let mut v = Vec::new();

    // 1: clean run.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, false).resolve(ReplaceObject, Applied);
    v.push(("s1_clean", f.finish(|w| deliver(w, &[Bowl])), ex(true, 2, 0, 0, 2)));

    // 2: first replacement cut off, classified other, repeated once.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, true).resolve(Other, ig(ClassifiedOther));
    f.exchange(1, false).resolve(ReplaceObject, Applied);
    v.push(("s1_one_repeat", f.finish(|w| deliver(w, &[Bowl])), ex(true, 3, 1, 1, 3)));

    // 3: replacement too late, both objects end on the table.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, false).resolve(ReplaceObject, ig(TooLate));
    v.push(("s1_too_late", f.finish(|w| deliver(w, &[Cup, Bowl])), ex(false, 2, 0, 0, 2)));

    // 4: nothing understood, nothing delivered.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, true).resolve(Other, ig(ClassifiedOther));
    f.exchange(1, false).resolve(Other, ig(ClassifiedOther));
    f.exchange(2, true);
    f.exchange(3, false).resolve(ReplaceObject, ig(Malformed));
    v.push(("s1_gave_up", f.finish(|_| {}), ex(false, 4, 2, 3, 3)));

    // 5: two repeats of the replacement.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, true).resolve(Other, ig(ClassifiedOther));
    f.exchange(1, true);
    f.exchange(2, false).resolve(ReplaceObject, Applied);
    v.push(("s1_two_repeats", f.finish(|w| deliver(w, &[Bowl])), ex(true, 4, 2, 2, 3)));

    // 6: replacement queued then applied, but the cup is still in the gripper.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, true).resolve(BringMe, Applied);
    f.exchange(0, false);
    let seq = f.command(ReplaceObject);
    f.decide(seq, ReplaceObject, Queued).decide(seq, ReplaceObject, Applied);
    v.push((
        "s1_still_holding",
        f.finish(|w| {
            deliver(w, &[Bowl]);
            hold(w, Cup);
        }),
        ex(false, 2, 1, 0, 2),
    ));

    // 7: bowl delivered, but the spoon was disturbed.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, false).resolve(ReplaceObject, Applied);
    v.push((
        "s1_disturbed",
        f.finish(|w| {
            deliver(w, &[Bowl]);
            move_to(w, Spoon, LocationId::Counter);
        }),
        ex(false, 2, 0, 0, 2),
    ));

    // 8: silent trial.
    let f = Fixture::new(Scenario::ReplaceCup);
    v.push(("s1_silent", f.finish(|_| {}), ex(false, 0, 0, 0, 0)));

    // 9: success with a location change still queued at the end.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, true).resolve(ReplaceObject, Applied);
    f.exchange(0, false).resolve(ChangeLocation, Queued);
    v.push(("s1_queued_leftover", f.finish(|w| deliver(w, &[Bowl])), ex(true, 3, 1, 0, 3)));

    // 10: one repeat, with two rejected commands along the way.
    let mut f = Fixture::new(Scenario::ReplaceCup);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, false).resolve(ReplaceObject, ig(UnavailableObject));
    f.exchange(1, false).resolve(ReplaceObject, Applied);
    f.exchange(0, false).resolve(BringMe, ig(CriteriaMismatch));
    f.exchange(0, false);
    v.push(("s1_rejections", f.finish(|w| deliver(w, &[Bowl])), ex(true, 5, 0, 1, 4)));

    v
}

/// Ten scenario-2 fixtures (breakfast, a cup added, then stop).
pub fn scenario_two() -> Vec<(&'static str, TrialLog, Expected)> {
    let mut v = Vec::new();

    // 11: clean run.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.exchange(0, false);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped");
    v.push(("s2_clean", f.finish(|w| deliver(w, &FULL)), ex(true, 3, 0, 0, 3)));

    // 12: the addition needed one repeat.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, true).resolve(Other, ig(ClassifiedOther));
    f.exchange(1, false).resolve(BringMe, Applied);
    f.exchange(0, false);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped");
    v.push(("s2_one_repeat", f.finish(|w| deliver(w, &FULL)), ex(true, 4, 1, 1, 4)));

    // 13: the cup never arrives.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, false).resolve(BringMe, ig(CriteriaMismatch));
    f.exchange(0, false);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped");
    v.push(("s2_no_cup", f.finish(|w| deliver(w, &BREAKFAST)), ex(false, 3, 0, 0, 3)));

    // 14: stopped from the interrupt topic, not by a spoken command.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, false).resolve(BringMe, Applied);
    f.stopped(None).state("stopped");
    v.push(("s2_button_stop", f.finish(|w| deliver(w, &FULL)), ex(false, 2, 0, 0, 2)));

    // 15: stop heard, but the robot was reset afterwards.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, true).resolve(BringMe, Applied);
    f.exchange(0, false);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped").state("idle");
    v.push(("s2_reset_after_stop", f.finish(|w| deliver(w, &FULL)), ex(false, 3, 1, 0, 3)));

    // 16: three repeats.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, true).resolve(Other, ig(ClassifiedOther));
    f.exchange(1, true).resolve(Other, ig(ClassifiedOther));
    f.exchange(2, true);
    f.exchange(3, false).resolve(BringMe, Applied);
    f.exchange(0, false);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped");
    v.push(("s2_three_repeats", f.finish(|w| deliver(w, &FULL)), ex(true, 6, 3, 3, 5)));

    // 17: silent trial.
    let f = Fixture::new(Scenario::BreakfastStop);
    v.push(("s2_silent", f.finish(|_| {}), ex(false, 0, 0, 0, 0)));

    // 18: every transcript corrupted yet understood, plus an unknown command type.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, true).resolve(SettingBreakfast, Applied);
    f.exchange(0, true).resolve(BringMe, Applied);
    f.resolve(Other, ig(UnknownCommandType));
    f.exchange(0, true);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped");
    v.push(("s2_all_corrupted", f.finish(|w| deliver(w, &FULL)), ex(true, 3, 3, 0, 4)));

    // 19: stopped after two items with the cup still queued.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, false).resolve(BringMe, Queued);
    f.exchange(0, false);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped");
    v.push(("s2_early_stop", f.finish(|w| deliver(w, &[Bowl, Cereal])), ex(false, 3, 0, 0, 3)));

    // 20: malformed addition, repeated twice.
    let mut f = Fixture::new(Scenario::BreakfastStop);
    f.exchange(0, false).resolve(SettingBreakfast, Applied);
    f.exchange(0, false).resolve(BringMe, ig(Malformed));
    f.exchange(1, true);
    f.exchange(2, false).resolve(BringMe, Applied);
    f.exchange(0, false);
    let stop = f.resolve(Stop, Stopped);
    f.stopped(Some(stop)).state("stopped");
    v.push(("s2_malformed_repeat", f.finish(|w| deliver(w, &FULL)), ex(true, 5, 1, 2, 4)));

    v
}

/// Hand-computed aggregate for one group of fixtures.
#[derive(Debug, Clone, Copy)]
pub struct Aggregate {
    pub successes: usize,
    pub ies_mean: f64,
    pub ies_sd: f64,
    pub rr_mean: f64,
    pub rr_sd: f64,
    pub commands: usize,
    pub ignored: usize,
    pub unresolved: usize,
}

/// IES values 0, 1/3, 0, 1/2, 1/2, 1/2, 0, 1/3, 0; repetitions 0, 1, 2, 0, 1.
pub fn scenario_one_aggregate() -> Aggregate {
    Aggregate {
        successes: 5,
        ies_mean: 13.0 / 54.0,
        ies_sd: 73f64.sqrt() / 36.0,
        rr_mean: 0.8,
        rr_sd: 0.7f64.sqrt(),
        commands: 24,
        ignored: 8,
        unresolved: 1,
    }
}

/// IES values 0, 1/4, 0, 0, 1/3, 1/2, 1, 0, 1/5; repetitions 0, 1, 3, 0, 2.
pub fn scenario_two_aggregate() -> Aggregate {
    Aggregate {
        successes: 5,
        ies_mean: 137.0 / 540.0,
        ies_sd: (7163.0f64 / 64800.0).sqrt(),
        rr_mean: 1.2,
        rr_sd: 1.7f64.sqrt(),
        commands: 31,
        ignored: 6,
        unresolved: 1,
    }
}

/// Compares computed metrics with a hand-computed aggregate.
pub fn check_aggregate(m: &adaptive_hri::bench::Metrics, want: &Aggregate, tol: f64) -> Result<(), String> {
    let close = |name: &str, got: f64, exp: f64| {
        if (got - exp).abs() <= tol {
            Ok(())
        } else {
            Err(format!("{name}: got {got}, expected {exp}"))
        }
    };
    if m.successes != want.successes {
        return Err(format!("successes: got {}, expected {}", m.successes, want.successes));
    }
    close("success rate", m.success_rate, want.successes as f64 / m.trials as f64)?;
    close("IES mean", m.ies.mean, want.ies_mean)?;
    close("IES sd", m.ies.sd, want.ies_sd)?;
    close("RR mean", m.rr.mean, want.rr_mean)?;
    close("RR sd", m.rr.sd, want.rr_sd)?;
    if (m.commands, m.ignored, m.unresolved) != (want.commands, want.ignored, want.unresolved) {
        return Err(format!(
            "commands/ignored/unresolved: got {:?}, expected {:?}",
            (m.commands, m.ignored, m.unresolved),
            (want.commands, want.ignored, want.unresolved)
        ));
    }
    close("ignored rate", m.ignored_rate, want.ignored as f64 / want.commands as f64)
}
