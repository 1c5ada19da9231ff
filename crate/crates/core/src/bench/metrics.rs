//! Trial metrics: incomplete/erroneous sentence rate (IES), repetition rate
//! (RR), success and the executed-command breakdown.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bus::Payload;
use crate::events::TrialEvent;
use crate::nlu::CommandKind;
use crate::planner::{Disposition, IgnoreReason};

use super::trials::{score_trial, TrialLog};
use super::{MeanSd, Scenario};

/// Counts taken from one trial log.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrialStats {
    pub success: bool,
    pub transcripts: usize,
    pub corrupted: usize,
    pub resubmissions: usize,
    /// Final disposition of every command the planner received, by seq.
    pub dispositions: BTreeMap<u64, (CommandKind, Disposition)>,
}

impl TrialStats {
    pub fn of(log: &TrialLog) -> Self {
        let mut s = TrialStats { success: score_trial(log, log.scenario()), ..Default::default() };
        for env in &log.envelopes {
            match &env.payload {
                Payload::Utterance(u) if u.attempt > 0 => s.resubmissions += 1,
                Payload::Transcript(t) => {
                    s.transcripts += 1;
                    s.corrupted += t.transcript.is_corrupted() as usize;
                }
                Payload::TrialEvent(TrialEvent::Disposition { command_seq: Some(seq), kind, disposition }) => {
                    s.dispositions.insert(*seq, (*kind, disposition.clone()));
                }
                _ => {}
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: Option<Scenario>,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Per-trial share of corrupted transcripts.
    pub ies: MeanSd,
    /// Re-submissions per successful trial.
    pub rr: MeanSd,
    pub commands: usize,
    /// Commands the planner acted on (applied or stop), by kind.
    pub executed: BTreeMap<CommandKind, usize>,
    pub ignored: usize,
    pub ignored_reasons: BTreeMap<IgnoreReason, usize>,
    /// Commands still queued when their trial ended.
    pub unresolved: usize,
    pub ignored_rate: f64,
}

/// Aggregates logs from one scenario. Trials without transcripts do not enter
/// the IES mean.
pub fn compute_metrics(logs: &[TrialLog]) -> Metrics {
    let scenario = logs.first().map(TrialLog::scenario).filter(|s| logs.iter().all(|l| l.scenario() == *s));
    let stats: Vec<TrialStats> = logs.iter().map(TrialStats::of).collect();
    let successes = stats.iter().filter(|s| s.success).count();
    let ies: Vec<f64> = stats
        .iter()
        .filter(|s| s.transcripts > 0)
        .map(|s| s.corrupted as f64 / s.transcripts as f64)
        .collect();
    let rr: Vec<f64> = stats.iter().filter(|s| s.success).map(|s| s.resubmissions as f64).collect();
    let mut executed = BTreeMap::new();
    let mut ignored_reasons = BTreeMap::new();
    let (mut commands, mut ignored, mut unresolved) = (0, 0, 0);
    for (kind, d) in stats.iter().flat_map(|s| s.dispositions.values()) {
        commands += 1;
        match d {
            Disposition::Applied | Disposition::Stopped => *executed.entry(*kind).or_insert(0) += 1,
            Disposition::Ignored(r) => {
                ignored += 1;
                *ignored_reasons.entry(*r).or_insert(0) += 1;
            }
            Disposition::Queued => unresolved += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Metrics {
        scenario,
        trials: logs.len(),
        successes,
        success_rate: ratio(successes, logs.len()),
        ies: MeanSd::of(&ies),
        rr: MeanSd::of(&rr),
        commands,
        executed,
        ignored,
        ignored_reasons,
        unresolved,
        ignored_rate: ratio(ignored, commands),
    }
}

/// Row order of the executed-command table for each scenario.
pub fn table2_rows(scenario: Option<Scenario>) -> Vec<CommandKind> {
    match scenario {
        Some(Scenario::ReplaceCup) => vec![CommandKind::BringMe, CommandKind::ReplaceObject],
        Some(Scenario::BreakfastStop) => vec![CommandKind::SettingBreakfast, CommandKind::BringMe, CommandKind::Stop],
        None => CommandKind::ALL.iter().copied().filter(|k| *k != CommandKind::Other).collect(),
    }
}

impl Metrics {
    /// Plain-text report: headline rates, then the executed-command table.
    pub fn render(&self) -> String {
        let pct = |a: usize| if self.commands == 0 { 0.0 } else { 100.0 * a as f64 / self.commands as f64 };
        let mut s = String::new();
        let title = self.scenario.map_or("mixed scenarios".to_string(), |sc| format!("Scenario {sc}"));
        let _ = writeln!(s, "{title}: {} trials", self.trials);
        let _ = writeln!(s, "success rate   {}/{} ({:.2}%)", self.successes, self.trials, 100.0 * self.success_rate);
        let _ = writeln!(s, "IES            {:.2}% ± {:.2}", 100.0 * self.ies.mean, 100.0 * self.ies.sd);
        let _ = writeln!(s, "RR             {:.4} ± {:.4}", self.rr.mean, self.rr.sd);
        let _ = writeln!(s, "Executed commands");
        let _ = writeln!(s, "  {:<18} {:>6} {:>8}", "command", "count", "share");
        for k in table2_rows(self.scenario) {
            let n = self.executed.get(&k).copied().unwrap_or(0);
            let _ = writeln!(s, "  {:<18} {:>6} {:>7.2}%", k.as_str(), n, pct(n));
        }
        let _ = writeln!(s, "  {:<18} {:>6} {:>7.2}%", "ignored", self.ignored, pct(self.ignored));
        let _ = writeln!(s, "  {:<18} {:>6}", "total", self.commands);
        s
    }
}
