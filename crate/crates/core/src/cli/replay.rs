//! Text rendering of a stored trial log.

use std::io::{self, Write};

use crate::bench::trials::TrialLog;
use crate::bus::{Envelope, Payload};
use crate::events::TrialEvent;
use crate::planner::Disposition;

use super::interactive::describe_final;

fn describe(env: &Envelope) -> Option<String> {
    Some(match &env.payload {
        Payload::Utterance(u) => format!("user     {:?} (attempt {})", u.text, u.attempt),
        Payload::Transcript(t) => {
            format!("heard    {:?} [{:?}, age {}]", t.transcript.text, t.transcript.corruption, t.age_group.as_str())
        }
        Payload::Command(c) => format!("command  {}", serde_json::to_string(&c.command).ok()?),
        Payload::Response(r) => format!("robot    {}", r.response.text),
        Payload::Interrupt(i) => format!("interrupt {i:?}"),
        Payload::RobotState(_) => return None,
        Payload::TrialEvent(ev) => match ev {
            TrialEvent::WorldSnapshot { label, .. } => format!("snapshot {label}"),
            TrialEvent::Disposition { command_seq, kind, disposition } => {
                let d = match disposition {
                    Disposition::Ignored(r) => format!("ignored ({})", r.as_str()),
                    d => format!("{d:?}").to_lowercase(),
                };
                format!("planner  {kind} #{} {d}", command_seq.map_or("-".into(), |s| s.to_string()))
            }
            TrialEvent::ActionStarted { index, action, .. } => {
                let at = action.location.map_or("", |l| l.as_str());
                format!("start    {index}: {} {at}", action.kind.as_str())
            }
            TrialEvent::ActionCompleted { index, kind, .. } => format!("done     {index}: {}", kind.as_str()),
            TrialEvent::ActionAbandoned { index, kind, .. } => format!("abandon  {index}: {}", kind.as_str()),
            other => format!("event    {}", serde_json::to_string(other).ok()?),
        },
    })
}

/// Prints the trial tick by tick and ends with a `final:` line.
pub fn render<W: Write>(log: &TrialLog, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "trial {} scenario {} seed {} ({} envelopes)",
        log.header.trial,
        log.scenario(),
        log.header.seed,
        log.envelopes.len()
    )?;
    let mut last_step = String::new();
    for env in &log.envelopes {
        if let Payload::RobotState(s) = &env.payload {
            if s.step != last_step {
                writeln!(out, "t={:<4} state    {}", env.tick, s.step)?;
                last_step = s.step.clone();
            }
            continue;
        }
        if let Some(line) = describe(env) {
            writeln!(out, "t={:<4} {line}", env.tick)?;
        }
    }
    let world = log.envelopes.iter().rev().find_map(|e| match &e.payload {
        Payload::TrialEvent(TrialEvent::WorldSnapshot { world, .. }) => Some(world),
        _ => None,
    });
    writeln!(out, "outcome: {}", if log.outcome.success { "success" } else { "failure" })?;
    match world {
        Some(w) => writeln!(out, "{}", describe_final(&last_step, w)),
        None => writeln!(out, "final: step={last_step}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::trials::run_trials;
    use crate::bench::Scenario;
    use crate::config::RunConfig;

    #[test]
    fn scenario_two_replay_ends_stopped() {
        let logs = run_trials(Scenario::BreakfastStop, 1, 3, &RunConfig::default());
        let mut out = Vec::new();
        render(&logs[0], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("final: step=stopped"), "{last}");
        assert!(text.contains("user     \"Stop!\""));
    }
}
