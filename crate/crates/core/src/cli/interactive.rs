//! Line-driven session on standard input.
//!
//! Each typed line is spoken at the current tick, then the simulation runs
//! `interactive.ticks_per_line` ticks. Lines starting with `:` are console
//! commands: `:age <group>`, `:wait <ticks>`, `:stop`. `reset` and `quit`
//! are also understood. After the robot stops, anything but `reset` ends the
//! session.

use std::io::{BufRead, Write};

use crate::bus::{Bus, Payload, Subscription, Topic};
use crate::config::RunConfig;
use crate::planner::{InterruptMsg, Mode};
use crate::session::{make_backend, Session};
use crate::speech::AgeGroup;
use crate::world::{Placement, WorldState};

use super::gateway::{Gateway, InboundFrame};
use super::CliError;

struct Console<'a, W: Write> {
    session: Session,
    watch: Subscription,
    out: &'a mut W,
}

impl<W: Write> Console<'_, W> {
    fn say(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.out, "{text}").map_err(out_err)
    }

    fn run(&mut self, ticks: u64) -> Result<(), CliError> {
        for _ in 0..ticks {
            self.session.step();
            self.flush_responses()?;
        }
        Ok(())
    }

    fn flush_responses(&mut self) -> Result<(), CliError> {
        for env in self.session.bus().drain(&self.watch) {
            if let Payload::Response(r) = env.payload {
                writeln!(self.out, "[{:>4}] robot: {}", env.tick, r.response.text).map_err(out_err)?;
            }
        }
        Ok(())
    }
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Io { path: "<stdout>".into(), source: e }
}

/// One-line summary of where the robot and the objects are.
pub fn describe_final(step: &str, w: &WorldState) -> String {
    let holding = w
        .robot
        .holding
        .and_then(|id| w.object(id))
        .map_or("nothing".to_string(), |o| o.spec.object_type.as_str().to_string());
    let objects: Vec<String> = w
        .objects
        .values()
        .map(|o| {
            let at = match o.placement {
                Placement::At(l) => l.as_str(),
                Placement::HeldByRobot => "robot",
            };
            format!("{}@{at}", o.spec.object_type.as_str())
        })
        .collect();
    format!(
        "final: step={step} at={} holding={holding} objects=[{}]",
        w.robot.base_location.as_str(),
        objects.join(", ")
    )
}

pub fn run_interactive<R: BufRead, W: Write>(cfg: &RunConfig, input: R, out: &mut W) -> Result<(), CliError> {
    let backend = make_backend(cfg, cfg.seed)?;
    let bus = Bus::new();
    let watch = bus.subscribe(&[Topic::ResponseOut]);
    let session = Session::on_bus(bus, cfg, cfg.seed, backend);
    let mut c = Console { session, watch, out };
    let mut age = cfg.trials.true_age;
    let per_line = cfg.interactive.ticks_per_line;
    c.say("Robot ready. Type a request, ':stop' to interrupt, 'quit' to leave.")?;
    let mut awaiting_reset = false;
    for line in input.lines() {
        let line = line.map_err(|e| CliError::Io { path: "<stdin>".into(), source: e })?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if awaiting_reset {
            if !text.eq_ignore_ascii_case("reset") {
                c.say("Leaving the robot stopped.")?;
                let step = c.session.executor().symbolic_state(c.session.world()).step;
                let summary = describe_final(&step, c.session.world());
                return c.say(&summary);
            }
            awaiting_reset = false;
        }
        let mut parts = text.splitn(2, ' ');
        match (parts.next().unwrap_or(""), parts.next().map(str::trim)) {
            ("quit" | "exit", None) => break,
            ("reset", None) => {
                c.session.interrupt(InterruptMsg::Reset);
                c.run(1)?;
                continue;
            }
            (":stop", None) => {
                c.session.interrupt(InterruptMsg::Stop);
            }
            (":age", Some(g)) => {
                match AgeGroup::parse(g) {
                    Some(group) => age = group,
                    None => c.say(&format!("unknown age group {g:?}"))?,
                }
                continue;
            }
            (":wait", Some(n)) => {
                match n.parse() {
                    Ok(n) => c.run(n)?,
                    Err(_) => c.say("usage: :wait <ticks>")?,
                }
                continue;
            }
            _ => {
                c.session.say(text, age, 0);
            }
        }
        c.run(per_line)?;
        if c.session.executor().mode() == Mode::Stopped {
            c.say("The robot has stopped. Type 'reset' to continue; anything else ends the session.")?;
            awaiting_reset = true;
        }
    }
    // Let the current plan finish before reporting.
    let mut budget = cfg.trials.max_ticks;
    while c.session.executor().mode() == Mode::Executing && budget > 0 {
        c.run(1)?;
        budget -= 1;
    }
    let step = c.session.executor().symbolic_state(c.session.world()).step;
    let summary = describe_final(&step, c.session.world());
    c.say(&summary)
}

/// Forwards standard-input lines to the gateway session as utterances.
pub fn forward_stdin(gw: &Gateway) {
    for line in std::io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        let text = line.trim();
        match text {
            "" => {}
            ":stop" => gw.send(InboundFrame::Interrupt),
            "reset" => gw.send(InboundFrame::Reset),
            _ => gw.send(InboundFrame::Utterance { text: text.to_string(), age: None }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session_output(cfg: &RunConfig, input: &str) -> String {
        let mut out = Vec::new();
        run_interactive(cfg, input.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn typed_scenario_one_matches_the_script() {
        let mut cfg = RunConfig::default();
        cfg.interactive.ticks_per_line = 8;
        let out = session_output(&cfg, "Bring me a cup.\nBring me a bowl instead of the cup.\n");
        assert!(out.contains("robot: Getting the cup."), "{out}");
        let last = out.lines().last().unwrap();
        assert!(last.contains("step=idle"), "{last}");
        assert!(last.contains("bowl@table"), "{last}");
        assert!(last.contains("cup@cabinet"), "{last}");
    }

    #[test]
    fn stop_offers_reset_and_decline_ends() {
        let mut cfg = RunConfig::default();
        cfg.interactive.ticks_per_line = 5;
        let out = session_output(&cfg, "Set the table for breakfast.\nStop!\nno\nBring me a cup.\n");
        assert!(out.contains("Type 'reset' to continue"), "{out}");
        assert!(out.contains("Leaving the robot stopped."));
        assert!(out.lines().last().unwrap().contains("step=stopped"));
        assert!(!out.contains("Getting the cup."));
    }

    #[test]
    fn reset_resumes() {
        let mut cfg = RunConfig::default();
        cfg.interactive.ticks_per_line = 5;
        let out = session_output(&cfg, "Stop!\nreset\nBring me a cup.\n");
        assert!(out.contains("Getting the cup."), "{out}");
        assert!(out.lines().last().unwrap().contains("cup@table"));
    }

    #[test]
    fn age_switches_verbosity() {
        let mut cfg = RunConfig::default();
        cfg.interactive.ticks_per_line = 30;
        let out = session_output(&cfg, ":age seventies\nBring me a cup.\n");
        assert!(out.contains("Opening the cabinet."), "{out}");
    }
}
