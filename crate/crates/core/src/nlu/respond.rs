//! Fixed, age-conditioned response templates.

use crate::events::TrialEvent;
use crate::planner::{ActionKind, Disposition, IgnoreReason};
use crate::speech::BinaryAge;

use super::grammar::unknown_noun;
use super::{Command, CommandKind, Response, ResponseCategory, SymbolicState, Verbosity, VerbosityPolicy};

use ResponseCategory::*;

fn object(cmd_q: Option<&crate::world::ObjectQuery>) -> String {
    cmd_q.map_or_else(|| "object".to_string(), |q| q.describe())
}

/// Reply to a freshly extracted command.
pub fn acknowledge(cmd: &Command, text: &str, state: &SymbolicState, age: BinaryAge) -> Response {
    let old = age == BinaryAge::Old;
    if cmd.validate().is_err() {
        return Response::new(Refusal, "Sorry, I could not work out the details of that request.");
    }
    match cmd.kind {
        CommandKind::Other => {
            let text = match (&cmd.unrecognized_kind, unknown_noun(text)) {
                (Some(_), _) => "Sorry, I cannot do that.".to_string(),
                (None, Some(noun)) => format!("Sorry, I don't know what '{noun}' is."),
                (None, None) => "Sorry, I did not understand that.".to_string(),
            };
            return Response::new(Refusal, text);
        }
        CommandKind::Stop => {
            let text = if old {
                "I am stopping right now. Say reset when you want to continue."
            } else {
                "Stopping."
            };
            return Response::new(Confirmation, text);
        }
        _ => {}
    }
    if state.step == "stopped" {
        return Response::new(Refusal, "I have stopped. Please reset me first.");
    }
    let add = object(cmd.add.as_ref());
    let mut text = match (cmd.kind, old) {
        (CommandKind::BringMe, false) => format!("Getting the {add}."),
        (CommandKind::BringMe, true) => format!("I will get the {add} for you and tell you what I am doing."),
        (CommandKind::ReplaceObject, false) => match &cmd.delete {
            Some(d) => format!("Okay, the {add} instead of the {}.", d.describe()),
            None => format!("Okay, the {add} instead."),
        },
        (CommandKind::ReplaceObject, true) => match &cmd.delete {
            Some(d) => format!("Alright, I will bring you the {add} instead of the {}.", d.describe()),
            None => format!("Alright, I will bring you the {add} instead."),
        },
        (CommandKind::SettingBreakfast, false) => "Setting the table for breakfast.".to_string(),
        (CommandKind::SettingBreakfast, true) => {
            "I will set the table for breakfast and tell you each step.".to_string()
        }
        (CommandKind::ChangeLocation, _) => {
            let to = cmd.destination.map_or("table", |d| d.as_str());
            if old {
                format!("Alright, I will put it on the {to} instead.")
            } else {
                format!("Okay, on the {to}.")
            }
        }
        (CommandKind::Stop | CommandKind::Other, _) => unreachable!("handled above"),
    };
    if state.is_busy() && !state.interruptable {
        text.push_str(&format!(" I will do that as soon as I finish the current {} step.", state.step.replace('_', " ")));
    }
    Response::new(Confirmation, text)
}

pub fn reask() -> Response {
    Response::new(Refusal, "Sorry, could you say that again?")
}

pub fn backend_error() -> Response {
    Response::new(Error, "Sorry, I cannot process requests right now.")
}

/// Voices a planner event, or stays silent, according to the age policy.
pub fn narrate(event: &TrialEvent, age: BinaryAge, policy: &VerbosityPolicy) -> Option<Response> {
    let verbose = policy.level(age) == Verbosity::Narrate;
    match event {
        TrialEvent::ActionStarted { action, from, .. } if verbose => {
            let loc = action.location.map_or("there", |l| l.as_str());
            let obj = object(action.object.as_ref());
            let text = match action.kind {
                ActionKind::Navigate => format!("Moving from {from} to {loc}."),
                ActionKind::OpenContainer => format!("Opening the {loc}."),
                ActionKind::CloseContainer => format!("Closing the {loc}."),
                ActionKind::Grasp => format!("Picking up the {obj}."),
                ActionKind::Place => format!("Placing the {obj} on the {loc}."),
                ActionKind::ReturnObject => format!("Putting the {obj} back in the {loc}."),
                ActionKind::Perceive => return None,
            };
            Some(Response::new(Narration, text))
        }
        TrialEvent::Replanned { command_seq: Some(_), .. } if verbose => {
            Some(Response::new(Narration, "Changing my plan now."))
        }
        TrialEvent::Retry { .. } if verbose => {
            Some(Response::new(Narration, "That grasp did not work, I will try again."))
        }
        TrialEvent::PlanCompleted => Some(Response::new(
            Completion,
            if verbose { "I have finished the task." } else { "Done." },
        )),
        TrialEvent::PlanFailed { .. } => Some(Response::new(Error, "Sorry, I could not finish the task.")),
        TrialEvent::Disposition { disposition: Disposition::Ignored(reason), .. } => {
            let text = match reason {
                IgnoreReason::UnavailableObject => "Sorry, that object is not in the kitchen.",
                IgnoreReason::CriteriaMismatch => "Sorry, I cannot find an object matching that description.",
                IgnoreReason::TooLate => "Sorry, it is too late to change that.",
                // Already refused when the command was routed.
                IgnoreReason::ClassifiedOther | IgnoreReason::UnknownCommandType | IgnoreReason::Malformed => {
                    return None
                }
            };
            Some(Response::new(Refusal, text))
        }
        TrialEvent::Stopped { command_seq: None } => Some(Response::new(Confirmation, "Stopped.")),
        TrialEvent::Reset => Some(Response::new(Confirmation, "Ready for a new request.")),
        _ => None,
    }
}
