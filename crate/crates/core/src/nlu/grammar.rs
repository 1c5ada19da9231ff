//! Slot-filling grammar for kitchen commands.
//!
//! The parser is total: any string maps to a [`Command`], with
//! [`CommandKind::Other`] absorbing everything it cannot make sense of.
//!
//! Recognition works on lowercase word tokens. Object mentions are a type noun
//! plus the color/size adjectives that precede it since the previous mention;
//! storage locations attach to the nearest mention as its source. Sentence
//! level cues then pick the command kind, in this order: stop words, explicit
//! replacement markers ("instead of", "rather than", "in place of", "replace X
//! with Y", "swap X for Y"), breakfast, bare "instead" (which resolves the
//! replaced object from context), a plain object request, and finally a bare
//! placement target, which is a change of destination.

use crate::world::{Color, LocationId, ObjectQuery, ObjectType, Size};

use super::{Command, CommandKind, DialogueContext};

const STOP_WORDS: &[&str] = &["stop", "halt", "freeze"];
const SWAP_VERBS: &[&str] = &["replace", "replacing", "swap", "exchange", "switch"];
const SWAP_LINKS: &[&str] = &["with", "for", "by"];
const TABLE_VERBS: &[&str] = &["set", "setting", "lay", "laying", "prepare"];

/// Words that are neither slots nor unknown objects.
const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "me", "please", "bring", "get", "fetch", "give", "grab", "hand", "pass",
    "i", "id", "would", "like", "want", "need", "to", "could", "can", "you", "of", "instead",
    "some", "my", "for", "on", "from", "in", "it", "and", "also", "as", "well", "too", "now",
    "that", "this", "is", "be", "with", "eat", "have", "drink", "rather", "than", "over",
    "there", "here", "put", "place", "take", "go", "move", "one", "not", "but", "just", "ok",
    "okay", "robot", "hey", "thanks", "thank", "d", "ll", "s", "t", "m", "out", "up", "let",
    "lets", "do", "will", "should", "what", "about", "maybe", "actually", "sorry", "oh",
];

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Mention {
    query: ObjectQuery,
    /// Token index of the type noun.
    at: usize,
}

#[derive(Debug, Default)]
struct Analysis {
    mentions: Vec<Mention>,
    destination: Option<LocationId>,
}

fn analyze(tokens: &[String]) -> Analysis {
    let mut out = Analysis::default();
    let mut color: Option<Color> = None;
    let mut size: Option<Size> = None;
    let mut loose_locations: Vec<(usize, LocationId)> = Vec::new();

    for (i, tok) in tokens.iter().enumerate() {
        if let Some(c) = Color::from_word(tok) {
            color = Some(c);
        } else if let Some(s) = Size::from_word(tok) {
            size = Some(s);
        } else if let Some(t) = ObjectType::from_word(tok) {
            let query = ObjectQuery { object_type: Some(t), color: color.take(), size: size.take(), source_location: None };
            out.mentions.push(Mention { query, at: i });
        } else if let Some(loc) = LocationId::from_word(tok) {
            if loc.is_placement() {
                out.destination = Some(loc);
            } else {
                loose_locations.push((i, loc));
            }
        } else if matches!(tok.as_str(), "instead" | "rather" | "than" | "and" | "but" | "not") {
            color = None;
            size = None;
        }
    }

    // Storage locations bind to the nearest preceding mention, else the next one.
    for (at, loc) in loose_locations {
        let target = out
            .mentions
            .iter()
            .rposition(|m| m.at < at)
            .or_else(|| out.mentions.iter().position(|m| m.at > at));
        if let Some(idx) = target {
            out.mentions[idx].query.source_location.get_or_insert(loc);
        }
    }
    out
}

fn find_pair(tokens: &[String], first: &str, second: &str) -> Option<usize> {
    tokens.windows(2).position(|w| w[0] == first && w[1] == second)
}

fn find_phrase(tokens: &[String], phrase: &[&str]) -> Option<usize> {
    tokens
        .windows(phrase.len())
        .position(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}

fn is_breakfast(tokens: &[String]) -> bool {
    if tokens.iter().any(|t| t == "breakfast") {
        return true;
    }
    tokens.iter().enumerate().any(|(i, t)| {
        t == "table" && tokens[i.saturating_sub(3)..i].iter().any(|w| TABLE_VERBS.contains(&w.as_str()))
            && !tokens[..i].iter().any(|w| ObjectType::from_word(w).is_some())
    })
}

/// Replacement expressed in one sentence: returns (add, delete).
fn explicit_replacement(tokens: &[String], a: &Analysis) -> Option<(ObjectQuery, ObjectQuery)> {
    let marker_end = find_pair(tokens, "instead", "of")
        .map(|p| p + 1)
        .or_else(|| {
            let rather = tokens.iter().position(|t| t == "rather")?;
            tokens[rather..].iter().position(|t| t == "than").map(|p| rather + p)
        })
        .or_else(|| find_phrase(tokens, &["in", "place", "of"]).map(|p| p + 2));
    if let Some(end) = marker_end {
        let del_idx = a.mentions.iter().position(|m| m.at > end)?;
        let add_idx = (0..a.mentions.len()).find(|&i| i != del_idx)?;
        return Some((a.mentions[add_idx].query, a.mentions[del_idx].query));
    }

    let verb = tokens.iter().position(|t| SWAP_VERBS.contains(&t.as_str()))?;
    let del_idx = a.mentions.iter().position(|m| m.at > verb)?;
    let del_at = a.mentions[del_idx].at;
    let link = tokens
        .iter()
        .enumerate()
        .skip(del_at + 1)
        .find(|(_, t)| SWAP_LINKS.contains(&t.as_str()))
        .map(|(i, _)| i)?;
    let add_idx = a.mentions.iter().position(|m| m.at > link)?;
    Some((a.mentions[add_idx].query, a.mentions[del_idx].query))
}

/// Parses one transcript. Deterministic and total.
pub fn parse(text: &str, ctx: &DialogueContext) -> Command {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Command::bare(CommandKind::Other);
    }
    if tokens.iter().any(|t| STOP_WORDS.contains(&t.as_str())) {
        return Command::bare(CommandKind::Stop);
    }

    let a = analyze(&tokens);

    if let Some((add, delete)) = explicit_replacement(&tokens, &a) {
        return Command {
            kind: CommandKind::ReplaceObject,
            add: Some(add),
            delete: Some(delete),
            destination: a.destination,
            unrecognized_kind: None,
        };
    }

    if is_breakfast(&tokens) {
        return Command {
            kind: CommandKind::SettingBreakfast,
            destination: a.destination.filter(|d| *d != LocationId::Table),
            ..Command::bare(CommandKind::SettingBreakfast)
        };
    }

    let bare_instead = tokens.iter().any(|t| t == "instead");
    match (a.mentions.first(), bare_instead, a.destination) {
        (Some(m), true, dest) => Command {
            kind: CommandKind::ReplaceObject,
            add: Some(m.query),
            delete: ctx.last_add,
            destination: dest,
            unrecognized_kind: None,
        },
        (Some(m), false, dest) => Command {
            kind: CommandKind::BringMe,
            add: Some(m.query),
            delete: None,
            destination: dest,
            unrecognized_kind: None,
        },
        (None, _, Some(dest)) => Command {
            kind: CommandKind::ChangeLocation,
            destination: Some(dest),
            ..Command::bare(CommandKind::ChangeLocation)
        },
        (None, _, None) => Command::bare(CommandKind::Other),
    }
}

/// The last content word that is not part of the known vocabulary, used to
/// tell the user which object was not understood.
pub fn unknown_noun(text: &str) -> Option<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| {
            !FUNCTION_WORDS.contains(&t.as_str())
                && ObjectType::from_word(t).is_none()
                && Color::from_word(t).is_none()
                && Size::from_word(t).is_none()
                && LocationId::from_word(t).is_none()
                && !t.chars().all(|c| c.is_ascii_digit())
        })
        .last()
}
