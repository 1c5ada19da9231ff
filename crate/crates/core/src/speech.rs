//! Simulated speech front-end.
//!
//! Text-level stand-ins for voice activity detection, speech recognition and
//! age recognition: utterances are corrupted by premature cut-off or by a word
//! substitution, age groups are misclassified into an adjacent group, and the
//! binary young/old estimate is smoothed over the last five interactions.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bus::{Bus, Payload, Subscription, Topic};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    Teens,
    Twenties,
    Thirties,
    Forties,
    Fifties,
    Sixties,
    Seventies,
    Eighties,
    Nineties,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 9] = [
        AgeGroup::Teens,
        AgeGroup::Twenties,
        AgeGroup::Thirties,
        AgeGroup::Forties,
        AgeGroup::Fifties,
        AgeGroup::Sixties,
        AgeGroup::Seventies,
        AgeGroup::Eighties,
        AgeGroup::Nineties,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::Teens => "teens",
            AgeGroup::Twenties => "twenties",
            AgeGroup::Thirties => "thirties",
            AgeGroup::Forties => "forties",
            AgeGroup::Fifties => "fifties",
            AgeGroup::Sixties => "sixties",
            AgeGroup::Seventies => "seventies",
            AgeGroup::Eighties => "eighties",
            AgeGroup::Nineties => "nineties",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == s)
    }

    pub fn adjacent(self) -> Vec<AgeGroup> {
        let i = self.index();
        let mut out = Vec::with_capacity(2);
        if i > 0 {
            out.push(Self::ALL[i - 1]);
        }
        if let Some(next) = Self::from_index(i + 1) {
            out.push(next);
        }
        out
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryAge {
    Young,
    Old,
}

impl BinaryAge {
    fn encoding(self) -> u32 {
        match self {
            BinaryAge::Young => 0,
            BinaryAge::Old => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    Clean,
    Cutoff,
    Substituted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub text: String,
    pub confidence: f64,
    pub corruption: Corruption,
}

impl Transcript {
    /// A transcript passed through unchanged with full confidence.
    pub fn clean(text: impl Into<String>) -> Self {
        Self { text: text.into(), confidence: 1.0, corruption: Corruption::Clean }
    }

    pub fn is_corrupted(&self) -> bool {
        self.corruption != Corruption::Clean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub p_cutoff: f64,
    pub p_substitute: f64,
    pub substitution_table: BTreeMap<String, String>,
    pub clean_confidence_range: [f64; 2],
    pub corrupt_confidence_range: [f64; 2],
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            p_cutoff: 0.0,
            p_substitute: 0.0,
            substitution_table: BTreeMap::new(),
            clean_confidence_range: [0.85, 1.0],
            corrupt_confidence_range: [0.3, 0.75],
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be in [0, 1], got {p}")))
    }
}

fn check_range(name: &str, [lo, hi]: [f64; 2]) -> Result<(), ConfigError> {
    if 0.0 <= lo && lo <= hi && hi <= 1.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")))
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_probability("p_cutoff", self.p_cutoff)?;
        check_probability("p_substitute", self.p_substitute)?;
        if self.p_cutoff + self.p_substitute > 1.0 + 1e-12 {
            return Err(ConfigError::Invalid("p_cutoff + p_substitute must not exceed 1".into()));
        }
        check_range("clean_confidence_range", self.clean_confidence_range)?;
        check_range("corrupt_confidence_range", self.corrupt_confidence_range)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgeNoiseConfig {
    pub p_adjacent: f64,
    /// First group classified as old.
    pub old_from: AgeGroup,
}

impl Default for AgeNoiseConfig {
    fn default() -> Self {
        Self { p_adjacent: 0.0, old_from: AgeGroup::Fifties }
    }
}

impl AgeNoiseConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_probability("p_adjacent", self.p_adjacent)
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Corrupts an utterance the way a noisy speech pipeline would.
///
/// Exactly one uniform draw decides the corruption branch, so the random
/// stream advances identically regardless of the outcome of earlier branches.
pub fn corrupt<R: Rng + ?Sized>(utterance: &str, rng: &mut R, cfg: &NoiseConfig) -> Transcript {
    let branch: f64 = rng.random();
    let words: Vec<&str> = utterance.split_whitespace().collect();

    if branch < cfg.p_cutoff {
        let keep = if words.len() > 1 { rng.random_range(0..words.len()) } else { 0 };
        return Transcript {
            text: words[..keep].join(" "),
            confidence: uniform_in(rng, cfg.corrupt_confidence_range),
            corruption: Corruption::Cutoff,
        };
    }

    if branch < cfg.p_cutoff + cfg.p_substitute {
        let candidates: Vec<usize> = words
            .iter()
            .enumerate()
            .filter(|(_, w)| cfg.substitution_table.contains_key(&normalize_word(w)))
            .map(|(i, _)| i)
            .collect();
        if !candidates.is_empty() {
            let at = candidates[rng.random_range(0..candidates.len())];
            let original = words[at];
            let replacement = &cfg.substitution_table[&normalize_word(original)];
            let trailing: String = original
                .chars()
                .rev()
                .take_while(|c| !c.is_alphanumeric())
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect();
            let replaced = format!("{replacement}{trailing}");
            let text = words
                .iter()
                .enumerate()
                .map(|(i, w)| if i == at { replaced.as_str() } else { w })
                .collect::<Vec<_>>()
                .join(" ");
            return Transcript {
                text,
                confidence: uniform_in(rng, cfg.corrupt_confidence_range),
                corruption: Corruption::Substituted,
            };
        }
    }

    Transcript {
        text: utterance.to_string(),
        confidence: uniform_in(rng, cfg.clean_confidence_range),
        corruption: Corruption::Clean,
    }
}

fn normalize_word(w: &str) -> String {
    w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

pub fn estimate_age<R: Rng + ?Sized>(true_group: AgeGroup, rng: &mut R, cfg: &AgeNoiseConfig) -> AgeGroup {
    let draw: f64 = rng.random();
    if draw >= cfg.p_adjacent {
        return true_group;
    }
    let options = true_group.adjacent();
    options[rng.random_range(0..options.len())]
}

pub fn to_binary(group: AgeGroup) -> BinaryAge {
    to_binary_with(group, AgeGroup::Fifties)
}

pub fn to_binary_with(group: AgeGroup, old_from: AgeGroup) -> BinaryAge {
    if group >= old_from {
        BinaryAge::Old
    } else {
        BinaryAge::Young
    }
}

pub const SMOOTHING_WINDOW: usize = 5;

/// Majority smoother over the last five binary estimates. An exact tie keeps
/// the previous output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeSmoother {
    window: VecDeque<BinaryAge>,
    last_output: Option<BinaryAge>,
}

impl AgeSmoother {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn window(&self) -> impl Iterator<Item = BinaryAge> + '_ {
        self.window.iter().copied()
    }

    pub fn last_output(&self) -> Option<BinaryAge> {
        self.last_output
    }

    pub fn smooth(&mut self, estimate: BinaryAge) -> BinaryAge {
        self.window.push_back(estimate);
        while self.window.len() > SMOOTHING_WINDOW {
            self.window.pop_front();
        }
        // Compare 2 * sum against len to stay in integers.
        let old_votes: u32 = self.window.iter().map(|a| a.encoding()).sum();
        let twice = 2 * old_votes as usize;
        let out = match twice.cmp(&self.window.len()) {
            std::cmp::Ordering::Greater => BinaryAge::Old,
            std::cmp::Ordering::Less => BinaryAge::Young,
            std::cmp::Ordering::Equal => self.last_output.unwrap_or(estimate),
        };
        self.last_output = Some(out);
        out
    }
}

/// Value-style wrapper matching the `(smoother, estimate) -> (smoother, output)` shape.
pub fn smooth(mut s: AgeSmoother, e: BinaryAge) -> (AgeSmoother, BinaryAge) {
    let out = s.smooth(e);
    (s, out)
}

/// What the user said, before the speech pipeline touches it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMsg {
    pub text: String,
    pub true_age: AgeGroup,
    /// Zero for a first submission, incremented on each repetition.
    #[serde(default)]
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMsg {
    pub source_seq: u64,
    pub transcript: Transcript,
    pub age_group: AgeGroup,
    pub age: BinaryAge,
}

/// Bus node: drains `utterance_in`, publishes `transcript`.
pub struct SpeechFrontEnd {
    noise: NoiseConfig,
    age_noise: AgeNoiseConfig,
    smoother: AgeSmoother,
    input: Subscription,
}

impl SpeechFrontEnd {
    pub fn new(bus: &Bus, noise: NoiseConfig, age_noise: AgeNoiseConfig) -> Self {
        Self {
            noise,
            age_noise,
            smoother: AgeSmoother::new(),
            input: bus.subscribe(&[Topic::UtteranceIn]),
        }
    }

    pub fn smoother(&self) -> &AgeSmoother {
        &self.smoother
    }

    pub fn step<R: Rng + ?Sized>(&mut self, bus: &Bus, rng: &mut R) {
        for env in bus.drain(&self.input) {
            let Payload::Utterance(u) = &env.payload else { continue };
            // VAD stand-in: one utterance per submitted line.
            let text = u.text.lines().next().unwrap_or("").trim();
            let transcript = if text.is_empty() {
                Transcript { text: String::new(), confidence: 0.0, corruption: Corruption::Clean }
            } else {
                corrupt(text, rng, &self.noise)
            };
            let group = estimate_age(u.true_age, rng, &self.age_noise);
            let age = self.smoother.smooth(to_binary_with(group, self.age_noise.old_from));
            let msg = TranscriptMsg { source_seq: env.seq, transcript, age_group: group, age };
            bus.publish(Topic::Transcript, Payload::Transcript(msg))
                .expect("transcript topic accepts transcript payloads");
        }
    }
}
