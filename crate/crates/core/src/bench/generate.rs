//! Template expansion for the NLU benchmark.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nlu::{Command, CommandKind};
use crate::world::{Color, LocationId, ObjectQuery, ObjectType, Size};

use super::BenchError;

pub const BENCHMARK_TOML: &str = include_str!("../../config/benchmark.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BringMe,
    Replace,
    Breakfast,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::BringMe, Family::Replace, Family::Breakfast];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::BringMe => "bring_me",
            Family::Replace => "replace",
            Family::Breakfast => "breakfast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Color,
    Size,
    Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BringMeTemplate {
    pub text: String,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaceTemplate {
    pub text: String,
    #[serde(default)]
    pub new: Vec<Attribute>,
    #[serde(default)]
    pub old: Vec<Attribute>,
    #[serde(default)]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub bring_me: usize,
    pub replace: usize,
    pub breakfast: usize,
}

impl Counts {
    pub fn get(&self, f: Family) -> usize {
        match f {
            Family::BringMe => self.bring_me,
            Family::Replace => self.replace,
            Family::Breakfast => self.breakfast,
        }
    }

    pub fn total(&self) -> usize {
        self.bring_me + self.replace + self.breakfast
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateManifest {
    pub breakfast: Vec<String>,
    pub counts: Counts,
    pub bring_me: Vec<BringMeTemplate>,
    pub replace: Vec<ReplaceTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstruction {
    pub text: String,
    pub gold: Command,
    pub family: Family,
}

fn check_placeholders(text: &str, required: &[&str], forbidden: &[&str]) -> Result<(), BenchError> {
    for p in required {
        if !text.contains(p) {
            return Err(BenchError::InvalidTemplate(format!("{text:?} lacks {p}")));
        }
    }
    for p in forbidden {
        if text.contains(p) {
            return Err(BenchError::InvalidTemplate(format!("{text:?} must not contain {p}")));
        }
    }
    Ok(())
}

impl Default for TemplateManifest {
    fn default() -> Self {
        Self::from_toml(BENCHMARK_TOML).expect("embedded manifest is valid")
    }
}

impl TemplateManifest {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let m: TemplateManifest = toml::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Checks template shape. Counts are checked by [`generate_benchmark`].
    pub fn validate(&self) -> Result<(), BenchError> {
        for t in &self.bring_me {
            let has_loc = t.attributes.contains(&Attribute::Location);
            if has_loc {
                check_placeholders(&t.text, &["{obj}", "{loc}"], &["{new}", "{old}"])?;
            } else {
                check_placeholders(&t.text, &["{obj}"], &["{loc}", "{new}", "{old}"])?;
            }
        }
        for t in &self.replace {
            check_placeholders(&t.text, &["{new}", "{old}"], &["{obj}", "{loc}"])?;
            if t.new.contains(&Attribute::Location) || t.old.contains(&Attribute::Location) {
                return Err(BenchError::InvalidTemplate(format!("{:?}: replace templates carry no location", t.text)));
            }
            if let Some(n) = t.sample {
                let full = replace_expansions(t).len();
                if n > full {
                    return Err(BenchError::InvalidTemplate(format!(
                        "{:?}: sample {n} exceeds {full} expansions",
                        t.text
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Every query over the given attributes for one object type, in a fixed order.
fn queries(t: ObjectType, attrs: &[Attribute]) -> Vec<ObjectQuery> {
    let mut out = vec![ObjectQuery::of_type(t)];
    if attrs.contains(&Attribute::Color) {
        out = out.iter().flat_map(|q| Color::ALL.map(|c| q.with_color(c))).collect();
    }
    if attrs.contains(&Attribute::Size) {
        out = out.iter().flat_map(|q| Size::ALL.map(|s| q.with_size(s))).collect();
    }
    if attrs.contains(&Attribute::Location) {
        out = out.iter().flat_map(|q| LocationId::STORAGE.map(|l| q.from_location(l))).collect();
    }
    out
}

/// "small red cup": size, then color, then type.
fn phrase(q: &ObjectQuery) -> String {
    let mut words = Vec::new();
    if let Some(s) = q.size {
        words.push(s.as_str());
    }
    if let Some(c) = q.color {
        words.push(c.as_str());
    }
    if let Some(t) = q.object_type {
        words.push(t.as_str());
    }
    words.join(" ")
}

fn bring_me_expansions(t: &BringMeTemplate) -> Vec<BenchmarkInstruction> {
    ObjectType::ALL
        .iter()
        .flat_map(|&ty| queries(ty, &t.attributes))
        .map(|q| {
            let mut text = t.text.replace("{obj}", &phrase(&q));
            if let Some(l) = q.source_location {
                text = text.replace("{loc}", l.as_str());
            }
            BenchmarkInstruction { text, gold: Command::bring_me(q), family: Family::BringMe }
        })
        .collect()
}

fn replace_expansions(t: &ReplaceTemplate) -> Vec<BenchmarkInstruction> {
    let mut out = Vec::new();
    for &new_ty in &ObjectType::ALL {
        for &old_ty in ObjectType::ALL.iter().filter(|&&o| o != new_ty) {
            for add in queries(new_ty, &t.new) {
                for delete in queries(old_ty, &t.old) {
                    let text = t.text.replace("{new}", &phrase(&add)).replace("{old}", &phrase(&delete));
                    out.push(BenchmarkInstruction { text, gold: Command::replace(add, delete), family: Family::Replace });
                }
            }
        }
    }
    out
}

/// Expands the manifest. The seed only drives the `sample` subsets, which
/// keep their expansion order.
pub fn generate_benchmark(m: &TemplateManifest, seed: u64) -> Result<Vec<BenchmarkInstruction>, BenchError> {
    m.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<BenchmarkInstruction> = m.bring_me.iter().flat_map(bring_me_expansions).collect();
    for t in &m.replace {
        let all = replace_expansions(t);
        match t.sample {
            Some(n) => {
                let mut keep = index::sample(&mut rng, all.len(), n).into_vec();
                keep.sort_unstable();
                let mut all: Vec<Option<BenchmarkInstruction>> = all.into_iter().map(Some).collect();
                out.extend(keep.into_iter().filter_map(|i| all[i].take()));
            }
            None => out.extend(all),
        }
    }
    out.extend(m.breakfast.iter().map(|text| BenchmarkInstruction {
        text: text.clone(),
        gold: Command::bare(CommandKind::SettingBreakfast),
        family: Family::Breakfast,
    }));
    for f in Family::ALL {
        let generated = out.iter().filter(|i| i.family == f).count();
        let declared = m.counts.get(f);
        if generated != declared {
            return Err(BenchError::ManifestCountMismatch { family: f.as_str(), declared, generated });
        }
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut w: W, instructions: &[BenchmarkInstruction]) -> std::io::Result<()> {
    for i in instructions {
        serde_json::to_writer(&mut w, i)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<BenchmarkInstruction>, BenchError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| BenchError::io("<benchmark>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| BenchError::Format { line: n + 1, message: e.to_string() })?);
    }
    Ok(out)
}
