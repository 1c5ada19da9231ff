//! Per-field recognition accuracy of an NLU backend on the benchmark.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::nlu::{Command, CommandKind, DialogueContext, NluBackend, SymbolicState};
use crate::speech::Transcript;
use crate::world::ObjectQuery;

use super::generate::BenchmarkInstruction;
use super::MeanSd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Command,
    AddType,
    AddColor,
    AddSize,
    AddLocation,
    DeleteType,
    DeleteColor,
    DeleteSize,
    DeleteLocation,
}

impl Field {
    pub const ALL: [Field; 9] = [
        Field::Command,
        Field::AddType,
        Field::AddColor,
        Field::AddSize,
        Field::AddLocation,
        Field::DeleteType,
        Field::DeleteColor,
        Field::DeleteSize,
        Field::DeleteLocation,
    ];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldScore {
    pub correct: usize,
    pub total: usize,
}

impl FieldScore {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn record(&mut self, ok: bool) {
        self.total += 1;
        self.correct += ok as usize;
    }
}

/// Scores from one pass over the benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyRun {
    pub fields: BTreeMap<Field, FieldScore>,
    pub backend_errors: usize,
}

fn slots(q: Option<&ObjectQuery>) -> [Option<String>; 4] {
    let q = q.copied().unwrap_or_default();
    [
        q.object_type.map(|v| v.as_str().to_string()),
        q.color.map(|v| v.as_str().to_string()),
        q.size.map(|v| v.as_str().to_string()),
        q.source_location.map(|v| v.as_str().to_string()),
    ]
}

/// Compares one prediction with its gold command. Slot fields are scored only
/// on instructions whose gold command has that object; a missing slot that is
/// also missing from the gold command counts as correct.
pub fn score_into(fields: &mut BTreeMap<Field, FieldScore>, gold: &Command, pred: &Command) {
    fields.entry(Field::Command).or_default().record(pred.kind == gold.kind);
    let groups = [
        (gold.add.as_ref(), pred.add.as_ref(), [Field::AddType, Field::AddColor, Field::AddSize, Field::AddLocation]),
        (
            gold.delete.as_ref(),
            pred.delete.as_ref(),
            [Field::DeleteType, Field::DeleteColor, Field::DeleteSize, Field::DeleteLocation],
        ),
    ];
    for (g, p, names) in groups {
        if g.is_none() {
            continue;
        }
        for ((gs, ps), f) in slots(g).iter().zip(slots(p).iter()).zip(names) {
            fields.entry(f).or_default().record(gs == ps);
        }
    }
}

/// Runs every instruction through `backend` with a fresh context and an idle
/// robot. Backend failures count as `other`.
pub fn evaluate_backend(backend: &mut dyn NluBackend, instructions: &[BenchmarkInstruction]) -> AccuracyRun {
    let mut fields: BTreeMap<Field, FieldScore> = Field::ALL.iter().map(|f| (*f, FieldScore::default())).collect();
    let mut backend_errors = 0;
    let state = SymbolicState::default();
    for i in instructions {
        let ctx = DialogueContext::default();
        let pred = match backend.extract(&Transcript::clean(i.text.clone()), &state, &ctx) {
            Ok(ex) => ex.command,
            Err(_) => {
                backend_errors += 1;
                Command::bare(CommandKind::Other)
            }
        };
        score_into(&mut fields, &i.gold, &pred);
    }
    AccuracyRun { fields, backend_errors }
}

/// Accuracy in percent, aggregated over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub backend: String,
    pub instructions: usize,
    pub runs: Vec<AccuracyRun>,
    pub percent: BTreeMap<Field, MeanSd>,
}

impl AccuracyTable {
    pub fn from_runs(backend: &str, instructions: usize, runs: Vec<AccuracyRun>) -> Self {
        let percent = Field::ALL
            .iter()
            .map(|f| {
                let xs: Vec<f64> = runs.iter().map(|r| 100.0 * r.fields[f].accuracy()).collect();
                (*f, MeanSd::of(&xs))
            })
            .collect();
        Self { backend: backend.into(), instructions, runs, percent }
    }

    /// Plain-text table with add and delete columns.
    pub fn render(&self) -> String {
        let cell = |f: Field| {
            let m = self.percent[&f];
            format!("{:6.2} ± {:4.2}", m.mean, m.sd)
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Recognition accuracy (%), backend {}, {} instructions, {} run(s)",
            self.backend,
            self.instructions,
            self.runs.len()
        );
        let _ = writeln!(s, "{:<10} {:>15} {:>15}", "field", "add object", "delete object");
        let _ = writeln!(s, "{:<10} {:>15}", "command", cell(Field::Command));
        for (name, a, d) in [
            ("type", Field::AddType, Field::DeleteType),
            ("color", Field::AddColor, Field::DeleteColor),
            ("size", Field::AddSize, Field::DeleteSize),
            ("location", Field::AddLocation, Field::DeleteLocation),
        ] {
            let _ = writeln!(s, "{:<10} {:>15} {:>15}", name, cell(a), cell(d));
        }
        s
    }
}

/// Evaluates `runs` fresh backends built by `make(run_index)`.
pub fn evaluate_runs<F>(mut make: F, instructions: &[BenchmarkInstruction], runs: usize) -> AccuracyTable
where
    F: FnMut(usize) -> Box<dyn NluBackend>,
{
    let mut name = String::new();
    let results = (0..runs.max(1))
        .map(|r| {
            let mut b = make(r);
            name = b.name().to_string();
            evaluate_backend(b.as_mut(), instructions)
        })
        .collect();
    AccuracyTable::from_runs(&name, instructions.len(), results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate::{generate_benchmark, Family, TemplateManifest};
    use crate::nlu::GrammarBackend;
    use crate::world::{Color, ObjectType};

    #[test]
    fn grammar_scores_perfectly() {
        let b = generate_benchmark(&TemplateManifest::default(), 0).unwrap();
        let run = evaluate_backend(&mut GrammarBackend, &b);
        for (f, s) in &run.fields {
            assert_eq!(s.correct, s.total, "{f:?}");
        }
        assert_eq!(run.fields[&Field::Command].total, 2611);
        assert_eq!(run.fields[&Field::AddType].total, 2570);
        assert_eq!(run.fields[&Field::DeleteType].total, 1770);
    }

    #[test]
    fn empty_text_is_a_command_error() {
        let gold = Command::bring_me(ObjectQuery::of_type(ObjectType::Cup));
        let b = vec![BenchmarkInstruction { text: String::new(), gold, family: Family::BringMe }];
        let run = evaluate_backend(&mut GrammarBackend, &b);
        assert_eq!(run.fields[&Field::Command], FieldScore { correct: 0, total: 1 });
        assert_eq!(run.fields[&Field::AddType], FieldScore { correct: 0, total: 1 });
    }

    #[test]
    fn absent_slot_matching_gold_is_correct() {
        let gold = Command::bring_me(ObjectQuery::of_type(ObjectType::Cup));
        let pred = Command::bring_me(ObjectQuery::of_type(ObjectType::Cup).with_color(Color::Red));
        let mut f = BTreeMap::new();
        score_into(&mut f, &gold, &pred);
        assert_eq!(f[&Field::AddType].correct, 1);
        assert_eq!(f[&Field::AddColor].correct, 0);
        assert_eq!(f[&Field::AddSize].correct, 1);
        assert!(!f.contains_key(&Field::DeleteType));
    }

    #[test]
    fn table_has_every_row() {
        let b = generate_benchmark(&TemplateManifest::default(), 0).unwrap();
        let t = evaluate_runs(|_| Box::new(GrammarBackend), &b, 2);
        let text = t.render();
        for row in ["command", "type", "color", "size", "location"] {
            assert!(text.lines().any(|l| l.starts_with(row)), "{row}");
        }
        assert!(text.contains("100.00 ± 0.00"));
    }
}
