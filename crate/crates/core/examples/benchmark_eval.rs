//! Expands the instruction benchmark and scores the grammar backend and the
//! in-process confusion stub on it.

use adaptive_hri::bench::{evaluate_runs, generate_benchmark, TemplateManifest};
use adaptive_hri::config::RunConfig;
use adaptive_hri::nlu::stub::StubBackend;
use adaptive_hri::nlu::GrammarBackend;

fn main() {
    let instructions = generate_benchmark(&TemplateManifest::default(), 0).expect("manifest counts");
    println!("{} instructions, e.g. {:?}", instructions.len(), instructions[900].text);

    let grammar = evaluate_runs(|_| Box::new(GrammarBackend), &instructions, 1);
    print!("{}", grammar.render());

    let model = RunConfig::default().nlu.stub;
    let stub = evaluate_runs(|run| Box::new(StubBackend::seeded(model.clone(), run as u64)), &instructions, 3);
    print!("{}", stub.render());
}
