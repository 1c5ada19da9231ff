//! Parses sentences with the rule-based backend, carrying dialogue context
//! so that "it" and "instead" resolve against the previous request.

use adaptive_hri::nlu::{parse, DialogueContext};

fn main() {
    let mut ctx = DialogueContext::default();
    for text in [
        "Could you bring me the small red cup from the cabinet?",
        "Actually, bring me a bowl instead.",
        "Bring it to the counter.",
        "Set the table for breakfast.",
        "What's the weather like?",
        "Stop!",
    ] {
        let cmd = parse(text, &ctx);
        println!("{text:<56} {}", serde_json::to_string(&cmd).unwrap());
        ctx.record(&cmd);
    }
}
