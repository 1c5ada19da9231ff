//! Runs sentences through the noisy speech model and a sequence of age
//! estimates through the five-window smoother.

use adaptive_hri::config::RunConfig;
use adaptive_hri::session::{stream_rng, Stream};
use adaptive_hri::speech::{corrupt, estimate_age, to_binary, AgeGroup, AgeSmoother};

fn main() {
    let cfg = RunConfig::calibrated();
    let mut rng = stream_rng(7, Stream::Speech);
    for text in ["Bring me a bowl instead of the cup.", "Set the table for breakfast.", "Stop!"] {
        for _ in 0..3 {
            let t = corrupt(text, &mut rng, &cfg.noise);
            println!("{text:<38} -> {:<38} {:?} ({:.2})", t.text, t.corruption, t.confidence);
        }
    }

    let mut smoother = AgeSmoother::new();
    for _ in 0..8 {
        let group = estimate_age(AgeGroup::Fifties, &mut rng, &cfg.age_noise);
        let raw = to_binary(group);
        let out = smoother.smooth(raw);
        println!("estimate {group:<9} binary {raw:?} smoothed {out:?}");
    }
}
