//! A full pipeline session (speech, dialogue bridge, planner) for an older
//! user, who gets step-by-step narration instead of bare confirmations.

use adaptive_hri::bus::{Payload, Topic};
use adaptive_hri::config::RunConfig;
use adaptive_hri::session::Session;
use adaptive_hri::speech::AgeGroup;

fn main() {
    let cfg = RunConfig::default();
    let mut s = Session::new(&cfg, 1).expect("grammar backend");
    let replies = s.bus().subscribe(&[Topic::ResponseOut]);
    s.say("Bring me the cereal.", AgeGroup::Seventies, 0);
    for _ in 0..30 {
        s.step();
        for env in s.bus().drain(&replies) {
            if let Payload::Response(r) = env.payload {
                println!("[t={:>2}] robot: {}", env.tick, r.response.text);
            }
        }
    }
}
