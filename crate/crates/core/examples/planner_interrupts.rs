//! Drives the executor directly: a cup request, a replacement that arrives
//! during an atomic grasp, then a stop.

use adaptive_hri::config::RunConfig;
use adaptive_hri::nlu::{Command, CommandKind};
use adaptive_hri::planner::{Executor, PlannerConfig};
use adaptive_hri::world::{ObjectQuery, ObjectType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut w = RunConfig::default().world.build();
    let mut x = Executor::new(PlannerConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cup = ObjectQuery::of_type(ObjectType::Cup);
    let bowl = ObjectQuery::of_type(ObjectType::Bowl);
    let script = [
        (0, Command::bring_me(cup)),
        (6, Command::replace(bowl, cup)),
        (24, Command::bare(CommandKind::Stop)),
    ];
    for tick in 0..40 {
        for (seq, (_, cmd)) in script.iter().enumerate().filter(|(_, (t, _))| *t == tick) {
            let (d, _) = x.handle_command(Some(seq as u64), cmd, &w);
            println!("t={tick:<3} {} -> {d:?}", cmd.kind);
        }
        for ev in x.tick(&mut w, &mut rng) {
            println!("t={tick:<3} {}", serde_json::to_string(&ev).unwrap());
        }
        let s = x.symbolic_state(&w);
        if tick % 5 == 0 {
            println!("t={tick:<3} state {} interruptable={}", s.step, s.interruptable);
        }
    }
    println!("{}", w.snapshot());
}
