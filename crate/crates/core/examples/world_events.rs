//! Builds the default kitchen and walks a cup to the table by hand.

use adaptive_hri::config::RunConfig;
use adaptive_hri::world::{LocationId, ObjectQuery, ObjectType, WorldEvent};

fn main() {
    let mut w = RunConfig::default().world.build();
    let cup = w.find_objects(&ObjectQuery::of_type(ObjectType::Cup))[0].id;

    let steps = [
        WorldEvent::Navigate { to: LocationId::Cabinet },
        WorldEvent::Open { at: LocationId::Cabinet },
        WorldEvent::Grasp { object: cup },
        WorldEvent::Close { at: LocationId::Cabinet },
        WorldEvent::Navigate { to: LocationId::Table },
        WorldEvent::Place { object: cup, at: LocationId::Table },
    ];
    for ev in steps {
        w.apply_event(ev).expect("valid step");
        println!("{ev}");
    }
    w.check_invariants().expect("invariants");

    // Grasping from a closed container is refused and leaves the world alone.
    let milk = w.find_objects(&ObjectQuery::of_type(ObjectType::Cereal))[0].id;
    let before = w.clone();
    let err = w.apply_event(WorldEvent::Grasp { object: milk }).unwrap_err();
    println!("refused: {err}");
    assert_eq!(w, before);
    println!("{}", w.snapshot());
}
