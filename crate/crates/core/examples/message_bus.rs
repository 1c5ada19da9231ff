//! Publishes on the bus and drains two subscribers; each envelope prints as
//! the JSON line a trial log or gateway frame would carry.

use adaptive_hri::bus::{Bus, Payload, Topic};
use adaptive_hri::planner::InterruptMsg;
use adaptive_hri::speech::{AgeGroup, UtteranceMsg};

fn main() {
    let bus = Bus::new();
    let everything = bus.subscribe_all();
    let interrupts = bus.subscribe(&[Topic::Interrupt]);

    bus.set_tick(3).unwrap();
    let utterance = UtteranceMsg { text: "Bring me a cup.".into(), true_age: AgeGroup::Sixties, attempt: 0 };
    bus.publish(Topic::UtteranceIn, Payload::Utterance(utterance)).unwrap();
    bus.publish(Topic::Interrupt, Payload::Interrupt(InterruptMsg::Stop)).unwrap();

    // A payload on the wrong topic is rejected.
    let bad = bus.publish(Topic::Command, Payload::Interrupt(InterruptMsg::Reset));
    println!("wrong topic: {}", bad.unwrap_err());

    println!("interrupt subscriber sees {} message(s)", bus.drain(&interrupts).len());
    for env in bus.drain(&everything) {
        println!("{}", env.to_json_line());
    }
}
