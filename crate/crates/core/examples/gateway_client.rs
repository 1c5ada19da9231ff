//! Serves a live session over WebSocket, connects to it, asks for a cup and
//! interrupts the robot on the way.

use std::time::Duration;

use adaptive_hri::bus::{Envelope, Payload};
use adaptive_hri::cli::{Gateway, InboundFrame};
use adaptive_hri::config::RunConfig;
use adaptive_hri::events::TrialEvent;
use futures::{SinkExt, StreamExt};
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() {
    let mut cfg = RunConfig::default();
    cfg.interactive.tick_ms = 20;
    let gw = Gateway::start(&cfg, 0, 0).expect("bind");
    println!("serving {}", gw.url());
    let (mut ws, _) = tokio_tungstenite::connect_async(gw.url()).await.expect("connect");
    let say = |f: InboundFrame| Message::Text(serde_json::to_string(&f).unwrap().into());
    ws.send(say(InboundFrame::Utterance { text: "Bring me a cup.".into(), age: None })).await.unwrap();

    let mut stop_sent = false;
    while let Ok(Some(Ok(Message::Text(t)))) = tokio::time::timeout(Duration::from_secs(5), ws.next()).await {
        let env: Envelope = serde_json::from_str(t.as_str()).unwrap();
        match &env.payload {
            Payload::RobotState(_) => {}
            Payload::Response(r) => println!("t={} robot: {}", env.tick, r.response.text),
            _ => println!("t={} {}", env.tick, env.topic),
        }
        if env.tick >= 6 && !stop_sent {
            ws.send(say(InboundFrame::Interrupt)).await.unwrap();
            stop_sent = true;
        }
        if matches!(env.payload, Payload::TrialEvent(TrialEvent::Stopped { .. })) {
            break;
        }
    }
    gw.shutdown();
}
