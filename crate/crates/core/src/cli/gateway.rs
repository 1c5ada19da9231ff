//! WebSocket gateway for external clients.
//!
//! Outbound, every bus envelope is sent as one text frame holding the same
//! JSON line a trial log would contain. Inbound text frames are control
//! messages such as `{"type": "utterance", "text": "Stop!"}`. The pipeline
//! runs on its own thread and advances one tick every `interactive.tick_ms`.

use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, oneshot};

use crate::bus::Bus;
use crate::config::RunConfig;
use crate::nlu::BackendError;
use crate::planner::InterruptMsg;
use crate::session::{make_backend, Session};
use crate::speech::AgeGroup;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InboundFrame {
    Utterance {
        text: String,
        /// Overrides the session's age group for this line only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        age: Option<AgeGroup>,
    },
    /// Major interrupt.
    Interrupt,
    Reset,
    SetAge {
        group: AgeGroup,
    },
}

#[derive(Debug)]
enum Inbound {
    Frame(InboundFrame),
    Connected,
}

/// Where outbound frames come from.
pub enum FrameSource {
    /// A live session.
    Live(Box<Session>),
    /// Pre-recorded frames, sent in order to each client.
    Recorded(Vec<String>),
}

#[derive(Clone)]
struct Hub {
    inbound: mpsc::Sender<Inbound>,
    outbound: broadcast::Sender<String>,
    recorded: Option<Arc<Vec<String>>>,
    tick: Duration,
}

pub struct Gateway {
    addr: SocketAddr,
    inbound: mpsc::Sender<Inbound>,
    stop: Arc<AtomicBool>,
    server_stop: Option<oneshot::Sender<()>>,
    threads: Vec<JoinHandle<()>>,
}

impl Gateway {
    /// Builds a session from `cfg` and serves it on `port` (0 picks a free one).
    pub fn start(cfg: &RunConfig, seed: u64, port: u16) -> Result<Self, GatewayError> {
        let session = Session::on_bus(Bus::new(), cfg, seed, make_backend(cfg, seed)?);
        Self::serve(FrameSource::Live(Box::new(session)), cfg, port)
    }

    pub fn serve(source: FrameSource, cfg: &RunConfig, port: u16) -> Result<Self, GatewayError> {
        let listener = std::net::TcpListener::bind(("127.0.0.1", port))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let tick = Duration::from_millis(cfg.interactive.tick_ms);
        let (in_tx, in_rx) = mpsc::channel();
        let (out_tx, _) = broadcast::channel(4096);
        let stop = Arc::new(AtomicBool::new(false));
        let mut threads = Vec::new();
        let recorded = match source {
            FrameSource::Live(session) => {
                let (out, stop, age) = (out_tx.clone(), stop.clone(), cfg.trials.true_age);
                threads.push(std::thread::spawn(move || simulate(*session, age, tick, in_rx, out, stop)));
                None
            }
            FrameSource::Recorded(frames) => Some(Arc::new(frames)),
        };
        let hub = Hub { inbound: in_tx.clone(), outbound: out_tx, recorded, tick };
        let app = Router::new().route("/ws", get(upgrade)).with_state(hub);
        let (server_stop, server_rx) = oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
        threads.push(std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("tokio listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = server_rx.await;
                    })
                    .await;
            });
        }));
        Ok(Self { addr, inbound: in_tx, stop, server_stop: Some(server_stop), threads })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}/ws", self.addr)
    }

    /// Injects a control frame as if a client had sent it.
    pub fn send(&self, frame: InboundFrame) {
        let _ = self.inbound.send(Inbound::Frame(frame));
    }

    /// Blocks until the server threads exit.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_all();
    }

    fn stop_all(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(tx) = self.server_stop.take() {
            let _ = tx.send(());
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.stop_all();
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("gateway: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn simulate(
    mut session: Session,
    mut age: AgeGroup,
    tick: Duration,
    inbound: mpsc::Receiver<Inbound>,
    outbound: broadcast::Sender<String>,
    stop: Arc<AtomicBool>,
) {
    let bus = session.bus().clone();
    let all = bus.subscribe_all();
    session.snapshot("initial");
    while !stop.load(Ordering::SeqCst) {
        while let Ok(msg) = inbound.try_recv() {
            match msg {
                Inbound::Frame(InboundFrame::Utterance { text, age: a }) => {
                    session.say(&text, a.unwrap_or(age), 0);
                }
                Inbound::Frame(InboundFrame::Interrupt) => {
                    session.interrupt(InterruptMsg::Stop);
                }
                Inbound::Frame(InboundFrame::Reset) => {
                    session.interrupt(InterruptMsg::Reset);
                }
                Inbound::Frame(InboundFrame::SetAge { group }) => age = group,
                Inbound::Connected => session.snapshot("connect"),
            }
        }
        session.step();
        for env in bus.drain(&all) {
            // No receivers is fine: frames are only for whoever is listening.
            let _ = outbound.send(env.to_json_line());
        }
        std::thread::sleep(tick);
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(hub): State<Hub>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, hub))
}

async fn client(mut socket: WebSocket, hub: Hub) {
    if let Some(frames) = hub.recorded.clone() {
        return replay_to(socket, &frames, hub.tick).await;
    }
    let mut rx = hub.outbound.subscribe();
    let _ = hub.inbound.send(Inbound::Connected);
    loop {
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => {
                    // Malformed control frames are dropped; the protocol has no error frame.
                    if let Ok(frame) = serde_json::from_str::<InboundFrame>(text.as_str()) {
                        let _ = hub.inbound.send(Inbound::Frame(frame));
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            frame = rx.recv() => match frame {
                Ok(line) => {
                    if socket.send(Message::Text(line.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {}
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
}

async fn replay_to(mut socket: WebSocket, frames: &[String], tick: Duration) {
    let mut last_tick = None;
    for line in frames {
        let t = serde_json::from_str::<serde_json::Value>(line).ok().and_then(|v| v["tick"].as_u64());
        if last_tick.is_some() && t != last_tick {
            tokio::time::sleep(tick).await;
        }
        last_tick = t;
        if socket.send(Message::Text(line.clone().into())).await.is_err() {
            return;
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}
