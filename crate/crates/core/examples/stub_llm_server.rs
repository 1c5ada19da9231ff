//! Starts the local chat-completion stub with the measured confusion rates
//! and queries it through the HTTP client, as an external LLM would be.

use adaptive_hri::config::RunConfig;
use adaptive_hri::nlu::llm::{ExternalBackend, ExternalConfig};
use adaptive_hri::nlu::stub::{StubMode, StubServer};
use adaptive_hri::nlu::{DialogueContext, NluBackend, SymbolicState};
use adaptive_hri::speech::Transcript;
use adaptive_hri::world::LocationId;

fn main() {
    let model = RunConfig::default().nlu.stub;
    let server = StubServer::start(StubMode::Model { model, seed: 3 }).expect("stub server");
    println!("stub listening on {}", server.base_url());
    let cfg = ExternalConfig { base_url: server.base_url(), api_key_env: None, ..ExternalConfig::default() };
    let mut backend = ExternalBackend::new(cfg).expect("client");
    let state = SymbolicState::idle(LocationId::Table);
    for _ in 0..6 {
        let ex = backend
            .extract(&Transcript::clean("Bring me a bowl instead of the cup."), &state, &DialogueContext::default())
            .expect("reply");
        println!("{} anomaly={:?}", serde_json::to_string(&ex.command).unwrap(), ex.anomaly);
    }
    println!("{} requests served", server.requests().len());
}
