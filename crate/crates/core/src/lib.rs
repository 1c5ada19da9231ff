pub mod bench;
pub mod bus;
pub mod cli;
pub mod config;
pub mod error;
pub mod events;
pub mod nlu;
pub mod planner;
pub mod session;
pub mod speech;
pub mod world;
