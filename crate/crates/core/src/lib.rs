pub mod abe;
pub mod config;
pub mod harness;
pub mod mam;
pub mod owner;
pub mod subject;
pub mod tangle;
pub mod token;
