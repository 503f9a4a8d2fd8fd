#![allow(dead_code)]

#[path = "../../src/testing.rs"]
mod server;

pub mod corpus;

pub use server::*;
