//! Scenario engine and CLI for the dual-polarization simplex link simulator.

pub mod cli;
pub mod config;
pub mod link;
pub mod output;
pub mod run;
pub mod theory;
