//! Bench-side test drivers: the close-loop soak and the scripted
//! integration scenario.

mod bench;
mod closeloop;
mod scenario;
mod topology;

use thiserror::Error;

pub use bench::NodeBench;
pub use closeloop::{loop_frame, run_close_loop, run_close_loop_with, LatencyStats, LoopConfig, LoopReport};
pub use scenario::{
    run_integration_scenario, Expect, ScenarioReport, Script, Step, StepResult, DEFAULT_STEP_TIMEOUT,
};
pub use topology::{Hop, LoopTopology};

use crate::node::NodeError;
use crate::transport::LinkError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("rate must be a positive number of frames per second, got {0}")]
    InvalidRate(f64),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Node(#[from] NodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundTrip {
    Match,
    /// First differing offset. A short or long `received` mismatches at the
    /// end of the shorter buffer.
    Mismatch(usize),
}

pub fn verify_round_trip(sent: &[u8], received: &[u8]) -> RoundTrip {
    match sent.iter().zip(received).position(|(a, b)| a != b) {
        Some(i) => RoundTrip::Mismatch(i),
        None if sent.len() == received.len() => RoundTrip::Match,
        None => RoundTrip::Mismatch(sent.len().min(received.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_cases() {
        assert_eq!(verify_round_trip(b"abc", b"abc"), RoundTrip::Match);
        assert_eq!(verify_round_trip(b"", b""), RoundTrip::Match);
        assert_eq!(verify_round_trip(b"abc", b"abd"), RoundTrip::Mismatch(2));
        assert_eq!(verify_round_trip(b"abc", b"ab"), RoundTrip::Mismatch(2));
        assert_eq!(verify_round_trip(b"ab", b"abc"), RoundTrip::Mismatch(2));
    }
}
