//! On-board data handling node for a small satellite, at desk scale.
//!
//! - [`transport`]: serial-style byte links (in-memory, TCP, pty)
//! - [`framing`]: per-subsystem deframers and the ground-segment envelope
//! - [`node`]: port table, receive task per port, uplink routing, telemetry store
//! - [`sim`]: wheel drive, star sensor, battery, GPS and housekeeping simulators
//! - [`harness`]: close-loop soak and integration scenario runners

pub mod framing;
pub mod harness;
pub mod node;
pub mod sim;
pub mod transport;
