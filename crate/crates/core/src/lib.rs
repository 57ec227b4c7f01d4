pub mod agents;
pub mod distributions;
pub mod harness;
pub mod mechanism;
