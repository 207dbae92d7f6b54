//! EDM memory fabric: PHY-level memory framing, host and switch stacks, the
//! in-network scheduler, and a discrete-event simulator of the whole fabric.

pub mod edm;
pub mod engine;
pub mod fabric;
pub mod host;
pub mod model;
pub mod phy;
pub mod scheduler;
pub mod switch;
pub mod workloads;
