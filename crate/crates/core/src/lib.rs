//! Round-based wireless sensor network clustering simulator.
//!
//! Cluster heads are found by a water-strider population search over
//! candidate centroid sets, refined with fuzzy c-means, and compared against
//! FCM-only and random-head baselines under a first-order radio model.

pub mod experiment;
pub mod fcm;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod stats;
pub mod wsa;

pub use fcm::{FcmConfig, FcmResult, MembershipMatrix};
pub use model::{ClusterCount, NetworkConfig, Node, Point, RadioParams};
pub use protocol::{simulate, SimulationConfig, SimulationTrace, Strategy};
pub use wsa::{WsaConfig, WsaResult};
