pub mod bounds;
pub mod domain;
pub mod instance;
pub mod linprog;
pub mod offline;
pub mod policies;
pub mod sim;
mod packing;
pub mod stochastic;

pub use domain::{AssignmentPlan, Coach, LegRange, Network, Request, RequestType, ResidualCapacity, Train, TypeId, Yen};
pub use instance::Instance;
pub use policies::{Policy, PolicyDecision, Verdict};
pub use sim::{Experiment, PolicyKind, PolicyParams};
