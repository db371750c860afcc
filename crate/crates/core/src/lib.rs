//! DAG-aware multi-resource scheduling: offline schedule construction on a
//! resource-time space, lower bounds, reference schedulers and a
//! deterministic cluster simulator.

pub mod baselines;
pub mod bounds;
pub mod cluster;
pub mod construct;
pub mod dag;
pub mod gen;
pub mod json;
pub mod resource;
pub mod schedule;
pub mod sim;
pub mod space;

pub use cluster::{ClusterSpec, OverbookPolicy, Slowdown};
pub use dag::{DagBuilder, EdgePattern, JobDag, StageId, TaskDraft, TaskId};
pub use resource::ResourceVector;
pub use schedule::Placement;
