//! Runtime correlation of unlabeled process events.
//!
//! Given a workflow-net process model, per-activity execution-duration
//! heuristics and a stream of events that carry no case identifier, the
//! correlator assigns each event to one or more live cases together with a
//! trust percentage, or flags it as noise.
//!
//! ```text
//! model (.pnml / .net) > validate > build_task_dependencies ─┐
//! heuristics.csv ────────────────────────────────────────────┼> Correlator > export_log
//! events.csv / .jsonl > read_events > replay ────────────────┘
//! ```
//!
//! The evaluation module scores correlator output against the original case
//! labels of a log (precision, recall, F-score) and summarises per-event
//! processing latency.

pub mod correlator;
pub mod dependencies;
pub mod evaluation;
pub mod heuristics;
pub mod model;
pub mod stream;
pub mod time;

pub use correlator::{
    Allocation, CaseId, CaseStore, CorrelatedEventInstance, Correlator, DurationKind, IngestOutcome, Lifecycle,
    NoiseReason, UncorrelatedEvent,
};
pub use dependencies::{build_task_dependencies, DependencyGraph, TaskDependencies};
pub use heuristics::{Bounds, HeuristicTable};
pub use model::{validate, NetDiagnostics, WorkflowNet};
pub use time::Timestamp;
