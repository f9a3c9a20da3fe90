#![allow(dead_code)]

pub mod nets;
pub mod oracle;
pub mod sim;
pub mod small;

use evcorr::stream::{self, Format, LabeledEvent};
use evcorr::{build_task_dependencies, model, HeuristicTable, TaskDependencies, UncorrelatedEvent, WorkflowNet};

pub const EXAM_NET: &str = include_str!("../../fixtures/physical_exam.net");
pub const EXAM_PNML: &str = include_str!("../../fixtures/physical_exam.pnml");
pub const HEURISTICS: &str = include_str!("../../fixtures/heuristics.csv");
pub const SWAPPED: &str = include_str!("../../fixtures/swapped_stream.csv");
pub const RUNNING: &str = include_str!("../../fixtures/running_example_stream.csv");
pub const CASE2: &str = include_str!("../../fixtures/case2_log.csv");
pub const LIFECYCLE: &str = include_str!("../../fixtures/lifecycle_stream.csv");

pub fn exam() -> (WorkflowNet, TaskDependencies, HeuristicTable) {
    let net = model::parse_simple_net(EXAM_NET).unwrap();
    let td = build_task_dependencies(&net).unwrap();
    let h = HeuristicTable::load_str(HEURISTICS).unwrap();
    (net, td, h)
}

pub fn events(csv: &str) -> Vec<UncorrelatedEvent> {
    stream::read_events(csv.as_bytes(), Format::Csv).unwrap().events
}

pub fn labeled(csv: &str) -> Vec<LabeledEvent> {
    stream::read_labeled(csv.as_bytes(), Format::Csv).unwrap().events
}
