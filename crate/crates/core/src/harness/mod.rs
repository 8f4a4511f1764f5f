//! Baseline scheme, benchmarks, cost-model replay and shared fixtures.

pub mod bench;
pub mod cost;
pub mod dcaci;
pub mod fixtures;

pub use bench::{
    bench_attributes, bench_one_to_many, bench_policies, replay_report, write_json_lines,
    BenchOptions, BenchReport, BENCH_DIFFICULTY,
};
pub use cost::{
    break_even_subjects, replay_cost_model, CostModel, NonPositiveModel, PROTOTYPE_MEANS,
};
pub use dcaci::{DcaciError, DcaciState, DcaciToken};
pub use fixtures::Deployment;
