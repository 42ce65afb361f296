//! Evaluation harness: metrics, sweeps, transformation ablations,
//! adversarial training, and report files.

pub mod advtrain;
pub mod metrics;
pub mod report;
pub mod sweep;

pub use advtrain::{adversarial_train, AdvTrainOutput, AdvTrainParams, AdvTrainReport};
pub use metrics::{asr, counts, f1, fpr, EmptyDenominator, MetricCounts, SampleEval};
pub use report::{
    read_attack_report, read_eval_report, write_attack_report, write_eval_report, ReportError,
    ReportHeader,
};
pub use sweep::{
    ablate_transforms, attack_corpus, evaluate_cell, metric_notes, sweep, EvalCell, EvalReport,
    MonotoneDiag, SweepConfig,
};
