//! Reference retargets, evaluation metrics and latency measurement.

pub mod bench;
pub mod metrics;
pub mod oracle;
pub mod report;

pub use bench::{bench_latency, LatencyReport, BENCH_MIN_CALLS};
pub use metrics::{
    build_validation_set, Agreement, eval_joint_mse, eval_semantic, eval_triplet_agreement, held_out_human_poses, held_out_reconstruction, model_triplet_agreement, PoseRow,
    SemanticReport,
};
pub use oracle::{oracle_batch, oracle_retarget, oracle_retarget_links, OracleConfig, OracleResult};
pub use report::EvalReport;
