//! Layer reduction: projections built from spike eigenvectors, network
//! surgery, and the iterative train → analyse → project → fine-tune loop.

mod ablation;
mod engine;
mod export;
mod projection;

pub use ablation::{median, quantile_ablation, AblationRow, DEFAULT_QUANTILE_GRID};
pub use engine::{
    compress_step, run_loop, CompressionPlan, IterationRecord, LoopOutcome, StepOutcome,
    StopReason,
};
pub use export::{write_ablation_csv, write_history_csv};
pub use projection::{apply_projection, build_projection, Projection};
