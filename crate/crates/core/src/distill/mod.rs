//! Self-distillation: a frozen earlier copy of the model acts as teacher for
//! its own reduced successor.

mod loss;
mod train;

pub use loss::{
    accuracy, combined_loss, cross_entropy, kl_divergence, log_softmax, softmax, LossOutput,
    DEFAULT_EPSILON_PROB,
};
pub use train::{
    snapshot_teacher, train_until, write_training_log_csv, DistillConfig, EpochLog,
    TeacherSnapshot, TrainData, TrainOutcome,
};
