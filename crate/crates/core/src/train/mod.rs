//! Training: the batch-size / learning-rate staircase, finetuning and the
//! pre-training protocols.

mod engine;
mod schedule;

pub use engine::{
    finetune, huber_mean, noisy_csi, pretrain_transfer, train, EpochRecord, PretrainMethod, StageRecord,
    StopReason, TrainReport, EPOCH_CSV_HEADER,
};
pub use schedule::{geometric_rates, FinetuneSchedule, TrainSchedule, LR_FIRST, LR_LAST, DEFAULT_BATCH_SIZES};
