//! Two-stage training, episodic evaluation and margin sweeps.

mod finetune;
mod pretrain;
mod sweep;

pub use finetune::{
    ci95, evaluate_features, finetune_eval, predict, train_classifier, EpisodeSpec, EvalResult,
    FinetuneConfig,
};
pub use pretrain::{
    classification_accuracy, pretrain, EpochRecord, PretrainConfig, TrainingLog, TRAINING_LOG_CSV_HEADER,
};
pub use sweep::{
    run_margin, sweep_margin, Evaluation, MarginRun, SweepConfig, SweepFailure, SweepResult, SWEEP_CSV_HEADER,
};
