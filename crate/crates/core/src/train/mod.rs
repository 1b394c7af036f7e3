//! Unsupervised training of the retargeting model.

pub mod checkpoint;
pub mod loss;
pub mod mining;
pub mod model;
pub mod trainer;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, ModelKind};
pub use loss::{kink_margin, total_loss, BatchRef, BatchTriplet, LossBreakdown, LossWeights, TrainBatch};
pub use mining::{mine_triplets, mine_triplets_in, BankPair, BankRef, MiningConfig, Triplet};
pub use model::{ModelArch, ModelGradients, RetargetModel};
pub use trainer::{train, EpochMetrics, MetricsLog, TrainConfig, ValidationSet};
