pub mod dataset;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod train;

pub use dataset::{
    generate_sim_dataset, AugmentationPolicy, AugmentationTag, Dataset, DatasetHeader, DatasetRecord, DatasetSpec,
    Provenance, SweepCell, SweepGrid,
};
pub use loss::{total_loss, Labels, LossBreakdown, LossWeights};
pub use metrics::{evaluate, pearson, spearman, MetricsReport, RegressionMetrics};
pub use model::{ContactEstimate, ModelBundle, Normalization};
pub use train::{temporal_split, test_records, train, training_records, Schedule, Split, TrainingConfig, TrainingReport};
