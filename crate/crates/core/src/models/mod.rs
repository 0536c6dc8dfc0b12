//! Persistence, KNN and the three deep sequence-to-sequence forecasters.

mod arch;
mod baseline;
mod forecaster;
mod preset;
mod train;

pub use arch::{sinusoidal_encoding, Architecture, LstmArch, TransformerArch, XlstmArch, CONV_KERNEL, QKV_BLOCK};
pub use baseline::{persistence_forecast, Knn, KNN_K};
pub use forecaster::Forecaster;
pub use preset::{Family, ModelPreset, SizeClass, SIZE_BAND};
pub use train::{
    fit, output_scale_for, pretrain_finetune, train, DeepModel, TrainConfig, DEFAULT_BATCH, DEFAULT_EPOCHS,
    DEFAULT_LR_STAGES,
};
