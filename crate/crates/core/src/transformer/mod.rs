//! Small autoregressive transformer with hand-written forward and backward
//! passes, softmax or windowed sparsemax attention, and AdamW training.

mod attention;
mod checkpoint;
mod config;
mod linalg;
mod model;
mod optim;
mod sparsemax;
mod train;

pub use attention::{attention, attention_weights, AttentionSpec};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta};
pub use config::{AttentionKind, TransformerConfig, WindowNormalizer};
pub use linalg::{Matrix, Real};
pub use model::{Batch, ParamBlock, TransformerLM, INIT_STD};
pub use optim::AdamW;
pub use sparsemax::{softmax, softmax_backward, sparsemax, sparsemax_backward};
pub use train::{
    frame, train, train_sequences, train_step, transformer_sentence_logprob, transformer_sentence_logprobs,
    Precision, TrainReport, TrainSpec,
};
