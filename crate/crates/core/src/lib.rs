//! Multi-stream posterior fusion with stream-reliability attention.
//!
//! Several acoustic streams (e.g. microphones) each produce per-frame class
//! posteriors. These are combined frame by frame with weights that reflect
//! how reliable each stream currently looks:
//!
//! * [`measures`]: entropy, M-measure and delta M-measure attention,
//! * [`aemonitor`]: autoencoder reconstruction-error attention,
//! * [`fusion`]: weighted fusion and n-best truncation,
//! * [`decoder`]: Viterbi decoding and error scoring,
//! * [`simulator`]: synthetic corpora with controllable corruption,
//! * [`io`]: binary and text file formats,
//! * [`experiment`]: the end-to-end evaluation pipeline.

pub mod aemonitor;
pub mod decoder;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod io;
pub mod measures;
pub mod simulator;
pub mod stream;

pub use aemonitor::{ae_attention, reconstruction_error, train_ae, AeModel, Architecture, Context, TrainConfig};
pub use decoder::{score, viterbi, ErrorReport, HmmModel};
pub use error::{Error, Result};
pub use fusion::{fuse, n_best_truncate};
pub use measures::{
    binary_window_attention, delta_m_measure, entropy_attention, m_measure, MMeasureConfig, Measure, Window,
};
pub use simulator::{build_scenario, corrupt, Corpus, CorpusSpec, CorruptionProfile, ScenarioKind};
pub use stream::{align_streams, validate_stream_set, AttentionSchedule, PosteriorStream, StreamSet, Violation};
