//! Modality-aware neuron unlearning.
//!
//! The crate profiles per-neuron activations of a two-tower model on forget
//! and retain data under multimodal and text-only prompts, scores neurons by
//! how much more modality-specific they are on the forget data, and prunes
//! the top-scoring fraction.
//!
//! Modules, in pipeline order:
//! - [`trace`]: activation traces and their binary file format
//! - [`importance`]: the four importance functions and their aggregate
//! - [`selection`]: forget/retain scores, top-α% selection, prune masks
//! - [`toymodel`]: the toy two-tower model, synthetic data and baselines
//! - [`metrics`]: accuracy, cloze, ROUGE-L, modality gap, retention
//! - [`pipeline`]: configuration-driven end-to-end runs

pub mod error;
pub mod fsutil;
pub mod importance;
pub mod metrics;
pub mod pipeline;
pub mod selection;
pub mod toymodel;
pub mod trace;

pub use error::{ExitClass, ManuError, Result, TraceFormatError};
pub use importance::{compute_importance_map, ImportanceConfig, ImportanceMap, ImportanceWeights};
pub use pipeline::{run_ablation, run_pipeline, PipelineConfig, Summary};
pub use selection::{emit_mask, score_neurons, select_top, PruneMask, Scope, ScoreMap};
pub use toymodel::{ModelTopology, SyntheticDataset, ToyModel};
pub use trace::{ActivationTrace, DatasetTag, Modality, NeuronId, Topology, Tower, TraceBundle};
