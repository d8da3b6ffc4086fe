//! File-level tooling around `pcg_core`: WAV IO, corpora on disk, dataset
//! manifests, model checkpoints, evaluation reports and plots.

pub mod corpus;
pub mod manifest;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod wav;
