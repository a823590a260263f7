//! File formats, project loading and the HTTP service for phrasal
//! translation grammars. The formalism and runtime live in `lite_core`.

pub mod lexicon;
pub mod manifest;
pub mod questionnaire;
pub mod service;
pub mod signcsv;

pub use manifest::{load_project, LoadError, LoadedProject, ManifestFile};
