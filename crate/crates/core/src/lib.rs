//! Phrasal translation grammars: the rule formalism, project assembly,
//! the translation engine, recognition-grammar compilation, sign tables
//! and questionnaires. IO lives in the `lite` crate.
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod blank;
pub mod diagnostic;
pub mod engine;
pub mod grammar;
pub mod pattern;
pub mod project;
pub mod questionnaire;
pub mod rules;
pub mod sign;
pub mod token;

pub use diagnostic::{Diagnostic, Severity};
pub use engine::{translate, EngineError, MatchResult, TranslationResult};
pub use pattern::{parse_pattern, parse_template, Pattern, PatternElement, Template};
pub use project::{assemble, validate, AssembledProject, Assembly, CanonicalKey, ProjectManifest};
pub use rules::{parse_rule_file, serialize_rule_file, FileRole, RuleFile};
pub use token::{tokenize, LanguageTag, Token, Utterance, VariableName};
