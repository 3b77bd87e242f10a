//! Abstract Language Objects (ALOs).
//!
//! An ALO is a named object assembled by a language model from a fixed
//! recipe: sub-objects carrying skills, knowledge and typed states, a
//! manager that picks skills from a policy, and a log of executed steps.
//! This crate holds everything needed to work with them offline:
//!
//! - [`model`]: the object model, validation and the on-disk registry.
//! - [`prompt`]: prompt templates, image prompts and parameter classification.
//! - [`gateway`]: chat/embedding backends (live HTTP and a deterministic mock).
//! - [`script`]: canonical markdown parsing, repair and serialization.
//! - [`sim`]: a deterministic tick-based world that executes ALOs.
//! - [`codegen`]: scene bundles and update scripts for the browser harness.
//! - [`variability`]: cosine-similarity analysis of repeated completions.
//! - `arbitrary` (feature `arbitrary`): proptest strategies for valid ALOs.

#[cfg(feature = "arbitrary")]
pub mod arbitrary;
pub mod codegen;
pub mod gateway;
pub mod model;
pub mod prompt;
pub mod script;
pub mod sim;
pub mod variability;

pub use model::{Alo, ManagerObject, Registry, SkillSpec, StateVariable, SubObject};
