//! Repository-level issue-to-patch search.
//!
//! The pipeline narrows a repository down to edit locations ([`localize`]),
//! searches over diff hunks with Monte Carlo tree search guided by a
//! generation backend ([`search`], [`policy`]), scores candidates by
//! executing them ([`harness`]), revises them with execution feedback
//! ([`refine`]) and measures the outcome ([`metrics`], [`calibrate`]).
//!
//! Every language-model interaction goes through
//! [`policy::GenerationBackend`], so the whole pipeline runs offline against
//! [`policy::ScriptedBackend`].

pub mod calibrate;
pub mod harness;
pub mod ingest;
pub mod localize;
pub mod metrics;
pub mod policy;
pub mod python;
pub mod refine;
pub mod search;
pub mod text;
