//! Epistemic support-point filter.
//!
//! A possibilistic, evidence-only recursive state estimator. The epistemic
//! state is a finite support cloud with max-normalized possibility values;
//! measurement updates eliminate hypotheses by whitened-innovation ranking,
//! assign possibility by evidence compatibility, and regenerate the support
//! on a sparse grid scaled to the surviving uncertainty. Per-step diagnostics
//! (the epistemic width monitor) and an orbital tracking validation harness
//! round out the crate.

pub mod entropy;
pub mod evidence;
pub mod geometry;
pub mod harness;
pub mod monitor;
pub mod orbit;
pub mod possibility;
pub mod selection;
pub mod sparsegrid;
pub mod validate;
