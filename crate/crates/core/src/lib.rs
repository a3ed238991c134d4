//! Turns per-page manga "page graphs" (detected panels, text blocks, character
//! boxes and pairwise association scores) into ordered dialogue transcripts,
//! and evaluates every stage against ground-truth annotations.
//!
//! The pipeline is deterministic end to end: identical inputs produce
//! byte-identical outputs. The stages are:
//!
//! 1. [`page_model`] — load and validate a page graph.
//! 2. [`panel_order`] — orient every panel pair into a DAG and sort it
//!    topologically to get the panel reading order, then order texts within
//!    each panel.
//! 3. [`association`] — cluster character boxes into identities by
//!    thresholding the character-character score matrix, and assign each text
//!    a speaker by row-wise argmax of the text-character matrix.
//! 4. [`transcript`] — render the diarised transcript.
//! 5. [`metrics`] — detection AP, clustering and retrieval metrics, and
//!    speaker recall, aggregated over a dataset.
//!
//! [`synth`] generates seeded synthetic pages with known ground truth, used by
//! the test suites as an independent oracle.

pub mod association;
pub mod geometry;
pub mod metrics;
pub mod page_model;
pub mod panel_order;
pub mod synth;
pub mod transcript;

/// Human-readable diagnostic attached to an operation's output (clamped boxes,
/// cycles broken during topological sorting, mining conflicts, ...).
/// Warnings are deterministic and never change a command's exit status.
pub type Warning = String;
