//! Analysis toolkit for downstream-vs-upstream transfer experiments.
//!
//! The library is organized around a small pipeline:
//!
//! - [`records`] — experiment metadata, ingestion (CSV/JSONL), filtering,
//!   and accuracy-scale transforms.
//! - [`frontier`] — upper convex hulls of (upstream, downstream) accuracy
//!   clouds and the randomized-classifier mixtures that realize them.
//! - [`powerlaw`] — fitting and extrapolating the saturating power law
//!   `e_ds = k * e_us^alpha + e_ir`, with holdout diagnostics and
//!   sample-size sensitivity sweeps.
//! - [`statlab`] — Spearman/Pearson statistics across tasks, parameter
//!   trends against shot counts, and sign-likelihood summaries.
//! - [`simgen`] — synthetic experiment clouds with a known generating
//!   curve, used as ground truth for fit-recovery checks.
//! - [`toylab`] — a small fully-connected network with decoupled head
//!   hyperparameters, layer probes, norms, and margin diagnostics.

pub mod frontier;
pub mod powerlaw;
pub mod records;
pub mod seeds;
pub mod simgen;
pub mod statlab;
pub mod toylab;
