//! Narrative morphing lab.
//!
//! End-to-end machinery for measuring how the framing of earnings-call
//! management remarks moves predicted analyst beliefs and realized earnings:
//!
//! - [`corpus`]: transcript version selection, prepared-remark extraction,
//!   numeral masking and chunking
//! - [`embed`]: pluggable chunk embedders and document pooling
//! - [`targets`]: expected change, disagreement, realized change and SUE rows
//! - [`features`]: rank-standardized fundamentals and text columns (S / T / ST)
//! - [`gbm`]: least-squares gradient-boosted trees, CV, metrics, partial dependence
//! - [`stats`]: Clark–West nested comparison with Newey–West variance
//! - [`morph`]: prompt registry, paragraph-wise morphing, judging and retries
//! - [`pte`]: predicted treatment effects, aggregation and factor scoring
//! - [`pipeline`]: stage glue used by the command line and end-to-end checks
//! - [`synth`]: deterministic synthetic world with planted narrative effects
//! - [`report`]: fixed-layout text tables and bar-chart datasets

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod dimension;
pub mod embed;
pub mod features;
pub mod gbm;
pub mod jsonl;
pub mod morph;
pub mod pipeline;
pub mod pte;
pub mod quantile;
pub mod report;
pub mod stats;
pub mod synth;
pub mod targets;

pub use dimension::NarrativeDimension;
