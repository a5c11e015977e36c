//! Run orchestration, remote providers and the HTTP service behind the
//! `narrlab` binary.

pub mod config;
pub mod error;
pub mod providers;
pub mod remote;
pub mod run;
pub mod server;
pub mod stages;
