//! Trace-driven simulator of two-tier memory management.
//!
//! Synthetic traces of allocations and accesses are placed onto pages by an
//! allocation strategy, sampled accesses drive a page-hotness policy, and a
//! migration engine moves pages between a fast and a capacity tier. Reports
//! give hit rates, migration counts and an estimated runtime.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod config;
pub mod error;
pub mod experiment;
pub mod histogram;
pub mod hotness;
pub mod metrics;
pub mod migration;
pub mod page;
pub mod policies;
pub mod seed;
pub mod sim;
pub mod workload;
