//! Support code for the `asian-mlp` command line tool: config-file and
//! flag merging, and golden-table benchmark evaluation.

pub mod benchmark;
pub mod config;
