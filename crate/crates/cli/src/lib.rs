//! File formats, seeded generators, reports and the command line for `subrand-core`.

pub mod cli;
pub mod formats;
pub mod gen;
pub mod report;
pub mod suite;
