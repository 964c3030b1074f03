//! File formats, scenario runner and property suites around
//! `austensim-core`.

pub mod config;
pub mod io;
pub mod oracle;
pub mod run;
pub mod validate;
