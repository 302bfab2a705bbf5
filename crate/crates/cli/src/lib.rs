//! IO layer around `diasim-core`: file formats, the HTTP backend, dataset
//! orchestration, bundled sample records and the command-line interface.

pub mod backend_http;
pub mod cli;
pub mod fixtures;
pub mod formats;
pub mod orchestrate;
