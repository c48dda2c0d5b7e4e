//! Command-line tool, HTTP service and LLM backend around `palm_core`.

pub mod acceptance;
pub mod backend;
pub mod llm;
pub mod runlog;
pub mod service;
