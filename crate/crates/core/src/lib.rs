//! Data-discovery tasks over CSV tables driven by a chat-completion model: table-class
//! detection, column-type annotation and join-column prediction.

pub mod backend;
pub mod cli;
pub mod eval;
pub mod harness;
pub mod ontology;
pub mod prompt;
pub mod similarity;
pub mod table;
