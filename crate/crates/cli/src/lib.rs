//! Command-line front end for `statespace`: JSON model documents, CSV
//! series, and one subcommand per inference task.

mod commands;
pub mod document;
pub mod error;
pub mod output;
pub mod series;

pub use commands::run;
pub use document::{model_to_json, parse_model, parse_model_str};
pub use error::{CliError, CliResult};
pub use series::{parse_series_str, read_series};
