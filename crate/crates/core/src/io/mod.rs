//! File formats, results emission and the command-line front end.

pub mod cli;
mod formats;
mod results;

pub use formats::{
    default_actions, parse_actions, parse_actions_str, parse_kernel, parse_kernel_str, parse_scores,
    parse_scores_str, score_value_names, write_actions, write_kernel, write_scores, ParsedKernel, ASYMMETRY_WARN,
};
pub use results::{emit_results, write_binned, write_runs, write_summary, write_theory_report, BINNED_COLUMNS, RUN_COLUMNS, SUMMARY_COLUMNS};
