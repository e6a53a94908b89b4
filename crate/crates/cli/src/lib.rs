//! Command-line front end for `tomolab-core`: JSON run configs, the
//! `simulate` / `reconstruct` / `validate` commands and figure data.

pub mod commands;
pub mod config;
pub mod figures;

use tomolab_core::Error;

/// Validation-bound failure.
pub const EXIT_BOUND: i32 = 2;
/// File, format or configuration failure.
pub const EXIT_IO: i32 = 3;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Bound(_) | Error::GridKind { .. } => EXIT_BOUND,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        _ => 1,
    }
}
