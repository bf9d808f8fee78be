//! Standard-library companion to `cgbias-core`: JSON/CSV file formats and
//! the command implementations behind the `cgbias` binary.

pub mod commands;
pub mod formats;
