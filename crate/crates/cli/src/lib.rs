//! Configuration, CSV I/O, and report serialization behind the `drrd` binary.
//!
//! Split out of the binary so integration tests can build fixtures and parse
//! reports with the exact same schemas the executable uses.

pub mod config;
pub mod csv_io;
pub mod error;
pub mod report;
