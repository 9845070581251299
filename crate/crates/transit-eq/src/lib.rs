//! File formats, CSV import, reporting and the command-line front end for
//! `transit-eq-core`.

pub mod cli;
pub mod csv_import;
pub mod flowfile;
pub mod format;
pub mod report;
