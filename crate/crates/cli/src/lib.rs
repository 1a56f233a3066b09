//! Library surface of the workbench CLI: report emitters and the property
//! suites, shared between the binary and the integration tests.

pub mod report;
pub mod suites;
