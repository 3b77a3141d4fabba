//! Library surface of the `apfold` driver: config loading and the
//! verification suite, shared by the binary and the integration tests.

pub mod config;
pub mod verify;
