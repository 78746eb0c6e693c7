//! Holds the end-to-end acceptance suite (`cargo test -p specmon-validation`).
//! The suite lives in its own crate so it runs after the unit and
//! integration tests of the library and the command-line tool.
