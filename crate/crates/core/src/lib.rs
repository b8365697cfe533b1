//! Slice-based unit-test generation for MiniLang.
//!
//! A run scans a project for complex functions, asks a chat model to
//! decompose each one into solution-step slices, generates one test file
//! per slice, isolates and repairs the generated tests, and measures line
//! and branch coverage of the focal methods with the MiniLang interpreter.

pub mod config;
pub mod context;
pub mod extraction;
pub mod focal;
pub mod gateway;
pub mod isolate;
pub mod pipeline;
pub mod prompting;
pub mod repair;
pub mod report;
pub mod slicing;
