pub mod aggregate;
pub mod config;
pub mod experiment;
pub mod metrics;
