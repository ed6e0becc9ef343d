//! Fault-detection benchmarking and diagnosis reporting.
