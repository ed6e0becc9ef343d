//! Dataset ingestion, standardization, splitting, and synthetic generation.
