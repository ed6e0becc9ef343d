//! Message delivery between parties.
