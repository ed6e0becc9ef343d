//! Federated protocol roles and messages.
