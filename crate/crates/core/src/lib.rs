//! Core library for the computational infrastructure registry: a uniform
//! description model for compute/storage resources and applications,
//! versioned validation specs, a durable versioned registry store with
//! conjunctive search, and an application-to-resource matcher.

pub mod canonical;
pub mod matcher;
pub mod model;
pub mod schema;
pub mod store;
