//! Preparation engine for faceted-browsing datasets.

pub mod cli;
pub mod expr;
pub mod hierarchy;
pub mod intervals;
pub mod model;
pub mod project;
pub mod rdf;
pub mod service;
pub mod sparql;
pub mod tabular;
pub mod transform;
