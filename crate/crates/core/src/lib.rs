pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod decoding;
pub mod metrics;
pub mod model;
pub mod stats;
pub mod tensor;
