//! Language-model experiments over Java corpora: meaning-preserving rewrites,
//! n-gram scoring, statistics and survey generation.

pub mod corpus;
pub mod experiment;
pub mod frontend;
pub mod lm;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod survey;
pub mod transforms;
