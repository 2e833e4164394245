pub mod corpus;
pub mod harness;
pub mod model;
pub mod sentiment;
pub mod stance;
pub mod synthetic;
pub mod text;
pub mod topics;
