pub mod artifacts;
pub mod config;
pub mod container;
pub mod corpus_io;
pub mod mota;
pub mod pipeline;
pub mod plot;
pub mod service;
pub mod store;
pub mod transport;
