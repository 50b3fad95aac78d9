pub mod cli;
pub mod config;
pub mod criteria;
pub mod error;
pub mod loops;
pub mod oracle;
pub mod params;
pub mod record;
pub mod sampler;
pub mod special;
pub mod spectral;
pub mod stats;
pub mod tridiag;
pub mod verify;
