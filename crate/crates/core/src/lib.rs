pub mod connection;
pub mod error;
pub mod holonomy;
pub mod liealg;
pub mod statmanifold;

pub use error::{Error, Result};
