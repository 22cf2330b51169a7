pub mod bound;
pub mod error;
pub mod info;
pub mod lqg;
pub mod lti;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
