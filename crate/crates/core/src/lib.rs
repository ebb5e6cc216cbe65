//! Matrix-analytic solver for the (m,n)-batch matched queue with impatient customers.

pub mod error;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
pub mod rg;
pub mod stability;
pub mod analysis;
pub mod stationary;
pub mod sojourn;
pub mod departure;
pub mod sim;
pub mod validate;
