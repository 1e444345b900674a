pub mod cli;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod gauge;
pub mod legendre;
pub mod linalg;
pub mod manytime;
pub mod model;
pub mod newton;
pub mod pde;
pub mod verify;

pub use error::{Error, Result};
