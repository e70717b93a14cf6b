pub mod alexandrov;
pub mod contact;
pub mod convex;
pub mod corpus;
pub mod error;
pub mod grid;
pub mod hull;
pub mod io;
pub mod legendre;
pub mod matrix;
pub mod stencil;
pub mod verify;
pub mod vertex;

pub use error::{Error, Result};
pub use grid::{GridDomain, GridFunction, IndexRegion, RegionShape};
pub use matrix::SymMatrix;
