//! Symbolic-numeric analysis of level-one linear differential systems at an
//! irregular singular point: formal gauge series, Borel-plane connection
//! constants, Stokes-Ramis matrices (by two independent routes) and alien
//! derivations.

pub mod borel_ode;
pub mod connstokes;
pub mod error;
pub mod germ;
pub mod homological;
pub mod kappa;
pub mod laplace;
pub mod lattice;
pub mod major;
pub mod matrix;
pub mod num;
pub mod pade;
pub mod path;
pub mod series;
pub mod system;

pub use error::{CoreError, Result};
