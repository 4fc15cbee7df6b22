#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod collective;
pub mod eand;
pub mod error;
pub mod fock;
pub mod localmodel;
pub mod quadrature;
pub mod special;
pub mod twopoint;

pub use error::{Error, Result};
pub use fock::{ComplexAmplitude, FockKet, FockMatrix};
pub use localmodel::LocalModel;
