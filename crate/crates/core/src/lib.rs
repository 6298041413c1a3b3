//! Cyclic subgroups of SL(3,ℍ) acting on the quaternionic projective plane:
//! classification, closed-form Kulkarni and dual limit sets, and numerical
//! certification by orbit iteration.

pub mod classify;
pub mod dynamics;
pub mod error;
pub mod hmat;
pub mod limitsets;
pub mod projective;
pub mod quat;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};
pub use hmat::{HMat3, HVec3};
pub use quat::Quaternion;
