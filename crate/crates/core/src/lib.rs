//! Extrinsic geometry of manifolds of tensors with fixed multilinear rank.
//!
//! - [`tensor`]: dense tensors, flattenings, multilinear rank, the action of
//!   O(n₁) × … × O(n_d).
//! - [`curvature`]: Gram matrices, normal projection, second fundamental
//!   form and mean curvature for any [`curvature::Chart`].
//! - [`tucker`]: the rotation-and-core chart of the fixed-rank manifold, its
//!   closed-form derivatives and randomized minimality campaigns.
//! - [`segre`]: rank-one tensors, normal levels, witness curves for linear
//!   functionals and the independence model.

pub mod curvature;
pub mod error;
pub mod segre;
pub mod tensor;
pub mod tucker;

pub use error::{GeometryError, Result};
pub use tensor::{DenseTensor, MultilinearRank, OrthogonalTuple, Shape};
