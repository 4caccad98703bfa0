//! Homogeneous Hermitian holomorphic vector bundles over the unit ball in
//! C^n (n = 1, 2), at desk scale.
//!
//! The crate realizes the indecomposable homogeneous bundles whose fibers are
//! filtered by irreducible representations of the maximal compact subgroup,
//! builds the block-unipotent differential operator that intertwines the
//! associated-graded action with the full action, equips the section spaces
//! with reproducing-kernel inner products, and studies the compressed
//! multiplication tuple acting on those spaces.  Every identity carries a
//! numerical verifier on degree-truncated polynomial sections.

pub mod cd;
pub mod error;
pub mod exact;
pub mod gamma;
pub mod hc;
pub mod kernel;
pub mod lie;
pub mod linalg;
pub mod poly;
pub mod rep;
pub mod report;
pub mod sl2;
pub mod suite;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Working scalar: double-precision complex.
pub type C = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C>;

/// `1` as a complex scalar.
pub fn one() -> C {
    C::new(1.0, 0.0)
}

/// `i` as a complex scalar.
pub fn im() -> C {
    C::new(0.0, 1.0)
}

/// Real `x` as a complex scalar.
pub fn re(x: f64) -> C {
    C::new(x, 0.0)
}
