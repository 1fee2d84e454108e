//! Expected Euler characteristics of excursion sets of Gaussian-related
//! random fields, computed through the Gaussian kinematic formula.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] and [`numeric`]: Hermite polynomials, Gaussian and χ
//!   densities, incomplete beta, adaptive quadrature, Richardson differences.
//! * [`double_forms`]: the algebra of double forms and Monte Carlo checks of
//!   the Gaussian moment formulas.
//! * [`gmf`]: Gaussian Minkowski functionals of the domain catalog.
//! * [`lkc`]: Lipschitz–Killing curvatures of flat parameter spaces.
//! * [`gkf`]: the combination rule `E[χ] = Σ L_j (2π)^{-j/2} M_j`.
//! * [`tube`]: Monte Carlo tube volumes, coefficient fits and coarea estimators.
//! * [`field`] and [`euler`]: field synthesis and lattice Euler characteristics.
//! * [`validation`]: the acceptance criteria, shared by the test suite and the CLI.
//!
//! Tube-coefficient convention: `M_j` multiplies `r^j / j!` in the Gaussian
//! volume of the tube. The `(2π)^{-j/2}` factor of the EC densities is applied
//! only in [`gkf`].

pub mod double_forms;
pub mod error;
pub mod euler;
pub mod field;
pub mod gkf;
pub mod gmf;
pub mod lkc;
pub mod numeric;
pub mod rng;
pub mod special;
pub mod tube;
pub mod validation;

pub use error::{GkfError, Result};
