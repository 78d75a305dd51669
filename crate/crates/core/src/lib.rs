//! Numerics for Trudinger–Moser functionals with `L^p` perturbations on
//! closed surfaces: P1 finite elements, nonlinear eigenvalues, Green
//! functions, extremals, explicit test functions and blow-up diagnostics.

pub mod blowup;
pub mod calculus;
pub mod compare;
pub mod eigen;
pub mod error;
pub mod extremal;
pub mod field;
pub mod green;
pub mod linsolve;
pub mod logexp;
pub mod sparse;
pub mod surface;
pub mod testfn;

pub use blowup::{BlowupOptions, BlowupReport};
pub use calculus::{AdmissibleField, FunctionalParams};
pub use eigen::{EigenOptions, EigenResult};
pub use error::{Error, Result};
pub use extremal::{ElCoefficients, MaximizeOptions, MaximizerResult, CRITICAL_BETA};
pub use field::Field;
pub use green::{GreenDecomposition, GreenOptions};
pub use sparse::SparseOperator;
pub use surface::{build_flat_torus, build_graded_torus, build_sphere, Geometry, GradedTorus, SurfaceMesh};
pub use testfn::AlphaSpec;
