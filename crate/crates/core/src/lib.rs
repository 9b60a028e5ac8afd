//! Chevalley–Eilenberg cohomology of nilpotent Lie algebras, and Monte Carlo
//! amenable averages of forms pulled back along maps between the
//! corresponding simply connected groups.

pub mod algebra;
pub mod cli;
pub mod cohomology;
pub mod degree;
pub mod dsl;
pub mod ergodic;
pub mod error;
pub mod forms;
pub mod group;
pub mod linalg;
pub mod map;
pub mod poly;
pub mod pullback;
pub mod report;
pub mod sampling;
pub mod scalar;

pub use algebra::LieAlgebra;
pub use cohomology::{CohomologyRing, CohomologySpace, RingSignature};
pub use error::{Error, Result};
pub use forms::KForm;
pub use scalar::{Jet, Rational};
