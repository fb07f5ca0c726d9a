//! B-spline copulas on the unit square.
//!
//! The crate builds the normalized B-spline density system on `[0, 1]`,
//! assembles copulas `C(u, v; R) = sum r_kl Phi_k(u) Phi_l(v)` from it, and
//! provides the tools used to study their dependence: exact correlation
//! ranges, exact moments of the underlying B-splines through Stirling numbers
//! of the second kind, and numerical total-positivity checks.

pub mod basis;
pub mod copula;
pub mod moments;
pub mod quadrature;
pub mod table;
pub mod total_positivity;

pub use basis::{BasisError, BasisSystem, KnotVector};
pub use copula::{
    closed_form_max_correlation, BsplineCopula, Copula, CopulaError, MaxCorrCopula, ParameterMatrix,
};
pub use moments::{MomentError, MomentQuery, Rational};
