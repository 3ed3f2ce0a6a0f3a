//! Nonexpansive operators on R^n and their modulus of averagedness.
//!
//! A nonexpansive map `T` is κ-averaged when `T = (1 − κ) Id + κ N` for some
//! nonexpansive `N`; its modulus is the least such κ. This crate provides
//!
//! - [`OperatorExpr`]: expression trees built from projections, reflectors,
//!   relaxations, translations, compositions and a few proximal maps,
//! - [`certify`]: a structural calculus giving an interval that contains the
//!   modulus, with injectivity tracking for composition lower bounds,
//! - [`estimate_lower`]: a seeded sampling estimator that certifies lower
//!   bounds pair by pair, and [`verify_certificate`] which checks one against
//!   the other.
//!
//! ```
//! use averagedness::{certify, ConvexSet, OperatorExpr, Vector};
//!
//! let c = ConvexSet::halfspace(Vector::new(vec![1.0, 0.0])?, 0.0)?;
//! let t = OperatorExpr::relax(&OperatorExpr::project(c), 0.6)?;
//! assert_eq!(certify(&t).exact_value(), Some(0.3));
//! # Ok::<(), averagedness::Error>(())
//! ```

pub mod calculus;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod expr;
pub mod sets;
pub mod vector;

pub use calculus::{
    analyze, certify, oy_bound, oy_pair, special_case_bounds, Injectivity, ModulusCertificate,
    OyBound, RuleTrace, SpecialCase,
};
pub use error::{Error, Result};
pub use estimator::{
    audit_nonexpansive, derivative_modulus_1d, estimate_lower, estimate_over_radii,
    estimate_with_seeds, pair_kappa, verify_certificate, Distribution, EstimationReport, Grid,
    SampleConfig, Verdict, Verification,
};
pub use expr::{Node, OperatorExpr, ScalarFn};
pub use sets::{ConvexSet, SetKind};
pub use vector::Vector;
