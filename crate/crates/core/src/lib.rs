//! Fixed points of contractions in cone metric spaces over Banach algebras.
//!
//! Distances take values in a two-dimensional commutative Banach algebra
//! ([`algebra::R2Elem`] or [`algebra::UT2Elem`]) ordered by its positive
//! cone. A map contracts when `d(Tx, Ty) ⪯ α·d(x, y)` with the spectral
//! radius of `α` below one.
//!
//! - [`algebra`]: products, the cone order, spectral radius, `(e - k)⁻¹`.
//! - [`metric`]: cone metric spaces, axiom sampling, probes for sequences
//!   tending to zero in the cone.
//! - [`fixed_point`]: certified contractions, Picard iteration, families of
//!   maps and the harnesses that follow their fixed points.
//! - [`applications`]: coupled scalar equations and first order systems.
//! - [`scenarios`]: the reproducible runs behind the `conefix` binary.
//!
//! ```
//! use conefix::algebra::UT2Elem;
//! use conefix::fixed_point::{picard_solve, ContractionMap, PicardConfig};
//! use conefix::metric::IntervalUT2Space;
//!
//! let space = IntervalUT2Space::new(1.0).unwrap();
//! let t = ContractionMap::from_fn(|x: &f64| x / 2.0 + 0.25, UT2Elem::new(0.5, 0.0)).unwrap();
//! let r = picard_solve(&t, &space, 0.0, &PicardConfig::default()).unwrap();
//! assert!((r.point - 0.5).abs() < 1e-12);
//! ```

pub mod algebra;
pub mod applications;
pub mod fixed_point;
pub mod grid;
pub mod metric;
pub mod scenarios;

/// The guide's listings, compiled and run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/algebras.md")]
    pub struct Algebras;
    #[doc = include_str!("../../../book/src/cone-metrics.md")]
    pub struct ConeMetrics;
    #[doc = include_str!("../../../book/src/contractions.md")]
    pub struct Contractions;
    #[doc = include_str!("../../../book/src/convergence.md")]
    pub struct Convergence;
    #[doc = include_str!("../../../book/src/varying-domains.md")]
    pub struct VaryingDomains;
    #[doc = include_str!("../../../book/src/applications.md")]
    pub struct Applications;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub struct Scenarios;
}
