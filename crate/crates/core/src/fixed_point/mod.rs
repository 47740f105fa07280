//! Maps on cone metric spaces, Picard iteration, convergence checkers for
//! families of maps, and the harnesses that compare fixed-point distances
//! against their theoretical bounds.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{le, neumann_inverse_e_minus, spectral_radius, AlgebraError, BanachAlgebra};
use crate::metric::{ConeMetricSpace, MetricError, SpaceRng};

mod convergence;
mod domains;
mod harness;

pub use convergence::*;
pub use domains::*;
pub use harness::*;

/// Depth of the spectral radius sweep used to validate coefficients.
pub const COEFFICIENT_SPECTRAL_DEPTH: usize = 128;

/// Tail tolerance for the `(e - α)⁻¹` factors cached on a [`ContractionMap`].
pub const INVERSE_TAIL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedPointError {
    #[error("coefficient {0} is not in the cone")]
    CoefficientOutsideCone(String),
    #[error("coefficient is not contractive: spectral radius estimate {estimate}")]
    NotContractive { estimate: f64 },
    #[error("map has no declared coefficient")]
    MissingCoefficient,
    #[error("starting point lies outside the map's domain")]
    StartOutsideDomain,
    #[error("iterate {iteration} left the domain")]
    IterateEscapedDomain { iteration: usize },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("witness term at index {index} lies outside the required domain")]
    WitnessOutsideDomain { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub type MapFn<P> = Arc<dyn Fn(&P) -> P + Send + Sync>;
pub type DomainFn<P> = Arc<dyn Fn(&P) -> bool + Send + Sync>;

/// A map from a domain into a space, with an optional Lipschitz coefficient
/// in the cone. No domain means the whole carrier.
pub struct Mapping<P, A> {
    f: MapFn<P>,
    coefficient: Option<A>,
    domain: Option<DomainFn<P>>,
}

impl<P, A: Clone> Clone for Mapping<P, A> {
    fn clone(&self) -> Self {
        Mapping {
            f: Arc::clone(&self.f),
            coefficient: self.coefficient.clone(),
            domain: self.domain.clone(),
        }
    }
}

impl<P, A: fmt::Debug> fmt::Debug for Mapping<P, A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mapping")
            .field("coefficient", &self.coefficient)
            .field("restricted", &self.domain.is_some())
            .finish()
    }
}

impl<P, A: BanachAlgebra> Mapping<P, A> {
    pub fn new(f: impl Fn(&P) -> P + Send + Sync + 'static) -> Self {
        Mapping {
            f: Arc::new(f),
            coefficient: None,
            domain: None,
        }
    }

    pub fn with_coefficient(mut self, alpha: A) -> Self {
        self.coefficient = Some(alpha);
        self
    }

    pub fn with_domain(mut self, domain: impl Fn(&P) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(domain));
        self
    }

    pub fn apply(&self, x: &P) -> P {
        (self.f)(x)
    }

    pub fn coefficient(&self) -> Option<A> {
        self.coefficient
    }

    pub fn in_domain(&self, x: &P) -> bool {
        self.domain.as_ref().is_none_or(|d| d(x))
    }
}

/// A [`Mapping`] whose coefficient `α` lies in the cone with `ρ(α) < 1`.
///
/// Construction only validates `α`; whether the map honours it is a
/// separate, sampled question answered by [`verify_contraction`].
pub struct ContractionMap<P, A> {
    map: Mapping<P, A>,
    alpha: A,
    radius: f64,
    inverse: A,
    verified: bool,
}

impl<P, A: Clone> Clone for ContractionMap<P, A> {
    fn clone(&self) -> Self {
        ContractionMap {
            map: self.map.clone(),
            alpha: self.alpha.clone(),
            radius: self.radius,
            inverse: self.inverse.clone(),
            verified: self.verified,
        }
    }
}

impl<P, A: fmt::Debug> fmt::Debug for ContractionMap<P, A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContractionMap")
            .field("alpha", &self.alpha)
            .field("radius", &self.radius)
            .field("verified", &self.verified)
            .finish()
    }
}

impl<P, A: BanachAlgebra> ContractionMap<P, A> {
    pub fn new(map: Mapping<P, A>) -> Result<Self, FixedPointError> {
        let alpha = map.coefficient.ok_or(FixedPointError::MissingCoefficient)?;
        if !alpha.in_cone() {
            return Err(FixedPointError::CoefficientOutsideCone(format!(
                "{alpha:?}"
            )));
        }
        let radius = spectral_radius(alpha, COEFFICIENT_SPECTRAL_DEPTH)?;
        if radius >= 1.0 {
            return Err(FixedPointError::NotContractive { estimate: radius });
        }
        let inverse = neumann_inverse_e_minus(alpha, INVERSE_TAIL_TOL)?;
        Ok(ContractionMap {
            map,
            alpha,
            radius,
            inverse,
            verified: false,
        })
    }

    pub fn from_fn(
        f: impl Fn(&P) -> P + Send + Sync + 'static,
        alpha: A,
    ) -> Result<Self, FixedPointError> {
        Self::new(Mapping::new(f).with_coefficient(alpha))
    }

    pub fn alpha(&self) -> A {
        self.alpha
    }

    /// Spectral radius estimate of `α`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(e - α)⁻¹`.
    pub fn inverse(&self) -> A {
        self.inverse
    }

    pub fn mapping(&self) -> &Mapping<P, A> {
        &self.map
    }

    pub fn apply(&self, x: &P) -> P {
        self.map.apply(x)
    }

    pub fn in_domain(&self, x: &P) -> bool {
        self.map.in_domain(x)
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    /// Mark as verified if `report` found no violations.
    pub fn with_verification<Q>(mut self, report: &ContractionReport<Q>) -> Self {
        self.verified = report.verified();
        self
    }
}

/// Outcome of sampling `d(Tx, Ty) ⪯ α·d(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport<P> {
    pub samples: usize,
    pub violation_count: usize,
    /// The first few violating pairs.
    pub violations: Vec<(P, P)>,
}

impl<P> ContractionReport<P> {
    pub fn verified(&self) -> bool {
        self.violation_count == 0
    }
}

const STORED_VIOLATIONS: usize = 16;
const DOMAIN_SAMPLE_ATTEMPTS: usize = 64;

/// Draw a point of the carrier that lies in `map`'s domain, by rejection.
pub(crate) fn sample_in_domain<S: ConeMetricSpace>(
    space: &S,
    map: &Mapping<S::Point, S::Algebra>,
    rng: &mut SpaceRng,
) -> Option<S::Point> {
    (0..DOMAIN_SAMPLE_ATTEMPTS)
        .map(|_| space.sample_point(rng))
        .find(|x| map.in_domain(x))
}

/// Sample `samples` pairs from the domain and check the contraction
/// inequality in the cone order.
pub fn verify_contraction<S: ConeMetricSpace>(
    t: &ContractionMap<S::Point, S::Algebra>,
    space: &S,
    samples: usize,
    seed: u64,
) -> ContractionReport<S::Point> {
    verify_lipschitz(t.mapping(), t.alpha(), space, samples, seed, 0.0)
}

/// Relative allowance for maps whose images round, such as affine maps with
/// non-dyadic shifts: `(x/2 + c) - (y/2 + c)` need not equal `(x - y)/2`.
pub const ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON;

/// As [`verify_contraction`] for an arbitrary coefficient `k`, which need
/// not be contractive, testing
/// `d(Tx, Ty) ⪯ k·d(x, y) + rel_slack·(|d(Tx, Ty)| + |k·d(x, y)|)`.
/// [`verify_contraction`] uses `rel_slack = 0`.
pub fn verify_lipschitz<S: ConeMetricSpace>(
    map: &Mapping<S::Point, S::Algebra>,
    k: S::Algebra,
    space: &S,
    samples: usize,
    seed: u64,
    rel_slack: f64,
) -> ContractionReport<S::Point> {
    let mut rng = SpaceRng::seed_from_u64(seed);
    let mut report = ContractionReport {
        samples: 0,
        violation_count: 0,
        violations: Vec::new(),
    };
    for _ in 0..samples {
        let (Some(x), Some(y)) = (
            sample_in_domain(space, map, &mut rng),
            sample_in_domain(space, map, &mut rng),
        ) else {
            continue;
        };
        report.samples += 1;
        let lhs = space.metric(&map.apply(&x), &map.apply(&y));
        let rhs = k * space.metric(&x, &y);
        if !le(lhs, rhs + (lhs.abs() + rhs.abs()).scale(rel_slack)) {
            report.violation_count += 1;
            if report.violations.len() < STORED_VIOLATIONS {
                report.violations.push((x, y));
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardConfig {
    /// Stop once the a-posteriori error bound has norm below `tol`. Zero
    /// asks for an exact floating-point fixed point.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            tol: 1e-13,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult<P, A> {
    pub point: P,
    pub iterations: usize,
    /// `d(T x, x)` at the returned point.
    pub residual: A,
    /// Cone bound on `d(x, x*)`: `α(e - α)⁻¹·d(x_k+1, x_k)`.
    pub error_bound: A,
    pub converged: bool,
}

/// Iterate `x_{k+1} = T x_k` from `x0`.
///
/// From `d(x_k, x*) ⪯ (e - α)⁻¹ d(x_{k+1}, x_k)` and one more contraction
/// step, `d(x_{k+1}, x*) ⪯ α(e - α)⁻¹ d(x_{k+1}, x_k)`. Iteration stops when
/// that cone element has norm below `cfg.tol`, or when two iterates
/// coincide. Because the norm is monotone on the cone, the residual at a
/// converged point also has norm below `tol`.
pub fn picard_solve<S: ConeMetricSpace>(
    t: &ContractionMap<S::Point, S::Algebra>,
    space: &S,
    x0: S::Point,
    cfg: &PicardConfig,
) -> Result<FixedPointResult<S::Point, S::Algebra>, FixedPointError> {
    if cfg.tol.is_nan() || cfg.tol < 0.0 || cfg.max_iter == 0 {
        return Err(FixedPointError::InvalidConfig(
            "need tol >= 0 and max_iter >= 1",
        ));
    }
    if !t.in_domain(&x0) || !space.contains(&x0) {
        return Err(FixedPointError::StartOutsideDomain);
    }
    let factor = t.alpha() * t.inverse();
    let mut x = x0;
    for k in 1..=cfg.max_iter {
        let next = t.apply(&x);
        if !t.in_domain(&next) || !space.contains(&next) {
            return Err(FixedPointError::IterateEscapedDomain { iteration: k });
        }
        let step = space.metric(&next, &x);
        let error_bound = factor * step;
        x = next;
        if step.is_zero() || error_bound.norm() < cfg.tol {
            let residual = space.metric(&t.apply(&x), &x);
            return Ok(FixedPointResult {
                point: x,
                iterations: k,
                residual,
                error_bound,
                converged: true,
            });
        }
        if k == cfg.max_iter {
            let residual = space.metric(&t.apply(&x), &x);
            return Ok(FixedPointResult {
                point: x,
                iterations: k,
                residual,
                error_bound,
                converged: false,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// [`picard_solve`] that turns a non-converged result into an error.
pub fn picard_fixed_point<S: ConeMetricSpace>(
    t: &ContractionMap<S::Point, S::Algebra>,
    space: &S,
    x0: S::Point,
    cfg: &PicardConfig,
) -> Result<FixedPointResult<S::Point, S::Algebra>, FixedPointError> {
    let r = picard_solve(t, space, x0, cfg)?;
    if r.converged {
        Ok(r)
    } else {
        Err(FixedPointError::NoConvergence {
            iterations: r.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{R2Elem, UT2Elem};
    use crate::metric::{IntervalUT2Space, PlaneR2Space};

    fn half() -> UT2Elem {
        UT2Elem::new(0.5, 0.0)
    }

    #[test]
    fn coefficient_validation() {
        assert!(matches!(
            ContractionMap::<f64, _>::from_fn(|x| *x, UT2Elem::new(1.0, 0.0)),
            Err(FixedPointError::NotContractive { .. })
        ));
        assert!(matches!(
            ContractionMap::<f64, _>::from_fn(|x| *x, UT2Elem::new(0.5, -1.0)),
            Err(FixedPointError::CoefficientOutsideCone(_))
        ));
        assert!(matches!(
            ContractionMap::new(Mapping::<f64, UT2Elem>::new(|x| *x)),
            Err(FixedPointError::MissingCoefficient)
        ));
        // nilpotent coefficients are admissible
        let t = ContractionMap::<f64, _>::from_fn(|x| *x, UT2Elem::new(0.0, 3.0)).unwrap();
        assert_eq!(t.radius(), 0.0);
        assert_eq!(t.inverse(), UT2Elem::new(1.0, 3.0));
    }

    #[test]
    fn contraction_verification() {
        let space = IntervalUT2Space::new(1.0).unwrap();
        let t = ContractionMap::from_fn(|x: &f64| x / 2.0, half()).unwrap();
        let r = verify_contraction(&t, &space, 10_000, 1);
        assert_eq!(r.samples, 10_000);
        assert!(r.verified());
        assert!(t.with_verification(&r).is_verified());

        let id = ContractionMap::from_fn(|x: &f64| *x, half()).unwrap();
        let r = verify_contraction(&id, &space, 1_000, 1);
        assert!(r.violation_count > 0 && !r.violations.is_empty());
    }

    #[test]
    fn picard_on_interval() {
        let space = IntervalUT2Space::new(1.0).unwrap();
        let t = ContractionMap::from_fn(|x: &f64| x / 2.0 + 0.25, half()).unwrap();
        let cfg = PicardConfig::default();
        let r = picard_solve(&t, &space, 0.0, &cfg).unwrap();
        assert!(r.converged);
        assert!((r.point - 0.5).abs() <= cfg.tol);
        assert!(r.residual.norm() < cfg.tol);

        let r = picard_solve(&t, &space, 0.5, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.residual, UT2Elem::zero());
    }

    #[test]
    fn picard_error_bound_holds_against_closed_form() {
        // x ↦ x/3 + c with c chosen so the fixed point is 0.7; k = 5 makes
        // the off-diagonal part of the distance matter.
        let space = IntervalUT2Space::new(5.0).unwrap();
        let c = 0.7 - 0.7 / 3.0;
        let t = ContractionMap::from_fn(move |x: &f64| x / 3.0 + c, UT2Elem::new(1.0 / 3.0, 0.0))
            .unwrap();
        for tol in [1e-4, 1e-8, 1e-12] {
            let r = picard_solve(
                &t,
                &space,
                0.0,
                &PicardConfig {
                    tol,
                    max_iter: 1000,
                },
            )
            .unwrap();
            let err = space.metric(&r.point, &0.7);
            assert!(err.norm() <= tol, "tol={tol} err={err:?}");
            assert!(le(err, r.error_bound + UT2Elem::new(1e-15, 1e-15)));
        }
    }

    #[test]
    fn picard_in_plane() {
        let space = PlaneR2Space::plane();
        let t = ContractionMap::from_fn(
            |p: &[f64; 2]| [p[0] / 2.0 + 0.25, p[1] / 2.0 + 0.125],
            R2Elem::new(0.5, 0.0),
        )
        .unwrap();
        let r = picard_solve(&t, &space, [0.0, 0.0], &PicardConfig::default()).unwrap();
        assert!((r.point[0] - 0.5).abs() < 1e-12 && (r.point[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nilpotent_coefficient_stops() {
        // d(Tx, Ty) = (0, |x - y|) in the plane algebra: α = (0, 1) works.
        let space = PlaneR2Space::plane();
        let t = ContractionMap::from_fn(|p: &[f64; 2]| [1.0, p[0] / 2.0], R2Elem::new(0.0, 1.0))
            .unwrap();
        let r = picard_solve(&t, &space, [5.0, 5.0], &PicardConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.point, [1.0, 0.5]);
    }

    #[test]
    fn escape_and_start_errors() {
        let space = IntervalUT2Space::new(1.0).unwrap();
        let t = ContractionMap::new(
            Mapping::new(|x: &f64| x / 2.0)
                .with_coefficient(half())
                .with_domain(|x| *x >= 0.1),
        )
        .unwrap();
        assert_eq!(
            picard_solve(&t, &space, 0.05, &PicardConfig::default()),
            Err(FixedPointError::StartOutsideDomain)
        );
        assert_eq!(
            picard_solve(&t, &space, 1.0, &PicardConfig::default()),
            Err(FixedPointError::IterateEscapedDomain { iteration: 4 })
        );
    }

    #[test]
    fn iteration_cap() {
        let space = IntervalUT2Space::new(1.0).unwrap();
        let t = ContractionMap::from_fn(|x: &f64| x * 0.99, UT2Elem::new(0.99, 0.0)).unwrap();
        let r = picard_solve(
            &t,
            &space,
            1.0,
            &PicardConfig {
                tol: 1e-12,
                max_iter: 10,
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 10);
        assert!(picard_fixed_point(
            &t,
            &space,
            1.0,
            &PicardConfig {
                tol: 1e-12,
                max_iter: 10
            }
        )
        .is_err());
    }

    #[test]
    fn exact_mode_reaches_zero() {
        let space = IntervalUT2Space::new(1.0).unwrap();
        let t = ContractionMap::from_fn(|x: &f64| x / 2.0, half()).unwrap();
        let r = picard_solve(
            &t,
            &space,
            1e-4,
            &PicardConfig {
                tol: 0.0,
                max_iter: 5000,
            },
        )
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.point, 0.0);
        assert_eq!(r.residual, UT2Elem::zero());
    }
}
