use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{BanachAlgebra, R2Elem};
use crate::fixed_point::{
    picard_solve, pointwise_limit_harness, ContractionMap, ConvergenceReport, FixedPointError,
    HarnessConfig, MapFamily, Mapping, PicardConfig, ROUNDING_SLACK,
};
use crate::metric::{ConeMetricSpace, PlaneR2Space, SpaceRng};

pub type PlaneFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Half-width of the box the Lipschitz conditions are sampled on.
pub const CONDITION_BOX: f64 = 10.0;
pub const CONDITION_SAMPLES: usize = 10_000;
pub const CONDITION_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoupledError {
    #[error("Lipschitz condition violated at {violations} of {samples} sampled pairs")]
    ConditionViolated { violations: usize, samples: usize },
    #[error("constant must lie in [0, 1), got {0}")]
    BadConstant(f64),
    #[error("member {index} has constant {l} above the family bound {m}")]
    BoundExceeded { index: usize, l: f64, m: f64 },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

/// The system `F(x, y) = 0, G(x, y) = 0`, with the constant `L` of
/// `|F(x₁, y₁) - F(x₂, y₂) + x₁ - x₂| ≤ L|x₁ - x₂|` and
/// `|G(x₁, y₁) - G(x₂, y₂) + y₁ - y₂| ≤ L|y₁ - y₂|`.
///
/// Read literally, these bounds hold for arbitrary `y₁, y₂` (respectively
/// `x₁, x₂`), so a system whose `F` depends on `y` generally fails them.
#[derive(Clone)]
pub struct CoupledSystem {
    pub f: PlaneFn,
    pub g: PlaneFn,
    pub l: f64,
}

impl fmt::Debug for CoupledSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoupledSystem").field("l", &self.l).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub samples: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledSolution {
    pub root: [f64; 2],
    pub iterations: usize,
    /// `(|F|, |G|)` at the root.
    pub residual: [f64; 2],
    /// Whether the root came from a certified contraction.
    pub certified: bool,
}

impl CoupledSystem {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        l: f64,
    ) -> Result<Self, CoupledError> {
        if !(0.0..1.0).contains(&l) {
            return Err(CoupledError::BadConstant(l));
        }
        Ok(CoupledSystem {
            f: Arc::new(f),
            g: Arc::new(g),
            l,
        })
    }

    /// `T(x, y) = (F(x, y) + x, G(x, y) + y)`, whose fixed points are the
    /// roots of the system.
    pub fn operator(&self) -> Mapping<[f64; 2], R2Elem> {
        let (f, g) = (Arc::clone(&self.f), Arc::clone(&self.g));
        Mapping::new(move |p: &[f64; 2]| [f(p[0], p[1]) + p[0], g(p[0], p[1]) + p[1]])
            .with_coefficient(R2Elem::new(self.l, 0.0))
    }

    pub fn residual(&self, p: [f64; 2]) -> [f64; 2] {
        [(self.f)(p[0], p[1]).abs(), (self.g)(p[0], p[1]).abs()]
    }

    /// Sample both conditions on random pairs from the box
    /// `[-CONDITION_BOX, CONDITION_BOX]²`, with a rounding allowance of
    /// [`ROUNDING_SLACK`] relative to the magnitudes involved.
    pub fn check_condition(&self, samples: usize, seed: u64) -> ConditionReport {
        let mut rng = SpaceRng::seed_from_u64(seed);
        let mut draw = || rng.gen_range(-CONDITION_BOX..=CONDITION_BOX);
        let mut violations = 0;
        for _ in 0..samples {
            let (x1, y1, x2, y2) = (draw(), draw(), draw(), draw());
            let check = |h: &PlaneFn, u1: f64, u2: f64| {
                let (h1, h2) = (h(x1, y1), h(x2, y2));
                let lhs = (h1 - h2 + u1 - u2).abs();
                let scale = h1.abs() + h2.abs() + u1.abs() + u2.abs();
                lhs <= self.l * (u1 - u2).abs() + ROUNDING_SLACK * scale
            };
            if !check(&self.f, x1, x2) || !check(&self.g, y1, y2) {
                violations += 1;
            }
        }
        ConditionReport {
            samples,
            violations,
        }
    }

    fn certified_operator(&self) -> Result<ContractionMap<[f64; 2], R2Elem>, CoupledError> {
        let report = self.check_condition(CONDITION_SAMPLES, CONDITION_SEED);
        if report.violations > 0 {
            return Err(CoupledError::ConditionViolated {
                violations: report.violations,
                samples: report.samples,
            });
        }
        Ok(ContractionMap::new(self.operator())?)
    }
}

/// Root of the system by Picard iteration of its operator, after sampling
/// the Lipschitz conditions.
pub fn coupled_solve(
    sys: &CoupledSystem,
    x0: [f64; 2],
    tol: f64,
) -> Result<CoupledSolution, CoupledError> {
    let t = sys.certified_operator()?;
    let r = picard_solve(
        &t,
        &PlaneR2Space::plane(),
        x0,
        &PicardConfig {
            tol,
            max_iter: 100_000,
        },
    )?;
    if !r.converged {
        return Err(CoupledError::NoConvergence {
            iterations: r.iterations,
        });
    }
    Ok(CoupledSolution {
        root: r.point,
        iterations: r.iterations,
        residual: sys.residual(r.point),
        certified: true,
    })
}

/// Picard iteration of `T(x, y) = (F + x, G + y)` with no condition check,
/// stopping when successive iterates differ by less than `tol` in norm.
pub fn coupled_iterate(
    f: impl Fn(f64, f64) -> f64,
    g: impl Fn(f64, f64) -> f64,
    x0: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> Result<CoupledSolution, CoupledError> {
    let space = PlaneR2Space::plane();
    let mut p = x0;
    for k in 1..=max_iter {
        let next = [f(p[0], p[1]) + p[0], g(p[0], p[1]) + p[1]];
        let step = space.metric(&next, &p).norm();
        p = next;
        if step < tol {
            return Ok(CoupledSolution {
                root: p,
                iterations: k,
                residual: [f(p[0], p[1]).abs(), g(p[0], p[1]).abs()],
                certified: false,
            });
        }
    }
    Err(CoupledError::NoConvergence {
        iterations: max_iter,
    })
}

/// Roots of the members `(F_n, G_n)` against the root of the limit system,
/// with the bound `(e - (M, 0))⁻¹ d(T_n x̃, T x̃)`.
pub fn coupled_sequence_harness(
    family: impl Fn(usize) -> CoupledSystem + Send + Sync + 'static,
    limit: &CoupledSystem,
    m: f64,
    x0: [f64; 2],
    cfg: &HarnessConfig<R2Elem>,
) -> Result<ConvergenceReport<R2Elem>, CoupledError> {
    if !(0.0..1.0).contains(&m) {
        return Err(CoupledError::BadConstant(m));
    }
    limit.certified_operator()?;
    for n in probe_indices(cfg.probe.horizon) {
        let member = family(n);
        if member.l > m {
            return Err(CoupledError::BoundExceeded {
                index: n,
                l: member.l,
                m,
            });
        }
        member.certified_operator()?;
    }
    let fam = MapFamily::new(move |n| family(n).operator(), limit.operator())
        .with_coefficient_bound(R2Elem::new(m, 0.0));
    Ok(pointwise_limit_harness(
        &fam,
        &PlaneR2Space::plane(),
        &x0,
        cfg,
    )?)
}

/// Members whose conditions are sampled: the first eight, powers of four,
/// and the last.
pub fn probe_indices(horizon: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=horizon.min(8)).collect();
    let mut n = 16;
    while n < horizon {
        v.push(n);
        n *= 4;
    }
    if horizon > 8 {
        v.push(horizon);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_eighth() -> CoupledSystem {
        CoupledSystem::new(|x, _| -x / 2.0 + 0.25, |_, y| -y / 2.0 + 0.125, 0.5).unwrap()
    }

    #[test]
    fn linear_roots() {
        let tol = 1e-12;
        let s = coupled_solve(&quarter_eighth(), [0.0, 0.0], tol).unwrap();
        assert!((s.root[0] - 0.5).abs() < 1e-12 && (s.root[1] - 0.25).abs() < 1e-12);
        assert!(s.residual[0] + s.residual[1] < tol * 3.0);
        assert!(s.residual.iter().all(|r| *r < 10.0 * tol));

        let neg = CoupledSystem::new(|x, _| -x, |_, y| -y, 0.0).unwrap();
        let s = coupled_solve(&neg, [3.0, -7.0], 1e-12).unwrap();
        assert_eq!(s.root, [0.0, 0.0]);
        assert_eq!(s.iterations, 1);
    }

    #[test]
    fn operator_is_a_contraction() {
        let t = ContractionMap::new(quarter_eighth().operator()).unwrap();
        let r = crate::fixed_point::verify_contraction(&t, &PlaneR2Space::plane(), 10_000, 4);
        assert!(r.verified());
    }

    #[test]
    fn cross_coupling_breaks_the_literal_condition() {
        let f = |x: f64, y: f64| -x / 2.0 + y / 8.0 + 1.0;
        let g = |x: f64, y: f64| x / 8.0 - y / 2.0 + 1.0;
        let sys = CoupledSystem::new(f, g, 0.5).unwrap();
        assert!(matches!(
            coupled_solve(&sys, [0.0, 0.0], 1e-12),
            Err(CoupledError::ConditionViolated { .. })
        ));
        // oracle: Cramer's rule on [[-1/2, 1/8], [1/8, -1/2]]·(x, y) = (-1, -1)
        let det = 0.25 - 1.0 / 64.0;
        let x = (0.5 + 1.0 / 8.0) / det;
        let s = coupled_iterate(f, g, [0.0, 0.0], 1e-13, 10_000).unwrap();
        assert!(!s.certified);
        assert!((s.root[0] - x).abs() < 1e-11 && (s.root[1] - x).abs() < 1e-11);
        assert!((x - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn constant_validation() {
        assert!(CoupledSystem::new(|x, _| x, |_, y| y, 1.0).is_err());
    }

    #[test]
    fn sequence_harness_linear_family() {
        let family = |n: usize| {
            let s = 1.0 / n as f64;
            CoupledSystem::new(
                move |x, _| -x / 2.0 + 0.25 + s,
                |_, y| -y / 2.0 + 0.125,
                0.5,
            )
            .unwrap()
        };
        let cfg = HarnessConfig::default().with_horizon(5_000);
        let r = coupled_sequence_harness(family, &quarter_eighth(), 0.5, [0.0, 0.0], &cfg).unwrap();
        assert!(r.verdict());
        for (i, b) in r.bounds.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((b.u1 - 2.0 / n).abs() < 1e-12 && b.u2 == 0.0);
        }
    }

    #[test]
    fn sequence_harness_varying_constants() {
        let family = |n: usize| {
            let l = 0.5 - 1.0 / (n as f64 + 3.0);
            let s = 1.0 / n as f64;
            CoupledSystem::new(
                move |x, _| -(1.0 - l) * x + 0.25 + s,
                move |_, y| -(1.0 - l) * y + 0.125,
                l,
            )
            .unwrap()
        };
        let limit = quarter_eighth();
        let r = coupled_sequence_harness(
            family,
            &limit,
            0.5,
            [0.0, 0.0],
            &HarnessConfig::default().with_horizon(200),
        );
        assert!(r.unwrap().all_bounds_respected());

        let too_big =
            |_: usize| CoupledSystem::new(|x, _| -x / 4.0, |_, y| -y / 4.0, 0.75).unwrap();
        assert!(matches!(
            coupled_sequence_harness(
                too_big,
                &limit,
                0.5,
                [0.0, 0.0],
                &HarnessConfig::default().with_horizon(20)
            ),
            Err(CoupledError::BoundExceeded { index: 1, .. })
        ));
    }
}
