//! Families of maps and the pointwise, uniform and equicontinuity checks.

use std::sync::Arc;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use super::{FixedPointError, Mapping};
use crate::algebra::{way_below, BanachAlgebra};
use crate::metric::{
    is_c_sequence, probe_sequence, CSeqProbeConfig, CSeqReport, ConeMetricSpace, SpaceRng,
};

pub type MemberFn<P, A> = Arc<dyn Fn(usize) -> Mapping<P, A> + Send + Sync>;

/// A sequence of maps `T_n`, `n ≥ 1`, built on demand, with a limit map.
///
/// Member domains play the role of the varying sets `X_n`; the limit's
/// domain is `X_∞`.
pub struct MapFamily<P, A> {
    members: MemberFn<P, A>,
    pub limit: Mapping<P, A>,
    /// An `M` in the cone dominating every member coefficient.
    pub coefficient_bound: Option<A>,
}

impl<P, A: Clone> Clone for MapFamily<P, A> {
    fn clone(&self) -> Self {
        MapFamily {
            members: Arc::clone(&self.members),
            limit: self.limit.clone(),
            coefficient_bound: self.coefficient_bound.clone(),
        }
    }
}

impl<P: 'static, A: BanachAlgebra> MapFamily<P, A> {
    pub fn new(
        members: impl Fn(usize) -> Mapping<P, A> + Send + Sync + 'static,
        limit: Mapping<P, A>,
    ) -> Self {
        MapFamily {
            members: Arc::new(members),
            limit,
            coefficient_bound: None,
        }
    }

    /// Every member equal to `map`, which is also the limit.
    pub fn constant(map: Mapping<P, A>) -> Self
    where
        P: Send + Sync,
    {
        let m = map.clone();
        Self::new(move |_| m.clone(), map)
    }

    pub fn with_coefficient_bound(mut self, m: A) -> Self {
        self.coefficient_bound = Some(m);
        self
    }

    pub fn member(&self, n: usize) -> Mapping<P, A> {
        (self.members)(n)
    }
}

/// One test point and the probe report of `n ↦ d(T_n x, T x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointVerdict<P, A> {
    pub point: P,
    pub report: CSeqReport<A>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseReport<P, A> {
    pub points: Vec<PointVerdict<P, A>>,
    pub verdict: bool,
}

/// For each test point `x`, probe `n ↦ d(T_n x, T x)` for `n` up to the
/// horizon.
pub fn check_pointwise_convergence<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    test_points: &[S::Point],
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<PointwiseReport<S::Point, S::Algebra>, FixedPointError> {
    cfg.validate()?;
    let points = test_points
        .par_iter()
        .map(|x| {
            let tx = family.limit.apply(x);
            let seq = (1..=cfg.horizon)
                .map(|n| Ok((n, space.distance(&family.member(n).apply(x), &tx)?)))
                .collect::<Result<Vec<_>, FixedPointError>>()?;
            Ok(PointVerdict {
                point: x.clone(),
                report: is_c_sequence(&seq, cfg)?,
            })
        })
        .collect::<Result<Vec<_>, FixedPointError>>()?;
    let verdict = points.iter().all(|p| p.report.verdict);
    Ok(PointwiseReport { points, verdict })
}

/// Extra points examined at index `n`, on top of the fixed sample.
pub type AdversaryFn<'a, P> = &'a (dyn Fn(usize) -> Vec<P> + Sync);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformReport<A> {
    pub domain_samples: usize,
    /// `sup_x d(T_n x, T x)` over the examined points, as a componentwise
    /// maximum, for `n = 1..=horizon`.
    #[serde(skip)]
    pub sup_distances: Vec<A>,
    pub report: CSeqReport<A>,
    pub verdict: bool,
}

/// Probe `n ↦ sup_x d(T_n x, T x)`, the supremum taken componentwise over
/// `domain_samples` together with the points `adversary(n)`.
///
/// Since `d(T_n x, T x) ⪯ sup` for each examined `x`, a probe that passes
/// for the sup sequence yields a single `N(c)` valid at every examined point.
pub fn check_uniform_convergence<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    domain_samples: &[S::Point],
    adversary: Option<AdversaryFn<'_, S::Point>>,
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<UniformReport<S::Algebra>, FixedPointError> {
    cfg.validate()?;
    let limit_images: Vec<S::Point> = domain_samples
        .iter()
        .map(|x| family.limit.apply(x))
        .collect();
    let sup_distances = (1..=cfg.horizon)
        .into_par_iter()
        .map(|n| {
            let t = family.member(n);
            let mut sup = S::Algebra::zero();
            for (x, tx) in domain_samples.iter().zip(&limit_images) {
                sup = sup.join(space.distance(&t.apply(x), tx)?);
            }
            if let Some(adv) = adversary {
                for x in adv(n) {
                    sup = sup.join(space.distance(&t.apply(&x), &family.limit.apply(&x))?);
                }
            }
            Ok(sup)
        })
        .collect::<Result<Vec<_>, FixedPointError>>()?;
    let report = probe_sequence(|n| sup_distances[n - 1], cfg)?;
    Ok(UniformReport {
        domain_samples: domain_samples.len(),
        verdict: report.verdict,
        sup_distances,
        report,
    })
}

/// Candidate schedule for the equicontinuity search: `c₂ = c₁·factorʲ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkSchedule {
    pub factor: f64,
    pub steps: usize,
    /// Points `y` tested per candidate.
    pub samples: usize,
    /// Members `T_1..=T_max_index` examined.
    pub max_index: usize,
    pub seed: u64,
}

impl Default for ShrinkSchedule {
    fn default() -> Self {
        ShrinkSchedule {
            factor: 0.5,
            steps: 24,
            samples: 64,
            max_index: 1_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquicontinuityReport<A> {
    pub c1: A,
    /// First candidate for which every tested `y` passed; `None` when the
    /// schedule was exhausted.
    pub c2: Option<A>,
    pub candidates_tried: usize,
    pub verdict: bool,
}

/// Search for `c₂ ≫ θ` with `d(x, y) ≪ c₂ ⇒ d(T_n x, T_n y) ≪ c₁` for the
/// sampled `y` and `n`.
pub fn check_equicontinuity<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    x: &S::Point,
    c1: S::Algebra,
    schedule: &ShrinkSchedule,
) -> Result<EquicontinuityReport<S::Algebra>, FixedPointError> {
    check_common_modulus(family, space, std::slice::from_ref(x), c1, schedule)
}

/// As [`check_equicontinuity`], but one `c₂` must serve every base point.
/// With a single-member family this samples uniform continuity.
pub fn check_common_modulus<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    base_points: &[S::Point],
    c1: S::Algebra,
    schedule: &ShrinkSchedule,
) -> Result<EquicontinuityReport<S::Algebra>, FixedPointError> {
    if !c1.in_interior() {
        return Err(FixedPointError::InvalidConfig(
            "c1 must lie in the interior of the cone",
        ));
    }
    if !(schedule.factor > 0.0 && schedule.factor < 1.0) || schedule.max_index == 0 {
        return Err(FixedPointError::InvalidConfig(
            "need 0 < factor < 1 and max_index >= 1",
        ));
    }
    let members: Vec<Mapping<S::Point, S::Algebra>> =
        (1..=schedule.max_index).map(|n| family.member(n)).collect();
    let mut rng = SpaceRng::seed_from_u64(schedule.seed);
    for j in 0..schedule.steps {
        let c2 = c1.scale(schedule.factor.powi(j as i32));
        let radius = c2.coords().into_iter().fold(f64::INFINITY, f64::min);
        let mut ok = true;
        'points: for x in base_points {
            let images_x: Vec<S::Point> = members.iter().map(|t| t.apply(x)).collect();
            let mut accepted = 0;
            let mut attempts = 0;
            while accepted < schedule.samples && attempts < 16 * schedule.samples {
                attempts += 1;
                let y = space.sample_near(x, radius, &mut rng);
                if !way_below(space.metric(x, &y), c2) {
                    continue;
                }
                accepted += 1;
                for (t, tx) in members.iter().zip(&images_x) {
                    if !way_below(space.metric(tx, &t.apply(&y)), c1) {
                        ok = false;
                        break 'points;
                    }
                }
            }
        }
        if ok {
            return Ok(EquicontinuityReport {
                c1,
                c2: Some(c2),
                candidates_tried: j + 1,
                verdict: true,
            });
        }
    }
    Ok(EquicontinuityReport {
        c1,
        c2: None,
        candidates_tried: schedule.steps,
        verdict: false,
    })
}
