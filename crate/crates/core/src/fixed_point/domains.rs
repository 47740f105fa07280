//! Families on varying domains: the (G) and (H) properties, and composite
//! checks that run a result's hypotheses and its conclusion side by side.
//!
//! (G): for each `x ∈ X_∞` some `x_n ∈ X_n` has `d(x_n, x)` and
//! `d(T_n x_n, T_∞ x)` both c-sequences.
//! (H): for each `x_n ∈ X_n` some `y_n ∈ X_∞` has `d(x_n, y_n)` and
//! `d(T_n x_n, T_∞ y_n)` both c-sequences.
//!
//! Both quantify over existence, so a check can only confirm a supplied
//! witness or responder; a failed check never refutes the property.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_common_modulus, check_equicontinuity, check_pointwise_convergence,
    check_uniform_convergence, picard_solve, verify_lipschitz, AdversaryFn, ContractionMap,
    FixedPointError, MapFamily, Mapping, PicardConfig, ShrinkSchedule, ROUNDING_SLACK,
};
use crate::algebra::BanachAlgebra;
use crate::metric::{probe_sequence, CSeqProbeConfig, CSeqReport, ConeMetricSpace};

/// `witness(x, n)`: a point of `X_n` approaching `x`.
pub type WitnessFn<'a, P> = &'a (dyn Fn(&P, usize) -> P + Sync);
/// `challenge(n)`: a point of `X_n`.
pub type ChallengeFn<'a, P> = &'a (dyn Fn(usize) -> P + Sync);
/// `responder(n, x_n)`: a point of `X_∞` answering the challenge.
pub type ResponderFn<'a, P> = &'a (dyn Fn(usize, &P) -> P + Sync);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GPoint<P, A> {
    pub point: P,
    /// `n ↦ d(x_n, x)`.
    pub approach: CSeqReport<A>,
    /// `n ↦ d(T_n x_n, T_∞ x)`.
    pub images: CSeqReport<A>,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GReport<P, A> {
    pub points: Vec<GPoint<P, A>>,
    /// Every supplied witness confirmed the property at its point.
    pub verdict: bool,
}

pub fn property_g_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    witness: WitnessFn<'_, S::Point>,
    test_points: &[S::Point],
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<GReport<S::Point, S::Algebra>, FixedPointError> {
    g_check_against(family, &family.limit, space, witness, test_points, cfg)
}

fn g_check_against<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    limit: &Mapping<S::Point, S::Algebra>,
    space: &S,
    witness: WitnessFn<'_, S::Point>,
    test_points: &[S::Point],
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<GReport<S::Point, S::Algebra>, FixedPointError> {
    cfg.validate()?;
    let points = test_points
        .par_iter()
        .map(|x| {
            let tx = limit.apply(x);
            let mut approach = Vec::with_capacity(cfg.horizon);
            let mut images = Vec::with_capacity(cfg.horizon);
            for n in 1..=cfg.horizon {
                let t = family.member(n);
                let xn = witness(x, n);
                if !t.in_domain(&xn) {
                    return Err(FixedPointError::WitnessOutsideDomain { index: n });
                }
                approach.push(space.distance(&xn, x)?);
                images.push(space.distance(&t.apply(&xn), &tx)?);
            }
            let approach = probe_sequence(|n| approach[n - 1], cfg)?;
            let images = probe_sequence(|n| images[n - 1], cfg)?;
            Ok(GPoint {
                point: x.clone(),
                verdict: approach.verdict && images.verdict,
                approach,
                images,
            })
        })
        .collect::<Result<Vec<_>, FixedPointError>>()?;
    let verdict = points.iter().all(|p| p.verdict);
    Ok(GReport { points, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HReport<A> {
    /// `n ↦ d(x_n, y_n)`.
    pub gap: CSeqReport<A>,
    /// `n ↦ d(T_n x_n, T_∞ y_n)`.
    pub images: CSeqReport<A>,
    pub verdict: bool,
}

pub fn property_h_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    challenge: ChallengeFn<'_, S::Point>,
    responder: ResponderFn<'_, S::Point>,
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<HReport<S::Algebra>, FixedPointError> {
    cfg.validate()?;
    let pairs = (1..=cfg.horizon)
        .into_par_iter()
        .map(|n| {
            let t = family.member(n);
            let xn = challenge(n);
            if !t.in_domain(&xn) {
                return Err(FixedPointError::WitnessOutsideDomain { index: n });
            }
            let yn = responder(n, &xn);
            if !family.limit.in_domain(&yn) {
                return Err(FixedPointError::WitnessOutsideDomain { index: n });
            }
            Ok((
                space.distance(&xn, &yn)?,
                space.distance(&t.apply(&xn), &family.limit.apply(&yn))?,
            ))
        })
        .collect::<Result<Vec<_>, FixedPointError>>()?;
    let gap = probe_sequence(|n| pairs[n - 1].0, cfg)?;
    let images = probe_sequence(|n| pairs[n - 1].1, cfg)?;
    Ok(HReport {
        verdict: gap.verdict && images.verdict,
        gap,
        images,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub verdict: bool,
}

/// Hypotheses and conclusion of one result, each checked empirically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeReport {
    pub hypotheses: Vec<NamedCheck>,
    pub conclusion: NamedCheck,
    /// A measured quantity some checks report instead of asserting.
    pub measurement: Option<f64>,
}

impl CompositeReport {
    fn new(
        hypotheses: Vec<(&str, bool)>,
        conclusion: (&str, bool),
        measurement: Option<f64>,
    ) -> Self {
        let named = |(name, verdict): (&str, bool)| NamedCheck {
            name: name.to_string(),
            verdict,
        };
        CompositeReport {
            hypotheses: hypotheses.into_iter().map(named).collect(),
            conclusion: named(conclusion),
            measurement,
        }
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.iter().all(|c| c.verdict)
    }

    /// False only when every hypothesis passed and the conclusion failed.
    pub fn consistent(&self) -> bool {
        !self.hypotheses_hold() || self.conclusion.verdict
    }
}

/// (H)-limit plus approximable points plus a sequentially continuous limit
/// gives a (G)-limit, with the approximating sequences as witnesses.
pub fn h_implies_g_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    approximants: WitnessFn<'_, S::Point>,
    responder: ResponderFn<'_, S::Point>,
    test_points: &[S::Point],
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<CompositeReport, FixedPointError> {
    let g = property_g_check(family, space, approximants, test_points, cfg)?;
    let approach = g.points.iter().all(|p| p.approach.verdict);
    let mut continuity = true;
    let mut h = true;
    for x in test_points {
        let tx = family.limit.apply(x);
        let images = probe_sequence(
            |n| space.metric(&family.limit.apply(&approximants(x, n)), &tx),
            cfg,
        )?;
        continuity &= images.verdict;
        let challenge = |n: usize| approximants(x, n);
        h &= property_h_check(family, space, &challenge, responder, cfg)?.verdict;
    }
    Ok(CompositeReport::new(
        vec![
            ("approximating sequences converge", approach),
            ("limit sequentially continuous", continuity),
            ("(H) with supplied responder", h),
        ],
        ("(G) with the approximating sequences", g.verdict),
        None,
    ))
}

/// Two candidate (G)-limits of a family with a common Lipschitz coefficient
/// `k`. Reports the largest `‖d(T_∞ x, T'_∞ x)‖` over the test points;
/// only the ideal limit forces it to vanish, so it is not asserted.
#[allow(clippy::too_many_arguments)]
pub fn g_limit_uniqueness_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    other_limit: &Mapping<S::Point, S::Algebra>,
    k: S::Algebra,
    space: &S,
    witness: WitnessFn<'_, S::Point>,
    test_points: &[S::Point],
    cfg: &CSeqProbeConfig<S::Algebra>,
    seed: u64,
) -> Result<CompositeReport, FixedPointError> {
    let lipschitz = sampled_indices(cfg.horizon).into_iter().all(|n| {
        let m = family.member(n);
        verify_lipschitz(
            &m,
            k,
            space,
            1_000,
            seed.wrapping_add(n as u64),
            ROUNDING_SLACK,
        )
        .verified()
    });
    let first = property_g_check(family, space, witness, test_points, cfg)?.verdict;
    let second = g_check_against(family, other_limit, space, witness, test_points, cfg)?.verdict;
    let gap = test_points
        .iter()
        .map(|x| {
            space
                .metric(&family.limit.apply(x), &other_limit.apply(x))
                .norm()
        })
        .fold(0.0, f64::max);
    Ok(CompositeReport::new(
        vec![
            ("members share the Lipschitz coefficient", lipschitz),
            ("first candidate is a (G)-limit", first),
            ("second candidate is a (G)-limit", second),
        ],
        ("candidates agree on test points", gap == 0.0),
        Some(gap),
    ))
}

fn sampled_indices(horizon: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=horizon.min(8)).collect();
    let mut n = 16;
    while n <= horizon {
        v.push(n);
        n *= 4;
    }
    v.push(horizon);
    v.dedup();
    v
}

/// (G) plus equicontinuity gives pointwise convergence.
#[allow(clippy::too_many_arguments)]
pub fn equicontinuous_pointwise_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    witness: WitnessFn<'_, S::Point>,
    test_points: &[S::Point],
    c1: S::Algebra,
    schedule: &ShrinkSchedule,
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<CompositeReport, FixedPointError> {
    let mut equi = true;
    for x in test_points {
        equi &= check_equicontinuity(family, space, x, c1, schedule)?.verdict;
    }
    let g = property_g_check(family, space, witness, test_points, cfg)?.verdict;
    let pointwise = check_pointwise_convergence(family, space, test_points, cfg)?.verdict;
    Ok(CompositeReport::new(
        vec![
            ("equicontinuous at test points", equi),
            ("(G) with supplied witness", g),
        ],
        ("pointwise convergence", pointwise),
        None,
    ))
}

/// Uniform convergence gives (H) with the identity responder.
pub fn uniform_implies_h_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    domain_samples: &[S::Point],
    adversary: Option<AdversaryFn<'_, S::Point>>,
    challenges: &[ChallengeFn<'_, S::Point>],
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<CompositeReport, FixedPointError> {
    let uniform = check_uniform_convergence(family, space, domain_samples, adversary, cfg)?.verdict;
    let mut h = true;
    for challenge in challenges {
        h &=
            property_h_check(family, space, *challenge, &|_, x: &S::Point| x.clone(), cfg)?.verdict;
    }
    Ok(CompositeReport::new(
        vec![("uniform convergence", uniform)],
        ("(H) with identity responder", h),
        None,
    ))
}

/// The converse direction: (H) plus a uniformly continuous limit should
/// give uniform convergence. Reported, not asserted.
#[allow(clippy::too_many_arguments)]
pub fn h_uniform_continuity_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    challenges: &[ChallengeFn<'_, S::Point>],
    responder: ResponderFn<'_, S::Point>,
    domain_samples: &[S::Point],
    c1: S::Algebra,
    schedule: &ShrinkSchedule,
    cfg: &CSeqProbeConfig<S::Algebra>,
) -> Result<CompositeReport, FixedPointError>
where
    S::Point: 'static,
{
    let limit_only = MapFamily::constant(family.limit.clone());
    let single = ShrinkSchedule {
        max_index: 1,
        ..*schedule
    };
    let uc = check_common_modulus(&limit_only, space, domain_samples, c1, &single)?.verdict;
    let mut h = true;
    for challenge in challenges {
        h &= property_h_check(family, space, *challenge, responder, cfg)?.verdict;
    }
    let uniform = check_uniform_convergence(family, space, domain_samples, None, cfg)?.verdict;
    Ok(CompositeReport::new(
        vec![
            ("limit uniformly continuous", uc),
            ("(H) with supplied responder", h),
        ],
        ("uniform convergence", uniform),
        None,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceConfig<A> {
    /// Members `1..=probe.horizon` are solved.
    pub probe: CSeqProbeConfig<A>,
    pub picard: PicardConfig,
    /// Last-quarter fixed points must lie within `10·cluster_tol` of the
    /// final one.
    pub cluster_tol: f64,
}

impl<A: BanachAlgebra> Default for ExistenceConfig<A> {
    fn default() -> Self {
        ExistenceConfig {
            probe: CSeqProbeConfig::default(),
            picard: PicardConfig {
                tol: 1e-14,
                max_iter: 100_000,
            },
            cluster_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceReport<P, A> {
    pub members_solved: usize,
    pub clustered: bool,
    /// Final member fixed point, when the tail clusters.
    pub cluster_center: Option<P>,
    /// `d(center, T_∞ center)`.
    pub cluster_residual: Option<A>,
    /// Fixed point of the limit reached by iterating it from the center to
    /// an exact floating-point fixed point, when the limit is contractive.
    pub limit_fixed_point: Option<P>,
    pub limit_residual: Option<A>,
    /// `n ↦ d(x_n, limit fixed point)`.
    pub convergence: Option<CSeqReport<A>>,
    pub conclusion: String,
    /// The run is consistent with the equivalence: either no cluster, or a
    /// cluster whose point is fixed by the limit and attracts the sequence.
    pub verdict: bool,
}

/// Solve every member and relate convergence of the fixed points to
/// existence of a fixed point of the limit.
pub fn fixed_point_existence_check<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    x0: &S::Point,
    cfg: &ExistenceConfig<S::Algebra>,
) -> Result<ExistenceReport<S::Point, S::Algebra>, FixedPointError> {
    cfg.probe.validate()?;
    let horizon = cfg.probe.horizon;
    let points = (1..=horizon)
        .into_par_iter()
        .map(|n| {
            let t = ContractionMap::new(family.member(n))?;
            Ok(super::picard_fixed_point(&t, space, x0.clone(), &cfg.picard)?.point)
        })
        .collect::<Result<Vec<_>, FixedPointError>>()?;
    let last = points[horizon - 1].clone();
    let radius = 10.0 * cfg.cluster_tol;
    let clustered = points[horizon - horizon / 4 - 1..]
        .iter()
        .all(|p| space.metric(p, &last).norm() <= radius);

    let mut report = ExistenceReport {
        members_solved: horizon,
        clustered,
        cluster_center: None,
        cluster_residual: None,
        limit_fixed_point: None,
        limit_residual: None,
        convergence: None,
        conclusion: "not convergent, no conclusion".to_string(),
        verdict: true,
    };
    if !clustered {
        return Ok(report);
    }
    let center_residual = space.metric(&last, &family.limit.apply(&last));
    report.cluster_center = Some(last.clone());
    report.cluster_residual = Some(center_residual);
    let y = match ContractionMap::new(family.limit.clone()) {
        Ok(limit) => {
            let exact = PicardConfig {
                tol: 0.0,
                max_iter: cfg.picard.max_iter,
            };
            picard_solve(&limit, space, last.clone(), &exact)?.point
        }
        Err(_) => last,
    };
    let residual = space.metric(&y, &family.limit.apply(&y));
    let convergence = probe_sequence(|n| space.metric(&points[n - 1], &y), &cfg.probe)?;
    report.verdict = center_residual.norm() <= radius && residual.is_zero() && convergence.verdict;
    report.conclusion = if report.verdict {
        "fixed points converge to a fixed point of the limit".to_string()
    } else {
        "cluster found but not confirmed as a fixed point of the limit".to_string()
    };
    report.limit_fixed_point = Some(y);
    report.limit_residual = Some(residual);
    report.convergence = Some(convergence);
    Ok(report)
}
