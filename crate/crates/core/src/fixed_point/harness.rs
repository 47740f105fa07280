//! Harnesses comparing `d(x_n, x*)` with the bounds that force fixed points
//! of a convergent family toward the fixed point of its limit.
//!
//! Every fixed point here is an approximation returned by
//! [`picard_fixed_point`], which also returns a cone bound `E` on its own
//! error. A bound `B` valid for exact fixed points becomes, for the computed
//! ones, `B + slack`, where the slack collects those `E` terms propagated
//! through the same inequality plus a few ulps of the operands. The `bounds`
//! column always holds the unadjusted `B`.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    picard_fixed_point, ContractionMap, FixedPointError, MapFamily, Mapping, PicardConfig,
};
use crate::algebra::{le, neumann_inverse_e_minus, BanachAlgebra};
use crate::metric::{probe_sequence, CSeqProbeConfig, CSeqReport, ConeMetricSpace};

/// Per-index distances and bounds with the probe verdict on the distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport<A> {
    pub indices: Vec<usize>,
    pub distances: Vec<A>,
    pub bounds: Vec<A>,
    /// Allowance for approximate fixed points and rounding; see module docs.
    pub slack: Vec<A>,
    pub bound_respected: Vec<bool>,
    pub c_sequence_verdict: CSeqReport<A>,
}

impl<A: BanachAlgebra> ConvergenceReport<A> {
    pub fn all_bounds_respected(&self) -> bool {
        self.bound_respected.iter().all(|&b| b)
    }

    pub fn verdict(&self) -> bool {
        self.all_bounds_respected() && self.c_sequence_verdict.verdict
    }

    /// Rows `n, dist_c1, dist_c2, bound_c1, bound_c2, bound_respected`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "dist_c1",
            "dist_c2",
            "bound_c1",
            "bound_c2",
            "bound_respected",
        ])
        .expect("in-memory write");
        for i in 0..self.indices.len() {
            let [d1, d2] = self.distances[i].coords();
            let [b1, b2] = self.bounds[i].coords();
            w.write_record([
                self.indices[i].to_string(),
                d1.to_string(),
                d2.to_string(),
                b1.to_string(),
                b2.to_string(),
                self.bound_respected[i].to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    fn assemble(rows: Vec<Row<A>>, probe: &CSeqProbeConfig<A>) -> Result<Self, FixedPointError> {
        let c_sequence_verdict = probe_sequence(|n| rows[n - 1].distance, probe)?;
        Ok(ConvergenceReport {
            indices: (1..=rows.len()).collect(),
            bound_respected: rows
                .iter()
                .map(|r| le(r.distance, r.bound + r.slack))
                .collect(),
            distances: rows.iter().map(|r| r.distance).collect(),
            bounds: rows.iter().map(|r| r.bound).collect(),
            slack: rows.iter().map(|r| r.slack).collect(),
            c_sequence_verdict,
        })
    }
}

struct Row<A> {
    distance: A,
    bound: A,
    slack: A,
}

impl<A: BanachAlgebra> Row<A> {
    /// Adds `64ε·(|dist| + |bound|)` per coordinate to `slack`.
    fn new(distance: A, bound: A, slack: A) -> Self {
        let [d1, d2] = distance.abs().coords();
        let [b1, b2] = bound.abs().coords();
        let ulps = A::from_coords([d1 + b1, d2 + b2]).scale(64.0 * f64::EPSILON);
        Row {
            distance,
            bound,
            slack: slack + ulps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessConfig<A> {
    /// Indices `1..=probe.horizon` are solved.
    pub probe: CSeqProbeConfig<A>,
    pub picard: PicardConfig,
}

impl<A: BanachAlgebra> Default for HarnessConfig<A> {
    fn default() -> Self {
        HarnessConfig {
            probe: CSeqProbeConfig::default(),
            picard: PicardConfig {
                tol: 1e-14,
                max_iter: 100_000,
            },
        }
    }
}

impl<A: BanachAlgebra> HarnessConfig<A> {
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.probe.horizon = horizon;
        self
    }
}

fn contraction<P, A: BanachAlgebra>(
    m: Mapping<P, A>,
) -> Result<ContractionMap<P, A>, FixedPointError> {
    ContractionMap::new(m)
}

fn solve_rows<A, F>(horizon: usize, row: F) -> Result<Vec<Row<A>>, FixedPointError>
where
    A: BanachAlgebra,
    F: Fn(usize) -> Result<Row<A>, FixedPointError> + Sync + Send,
{
    (1..=horizon).into_par_iter().map(row).collect()
}

/// Limit reached uniformly, only the limit needs to be a contraction:
/// `d(x_n, x*) ⪯ (e - α)⁻¹ d(T_n x_n, T x_n)` with `α` the limit's
/// coefficient. Members are solved by Picard iteration, so each one also
/// needs a contractive coefficient.
pub fn uniform_limit_harness<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    x0: &S::Point,
    cfg: &HarnessConfig<S::Algebra>,
) -> Result<ConvergenceReport<S::Algebra>, FixedPointError> {
    cfg.probe.validate()?;
    let limit = contraction(family.limit.clone())?;
    let star = picard_fixed_point(&limit, space, x0.clone(), &cfg.picard)?;
    let (alpha, inv) = (limit.alpha(), limit.inverse());
    let rows = solve_rows(cfg.probe.horizon, |n| {
        let t = contraction(family.member(n))?;
        let xn = picard_fixed_point(&t, space, x0.clone(), &cfg.picard)?;
        let distance = space.distance(&xn.point, &star.point)?;
        let bound = inv * space.distance(&t.apply(&xn.point), &limit.apply(&xn.point))?;
        let slack = xn.error_bound + star.error_bound + inv * (t.alpha() + alpha) * xn.error_bound;
        Ok(Row::new(distance, bound, slack))
    })?;
    ConvergenceReport::assemble(rows, &cfg.probe)
}

/// Limit reached pointwise, members uniformly contractive:
/// `d(x_n, x*) ⪯ (e - M)⁻¹ d(T_n x*, T x*)` where `M` is the family's
/// coefficient bound, or each member's own coefficient when no bound is set.
pub fn pointwise_limit_harness<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    x0: &S::Point,
    cfg: &HarnessConfig<S::Algebra>,
) -> Result<ConvergenceReport<S::Algebra>, FixedPointError> {
    cfg.probe.validate()?;
    let limit = contraction(family.limit.clone())?;
    let star = picard_fixed_point(&limit, space, x0.clone(), &cfg.picard)?;
    let bound_inverse = family
        .coefficient_bound
        .map(|m| neumann_inverse_e_minus(m, super::INVERSE_TAIL_TOL))
        .transpose()?;
    let rows = solve_rows(cfg.probe.horizon, |n| {
        let t = contraction(family.member(n))?;
        if let Some(m) = family.coefficient_bound {
            if !le(t.alpha(), m) {
                return Err(FixedPointError::InvalidConfig(
                    "member coefficient exceeds the family bound",
                ));
            }
        }
        let inv = bound_inverse.unwrap_or(t.inverse());
        let xn = picard_fixed_point(&t, space, x0.clone(), &cfg.picard)?;
        let distance = space.distance(&xn.point, &star.point)?;
        let bound = inv * space.distance(&t.apply(&star.point), &limit.apply(&star.point))?;
        let slack = xn.error_bound
            + star.error_bound
            + inv * (t.alpha() + limit.alpha()) * star.error_bound;
        Ok(Row::new(distance, bound, slack))
    })?;
    ConvergenceReport::assemble(rows, &cfg.probe)
}

/// Member `n` lives on its own domain `X_n`; `witness(n)` is a point of
/// `X_n` approaching `x_∞`. With `k` the common member coefficient:
/// `d(x_n, x_∞) ⪯ (e - k)⁻¹ [k d(y_n, x_∞) + d(T_n y_n, T_∞ x_∞)]`.
pub fn varying_domain_harness<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    x0: &S::Point,
    witness: &(dyn Fn(usize) -> S::Point + Sync),
    cfg: &HarnessConfig<S::Algebra>,
) -> Result<ConvergenceReport<S::Algebra>, FixedPointError> {
    cfg.probe.validate()?;
    let limit = contraction(family.limit.clone())?;
    let star = picard_fixed_point(&limit, space, x0.clone(), &cfg.picard)?;
    let rows = solve_rows(cfg.probe.horizon, |n| {
        let t = contraction(family.member(n))?;
        let k = family.coefficient_bound.unwrap_or(t.alpha());
        let inv = neumann_inverse_e_minus(k, super::INVERSE_TAIL_TOL)?;
        let yn = witness(n);
        if !t.in_domain(&yn) {
            return Err(FixedPointError::WitnessOutsideDomain { index: n });
        }
        let xn = picard_fixed_point(&t, space, x0.clone(), &cfg.picard)?;
        let distance = space.distance(&xn.point, &star.point)?;
        let bound = inv
            * (k * space.distance(&yn, &star.point)?
                + space.distance(&t.apply(&yn), &limit.apply(&star.point))?);
        let slack =
            xn.error_bound + star.error_bound + inv * (k + limit.alpha()) * star.error_bound;
        Ok(Row::new(distance, bound, slack))
    })?;
    ConvergenceReport::assemble(rows, &cfg.probe)
}

/// Limit reached in the generalized uniform sense: `responder(n, x_n)` is a
/// point of `X_∞` near the member fixed point `x_n`. With `k_∞` the limit's
/// coefficient:
/// `d(x_n, x_∞) ⪯ (e - k_∞)⁻¹ [d(T_n x_n, T_∞ y_n) + k_∞ d(y_n, x_n)]`.
pub fn h_limit_harness<S: ConeMetricSpace>(
    family: &MapFamily<S::Point, S::Algebra>,
    space: &S,
    x0: &S::Point,
    responder: &(dyn Fn(usize, &S::Point) -> S::Point + Sync),
    cfg: &HarnessConfig<S::Algebra>,
) -> Result<ConvergenceReport<S::Algebra>, FixedPointError> {
    cfg.probe.validate()?;
    let limit = contraction(family.limit.clone())?;
    let star = picard_fixed_point(&limit, space, x0.clone(), &cfg.picard)?;
    let (k, inv) = (limit.alpha(), limit.inverse());
    let rows = solve_rows(cfg.probe.horizon, |n| {
        let t = contraction(family.member(n))?;
        let xn = picard_fixed_point(&t, space, x0.clone(), &cfg.picard)?;
        let yn = responder(n, &xn.point);
        if !limit.in_domain(&yn) {
            return Err(FixedPointError::WitnessOutsideDomain { index: n });
        }
        let distance = space.distance(&xn.point, &star.point)?;
        let bound = inv
            * (space.distance(&t.apply(&xn.point), &limit.apply(&yn))?
                + k * space.distance(&yn, &xn.point)?);
        let slack = xn.error_bound + star.error_bound + inv * (t.alpha() + k) * xn.error_bound;
        Ok(Row::new(distance, bound, slack))
    })?;
    ConvergenceReport::assemble(rows, &cfg.probe)
}
