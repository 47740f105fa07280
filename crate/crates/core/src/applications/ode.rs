use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::coupled::probe_indices;
use crate::algebra::{BanachAlgebra, R2Elem};
use crate::fixed_point::{
    pointwise_limit_harness, ConvergenceReport, FixedPointError, HarnessConfig, MapFamily, Mapping,
    ROUNDING_SLACK,
};
use crate::grid::{GridError, GridFunction, UniformGrid};
use crate::metric::{
    bielecki_norm, BieleckiPairSpace, ConeMetricSpace, GridPair, MetricError, SpaceRng,
};

pub type Field = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Safety factor applied to sampled maxima of `|f|` and `|g|`.
pub const SUP_INFLATION: f64 = 1.05;
pub const DEFAULT_DELTA_SAMPLES: usize = 41;
pub const ODE_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("box half-widths must be positive")]
    DegenerateBox,
    #[error("members do not share the limit's initial data and box")]
    MismatchedBox,
    #[error("certificate coefficient {0} is not below 1")]
    NotContractive(f64),
    #[error("member {index} has scaled constant {alpha} above the bound {m}")]
    BoundExceeded { index: usize, alpha: f64, m: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("iterate {iteration} left the invariant set")]
    LeftInvariantSet { iteration: usize },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

/// `y' = f(x, y, z)`, `z' = g(x, y, z)`, `y(a) = β`, `z(a) = γ`, with the box
/// `Δ = {|x - a| ≤ ā, |y - β| ≤ β̄, |z - γ| ≤ γ̄}` and constants `L1`, `L2` of
/// `|f(x, y, z) - f(x, ȳ, z̄)| ≤ L1|y - ȳ|` and
/// `|g(x, y, z) - g(x, ȳ, z̄)| ≤ L2|z - z̄|` on `Δ`.
#[derive(Clone)]
pub struct OdeProblem {
    pub f: Field,
    pub g: Field,
    pub a: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a_bar: f64,
    pub beta_bar: f64,
    pub gamma_bar: f64,
    pub l1: f64,
    pub l2: f64,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("a", &self.a)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("a_bar", &self.a_bar)
            .field("beta_bar", &self.beta_bar)
            .field("gamma_bar", &self.gamma_bar)
            .field("l1", &self.l1)
            .field("l2", &self.l2)
            .finish()
    }
}

impl OdeProblem {
    /// Fields with initial data `(a, β, γ)`, a unit box and unit constants.
    pub fn new(
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        a: f64,
        beta: f64,
        gamma: f64,
    ) -> Self {
        OdeProblem {
            f: Arc::new(f),
            g: Arc::new(g),
            a,
            beta,
            gamma,
            a_bar: 1.0,
            beta_bar: 1.0,
            gamma_bar: 1.0,
            l1: 1.0,
            l2: 1.0,
        }
    }

    pub fn with_box(mut self, a_bar: f64, beta_bar: f64, gamma_bar: f64) -> Self {
        self.a_bar = a_bar;
        self.beta_bar = beta_bar;
        self.gamma_bar = gamma_bar;
        self
    }

    pub fn with_lipschitz(mut self, l1: f64, l2: f64) -> Self {
        self.l1 = l1;
        self.l2 = l2;
        self
    }

    fn same_data(&self, other: &OdeProblem) -> bool {
        [
            self.a,
            self.beta,
            self.gamma,
            self.a_bar,
            self.beta_bar,
            self.gamma_bar,
        ] == [
            other.a,
            other.beta,
            other.gamma,
            other.a_bar,
            other.beta_bar,
            other.gamma_bar,
        ]
    }

    fn check_box(&self) -> Result<(), OdeError> {
        let widths = [self.a_bar, self.beta_bar, self.gamma_bar];
        if widths.iter().all(|w| *w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(OdeError::DegenerateBox)
        }
    }

    /// `(max |f|, max |g|)` over a `samples³` lattice of `Δ`.
    fn sampled_sup(&self, samples: usize) -> (f64, f64) {
        let axis = |c: f64, r: f64| -> Vec<f64> {
            (0..samples)
                .map(|i| c - r + 2.0 * r * i as f64 / (samples - 1) as f64)
                .collect()
        };
        let (xs, ys, zs) = (
            axis(self.a, self.a_bar),
            axis(self.beta, self.beta_bar),
            axis(self.gamma, self.gamma_bar),
        );
        let (mut mf, mut mg) = (0.0_f64, 0.0_f64);
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    mf = mf.max((self.f)(x, y, z).abs());
                    mg = mg.max((self.g)(x, y, z).abs());
                }
            }
        }
        (mf, mg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum TauPolicy {
    /// `τ1 = τ2 = 2·max(L1, L2, 1/2)`.
    #[default]
    Doubled,
    Fixed {
        tau1: f64,
        tau2: f64,
    },
}

impl TauPolicy {
    fn choose(self, l1: f64, l2: f64) -> (f64, f64) {
        match self {
            TauPolicy::Doubled => {
                let t = 2.0 * l1.max(l2).max(0.5);
                (t, t)
            }
            TauPolicy::Fixed { tau1, tau2 } => (tau1, tau2),
        }
    }
}

/// Interval radii, sampled bounds and Bielecki weights for which the
/// integral operator maps `S` into itself and contracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeCertificate {
    pub m_f: f64,
    pub m_g: f64,
    pub h1: f64,
    pub h2: f64,
    pub h: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// `max(L1/τ1, L2/τ2)`.
    pub alpha1: f64,
    /// Lipschitz constant of the operator in the weighted norm over the whole
    /// interval `[a - h, a + h]`: `max(L1(e^{τ1 h} - 1)/τ1, L2(e^{τ2 h} - 1)/τ2)`.
    /// The weight decays to the right of `a`, so to the left it contributes
    /// a factor above `1/τ`.
    pub alpha_two_sided: f64,
    /// Lattice points per axis of `Δ` used for `m_f`, `m_g`.
    pub delta_samples: usize,
    pub inflation: f64,
}

impl OdeCertificate {
    pub fn offset(&self, p: &OdeProblem) -> f64 {
        p.a - p.a_bar
    }

    pub fn grid(&self, p: &OdeProblem, grid_pts: usize) -> Result<UniformGrid, OdeError> {
        if grid_pts.is_multiple_of(2) {
            return Err(OdeError::InvalidConfig(
                "grid_pts must be odd so that a is a node",
            ));
        }
        Ok(UniformGrid::new(p.a - self.h, p.a + self.h, grid_pts)?)
    }

    pub fn space(&self, p: &OdeProblem, grid_pts: usize) -> Result<BieleckiPairSpace, OdeError> {
        Ok(BieleckiPairSpace::new(
            self.grid(p, grid_pts)?,
            self.tau1,
            self.tau2,
            self.offset(p),
        )?)
    }
}

fn build_certificate(
    p: &OdeProblem,
    (sup_f, sup_g): (f64, f64),
    (l1, l2): (f64, f64),
    delta_samples: usize,
    policy: TauPolicy,
) -> Result<OdeCertificate, OdeError> {
    let (m_f, m_g) = (SUP_INFLATION * sup_f, SUP_INFLATION * sup_g);
    let radius = |bar: f64, m: f64| {
        if m > 0.0 {
            p.a_bar.min(bar / m)
        } else {
            p.a_bar
        }
    };
    let (h1, h2) = (radius(p.beta_bar, m_f), radius(p.gamma_bar, m_g));
    let h = h1.min(h2);
    let (tau1, tau2) = policy.choose(l1, l2);
    if !(tau1 > 0.0 && tau2 > 0.0) {
        return Err(OdeError::InvalidConfig("Bielecki weights must be positive"));
    }
    let alpha1 = (l1 / tau1).max(l2 / tau2);
    if alpha1 >= 1.0 {
        return Err(OdeError::NotContractive(alpha1));
    }
    let two_sided = |l: f64, t: f64| l * (t * h).exp_m1() / t;
    Ok(OdeCertificate {
        m_f,
        m_g,
        h1,
        h2,
        h,
        tau1,
        tau2,
        alpha1,
        alpha_two_sided: alpha1.max(two_sided(l1, tau1)).max(two_sided(l2, tau2)),
        delta_samples,
        inflation: SUP_INFLATION,
    })
}

/// Certificate for one problem from a `delta_samples³` sample of `Δ`.
pub fn ode_certify(
    p: &OdeProblem,
    delta_samples: usize,
    policy: TauPolicy,
) -> Result<OdeCertificate, OdeError> {
    p.check_box()?;
    if delta_samples < 2 {
        return Err(OdeError::InvalidConfig("delta_samples must be at least 2"));
    }
    build_certificate(
        p,
        p.sampled_sup(delta_samples),
        (p.l1, p.l2),
        delta_samples,
        policy,
    )
}

/// One certificate for the limit and the members at [`probe_indices`] of
/// `horizon`, from the largest sampled bounds and constants among them.
pub fn ode_certify_family(
    family: &dyn Fn(usize) -> OdeProblem,
    limit: &OdeProblem,
    horizon: usize,
    delta_samples: usize,
    policy: TauPolicy,
) -> Result<OdeCertificate, OdeError> {
    limit.check_box()?;
    if delta_samples < 2 {
        return Err(OdeError::InvalidConfig("delta_samples must be at least 2"));
    }
    let (mut sup, mut l) = (limit.sampled_sup(delta_samples), (limit.l1, limit.l2));
    for n in probe_indices(horizon) {
        let member = family(n);
        if !member.same_data(limit) {
            return Err(OdeError::MismatchedBox);
        }
        let s = member.sampled_sup(delta_samples);
        sup = (sup.0.max(s.0), sup.1.max(s.1));
        l = (l.0.max(member.l1), l.1.max(member.l2));
    }
    build_certificate(limit, sup, l, delta_samples, policy)
}

/// `T(y, z) = (β + ∫_a^x f(s, y, z) ds, γ + ∫_a^x g(s, y, z) ds)` by the
/// cumulative trapezoid rule.
pub fn integral_operator(
    p: &OdeProblem,
    grid: UniformGrid,
) -> impl Fn(&GridPair) -> GridPair + Send + Sync + 'static {
    let (f, g, a, beta, gamma) = (Arc::clone(&p.f), Arc::clone(&p.g), p.a, p.beta, p.gamma);
    move |w: &GridPair| {
        let field = |h: &Field, c: f64| {
            let values = grid
                .nodes()
                .zip(w.y.values.iter().zip(&w.z.values))
                .map(|(x, (y, z))| h(x, *y, *z))
                .collect();
            let int = GridFunction { grid, values }
                .cumulative_integral(a)
                .expect("a is the middle node");
            GridFunction {
                grid,
                values: int.values.into_iter().map(|v| c + v).collect(),
            }
        };
        GridPair {
            y: field(&f, beta),
            z: field(&g, gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSolution {
    pub y: GridFunction,
    pub z: GridFunction,
    pub iterations: usize,
    /// Bielecki distance pair between iterates `k` and `k - 1`.
    pub step_distances: Vec<R2Elem>,
}

impl OdeSolution {
    /// Successive ratios of step norms, from the second step on.
    pub fn step_ratios(&self) -> Vec<f64> {
        self.step_distances
            .windows(2)
            .filter(|w| w[0].norm() > 0.0)
            .map(|w| w[1].norm() / w[0].norm())
            .collect()
    }
}

fn in_invariant_set(p: &OdeProblem, cert: &OdeCertificate, w: &GridPair) -> Result<bool, OdeError> {
    let off = cert.offset(p);
    let dev = |f: &GridFunction, c: f64| GridFunction {
        grid: f.grid,
        values: f.values.iter().map(|v| v - c).collect(),
    };
    Ok(
        bielecki_norm(&dev(&w.y, p.beta), cert.tau1, off)? <= p.beta_bar
            && bielecki_norm(&dev(&w.z, p.gamma), cert.tau2, off)? <= p.gamma_bar,
    )
}

/// Picard iteration of [`integral_operator`] from the constant pair
/// `(β, γ)` on `grid_pts` nodes over `[a - h, a + h]`, until successive
/// iterates are closer than `tol` in norm.
pub fn ode_solve(
    p: &OdeProblem,
    cert: &OdeCertificate,
    grid_pts: usize,
    tol: f64,
) -> Result<OdeSolution, OdeError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(OdeError::InvalidConfig("tol must be positive"));
    }
    let space = cert.space(p, grid_pts)?;
    let t = integral_operator(p, space.grid);
    let mut w = GridPair {
        y: GridFunction::constant(space.grid, p.beta),
        z: GridFunction::constant(space.grid, p.gamma),
    };
    let mut steps = Vec::new();
    for k in 1..=ODE_MAX_ITER {
        let next = t(&w);
        if !space.contains(&next) || !in_invariant_set(p, cert, &next)? {
            return Err(OdeError::LeftInvariantSet { iteration: k });
        }
        let d = space.metric(&next, &w);
        steps.push(d);
        w = next;
        if d.norm() < tol {
            return Ok(OdeSolution {
                y: w.y,
                z: w.z,
                iterations: k,
                step_distances: steps,
            });
        }
    }
    Err(OdeError::NoConvergence {
        iterations: ODE_MAX_ITER,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSequenceReport {
    pub certificate: OdeCertificate,
    pub report: ConvergenceReport<R2Elem>,
}

/// Solutions of the members against the solution of the limit on one grid,
/// as Bielecki distance pairs. Members at [`probe_indices`] must satisfy
/// `max(L1_n/τ1, L2_n/τ2) ≤ m`; the bound column uses
/// `(e - (m·q, 0))⁻¹ d(T_n w*, T w*)` with `q = max(e^{τh} - 1)` the
/// two-sided factor of the certificate.
pub fn ode_sequence_harness(
    family: impl Fn(usize) -> OdeProblem + Send + Sync + 'static,
    limit: &OdeProblem,
    m: f64,
    grid_pts: usize,
    cfg: &HarnessConfig<R2Elem>,
) -> Result<OdeSequenceReport, OdeError> {
    if !(0.0..1.0).contains(&m) {
        return Err(OdeError::InvalidConfig("m must lie in [0, 1)"));
    }
    let cert = ode_certify_family(
        &family,
        limit,
        cfg.probe.horizon,
        DEFAULT_DELTA_SAMPLES,
        TauPolicy::Doubled,
    )?;
    let q = (cert.tau1 * cert.h)
        .exp_m1()
        .max((cert.tau2 * cert.h).exp_m1());
    let scaled = move |p: &OdeProblem| (p.l1 / cert.tau1).max(p.l2 / cert.tau2);
    for n in probe_indices(cfg.probe.horizon) {
        let alpha = scaled(&family(n));
        if alpha > m {
            return Err(OdeError::BoundExceeded { index: n, alpha, m });
        }
    }
    let bound = m * q.max(1.0);
    if bound >= 1.0 {
        return Err(OdeError::NotContractive(bound));
    }
    let space = cert.space(limit, grid_pts)?;
    let grid = space.grid;
    let coefficient = move |p: &OdeProblem| R2Elem::new((scaled(p) * q.max(1.0)).min(bound), 0.0);
    let mapping = move |p: &OdeProblem| {
        Mapping::new(integral_operator(p, grid)).with_coefficient(coefficient(p))
    };
    let fam = MapFamily::new(move |n| mapping(&family(n)), mapping(limit))
        .with_coefficient_bound(R2Elem::new(bound, 0.0));
    let x0 = GridPair {
        y: GridFunction::constant(grid, limit.beta),
        z: GridFunction::constant(grid, limit.gamma),
    };
    let report = pointwise_limit_harness(&fam, &space, &x0, cfg)?;
    Ok(OdeSequenceReport {
        certificate: cert,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OdeLipschitzReport {
    pub samples: usize,
    pub f_violations: usize,
    pub g_violations: usize,
}

impl OdeLipschitzReport {
    pub fn clean(&self) -> bool {
        self.f_violations == 0 && self.g_violations == 0
    }
}

/// Sample the Lipschitz conditions on random pairs `(x, y, z)`, `(x, ȳ, z̄)`
/// of `Δ`, taken literally: the bound for `f` involves `|y - ȳ|` only and
/// the bound for `g` involves `|z - z̄|` only.
pub fn check_ode_lipschitz(p: &OdeProblem, samples: usize, seed: u64) -> OdeLipschitzReport {
    let mut rng = SpaceRng::seed_from_u64(seed);
    let mut draw = |c: f64, r: f64| rng.gen_range(c - r..=c + r);
    let (mut fv, mut gv) = (0, 0);
    for _ in 0..samples {
        let x = draw(p.a, p.a_bar);
        let (y1, y2) = (draw(p.beta, p.beta_bar), draw(p.beta, p.beta_bar));
        let (z1, z2) = (draw(p.gamma, p.gamma_bar), draw(p.gamma, p.gamma_bar));
        let holds = |h: &Field, l: f64, du: f64| {
            let (h1, h2) = (h(x, y1, z1), h(x, y2, z2));
            (h1 - h2).abs() <= l * du + ROUNDING_SLACK * (h1.abs() + h2.abs())
        };
        fv += usize::from(!holds(&p.f, p.l1, (y1 - y2).abs()));
        gv += usize::from(!holds(&p.g, p.l2, (z1 - z2).abs()));
    }
    OdeLipschitzReport {
        samples,
        f_violations: fv,
        g_violations: gv,
    }
}
