//! Cone metric spaces over the shipped algebras, axiom checks, and the
//! finite-horizon c-sequence probe.
//!
//! A sequence `(dₙ)` in the cone is a c-sequence when for every interior
//! `c` it is eventually way below `c`. That is not decidable from finitely
//! many terms, so [`is_c_sequence`] answers a narrower question: for a fixed
//! probe set and horizon, from which index on does every sampled term sit
//! way below each probe, and do enough trailing samples confirm it.
//!
//! Completeness of the shipped spaces is assumed, not checked.

use std::fmt::Debug;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{le, way_below, BanachAlgebra, R2Elem, UT2Elem};
use crate::grid::{GridFunction, UniformGrid};

pub type SpaceRng = ChaCha8Rng;

/// Sample resolution of the carriers: points are drawn uniformly from the
/// dyadic lattice with this spacing, so differences and small integer
/// multiples of differences are exact in `f64`.
pub const LATTICE_SPACING: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("point {0} lies outside the carrier")]
    PointOutsideCarrier(String),
    #[error("sequence member at index {index} is not in the cone: {value}")]
    MemberOutsideCone { index: usize, value: String },
    #[error("grid function has no nodes")]
    EmptyGrid,
    #[error("invalid probe configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid space: {0}")]
    InvalidSpace(&'static str),
}

/// A set with an algebra-valued distance satisfying nonnegativity,
/// symmetry and the triangle inequality in the cone order.
pub trait ConeMetricSpace: Send + Sync {
    type Point: Clone + Debug + PartialEq + Send + Sync + Serialize + 'static;
    type Algebra: BanachAlgebra;

    fn contains(&self, x: &Self::Point) -> bool;

    /// The distance formula, without carrier checks.
    fn metric(&self, x: &Self::Point, y: &Self::Point) -> Self::Algebra;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> Result<Self::Algebra, MetricError> {
        for p in [x, y] {
            if !self.contains(p) {
                return Err(MetricError::PointOutsideCarrier(format!("{p:?}")));
            }
        }
        Ok(self.metric(x, y))
    }

    fn sample_point(&self, rng: &mut SpaceRng) -> Self::Point;

    /// A carrier point obtained by perturbing `x` by at most `radius` in
    /// each coordinate (clamped to the carrier).
    fn sample_near(&self, x: &Self::Point, radius: f64, rng: &mut SpaceRng) -> Self::Point;
}

fn lattice_value(rng: &mut SpaceRng, lo: f64, hi: f64, include_hi: bool) -> f64 {
    let m_lo = (lo / LATTICE_SPACING).ceil() as i64;
    let mut m_hi = (hi / LATTICE_SPACING).floor() as i64;
    if !include_hi && m_hi as f64 * LATTICE_SPACING >= hi {
        m_hi -= 1;
    }
    rng.gen_range(m_lo..=m_hi) as f64 * LATTICE_SPACING
}

/// `[lo, hi]` with `d(x, y) = UT2(|x - y|, k·|x - y|)`.
///
/// On lattice samples the triangle inequality holds exactly when `k` has a
/// short binary expansion (integers, dyadic fractions); other `k` can miss
/// it by an ulp in the second coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalUT2Space {
    pub k_param: f64,
    pub lo: f64,
    pub hi: f64,
}

impl IntervalUT2Space {
    /// The unit interval `[0, 1]`.
    pub fn new(k_param: f64) -> Result<Self, MetricError> {
        Self::with_carrier(k_param, 0.0, 1.0)
    }

    pub fn with_carrier(k_param: f64, lo: f64, hi: f64) -> Result<Self, MetricError> {
        if !(k_param >= 1.0 && k_param.is_finite()) {
            return Err(MetricError::InvalidSpace(
                "k_param must be a finite real >= 1",
            ));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(MetricError::InvalidSpace(
                "carrier must be a nonempty bounded interval",
            ));
        }
        Ok(IntervalUT2Space { k_param, lo, hi })
    }

    /// `count` equally spaced points covering the carrier, endpoints included.
    pub fn lattice(&self, count: usize) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![self.lo],
            _ => {
                let step = (self.hi - self.lo) / (count - 1) as f64;
                (0..count)
                    .map(|i| {
                        if i + 1 == count {
                            self.hi
                        } else {
                            self.lo + i as f64 * step
                        }
                    })
                    .collect()
            }
        }
    }
}

impl ConeMetricSpace for IntervalUT2Space {
    type Point = f64;
    type Algebra = UT2Elem;

    fn contains(&self, x: &f64) -> bool {
        (self.lo..=self.hi).contains(x)
    }

    fn metric(&self, x: &f64, y: &f64) -> UT2Elem {
        let t = (x - y).abs();
        UT2Elem::new(t, self.k_param * t)
    }

    fn sample_point(&self, rng: &mut SpaceRng) -> f64 {
        lattice_value(rng, self.lo, self.hi, true)
    }

    fn sample_near(&self, x: &f64, radius: f64, rng: &mut SpaceRng) -> f64 {
        let lo = (x - radius).max(self.lo);
        let hi = (x + radius).min(self.hi);
        if hi - lo < LATTICE_SPACING {
            return *x;
        }
        lattice_value(rng, lo, hi, true)
    }
}

/// The region a [`PlaneR2Space`] lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlaneCarrier {
    /// All of ℝ². Sampling draws from `[-SAMPLE_BOX, SAMPLE_BOX]²`.
    Plane,
    /// `[lo, hi]²`-style box, optionally open at the upper faces.
    Box {
        lo: [f64; 2],
        hi: [f64; 2],
        open_hi: bool,
    },
}

/// ℝ² (or a box in it) with `d(x, y) = (|x₁ - y₁|, |x₂ - y₂|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneR2Space {
    pub carrier: PlaneCarrier,
}

impl PlaneR2Space {
    /// Half-width of the box used to sample the unbounded plane.
    pub const SAMPLE_BOX: f64 = 10.0;

    pub fn plane() -> Self {
        PlaneR2Space {
            carrier: PlaneCarrier::Plane,
        }
    }

    /// `[0, 1) × [0, 1)`.
    pub fn half_open_unit_square() -> Self {
        PlaneR2Space {
            carrier: PlaneCarrier::Box {
                lo: [0.0, 0.0],
                hi: [1.0, 1.0],
                open_hi: true,
            },
        }
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2], bool) {
        match self.carrier {
            PlaneCarrier::Plane => ([-Self::SAMPLE_BOX; 2], [Self::SAMPLE_BOX; 2], false),
            PlaneCarrier::Box { lo, hi, open_hi } => (lo, hi, open_hi),
        }
    }

    /// `per_axis²` grid points; with an open upper face the last row stops
    /// one step short of it.
    pub fn lattice(&self, per_axis: usize) -> Vec<[f64; 2]> {
        let (lo, hi, open) = self.bounds();
        let axis = |k: usize| -> Vec<f64> {
            let denom = if open {
                per_axis
            } else {
                per_axis.saturating_sub(1).max(1)
            };
            let step = (hi[k] - lo[k]) / denom as f64;
            (0..per_axis).map(|i| lo[k] + i as f64 * step).collect()
        };
        let (xs, ys) = (axis(0), axis(1));
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| [x, y]))
            .collect()
    }
}

impl ConeMetricSpace for PlaneR2Space {
    type Point = [f64; 2];
    type Algebra = R2Elem;

    fn contains(&self, x: &[f64; 2]) -> bool {
        match self.carrier {
            PlaneCarrier::Plane => x.iter().all(|v| v.is_finite()),
            PlaneCarrier::Box { lo, hi, open_hi } => {
                (0..2).all(|k| x[k] >= lo[k] && if open_hi { x[k] < hi[k] } else { x[k] <= hi[k] })
            }
        }
    }

    fn metric(&self, x: &[f64; 2], y: &[f64; 2]) -> R2Elem {
        R2Elem::new((x[0] - y[0]).abs(), (x[1] - y[1]).abs())
    }

    fn sample_point(&self, rng: &mut SpaceRng) -> [f64; 2] {
        let (lo, hi, open) = self.bounds();
        [
            lattice_value(rng, lo[0], hi[0], !open),
            lattice_value(rng, lo[1], hi[1], !open),
        ]
    }

    fn sample_near(&self, x: &[f64; 2], radius: f64, rng: &mut SpaceRng) -> [f64; 2] {
        let (lo, hi, open) = match self.carrier {
            PlaneCarrier::Plane => ([f64::MIN; 2], [f64::MAX; 2], false),
            PlaneCarrier::Box { lo, hi, open_hi } => (lo, hi, open_hi),
        };
        let mut out = *x;
        for k in 0..2 {
            let a = (x[k] - radius).max(lo[k]);
            let b = (x[k] + radius).min(hi[k]);
            if b - a >= LATTICE_SPACING {
                out[k] = lattice_value(rng, a, b, !open || b < hi[k]);
            }
        }
        out
    }
}

/// Weighted supremum norm `max_t |f(t)|·exp(-τ (t - offset))` over the grid
/// nodes. With `τ = 0` this is the Chebyshev norm.
pub fn bielecki_norm(f: &GridFunction, tau: f64, offset: f64) -> Result<f64, MetricError> {
    if f.is_empty() {
        return Err(MetricError::EmptyGrid);
    }
    if tau == 0.0 {
        return Ok(f.max_abs());
    }
    Ok(f.nodes()
        .map(|(t, v)| v.abs() * (-tau * (t - offset)).exp())
        .fold(0.0, f64::max))
}

/// Significant bits kept in the Bielecki weights of [`BieleckiPairSpace`].
/// A difference of two lattice-valued samples needs at most 22 bits, so
/// each weighted term is an exact product and the triangle inequality holds
/// without rounding slack. The relative change to the weight is below 1e-9.
pub const WEIGHT_BITS: u32 = 31;

fn truncate_bits(x: f64, bits: u32) -> f64 {
    let drop = 52 - (bits - 1);
    f64::from_bits(x.to_bits() & !((1u64 << drop) - 1))
}

/// A pair of grid functions on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPair {
    pub y: GridFunction,
    pub z: GridFunction,
}

/// Pairs of continuous functions on a common interval with distance
/// `(‖y₁ - y₂‖_{B,τ₁}, ‖z₁ - z₂‖_{B,τ₂})` in the plane algebra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BieleckiPairSpace {
    pub grid: UniformGrid,
    pub tau1: f64,
    pub tau2: f64,
    pub offset: f64,
}

impl BieleckiPairSpace {
    pub fn new(grid: UniformGrid, tau1: f64, tau2: f64, offset: f64) -> Result<Self, MetricError> {
        if !(tau1 > 0.0 && tau2 > 0.0) {
            return Err(MetricError::InvalidSpace(
                "Bielecki weights must be positive",
            ));
        }
        Ok(BieleckiPairSpace {
            grid,
            tau1,
            tau2,
            offset,
        })
    }

    /// Node weights `exp(-τ (t - offset))` truncated to [`WEIGHT_BITS`]
    /// significant bits.
    pub fn weights(&self, tau: f64) -> Vec<f64> {
        self.grid
            .nodes()
            .map(|t| truncate_bits((-tau * (t - self.offset)).exp(), WEIGHT_BITS))
            .collect()
    }

    fn weighted_max_diff(&self, a: &GridFunction, b: &GridFunction, tau: f64) -> f64 {
        self.weights(tau)
            .into_iter()
            .zip(a.values.iter().zip(&b.values))
            .map(|(w, (u, v))| (u - v).abs() * w)
            .fold(0.0, f64::max)
    }

    fn random_profile(&self, rng: &mut SpaceRng, amplitude: f64) -> Vec<f64> {
        const KNOTS: usize = 6;
        let knots: Vec<f64> = (0..KNOTS)
            .map(|_| amplitude * lattice_value(rng, -1.0, 1.0, true))
            .collect();
        let n = self.grid.count;
        (0..n)
            .map(|i| {
                let pos = i as f64 * (KNOTS - 1) as f64 / (n - 1) as f64;
                let j = (pos.floor() as usize).min(KNOTS - 2);
                let w = pos - j as f64;
                let v = knots[j] * (1.0 - w) + knots[j + 1] * w;
                (v / LATTICE_SPACING).round() * LATTICE_SPACING
            })
            .collect()
    }
}

impl ConeMetricSpace for BieleckiPairSpace {
    type Point = GridPair;
    type Algebra = R2Elem;

    fn contains(&self, p: &GridPair) -> bool {
        p.y.grid == self.grid
            && p.z.grid == self.grid
            && p.y.values.len() == self.grid.count
            && p.z.values.len() == self.grid.count
            && p.y.values.iter().chain(&p.z.values).all(|v| v.is_finite())
    }

    fn metric(&self, a: &GridPair, b: &GridPair) -> R2Elem {
        R2Elem::new(
            self.weighted_max_diff(&a.y, &b.y, self.tau1),
            self.weighted_max_diff(&a.z, &b.z, self.tau2),
        )
    }

    fn sample_point(&self, rng: &mut SpaceRng) -> GridPair {
        GridPair {
            y: GridFunction {
                grid: self.grid,
                values: self.random_profile(rng, 1.0),
            },
            z: GridFunction {
                grid: self.grid,
                values: self.random_profile(rng, 1.0),
            },
        }
    }

    fn sample_near(&self, x: &GridPair, radius: f64, rng: &mut SpaceRng) -> GridPair {
        let shift = |f: &GridFunction, d: Vec<f64>| GridFunction {
            grid: self.grid,
            values: f.values.iter().zip(d).map(|(a, b)| a + b).collect(),
        };
        let dy = self.random_profile(rng, radius);
        let dz = self.random_profile(rng, radius);
        GridPair {
            y: shift(&x.y, dy),
            z: shift(&x.z, dz),
        }
    }
}

/// Violation counts of the three cone metric axioms over random triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub samples: usize,
    pub d1_violations: usize,
    pub d2_violations: usize,
    pub d3_violations: usize,
}

impl AxiomReport {
    pub fn clean(&self) -> bool {
        self.d1_violations == 0 && self.d2_violations == 0 && self.d3_violations == 0
    }
}

/// Exact check, no rounding allowance.
pub fn check_metric_axioms<S: ConeMetricSpace>(
    space: &S,
    samples: usize,
    seed: u64,
) -> AxiomReport {
    let mut rng = SpaceRng::seed_from_u64(seed);
    let mut report = AxiomReport {
        samples,
        d1_violations: 0,
        d2_violations: 0,
        d3_violations: 0,
    };
    let zero = S::Algebra::zero();
    for _ in 0..samples {
        let x = space.sample_point(&mut rng);
        let y = space.sample_point(&mut rng);
        let z = space.sample_point(&mut rng);
        let dxy = space.metric(&x, &y);
        let dxx = space.metric(&x, &x);
        let d1_ok = dxy.in_cone() && dxx == zero && ((x == y) == (dxy == zero));
        if !d1_ok {
            report.d1_violations += 1;
        }
        if dxy != space.metric(&y, &x) {
            report.d2_violations += 1;
        }
        if !le(dxy, space.metric(&x, &z) + space.metric(&z, &y)) {
            report.d3_violations += 1;
        }
    }
    report
}

/// Probe set, horizon and tail length for [`is_c_sequence`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CSeqProbeConfig<A> {
    pub probes: Vec<A>,
    pub horizon: usize,
    pub tail_required: usize,
}

impl<A: BanachAlgebra> Default for CSeqProbeConfig<A> {
    /// Probes `s·(1, 1)` for `s ∈ {1, 10⁻¹, 10⁻², 10⁻³}`, horizon 10⁴,
    /// 16 trailing samples.
    fn default() -> Self {
        let c0 = A::from_coords([1.0, 1.0]);
        CSeqProbeConfig {
            probes: [1.0, 1e-1, 1e-2, 1e-3]
                .iter()
                .map(|&s| c0.scale(s))
                .collect(),
            horizon: 10_000,
            tail_required: 16,
        }
    }
}

impl<A: BanachAlgebra> CSeqProbeConfig<A> {
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_probes(mut self, probes: Vec<A>) -> Self {
        self.probes = probes;
        self
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.probes.iter().any(|c| !c.in_interior()) {
            return Err(MetricError::InvalidConfig(
                "every probe must lie in the interior of the cone",
            ));
        }
        if self.tail_required < 1 || self.horizon < self.tail_required {
            return Err(MetricError::InvalidConfig(
                "need horizon >= tail_required >= 1",
            ));
        }
        Ok(())
    }
}

/// Result for a single probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeOutcome<A> {
    pub probe: A,
    /// Least index from which every sampled term is way below the probe;
    /// `None` when the trailing run is shorter than `tail_required`.
    #[serde(rename = "N_found")]
    pub n_found: Option<usize>,
    pub verdict: bool,
    /// Diagnostic: the trailing samples are also below the probe in norm.
    pub norm_eventually_below: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CSeqReport<A> {
    pub horizon: usize,
    pub samples: usize,
    pub probes: Vec<ProbeOutcome<A>>,
    pub verdict: bool,
}

/// Probe an indexed sequence of cone elements. Entries must be sorted by
/// index; entries past the horizon are ignored.
pub fn is_c_sequence<A: BanachAlgebra>(
    seq: &[(usize, A)],
    cfg: &CSeqProbeConfig<A>,
) -> Result<CSeqReport<A>, MetricError> {
    cfg.validate()?;
    let seq: Vec<(usize, A)> = seq
        .iter()
        .copied()
        .filter(|(n, _)| *n <= cfg.horizon)
        .collect();
    if let Some(&(index, value)) = seq.iter().find(|(_, d)| !d.in_cone()) {
        return Err(MetricError::MemberOutsideCone {
            index,
            value: format!("{value:?}"),
        });
    }
    let probes: Vec<ProbeOutcome<A>> = cfg
        .probes
        .iter()
        .map(|&c| {
            let last_fail = seq.iter().rposition(|&(_, d)| !way_below(d, c));
            let (n_found, passing) = match last_fail {
                None => (0, seq.len()),
                Some(pos) => (seq[pos].0 + 1, seq.len() - pos - 1),
            };
            let verdict = passing >= cfg.tail_required;
            let tail_start = seq.len().saturating_sub(cfg.tail_required);
            let norm_eventually_below =
                !seq.is_empty() && seq[tail_start..].iter().all(|(_, d)| d.norm() < c.norm());
            ProbeOutcome {
                probe: c,
                n_found: verdict.then_some(n_found),
                verdict,
                norm_eventually_below,
            }
        })
        .collect();
    let verdict = probes.iter().all(|p| p.verdict);
    Ok(CSeqReport {
        horizon: cfg.horizon,
        samples: seq.len(),
        probes,
        verdict,
    })
}

/// [`is_c_sequence`] on `n ↦ term(n)` for every `n` in `1..=horizon`.
pub fn probe_sequence<A: BanachAlgebra>(
    term: impl Fn(usize) -> A,
    cfg: &CSeqProbeConfig<A>,
) -> Result<CSeqReport<A>, MetricError> {
    let seq: Vec<(usize, A)> = (1..=cfg.horizon).map(|n| (n, term(n))).collect();
    is_c_sequence(&seq, cfg)
}
