//! The two concrete Banach algebras used as distance codomains.
//!
//! Both algebras are two dimensional with elements written as a pair
//! `(leading, nilpotent)` and product
//!
//! ```text
//! (a1, b1) * (a2, b2) = (a1 * a2, a1 * b2 + a2 * b1)
//! ```
//!
//! [`R2Elem`] is the plane with that product, [`UT2Elem`] is the algebra of
//! upper triangular matrices `[[alpha, beta], [0, alpha]]` under matrix
//! multiplication. Both carry the norm `|first| + |second|` and the cone of
//! elements with both coordinates nonnegative.
//!
//! Order predicates are exact sign tests. There is no epsilon anywhere in
//! this module: a caller who needs slack must add it to the operands.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gelfand sweep depth used when an operation needs a spectral radius
/// estimate internally.
pub const DEFAULT_SPECTRAL_DEPTH: usize = 64;

/// Term cap for the Neumann series when the norm of `k` is not below one.
pub const NEUMANN_TERM_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("e - k is not certified invertible here: spectral radius estimate {estimate} >= 1")]
    NotInvertibleHere { estimate: f64 },
    #[error("Neumann series did not reach the tail tolerance after {terms} terms")]
    NoConvergence { terms: usize },
    #[error("Neumann inverse residual {residual} exceeds the admissible {allowed}")]
    InaccurateInverse { residual: f64, allowed: f64 },
}

/// A commutative two dimensional Banach algebra with unit, equipped with the
/// nonnegative-quadrant cone.
///
/// The two implementors form a closed family; mixing them is rejected by
/// the type checker.
pub trait BanachAlgebra:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Serialize
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// Short name used in reports.
    const KIND: &'static str;

    fn from_coords(coords: [f64; 2]) -> Self;

    fn coords(&self) -> [f64; 2];

    /// The zero element θ.
    fn zero() -> Self {
        Self::from_coords([0.0, 0.0])
    }

    /// The unit element e.
    fn unit() -> Self {
        Self::from_coords([1.0, 0.0])
    }

    fn norm(&self) -> f64 {
        let [a, b] = self.coords();
        a.abs() + b.abs()
    }

    fn scale(self, s: f64) -> Self {
        let [a, b] = self.coords();
        Self::from_coords([s * a, s * b])
    }

    /// Membership in the cone P.
    fn in_cone(&self) -> bool {
        let [a, b] = self.coords();
        a >= 0.0 && b >= 0.0
    }

    /// Membership in the interior of P.
    fn in_interior(&self) -> bool {
        let [a, b] = self.coords();
        a > 0.0 && b > 0.0
    }

    /// Least upper bound in the cone order (componentwise maximum).
    fn join(self, other: Self) -> Self {
        let [a1, b1] = self.coords();
        let [a2, b2] = other.coords();
        Self::from_coords([a1.max(a2), b1.max(b2)])
    }

    /// Componentwise absolute value.
    fn abs(self) -> Self {
        let [a, b] = self.coords();
        Self::from_coords([a.abs(), b.abs()])
    }

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    /// `self` raised to a nonnegative integer power by repeated squaring.
    fn powi(self, mut n: u64) -> Self {
        let mut base = self;
        let mut acc = Self::unit();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }
}

/// Element of the plane algebra: `(u1, u2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R2Elem {
    pub u1: f64,
    pub u2: f64,
}

impl R2Elem {
    pub const fn new(u1: f64, u2: f64) -> Self {
        R2Elem { u1, u2 }
    }
}

/// Upper triangular matrix `[[alpha, beta], [0, alpha]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UT2Elem {
    pub alpha: f64,
    pub beta: f64,
}

impl UT2Elem {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        UT2Elem { alpha, beta }
    }

    /// The full 2×2 matrix, row major.
    pub fn to_matrix(&self) -> [[f64; 2]; 2] {
        [[self.alpha, self.beta], [0.0, self.alpha]]
    }
}

impl BanachAlgebra for R2Elem {
    const KIND: &'static str = "R2";

    fn from_coords([u1, u2]: [f64; 2]) -> Self {
        R2Elem { u1, u2 }
    }

    fn coords(&self) -> [f64; 2] {
        [self.u1, self.u2]
    }
}

impl BanachAlgebra for UT2Elem {
    const KIND: &'static str = "UT2";

    fn from_coords([alpha, beta]: [f64; 2]) -> Self {
        UT2Elem { alpha, beta }
    }

    fn coords(&self) -> [f64; 2] {
        [self.alpha, self.beta]
    }
}

macro_rules! linear_ops {
    ($t:ty, $a:ident, $b:ident) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, rhs: $t) -> $t {
                <$t>::new(self.$a + rhs.$a, self.$b + rhs.$b)
            }
        }

        impl Sub for $t {
            type Output = $t;
            fn sub(self, rhs: $t) -> $t {
                <$t>::new(self.$a - rhs.$a, self.$b - rhs.$b)
            }
        }

        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                <$t>::new(-self.$a, -self.$b)
            }
        }
    };
}

linear_ops!(R2Elem, u1, u2);
linear_ops!(UT2Elem, alpha, beta);

impl Mul for R2Elem {
    type Output = R2Elem;

    fn mul(self, v: R2Elem) -> R2Elem {
        R2Elem::new(self.u1 * v.u1, self.u1 * v.u2 + self.u2 * v.u1)
    }
}

impl Mul for UT2Elem {
    type Output = UT2Elem;

    // [[a1, b1], [0, a1]] · [[a2, b2], [0, a2]] = [[a1 a2, a1 b2 + b1 a2], [0, a1 a2]]
    fn mul(self, rhs: UT2Elem) -> UT2Elem {
        UT2Elem::new(
            self.alpha * rhs.alpha,
            self.alpha * rhs.beta + self.beta * rhs.alpha,
        )
    }
}

/// Outcome of comparing two elements in the cone order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeOrderOutcome {
    /// `x ⪯ y`, i.e. `y - x ∈ P`.
    pub le: bool,
    /// `x ≺ y`: `x ⪯ y` and `x ≠ y`.
    pub lt: bool,
    /// `x ≪ y`, i.e. `y - x ∈ int(P)`.
    pub way_below: bool,
}

pub fn cone_compare<A: BanachAlgebra>(x: A, y: A) -> ConeOrderOutcome {
    let diff = y - x;
    let le = diff.in_cone();
    ConeOrderOutcome {
        le,
        lt: le && x != y,
        way_below: diff.in_interior(),
    }
}

/// `x ⪯ y`.
pub fn le<A: BanachAlgebra>(x: A, y: A) -> bool {
    (y - x).in_cone()
}

/// `x ≪ y`.
pub fn way_below<A: BanachAlgebra>(x: A, y: A) -> bool {
    (y - x).in_interior()
}

/// Upper estimate of the spectral radius from the Gelfand formula
/// `ρ(k) = inf_n ‖kⁿ‖^(1/n)`.
///
/// The infimum is taken over `n = 1..=n_max` together with the doubling
/// subsequence `n = 2^j, j < n_max`. Every term is an upper bound for ρ, so
/// the union is too; the doubling terms are what make the estimate sharp
/// when the nilpotent part of `k` is large. Powers are carried as a unit
/// direction times a logarithmic scale, so no intermediate overflows.
pub fn spectral_radius<A: BanachAlgebra>(k: A, n_max: usize) -> Result<f64, AlgebraError> {
    if n_max == 0 {
        return Err(AlgebraError::InvalidArgument("n_max must be at least 1"));
    }
    let base = k.norm();
    if !base.is_finite() {
        return Err(AlgebraError::InvalidArgument("element is not finite"));
    }
    if base == 0.0 {
        return Ok(0.0);
    }
    let ln_base = base.ln();
    let unit_k = k.scale(1.0 / base);
    let mut best = base;

    // n = 1..=n_max; `dir` is k^n / ‖...‖, `log_norm` is ln ‖k^n‖.
    let mut dir = unit_k;
    let mut log_norm = ln_base;
    for n in 2..=n_max {
        let next = dir * unit_k;
        let m = next.norm();
        if m == 0.0 {
            return Ok(0.0);
        }
        if !m.is_finite() {
            break;
        }
        log_norm += m.ln() + ln_base;
        dir = next.scale(1.0 / m);
        best = best.min((log_norm / n as f64).exp());
    }

    // n = 2^j by repeated squaring.
    let mut dir = unit_k;
    let mut log_norm = ln_base;
    let mut n = 1.0_f64;
    for _ in 1..n_max.min(1000) {
        let sq = dir * dir;
        let m = sq.norm();
        if m == 0.0 {
            return Ok(0.0);
        }
        if !m.is_finite() {
            break;
        }
        log_norm = 2.0 * log_norm + m.ln();
        n *= 2.0;
        dir = sq.scale(1.0 / m);
        let estimate = (log_norm / n).exp();
        if !estimate.is_finite() {
            break;
        }
        best = best.min(estimate);
    }
    Ok(best)
}

/// `(e - k)⁻¹ = Σ kⁱ`, truncated once the tail is below `tail_tol`.
///
/// When `‖k‖ < 1` the tail after term `m` is bounded by
/// `‖k‖^(m+1) / (1 - ‖k‖)`. Otherwise terms are summed until `‖k^(m+1)‖`
/// drops below `tail_tol`, with a cap of [`NEUMANN_TERM_CAP`] terms. In both
/// cases the exact residual `(e - k)·S - e = -k^(m+1)` is below `tail_tol`
/// before rounding; the computed residual is checked against
/// [`neumann_residual_allowance`].
pub fn neumann_inverse_e_minus<A: BanachAlgebra>(k: A, tail_tol: f64) -> Result<A, AlgebraError> {
    if tail_tol.is_nan() || tail_tol <= 0.0 {
        return Err(AlgebraError::InvalidArgument("tail_tol must be positive"));
    }
    let estimate = spectral_radius(k, DEFAULT_SPECTRAL_DEPTH)?;
    if estimate >= 1.0 {
        return Err(AlgebraError::NotInvertibleHere { estimate });
    }

    let nk = k.norm();
    let mut sum = A::unit();
    let mut term = A::unit();
    let mut terms = 1usize;
    if nk < 1.0 {
        let mut tail = nk / (1.0 - nk);
        while tail >= tail_tol {
            term = term * k;
            sum = sum + term;
            tail *= nk;
        }
    } else {
        loop {
            let next = term * k;
            if next.norm() < tail_tol {
                break;
            }
            sum = sum + next;
            term = next;
            terms += 1;
            if terms > NEUMANN_TERM_CAP {
                return Err(AlgebraError::NoConvergence { terms });
            }
        }
    }

    let residual = neumann_residual(k, sum);
    let allowed = neumann_residual_allowance(k, sum, tail_tol);
    if residual > allowed {
        return Err(AlgebraError::InaccurateInverse { residual, allowed });
    }
    Ok(sum)
}

/// `‖(e - k)·s - e‖`.
pub fn neumann_residual<A: BanachAlgebra>(k: A, s: A) -> f64 {
    ((A::unit() - k) * s - A::unit()).norm()
}

/// Documented residual bound for [`neumann_inverse_e_minus`]:
/// `10·tail_tol` plus a rounding term proportional to `‖e - k‖·‖S‖`.
pub fn neumann_residual_allowance<A: BanachAlgebra>(k: A, s: A, tail_tol: f64) -> f64 {
    10.0 * tail_tol + 64.0 * f64::EPSILON * (A::unit() - k).norm() * s.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(x: [[f64; 2]; 2], y: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j] += x[i][k] * y[k][j];
                }
            }
        }
        out
    }

    #[test]
    fn addition() {
        assert_eq!(
            R2Elem::new(1.0, 2.0) + R2Elem::new(3.0, 4.0),
            R2Elem::new(4.0, 6.0)
        );
        let u = R2Elem::new(-0.3, 7.0);
        assert_eq!(u + R2Elem::zero(), u);
        assert_eq!(
            UT2Elem::new(1.0, 1.0) + UT2Elem::new(2.0, -1.0),
            UT2Elem::new(3.0, 0.0)
        );
    }

    #[test]
    fn products() {
        assert_eq!(
            R2Elem::new(2.0, 3.0) * R2Elem::new(4.0, 5.0),
            R2Elem::new(8.0, 22.0)
        );
        let u = R2Elem::new(-1.5, 2.25);
        assert_eq!(R2Elem::unit() * u, u);

        let m = UT2Elem::new(0.5, 1.0);
        let sq = m * m;
        assert_eq!(sq, UT2Elem::new(0.25, 1.0));
        let oracle = matmul(m.to_matrix(), m.to_matrix());
        assert_eq!(sq.to_matrix(), oracle);
    }

    #[test]
    fn norms() {
        assert_eq!(R2Elem::new(-3.0, 4.0).norm(), 7.0);
        assert_eq!(R2Elem::zero().norm(), 0.0);
        assert_eq!(UT2Elem::new(1.0, -2.0).norm(), 3.0);
        assert!(UT2Elem::unit().norm() >= 1.0);
    }

    #[test]
    fn comparisons() {
        let strict = cone_compare(R2Elem::new(1.0, 1.0), R2Elem::new(2.0, 3.0));
        assert_eq!(
            strict,
            ConeOrderOutcome {
                le: true,
                lt: true,
                way_below: true
            }
        );
        let boundary = cone_compare(R2Elem::new(0.0, 0.0), R2Elem::new(0.0, 5.0));
        assert_eq!(
            boundary,
            ConeOrderOutcome {
                le: true,
                lt: true,
                way_below: false
            }
        );
        let incomparable = cone_compare(R2Elem::new(1.0, 0.0), R2Elem::new(0.0, 1.0));
        assert_eq!(
            incomparable,
            ConeOrderOutcome {
                le: false,
                lt: false,
                way_below: false
            }
        );
        let same = cone_compare(UT2Elem::new(1.0, 2.0), UT2Elem::new(1.0, 2.0));
        assert_eq!(
            same,
            ConeOrderOutcome {
                le: true,
                lt: false,
                way_below: false
            }
        );
    }

    /// Independent oracle: ‖kⁿ‖^(1/n) from explicit repeated multiplication
    /// of the 2×2 matrices, at the largest n that stays in range.
    fn explicit_power_root(alpha: f64, beta: f64, n: usize) -> f64 {
        let m = [[alpha, beta], [0.0, alpha]];
        let mut p = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..n {
            p = matmul(p, m);
        }
        (p[0][0].abs() + p[0][1].abs()).powf(1.0 / n as f64)
    }

    #[test]
    fn spectral_radius_matches_powers_and_closed_form() {
        let k = R2Elem::new(0.5, 7.3);
        let est = spectral_radius(k, 64).unwrap();
        assert!((est - 0.5).abs() < 1e-6, "{est}");
        // every Gelfand term is an upper bound
        assert!(est >= 0.5);
        assert!(est <= explicit_power_root(0.5, 7.3, 64));

        assert_eq!(spectral_radius(R2Elem::unit(), 1).unwrap(), 1.0);
        assert!((spectral_radius(UT2Elem::unit(), 50).unwrap() - 1.0).abs() < 1e-15);

        let est = spectral_radius(UT2Elem::new(0.3, 100.0), 128).unwrap();
        assert!((est - 0.3).abs() < 1e-4, "{est}");
        assert!(est <= explicit_power_root(0.3, 100.0, 128) + 1e-15);
    }

    #[test]
    fn spectral_radius_edge_cases() {
        assert!(spectral_radius(R2Elem::new(0.5, 1.0), 0).is_err());
        assert_eq!(spectral_radius(R2Elem::zero(), 5).unwrap(), 0.0);
        // nilpotent element
        assert_eq!(spectral_radius(UT2Elem::new(0.0, 3.0), 4).unwrap(), 0.0);
        // huge entries must not overflow the estimate
        let est = spectral_radius(R2Elem::new(1e200, 1e300), 128).unwrap();
        assert!(((est - 1e200) / 1e200).abs() < 1e-3);
    }

    #[test]
    fn neumann_examples() {
        let s = neumann_inverse_e_minus(R2Elem::new(0.5, 1.0), 1e-14).unwrap();
        assert!((s - R2Elem::new(2.0, 4.0)).norm() < 1e-10);
        assert_eq!(
            R2Elem::new(0.5, -1.0) * R2Elem::new(2.0, 4.0),
            R2Elem::unit()
        );

        assert_eq!(
            neumann_inverse_e_minus(R2Elem::zero(), 1e-12).unwrap(),
            R2Elem::unit()
        );

        let s = neumann_inverse_e_minus(UT2Elem::new(0.5, 0.0), 1e-14).unwrap();
        // inverse of [[0.5, 0], [0, 0.5]] is [[2, 0], [0, 2]]
        assert!((s - UT2Elem::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn neumann_errors() {
        assert!(matches!(
            neumann_inverse_e_minus(R2Elem::new(1.0, 0.0), 1e-12),
            Err(AlgebraError::NotInvertibleHere { .. })
        ));
        assert!(matches!(
            neumann_inverse_e_minus(R2Elem::new(0.2, 0.0), 0.0),
            Err(AlgebraError::InvalidArgument(_))
        ));
    }

    #[test]
    fn neumann_large_norm_small_radius() {
        // ‖k‖ = 3.1 > 1 but ρ(k) = 0.1: exercises the decay-detection branch
        let k = UT2Elem::new(0.1, 3.0);
        let s = neumann_inverse_e_minus(k, 1e-12).unwrap();
        // closed form: (1/(1-a), b/(1-a)^2)
        let expected = UT2Elem::new(1.0 / 0.9, 3.0 / 0.81);
        assert!((s - expected).norm() < 1e-10);
        assert!(neumann_residual(k, s) < 1e-11);
    }

    #[test]
    fn powers() {
        let k = R2Elem::new(0.5, 2.0);
        assert_eq!(k.powi(0), R2Elem::unit());
        assert_eq!(k.powi(3), k * k * k);
    }
}
