//! Exact geometry of lattice half-planes.
//!
//! A half-plane is a subset `S` of the integer lattice with `(0,0) ∉ S`,
//! closed under addition, and containing exactly one of `p`, `-p` for every
//! nonzero `p`. Every such set is cut out by a normal vector `v`: points
//! with `⟨v,p⟩ > 0` belong to `S`, and when the slope is rational one of the
//! two rays of the boundary lattice line is absorbed. The two absorption
//! choices are the [`Variant::Sv`] and [`Variant::SvHat`] variants.
//!
//! All arithmetic in this module is exact (integers and rationals); no
//! floating point is used anywhere. Irrational slopes are represented by
//! certified rational approximants valid on an explicit window.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

/// A point of the integer lattice, `(i, j)`.
pub type LatticePoint = (i64, i64);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HalfPlaneError {
    #[error("point {point:?} exceeds the certified window (bound {bound})")]
    WindowExceeded { point: LatticePoint, bound: i64 },
    #[error("approximant not certified: lattice point {0:?} lies on the boundary line inside the window")]
    NotCertified(LatticePoint),
    #[error("degenerate axis half-plane: corner sequence has infinite entries on positive rows")]
    DegenerateAxis,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

type Result<T> = std::result::Result<T, HalfPlaneError>;

/// Normal vector of a half-plane, stored exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LatticeVector {
    /// Primitive integer vector, `gcd(|v1|,|v2|) = 1`.
    Rational { v1: i64, v2: i64 },
    /// Exact rational approximant of an irrational-slope vector, certified
    /// so that no nonzero lattice point inside the window lies on the
    /// boundary line.
    IrrationalApprox {
        v1: BigRational,
        v2: BigRational,
        window_bound: i64,
    },
}

impl LatticeVector {
    /// Primitive rational vector; the input is reduced by its gcd.
    pub fn rational(v1: i64, v2: i64) -> Result<Self> {
        if v1 == 0 && v2 == 0 {
            return Err(HalfPlaneError::Domain("zero vector".into()));
        }
        let g = v1.unsigned_abs().gcd(&v2.unsigned_abs()) as i64;
        Ok(LatticeVector::Rational {
            v1: v1 / g,
            v2: v2 / g,
        })
    }

    /// Certified approximant. Fails unless `i·v1 + j·v2 ≠ 0` for every
    /// nonzero `(i,j)` with `|i|,|j| ≤ window_bound`.
    pub fn irrational_approx(v1: BigRational, v2: BigRational, window_bound: i64) -> Result<Self> {
        if window_bound < 1 {
            return Err(HalfPlaneError::Domain("window_bound must be positive".into()));
        }
        if let Some(p) = first_lattice_zero(&v1, &v2, window_bound) {
            return Err(HalfPlaneError::NotCertified(p));
        }
        Ok(LatticeVector::IrrationalApprox {
            v1,
            v2,
            window_bound,
        })
    }

    /// True iff no nonzero lattice point with `|i|,|j| ≤ bound` lies on the
    /// boundary line `i·v1 + j·v2 = 0`. For a primitive rational vector this
    /// is false exactly when `bound ≥ max(|v1|,|v2|)`.
    pub fn boundary_free_within(&self, bound: i64) -> bool {
        match self {
            LatticeVector::Rational { v1, v2 } => {
                let (r1, r2) = (big_rational_from(*v1), big_rational_from(*v2));
                first_lattice_zero(&r1, &r2, bound).is_none()
            }
            LatticeVector::IrrationalApprox { v1, v2, .. } => {
                first_lattice_zero(v1, v2, bound).is_none()
            }
        }
    }
}

fn big_rational_from(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exhaustive exact scan for a nonzero lattice zero of `⟨v,·⟩` in the window.
fn first_lattice_zero(v1: &BigRational, v2: &BigRational, bound: i64) -> Option<LatticePoint> {
    for i in -bound..=bound {
        for j in -bound..=bound {
            if (i, j) == (0, 0) {
                continue;
            }
            let d = v1 * big_rational_from(i) + v2 * big_rational_from(j);
            if d.is_zero() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Which ray of the boundary lattice line the half-plane absorbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Sv,
    SvHat,
}

impl Variant {
    fn flipped(self) -> Variant {
        match self {
            Variant::Sv => Variant::SvHat,
            Variant::SvHat => Variant::Sv,
        }
    }
}

/// Pointwise transforms of a half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `p ∈ Negate(S) ⇔ -p ∈ S`.
    Negate,
    /// `p ∈ ReflectX(S) ⇔ (p.0, -p.1) ∈ S`.
    ReflectX,
}

/// A lattice half-plane: a normal vector plus a boundary variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfPlane {
    pub vector: LatticeVector,
    pub variant: Variant,
}

/// Outcome of comparing two lattice points in the half-plane order.
pub use std::cmp::Ordering as OrderOutcome;

impl HalfPlane {
    pub fn new(vector: LatticeVector, variant: Variant) -> Self {
        HalfPlane { vector, variant }
    }

    /// `S_v` for a rational vector.
    pub fn rational(v1: i64, v2: i64) -> Result<Self> {
        Ok(HalfPlane::new(LatticeVector::rational(v1, v2)?, Variant::Sv))
    }

    /// The bottom half-plane `L = S_[0,-1]`: all rows below the axis plus
    /// the negative ray of the axis itself.
    pub fn bottom() -> Self {
        HalfPlane::rational(0, -1).unwrap()
    }

    /// Membership test. Exact; errors only when an irrational-approximant
    /// window is exceeded.
    pub fn contains(&self, p: LatticePoint) -> Result<bool> {
        if p == (0, 0) {
            return Ok(false);
        }
        match &self.vector {
            LatticeVector::Rational { v1, v2 } => {
                Ok(contains_rational(*v1, *v2, self.variant, p))
            }
            LatticeVector::IrrationalApprox {
                v1,
                v2,
                window_bound,
            } => {
                if p.0.abs() > *window_bound || p.1.abs() > *window_bound {
                    return Err(HalfPlaneError::WindowExceeded {
                        point: p,
                        bound: *window_bound,
                    });
                }
                let d = v1 * big_rational_from(p.0) + v2 * big_rational_from(p.1);
                // Certification guarantees d ≠ 0 inside the window, so the
                // two variants agree here.
                Ok(d.is_positive())
            }
        }
    }

    /// Total order induced by the half-plane: `a ≺ b` iff `a - b ∈ S`.
    /// Translation-invariant; the compared difference must fit the
    /// certified window in approximant mode.
    pub fn compare(&self, a: LatticePoint, b: LatticePoint) -> Result<Ordering> {
        if a == b {
            return Ok(Ordering::Equal);
        }
        let d = (a.0 - b.0, a.1 - b.1);
        if self.contains(d)? {
            Ok(Ordering::Less)
        } else {
            Ok(Ordering::Greater)
        }
    }

    /// Apply a pointwise transform, returning the half-plane it maps onto.
    pub fn transform(&self, op: Transform) -> HalfPlane {
        let map = |v1: i64, v2: i64| -> (i64, i64, Variant) {
            match op {
                Transform::Negate => (-v1, -v2, self.variant.flipped()),
                // Reflection swaps the two rays of a vertical boundary
                // line, so the variant flips exactly there.
                Transform::ReflectX if v2 == 0 => (v1, 0, self.variant.flipped()),
                Transform::ReflectX => (v1, -v2, self.variant),
            }
        };
        match &self.vector {
            LatticeVector::Rational { v1, v2 } => {
                let (w1, w2, var) = map(*v1, *v2);
                HalfPlane::new(LatticeVector::Rational { v1: w1, v2: w2 }, var)
            }
            LatticeVector::IrrationalApprox {
                v1,
                v2,
                window_bound,
            } => {
                let (w1, w2, var) = match op {
                    Transform::Negate => (-v1.clone(), -v2.clone(), self.variant.flipped()),
                    Transform::ReflectX => (v1.clone(), -v2.clone(), self.variant),
                };
                HalfPlane::new(
                    LatticeVector::IrrationalApprox {
                        v1: w1,
                        v2: w2,
                        window_bound: *window_bound,
                    },
                    var,
                )
            }
        }
    }

    /// True when both `(-1,0)` and `(0,-1)` belong to the half-plane, the
    /// normalization required by corner-sequence analysis.
    pub fn contains_seed_corner(&self) -> bool {
        matches!(self.contains((-1, 0)), Ok(true)) && matches!(self.contains((0, -1)), Ok(true))
    }

    /// Row maxima `M_j = max{i : (i,j) ∈ S}` for `|j| ≤ jmax`.
    pub fn corner_sequence(&self, jmax: i64) -> Result<CornerSequence> {
        if jmax < 0 {
            return Err(HalfPlaneError::Domain("jmax must be nonnegative".into()));
        }
        if !self.contains_seed_corner() {
            return Err(HalfPlaneError::Precondition(
                "half-plane must contain (-1,0) and (0,-1); apply a transform first".into(),
            ));
        }
        let mut entries = Vec::with_capacity((2 * jmax + 1) as usize);
        for j in -jmax..=jmax {
            entries.push(self.row_max(j)?);
        }
        Ok(CornerSequence { jmax, entries })
    }

    /// Column maxima `N_i = max{j : (i,j) ∈ S}`; used when converting to a
    /// diagram.
    pub fn column_max(&self, i: i64) -> Result<CornerValue> {
        match &self.vector {
            LatticeVector::Rational { v1, v2 } => {
                if *v2 == 0 {
                    // Vertical boundary: under the seed-corner normalization
                    // this is the left half-plane with the lower axis ray.
                    Ok(match i.cmp(&0) {
                        Ordering::Less => CornerValue::PosInf,
                        Ordering::Equal => CornerValue::Finite(-1),
                        Ordering::Greater => CornerValue::NegInf,
                    })
                } else {
                    // j-extent of column i: ⟨v,(i,j)⟩ > 0 ⇔ j < -i·v1/v2 for v2 < 0.
                    Ok(CornerValue::Finite(line_max(
                        *v2,
                        *v1,
                        i,
                        self.variant,
                        BoundaryAxis::Column,
                    )))
                }
            }
            LatticeVector::IrrationalApprox {
                v1,
                v2,
                window_bound,
            } => {
                if i.abs() > *window_bound {
                    return Err(HalfPlaneError::WindowExceeded {
                        point: (i, 0),
                        bound: *window_bound,
                    });
                }
                if i == 0 {
                    return Ok(CornerValue::Finite(-1));
                }
                let x = -(v1 * big_rational_from(i)) / v2;
                let m = rational_floor_strict(&x);
                if m.abs() > *window_bound {
                    return Err(HalfPlaneError::WindowExceeded {
                        point: (i, m),
                        bound: *window_bound,
                    });
                }
                Ok(CornerValue::Finite(m))
            }
        }
    }

    fn row_max(&self, j: i64) -> Result<CornerValue> {
        match &self.vector {
            LatticeVector::Rational { v1, v2 } => {
                if *v1 == 0 {
                    // Bottom half-plane: rows below the axis are full, the
                    // axis row stops at -1, rows above are empty.
                    Ok(match j.cmp(&0) {
                        Ordering::Less => CornerValue::PosInf,
                        Ordering::Equal => CornerValue::Finite(-1),
                        Ordering::Greater => CornerValue::NegInf,
                    })
                } else if *v2 == 0 {
                    // Left half-plane with the lower axis ray.
                    Ok(CornerValue::Finite(if j < 0 { 0 } else { -1 }))
                } else {
                    Ok(CornerValue::Finite(line_max(
                        *v1,
                        *v2,
                        j,
                        self.variant,
                        BoundaryAxis::Row,
                    )))
                }
            }
            LatticeVector::IrrationalApprox {
                v1,
                v2,
                window_bound,
            } => {
                if j.abs() > *window_bound {
                    return Err(HalfPlaneError::WindowExceeded {
                        point: (0, j),
                        bound: *window_bound,
                    });
                }
                if j == 0 {
                    return Ok(CornerValue::Finite(-1));
                }
                let x = -(v2 * big_rational_from(j)) / v1;
                let m = rational_floor_strict(&x);
                if m.abs() > *window_bound {
                    return Err(HalfPlaneError::WindowExceeded {
                        point: (m, j),
                        bound: *window_bound,
                    });
                }
                Ok(CornerValue::Finite(m))
            }
        }
    }
}

#[derive(Clone, Copy)]
enum BoundaryAxis {
    Row,
    Column,
}

/// Largest `t` with `(t, s)` (row) or `(s, t)` (column) in the half-plane,
/// for a non-degenerate normal. `va` is the component multiplying `t`,
/// `vb` the one multiplying `s`; `va < 0` is guaranteed by the seed-corner
/// normalization.
fn line_max(va: i64, vb: i64, s: i64, variant: Variant, axis: BoundaryAxis) -> i64 {
    debug_assert!(va < 0);
    // t·va + s·vb > 0  ⇔  t < x  where x = -s·vb/va = (s·vb)/(-va).
    let num = (s as i128) * (vb as i128);
    let den = -(va as i128);
    let q = num.div_euclid(den);
    if num.rem_euclid(den) != 0 {
        return q as i64;
    }
    // The boundary point is a lattice point; absorption depends on the sign
    // of its first coordinate and on the variant.
    let x = q;
    let first_coord = match axis {
        BoundaryAxis::Row => x,
        BoundaryAxis::Column => s as i128,
    };
    let include = match variant {
        Variant::Sv => first_coord < 0,
        Variant::SvHat => first_coord > 0,
    };
    if include {
        x as i64
    } else {
        (x - 1) as i64
    }
}

/// Floor of a rational known not to be an integer unless at the origin.
fn rational_floor_strict(x: &BigRational) -> i64 {
    let f = x.floor();
    let n = f.to_integer();
    // Window-scale values fit i64 comfortably.
    i64::try_from(&n).expect("corner value within i64 range")
}

/// One entry of a corner sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerValue {
    NegInf,
    Finite(i64),
    PosInf,
}

impl CornerValue {
    pub fn finite(self) -> Option<i64> {
        match self {
            CornerValue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for CornerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CornerValue::NegInf => write!(f, "-inf"),
            CornerValue::Finite(v) => write!(f, "{v}"),
            CornerValue::PosInf => write!(f, "+inf"),
        }
    }
}

/// The staircase of row maxima `{M_j}` over a symmetric range `|j| ≤ jmax`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerSequence {
    jmax: i64,
    entries: Vec<CornerValue>,
}

impl CornerSequence {
    pub fn from_entries(jmax: i64, entries: Vec<CornerValue>) -> Result<Self> {
        if entries.len() != (2 * jmax + 1) as usize {
            return Err(HalfPlaneError::Domain(
                "entry count must be 2*jmax + 1".into(),
            ));
        }
        Ok(CornerSequence { jmax, entries })
    }

    pub fn jmax(&self) -> i64 {
        self.jmax
    }

    pub fn value(&self, j: i64) -> Option<CornerValue> {
        if j.abs() > self.jmax {
            None
        } else {
            Some(self.entries[(j + self.jmax) as usize])
        }
    }

    /// Membership of the half-plane reconstructed from the sequence:
    /// `(i,j) ∈ S ⇔ i ≤ M_j`. `None` when `j` is out of range.
    pub fn reconstructed_contains(&self, p: LatticePoint) -> Option<bool> {
        self.value(p.1).map(|m| match m {
            CornerValue::NegInf => false,
            CornerValue::PosInf => true,
            CornerValue::Finite(v) => p.0 <= v,
        })
    }

    /// Normalized increments and the slope estimate they converge to.
    ///
    /// `delta_j = (-1 - M_j)/j` for `j > 0`; the true slope `d` satisfies
    /// `delta_j ≤ d ≤ delta_j + 1/j`, so the estimate carries a `1/jmax`
    /// error bound. The recovered normal is `(-1, -estimate)`.
    pub fn recover_vector(&self) -> Result<VectorRecovery> {
        if self.jmax < 1 {
            return Err(HalfPlaneError::Precondition(
                "recovery needs at least one positive row".into(),
            ));
        }
        match self.value(0) {
            Some(CornerValue::Finite(-1)) => {}
            _ => {
                return Err(HalfPlaneError::Precondition("M_0 must equal -1".into()));
            }
        }
        let mut delta = Vec::with_capacity(self.jmax as usize);
        for j in 1..=self.jmax {
            match self.value(j).unwrap() {
                CornerValue::Finite(m) => {
                    delta.push(BigRational::new(BigInt::from(-1 - m), BigInt::from(j)));
                }
                _ => return Err(HalfPlaneError::DegenerateAxis),
            }
        }
        let estimate = delta.last().unwrap().clone();
        let error_bound = BigRational::new(BigInt::from(1), BigInt::from(self.jmax));
        let vector = (big_rational_from(-1), -estimate.clone());
        Ok(VectorRecovery {
            delta_sequence: delta,
            estimate,
            error_bound,
            vector,
        })
    }
}

/// Result of slope recovery from a corner sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorRecovery {
    /// `delta_j` for `j = 1..=jmax`.
    pub delta_sequence: Vec<BigRational>,
    /// `delta_jmax`, the best available estimate of the slope.
    pub estimate: BigRational,
    /// `1/jmax`.
    pub error_bound: BigRational,
    /// `(-1, -estimate)`, a normal of the half-plane up to the bound.
    pub vector: (BigRational, BigRational),
}

fn contains_rational(v1: i64, v2: i64, variant: Variant, p: LatticePoint) -> bool {
    if v2 == 0 {
        // The boundary lattice line is vertical, so the usual tie-break on
        // the sign of the first coordinate cannot split it. The coordinate
        // swap identity relating the two variants settles membership.
        return contains_rational(0, v1, variant.flipped(), (p.1, p.0));
    }
    let d = (p.0 as i128) * (v1 as i128) + (p.1 as i128) * (v2 as i128);
    match variant {
        Variant::Sv => {
            if p.0 < 0 {
                d >= 0
            } else {
                d > 0
            }
        }
        Variant::SvHat => {
            if p.0 <= 0 {
                d > 0
            } else {
                d >= 0
            }
        }
    }
}

/// Axiom check report for a candidate half-plane membership predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomReport {
    pub origin_ok: bool,
    pub semigroup_ok: bool,
    pub antisymmetry_ok: bool,
    /// First pair `(s, t)` with `s,t ∈ S`, `s+t` in window, `s+t ∉ S`.
    pub semigroup_counterexample: Option<(LatticePoint, LatticePoint)>,
    /// First nonzero `p` in window with neither or both of `p`, `-p` inside.
    pub antisymmetry_counterexample: Option<LatticePoint>,
}

impl AxiomReport {
    pub fn all_ok(&self) -> bool {
        self.origin_ok && self.semigroup_ok && self.antisymmetry_ok
    }
}

/// Exhaustive window check of the three half-plane axioms.
pub fn verify_axioms<F: Fn(LatticePoint) -> bool>(membership: F, window: i64) -> AxiomReport {
    assert!(window >= 1, "window must be at least 1");
    let w = window;
    let side = (2 * w + 1) as usize;
    let idx = |p: LatticePoint| ((p.0 + w) as usize) * side + ((p.1 + w) as usize);
    let mut member = vec![false; side * side];
    for i in -w..=w {
        for j in -w..=w {
            member[idx((i, j))] = membership((i, j));
        }
    }

    let origin_ok = !member[idx((0, 0))];

    // Antisymmetry: exactly one of p, -p per nonzero pair. Pairs are scanned
    // axis row first, then by |j|, reporting the first failure.
    let mut antisymmetry_counterexample = None;
    'anti: for j in 0..=w {
        for i_abs in 0..=w {
            let firsts = if i_abs == 0 { vec![0] } else { vec![i_abs, -i_abs] };
            for i in firsts {
                let p = (i, j);
                if p == (0, 0) {
                    continue;
                }
                // canonical representative of the pair {p, -p}
                if !(j > 0 || (j == 0 && i > 0)) {
                    continue;
                }
                let a = member[idx(p)];
                let b = member[idx((-p.0, -p.1))];
                if a == b {
                    antisymmetry_counterexample = Some(p);
                    break 'anti;
                }
            }
        }
    }

    // Semigroup: sums of members that stay in the window are members.
    let mut members_list = Vec::new();
    for i in -w..=w {
        for j in -w..=w {
            if member[idx((i, j))] {
                members_list.push((i, j));
            }
        }
    }
    let mut semigroup_counterexample = None;
    'semi: for &s in &members_list {
        for &t in &members_list {
            let sum = (s.0 + t.0, s.1 + t.1);
            if sum.0.abs() > w || sum.1.abs() > w {
                continue;
            }
            if !member[idx(sum)] {
                semigroup_counterexample = Some((s, t));
                break 'semi;
            }
        }
    }

    AxiomReport {
        origin_ok,
        semigroup_ok: semigroup_counterexample.is_none(),
        antisymmetry_ok: antisymmetry_counterexample.is_none(),
        semigroup_counterexample,
        antisymmetry_counterexample,
    }
}

/// Unimodular rotation carrying the bottom half-plane onto `S_(k,l)` for a
/// coprime pair of negative integers. Forward action:
/// `(m,n) ↦ (p·n - l·m, q·n + k·m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeRotation {
    pub k: i64,
    pub l: i64,
    pub p: i64,
    pub q: i64,
}

/// Direction of a rotation application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl LatticeRotation {
    /// Coefficients `(p,q)` with `pk + ql = -1`. For `l ≤ -2` this is the
    /// unique pair in the box `-l > p > 0 ≥ q > k`; for `l = -1` the box is
    /// empty and `(1, k+1)` is used instead (it satisfies the same relation
    /// and maps the bottom half-plane onto `S_(k,-1)`).
    pub fn for_vector(k: i64, l: i64) -> Result<Self> {
        if k >= 0 || l >= 0 {
            return Err(HalfPlaneError::Domain(
                "rotation requires negative components".into(),
            ));
        }
        if k.unsigned_abs().gcd(&l.unsigned_abs()) != 1 {
            return Err(HalfPlaneError::Domain(
                "rotation requires coprime components".into(),
            ));
        }
        let (p, q) = if l == -1 {
            (1, k + 1)
        } else {
            let mut found = None;
            for p in 1..-l {
                for q in (k + 1)..=0 {
                    if p * k + q * l == -1 {
                        found = Some((p, q));
                    }
                }
            }
            found.ok_or_else(|| {
                HalfPlaneError::Domain("no rotation coefficients in the search box".into())
            })?
        };
        let rot = LatticeRotation { k, l, p, q };
        debug_assert_eq!(rot.p * rot.k + rot.q * rot.l, -1);
        debug_assert_eq!(rot.det(), 1);
        Ok(rot)
    }

    /// The matrix `[[-l, p], [k, q]]`.
    pub fn matrix(&self) -> [[i64; 2]; 2] {
        [[-self.l, self.p], [self.k, self.q]]
    }

    /// Determinant of the matrix; always `+1`.
    pub fn det(&self) -> i64 {
        -self.l * self.q - self.p * self.k
    }

    pub fn apply(&self, p: LatticePoint, dir: Direction) -> LatticePoint {
        match dir {
            Direction::Forward => (
                self.p * p.1 - self.l * p.0,
                self.q * p.1 + self.k * p.0,
            ),
            Direction::Inverse => (
                self.q * p.0 - self.p * p.1,
                -self.k * p.0 - self.l * p.1,
            ),
        }
    }

    pub fn forward(&self, p: LatticePoint) -> LatticePoint {
        self.apply(p, Direction::Forward)
    }

    pub fn inverse(&self, p: LatticePoint) -> LatticePoint {
        self.apply(p, Direction::Inverse)
    }
}

// --- serialization -------------------------------------------------------

fn rational_to_string(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn rational_from_string(s: &str) -> std::result::Result<BigRational, String> {
    let parse_int = |t: &str| -> std::result::Result<BigInt, String> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|e| format!("bad integer {t:?}: {e}"))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let den = parse_int(d)?;
            if den.is_zero() {
                return Err("zero denominator".into());
            }
            Ok(BigRational::new(parse_int(n)?, den))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

#[derive(Serialize, Deserialize)]
struct VectorRepr {
    mode: String,
    v1: String,
    v2: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_bound: Option<i64>,
}

#[derive(Serialize)]
struct HalfPlaneRepr<'a> {
    vector: VectorRepr,
    variant: &'a Variant,
}

impl Serialize for HalfPlane {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let vector = match &self.vector {
            LatticeVector::Rational { v1, v2 } => VectorRepr {
                mode: "rational".into(),
                v1: v1.to_string(),
                v2: v2.to_string(),
                window_bound: None,
            },
            LatticeVector::IrrationalApprox {
                v1,
                v2,
                window_bound,
            } => VectorRepr {
                mode: "irrational_approx".into(),
                v1: rational_to_string(v1),
                v2: rational_to_string(v2),
                window_bound: Some(*window_bound),
            },
        };
        HalfPlaneRepr {
            vector,
            variant: &self.variant,
        }
        .serialize(serializer)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VectorInput {
    Pair([i64; 2]),
    Repr(VectorRepr),
}

#[derive(Deserialize)]
struct HalfPlaneInput {
    vector: VectorInput,
    #[serde(default = "default_variant")]
    variant: Variant,
}

fn default_variant() -> Variant {
    Variant::Sv
}

impl<'de> Deserialize<'de> for HalfPlane {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let input = HalfPlaneInput::deserialize(deserializer)?;
        let vector = match input.vector {
            VectorInput::Pair([v1, v2]) => {
                LatticeVector::rational(v1, v2).map_err(D::Error::custom)?
            }
            VectorInput::Repr(r) => match r.mode.as_str() {
                "rational" => {
                    let v1 = rational_from_string(&r.v1).map_err(D::Error::custom)?;
                    let v2 = rational_from_string(&r.v2).map_err(D::Error::custom)?;
                    if !v1.is_integer() || !v2.is_integer() {
                        return Err(D::Error::custom("rational mode takes integer components"));
                    }
                    let to_i64 = |b: BigRational| -> std::result::Result<i64, D::Error> {
                        i64::try_from(&b.to_integer())
                            .map_err(|_| D::Error::custom("component out of range"))
                    };
                    LatticeVector::rational(to_i64(v1)?, to_i64(v2)?).map_err(D::Error::custom)?
                }
                "irrational_approx" => {
                    let bound = r
                        .window_bound
                        .ok_or_else(|| D::Error::custom("window_bound required"))?;
                    LatticeVector::irrational_approx(
                        rational_from_string(&r.v1).map_err(D::Error::custom)?,
                        rational_from_string(&r.v2).map_err(D::Error::custom)?,
                        bound,
                    )
                    .map_err(D::Error::custom)?
                }
                other => return Err(D::Error::custom(format!("unknown vector mode {other:?}"))),
            },
        };
        Ok(HalfPlane::new(vector, input.variant))
    }
}
