//! Staircase diagrams.
//!
//! A diagram is an upper set `J` of the lattice (`J + ℤ²₊ ⊆ J`), stored as a
//! nonincreasing column-boundary function: `(i,j) ∈ J` iff `j ≥ b(i)`.
//! Columns may be empty (`b = +∞`) or full (`b = -∞`). Everything is
//! window-bounded: a diagram knows its column range and refuses lookups
//! outside it.

use crate::halfplane::{HalfPlane, HalfPlaneError, LatticePoint};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiagramError {
    #[error("column {0} outside the diagram range")]
    ColumnOutOfRange(i64),
    #[error("boundary not nonincreasing at column {0}")]
    NonMonotone(i64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    HalfPlane(#[from] HalfPlaneError),
}

type Result<T> = std::result::Result<T, DiagramError>;

/// Lower boundary of one diagram column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnBound {
    /// Column is entirely inside the diagram.
    Full,
    /// Cells `(i, j)` with `j ≥ b` are inside.
    At(i64),
    /// Column is empty.
    Empty,
}

impl ColumnBound {
    fn shifted(self, dy: i64) -> ColumnBound {
        match self {
            ColumnBound::At(b) => ColumnBound::At(b + dy),
            other => other,
        }
    }

    /// Ordering key with `Empty = +∞` and `Full = -∞`.
    fn rank(self) -> (i8, i64) {
        match self {
            ColumnBound::Full => (-1, 0),
            ColumnBound::At(b) => (0, b),
            ColumnBound::Empty => (1, 0),
        }
    }
}

/// An upper set of the lattice over a bounded column range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    lo: i64,
    bounds: Vec<ColumnBound>,
}

impl Diagram {
    /// Build from explicit per-column bounds starting at column `lo`.
    /// The boundary must be nonincreasing.
    pub fn new(lo: i64, bounds: Vec<ColumnBound>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(DiagramError::Domain("at least one column required".into()));
        }
        for (k, w) in bounds.windows(2).enumerate() {
            if w[0].rank() < w[1].rank() {
                return Err(DiagramError::NonMonotone(lo + k as i64 + 1));
            }
        }
        Ok(Diagram { lo, bounds })
    }

    pub fn from_fn<F: Fn(i64) -> ColumnBound>(lo: i64, hi: i64, f: F) -> Result<Self> {
        Diagram::new(lo, (lo..=hi).map(f).collect())
    }

    /// The positive quadrant restricted to a window.
    pub fn quarter_plane(window: i64) -> Diagram {
        Diagram::from_fn(-window, window, |i| {
            if i < 0 {
                ColumnBound::Empty
            } else {
                ColumnBound::At(0)
            }
        })
        .unwrap()
    }

    pub fn column_range(&self) -> (i64, i64) {
        (self.lo, self.lo + self.bounds.len() as i64 - 1)
    }

    pub fn bound(&self, i: i64) -> Result<ColumnBound> {
        let (lo, hi) = self.column_range();
        if i < lo || i > hi {
            return Err(DiagramError::ColumnOutOfRange(i));
        }
        Ok(self.bounds[(i - lo) as usize])
    }

    pub fn contains(&self, p: LatticePoint) -> Result<bool> {
        Ok(match self.bound(p.0)? {
            ColumnBound::Full => true,
            ColumnBound::Empty => false,
            ColumnBound::At(b) => p.1 >= b,
        })
    }

    /// Shift the diagram by a lattice vector: `b'(i) = b(i - dx) + dy`.
    pub fn translate(&self, by: LatticePoint) -> Diagram {
        Diagram {
            lo: self.lo + by.0,
            bounds: self.bounds.iter().map(|b| b.shifted(by.1)).collect(),
        }
    }

    /// Search for the offset identifying `other` as a translate of `self`.
    /// Offsets are scanned outward from zero; the first one whose boundary
    /// matches `other` on the whole column overlap wins. Only offsets where
    /// one column range contains the other are considered, so that a flat
    /// stretch of one staircase cannot match a sliver of another.
    pub fn translation_equivalent(&self, other: &Diagram) -> Option<LatticePoint> {
        let (alo, ahi) = self.column_range();
        let (blo, bhi) = other.column_range();
        let dx_min = blo - ahi;
        let dx_max = bhi - alo;
        let mut candidates: Vec<i64> = (dx_min..=dx_max)
            .filter(|dx| {
                let (slo, shi) = (alo + dx, ahi + dx);
                (slo >= blo && shi <= bhi) || (blo >= slo && bhi <= shi)
            })
            .collect();
        candidates.sort_by_key(|dx| (dx.abs(), *dx));
        'cand: for dx in candidates {
            let lo = (alo + dx).max(blo);
            let hi = (ahi + dx).min(bhi);
            if lo > hi {
                continue;
            }
            let mut dy: Option<i64> = None;
            for i in lo..=hi {
                let a = self.bounds[(i - dx - alo) as usize];
                let b = other.bounds[(i - blo) as usize];
                match (a, b) {
                    (ColumnBound::Empty, ColumnBound::Empty)
                    | (ColumnBound::Full, ColumnBound::Full) => {}
                    (ColumnBound::At(x), ColumnBound::At(y)) => match dy {
                        None => dy = Some(y - x),
                        Some(d) if d == y - x => {}
                        Some(_) => continue 'cand,
                    },
                    _ => continue 'cand,
                }
            }
            return Some((dx, dy.unwrap_or(0)));
        }
        None
    }

    /// Smallest `(m, n)` (lexicographically) with `b(i+m) = b(i) - n` on
    /// every testable column, or `None` when no pair within the caps works.
    pub fn find_period(&self, m_max: i64, n_max: i64) -> Option<PeriodDescriptor> {
        self.find_period_masked(m_max, n_max, &[])
    }

    /// Period search that ignores the listed columns. The origin column of
    /// a half-plane diagram carries the adjoined origin cell and breaks
    /// exact periodicity; masking it recovers the periodic bulk.
    pub fn find_period_masked(
        &self,
        m_max: i64,
        n_max: i64,
        masked_columns: &[i64],
    ) -> Option<PeriodDescriptor> {
        let (lo, hi) = self.column_range();
        for m in 1..=m_max {
            'n: for n in 0..=n_max {
                let mut tested = false;
                for i in lo..=(hi - m) {
                    if masked_columns.contains(&i) || masked_columns.contains(&(i + m)) {
                        continue;
                    }
                    let a = self.bounds[(i - lo) as usize];
                    let b = self.bounds[(i + m - lo) as usize];
                    match (a, b) {
                        (ColumnBound::Empty, ColumnBound::Empty)
                        | (ColumnBound::Full, ColumnBound::Full) => tested = true,
                        (ColumnBound::At(x), ColumnBound::At(y)) => {
                            if y != x - n {
                                continue 'n;
                            }
                            tested = true;
                        }
                        _ => continue 'n,
                    }
                }
                if !tested {
                    continue;
                }
                let period = self.period_slice(m, masked_columns, n)?;
                return Some(PeriodDescriptor { m, n, period });
            }
        }
        None
    }

    /// The strip `([0, m-1] × ℤ) ∩ J` as a diagram. Masked columns are
    /// reconstructed from their periodic neighbours.
    fn period_slice(&self, m: i64, masked_columns: &[i64], n: i64) -> Option<Diagram> {
        let (lo, hi) = self.column_range();
        let mut bounds = Vec::with_capacity(m as usize);
        for i0 in 0..m {
            let mut found = None;
            // Prefer the in-range representative of the residue class; fall
            // back to any unmasked translate.
            let mut k = (lo - i0).div_euclid(m);
            if i0 + k * m < lo {
                k += 1;
            }
            while i0 + k * m <= hi {
                let i = i0 + k * m;
                if i >= lo && !masked_columns.contains(&i) {
                    let b = self.bounds[(i - lo) as usize];
                    found = Some(b.shifted(k * n));
                    if k >= 0 {
                        break;
                    }
                }
                k += 1;
            }
            bounds.push(found?);
        }
        // Period strips of a valid diagram keep the nonincreasing order
        // within the strip.
        Diagram::new(0, bounds).ok()
    }
}

/// A detected period of a diagram: translation step `(m, -n)` and the strip
/// `J_0` describing one period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodDescriptor {
    pub m: i64,
    pub n: i64,
    pub period: Diagram,
}

impl PeriodDescriptor {
    /// Verify the disjoint tiling `J = ⊔_k (km, -kn) + J_0` on the diagram
    /// window, skipping the listed columns.
    pub fn tiles(&self, d: &Diagram, masked_columns: &[i64]) -> bool {
        let (lo, hi) = d.column_range();
        for i in lo..=hi {
            if masked_columns.contains(&i) {
                continue;
            }
            let k = i.div_euclid(self.m);
            let i0 = i - k * self.m;
            let expected = match self.period.bound(i0) {
                Ok(b) => b.shifted(-k * self.n),
                Err(_) => return false,
            };
            if d.bound(i).unwrap() != expected {
                return false;
            }
        }
        true
    }
}

/// Columns of the complement diagram of a rational half-plane whose
/// boundary cell stayed with the half-plane: nonpositive multiples of the
/// period width for the `Sv` variant, nonnegative ones for `SvHat`. Away
/// from these columns the complement diagram is exactly periodic with
/// period `(-l, -k)`.
pub fn sheared_columns(hp: &HalfPlane, window: i64) -> Result<Vec<i64>> {
    let (v1, v2) = match &hp.vector {
        crate::halfplane::LatticeVector::Rational { v1, v2 } => (*v1, *v2),
        _ => {
            return Err(DiagramError::Domain(
                "periodicity analysis needs a rational vector".into(),
            ))
        }
    };
    if v1 >= 0 || v2 >= 0 {
        return Err(DiagramError::Domain(
            "periodicity analysis needs negative components".into(),
        ));
    }
    let m = -v2;
    let mut out = Vec::new();
    let mut k = 0i64;
    loop {
        let col = k * m;
        if col.abs() > window {
            break;
        }
        out.push(col);
        k += match hp.variant {
            crate::halfplane::Variant::Sv => -1,
            crate::halfplane::Variant::SvHat => 1,
        };
    }
    out.sort_unstable();
    Ok(out)
}

/// The diagram `-S ∪ {(0,0)}` of a half-plane containing `(-1,0)` and
/// `(0,-1)`; equal to the complement of `S` pointwise.
pub fn halfplane_to_diagram(hp: &HalfPlane, window: i64) -> Result<Diagram> {
    if !hp.contains_seed_corner() {
        return Err(DiagramError::Domain(
            "half-plane must contain (-1,0) and (0,-1); apply a transform first".into(),
        ));
    }
    let mut bounds = Vec::with_capacity((2 * window + 1) as usize);
    for i in -window..=window {
        if i == 0 {
            // N_0 = -1 under the seed normalization, and the origin cell is
            // adjoined, so the column starts at 0 either way.
            bounds.push(ColumnBound::At(0));
            continue;
        }
        let b = match hp.column_max(i)? {
            crate::halfplane::CornerValue::PosInf => ColumnBound::Empty,
            crate::halfplane::CornerValue::NegInf => ColumnBound::Full,
            crate::halfplane::CornerValue::Finite(n) => ColumnBound::At(n + 1),
        };
        bounds.push(b);
    }
    Diagram::new(-window, bounds)
}

// --- serialization -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ColumnRepr {
    i: i64,
    b: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct DiagramRepr {
    column_range: [i64; 2],
    boundary: Vec<ColumnRepr>,
}

impl Serialize for Diagram {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (lo, hi) = self.column_range();
        let boundary = (lo..=hi)
            .map(|i| ColumnRepr {
                i,
                b: match self.bound(i).unwrap() {
                    ColumnBound::Full => serde_json::Value::String("-inf".into()),
                    ColumnBound::Empty => serde_json::Value::String("+inf".into()),
                    ColumnBound::At(b) => serde_json::Value::from(b),
                },
            })
            .collect();
        DiagramRepr {
            column_range: [lo, hi],
            boundary,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Diagram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DiagramRepr::deserialize(deserializer)?;
        let [lo, hi] = repr.column_range;
        if hi < lo {
            return Err(D::Error::custom("empty column range"));
        }
        let mut bounds = vec![None; (hi - lo + 1) as usize];
        for col in repr.boundary {
            if col.i < lo || col.i > hi {
                return Err(D::Error::custom(format!("column {} out of range", col.i)));
            }
            let b = match &col.b {
                serde_json::Value::String(s) if s == "-inf" => ColumnBound::Full,
                serde_json::Value::String(s) if s == "+inf" => ColumnBound::Empty,
                serde_json::Value::Number(n) => ColumnBound::At(
                    n.as_i64()
                        .ok_or_else(|| D::Error::custom("non-integer boundary"))?,
                ),
                _ => return Err(D::Error::custom("boundary must be int, \"+inf\" or \"-inf\"")),
            };
            bounds[(col.i - lo) as usize] = Some(b);
        }
        let bounds: Option<Vec<_>> = bounds.into_iter().collect();
        let bounds = bounds.ok_or_else(|| D::Error::custom("missing boundary column"))?;
        Diagram::new(lo, bounds).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfplane::Variant;
    use crate::LatticeVector;

    fn neg_l_with_origin(window: i64) -> Diagram {
        halfplane_to_diagram(&HalfPlane::bottom(), window).unwrap()
    }

    #[test]
    fn quarter_plane_contains() {
        let d = Diagram::quarter_plane(5);
        assert!(d.contains((2, 3)).unwrap());
        assert!(d.contains((0, 0)).unwrap());
        assert!(!d.contains((-1, 0)).unwrap());
        assert!(!d.contains((2, -1)).unwrap());
        assert!(matches!(
            d.contains((9, 0)),
            Err(DiagramError::ColumnOutOfRange(9))
        ));
    }

    #[test]
    fn complement_of_bottom_half_plane() {
        let d = neg_l_with_origin(4);
        // Columns: 1 on the left of the origin, 0 from the origin column on.
        for i in -4..0 {
            assert_eq!(d.bound(i).unwrap(), ColumnBound::At(1));
        }
        for i in 0..=4 {
            assert_eq!(d.bound(i).unwrap(), ColumnBound::At(0));
        }
        assert!(d.contains((-4, 1)).unwrap());
        assert!(!d.contains((-4, 0)).unwrap());
    }

    #[test]
    fn complement_of_left_half_plane_has_sentinels() {
        let lprime = HalfPlane::new(LatticeVector::rational(-1, 0).unwrap(), Variant::SvHat);
        let d = halfplane_to_diagram(&lprime, 3).unwrap();
        assert_eq!(d.bound(-1).unwrap(), ColumnBound::Empty);
        assert_eq!(d.bound(0).unwrap(), ColumnBound::At(0));
        assert_eq!(d.bound(1).unwrap(), ColumnBound::Full);
    }

    #[test]
    fn complement_of_diagonal_half_plane() {
        let d = halfplane_to_diagram(&HalfPlane::rational(-1, -1).unwrap(), 4).unwrap();
        for i in -4..=4i64 {
            let want = if i < 0 {
                -i + 1
            } else if i == 0 {
                0
            } else {
                -i
            };
            assert_eq!(d.bound(i).unwrap(), ColumnBound::At(want), "i={i}");
            assert!(d.contains((i, want)).unwrap());
            assert!(!d.contains((i, want - 1)).unwrap());
        }
    }

    #[test]
    fn complement_identity_pointwise() {
        for (v1, v2) in [(0, -1), (-1, -1), (-1, -2), (-3, -2)] {
            for variant in [Variant::Sv, Variant::SvHat] {
                let h = HalfPlane::new(LatticeVector::rational(v1, v2).unwrap(), variant);
                if !h.contains_seed_corner() {
                    continue;
                }
                let w = 8;
                let d = halfplane_to_diagram(&h, w).unwrap();
                for i in -w..=w {
                    for j in -40..=40 {
                        let in_d = d.contains((i, j)).unwrap();
                        let expect = (i, j) == (0, 0) || !h.contains((i, j)).unwrap();
                        assert_eq!(in_d, expect, "v=({v1},{v2}) {variant:?} p=({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn translation_and_equivalence() {
        let qp = Diagram::quarter_plane(5);
        let moved = qp.translate((1, 1));
        assert_eq!(qp.translation_equivalent(&moved), Some((1, 1)));

        let d1 = neg_l_with_origin(6);
        let d2 = d1.translate((-3, 5));
        assert_eq!(d1.translation_equivalent(&d2), Some((-3, 5)));

        assert_eq!(qp.translation_equivalent(&d1), None);
    }

    #[test]
    fn period_detection() {
        let d = Diagram::from_fn(-6, 6, |i| ColumnBound::At(-i)).unwrap();
        let p = d.find_period(4, 4).unwrap();
        assert_eq!((p.m, p.n), (1, 1));
        assert_eq!(p.period.bound(0).unwrap(), ColumnBound::At(0));
        assert!(p.tiles(&d, &[]));

        let halves = Diagram::from_fn(-6, 6, |i| {
            let num = -i;
            ColumnBound::At(num.div_euclid(2) + if num.rem_euclid(2) != 0 { 1 } else { 0 })
        })
        .unwrap();
        let p = halves.find_period(4, 4).unwrap();
        assert_eq!((p.m, p.n), (2, 1));
        assert!(p.tiles(&halves, &[]));

        let flat = Diagram::from_fn(-3, 3, |_| ColumnBound::At(0)).unwrap();
        let p = flat.find_period(4, 4).unwrap();
        assert_eq!((p.m, p.n), (1, 0));

        assert!(Diagram::from_fn(-3, 3, |i| ColumnBound::At(-3 * i))
            .unwrap()
            .find_period(4, 2)
            .is_none());
    }

    #[test]
    fn halfplane_diagram_periodicity() {
        for (k, l) in [(-1i64, -1i64), (-1, -2), (-2, -3), (-3, -1), (-4, -3)] {
            for variant in [Variant::Sv, Variant::SvHat] {
                let h = HalfPlane::new(LatticeVector::rational(k, l).unwrap(), variant);
                let d = halfplane_to_diagram(&h, 12).unwrap();
                let mask = sheared_columns(&h, 12).unwrap();
                let p = d
                    .find_period_masked(12, 12, &mask)
                    .unwrap_or_else(|| panic!("no period for ({k},{l}) {variant:?}"));
                assert_eq!((p.m, p.n), (-l, -k), "vector ({k},{l}) {variant:?}");
                assert!(p.tiles(&d, &mask), "tiling for ({k},{l}) {variant:?}");
            }
        }
    }

    #[test]
    fn sheared_columns_are_the_only_period_defects() {
        // For the slope-1/2 half-plane the complement boundary drops one
        // extra row exactly on the sheared columns.
        let h = HalfPlane::rational(-1, -2).unwrap();
        let d = halfplane_to_diagram(&h, 8).unwrap();
        let mask = sheared_columns(&h, 8).unwrap();
        assert_eq!(mask, vec![-8, -6, -4, -2, 0]);
        for i in -8..=6i64 {
            let a = d.bound(i).unwrap();
            let b = d.bound(i + 2).unwrap();
            let (ColumnBound::At(a), ColumnBound::At(b)) = (a, b) else {
                panic!()
            };
            if mask.contains(&i) || mask.contains(&(i + 2)) {
                continue;
            }
            assert_eq!(b, a - 1, "period defect at unmasked column {i}");
        }
        // and a known defect at a masked pair
        let ColumnBound::At(bm2) = d.bound(-2).unwrap() else {
            panic!()
        };
        let ColumnBound::At(b0) = d.bound(0).unwrap() else {
            panic!()
        };
        assert_eq!(bm2 - b0, 2);
    }

    #[test]
    fn monotonicity_enforced() {
        assert!(matches!(
            Diagram::new(0, vec![ColumnBound::At(0), ColumnBound::At(1)]),
            Err(DiagramError::NonMonotone(1))
        ));
        assert!(matches!(
            Diagram::new(0, vec![ColumnBound::Full, ColumnBound::At(0)]),
            Err(DiagramError::NonMonotone(1))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let d = neg_l_with_origin(3);
        let js = serde_json::to_string(&d).unwrap();
        let back: Diagram = serde_json::from_str(&js).unwrap();
        assert_eq!(d, back);

        let lprime = HalfPlane::new(LatticeVector::rational(-1, 0).unwrap(), Variant::SvHat);
        let d = halfplane_to_diagram(&lprime, 2).unwrap();
        let js = serde_json::to_string(&d).unwrap();
        assert!(js.contains("+inf") && js.contains("-inf"));
        assert_eq!(serde_json::from_str::<Diagram>(&js).unwrap(), d);
    }
}
