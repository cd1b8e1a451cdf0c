use num_traits::Signed;
use proptest::prelude::*;
use std::cmp::Ordering;
use wold2d::diagram::halfplane_to_diagram;
use wold2d::halfplane::{verify_axioms, Transform};
use wold2d::{HalfPlane, LatticeVector, Variant};

fn arb_vector() -> impl Strategy<Value = (i64, i64)> {
    (-9i64..=9, -9i64..=9).prop_filter("nonzero", |&(a, b)| (a, b) != (0, 0))
}

fn arb_halfplane() -> impl Strategy<Value = HalfPlane> {
    (arb_vector(), prop::bool::ANY).prop_map(|((v1, v2), hat)| {
        HalfPlane::new(
            LatticeVector::rational(v1, v2).unwrap(),
            if hat { Variant::SvHat } else { Variant::Sv },
        )
    })
}

fn arb_point() -> impl Strategy<Value = (i64, i64)> {
    (-20i64..=20, -20i64..=20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn axioms_hold_on_windows(hp in arb_halfplane()) {
        let report = verify_axioms(|p| hp.contains(p).unwrap(), 12);
        prop_assert!(report.all_ok(), "{report:?}");
    }

    #[test]
    fn membership_is_antipodal(hp in arb_halfplane(), p in arb_point()) {
        prop_assume!(p != (0, 0));
        let a = hp.contains(p).unwrap();
        let b = hp.contains((-p.0, -p.1)).unwrap();
        prop_assert!(a != b);
    }

    #[test]
    fn order_is_translation_invariant(
        hp in arb_halfplane(),
        a in arb_point(),
        b in arb_point(),
        c in arb_point(),
    ) {
        let plain = hp.compare(a, b).unwrap();
        let moved = hp.compare((a.0 + c.0, a.1 + c.1), (b.0 + c.0, b.1 + c.1)).unwrap();
        prop_assert_eq!(plain, moved);
    }

    #[test]
    fn order_is_antisymmetric_and_transitive(
        hp in arb_halfplane(),
        a in arb_point(),
        b in arb_point(),
        c in arb_point(),
    ) {
        let ab = hp.compare(a, b).unwrap();
        let ba = hp.compare(b, a).unwrap();
        match ab {
            Ordering::Equal => prop_assert_eq!(ba, Ordering::Equal),
            Ordering::Less => prop_assert_eq!(ba, Ordering::Greater),
            Ordering::Greater => prop_assert_eq!(ba, Ordering::Less),
        }
        if ab != Ordering::Greater && hp.compare(b, c).unwrap() != Ordering::Greater {
            prop_assert_ne!(hp.compare(a, c).unwrap(), Ordering::Greater);
        }
    }

    #[test]
    fn negate_is_an_involution(hp in arb_halfplane()) {
        prop_assert_eq!(hp.transform(Transform::Negate).transform(Transform::Negate), hp.clone());
        prop_assert_eq!(hp.transform(Transform::ReflectX).transform(Transform::ReflectX), hp);
    }

    #[test]
    fn transforms_act_pointwise(hp in arb_halfplane(), p in arb_point()) {
        let neg = hp.transform(Transform::Negate);
        prop_assert_eq!(neg.contains(p).unwrap(), hp.contains((-p.0, -p.1)).unwrap());
        let refl = hp.transform(Transform::ReflectX);
        prop_assert_eq!(refl.contains(p).unwrap(), hp.contains((p.0, -p.1)).unwrap());
    }

    #[test]
    fn corner_sequences_obey_the_increment_relations(v in arb_vector(), hat in prop::bool::ANY) {
        let hp = HalfPlane::new(
            LatticeVector::rational(v.0, v.1).unwrap(),
            if hat { Variant::SvHat } else { Variant::Sv },
        );
        prop_assume!(hp.contains_seed_corner());
        let jmax = 10i64;
        let cs = hp.corner_sequence(jmax).unwrap();
        let val = |j: i64| cs.value(j).unwrap().finite();

        // reflection relation between the two tails
        for j in 1..=jmax {
            if let (Some(mj), Some(mnj)) = (val(j), val(-j)) {
                prop_assert_eq!(mj, -mnj - 1);
            }
        }
        // triple increments
        for p in -jmax..=jmax {
            for j in -jmax..=jmax {
                let jp = j + p;
                if jp.abs() > jmax {
                    continue;
                }
                if let (Some(mp), Some(mjp), Some(mj)) = (val(p), val(jp), val(j)) {
                    prop_assert!(mp <= mjp - mj && mjp - mj <= mp + 1,
                        "p={p} j={j}: {mp} vs {}", mjp - mj);
                }
            }
        }
        // gap constant
        if let Some(m1) = val(1) {
            let m = -m1 - 1;
            prop_assert!(m >= 0);
            for j in -jmax..jmax {
                if let (Some(a), Some(b)) = (val(j), val(j + 1)) {
                    let gap = a - b;
                    prop_assert!(gap == m || gap == m + 1, "gap {gap} at j={j}, m={m}");
                }
            }
        }
    }

    #[test]
    fn corner_sequence_membership_round_trip(v in arb_vector(), hat in prop::bool::ANY) {
        let hp = HalfPlane::new(
            LatticeVector::rational(v.0, v.1).unwrap(),
            if hat { Variant::SvHat } else { Variant::Sv },
        );
        prop_assume!(hp.contains_seed_corner());
        let jmax = 8i64;
        let cs = hp.corner_sequence(jmax).unwrap();
        let extent = 9 * jmax + 2;
        for j in -jmax..=jmax {
            for i in -extent..=extent {
                let direct = hp.contains((i, j)).unwrap();
                let rebuilt = cs.reconstructed_contains((i, j)).unwrap();
                prop_assert_eq!(direct, rebuilt, "at ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn recovered_slope_is_within_the_stated_bound(
        a in 1i64..=9,
        b in 1i64..=9,
        hat in prop::bool::ANY,
    ) {
        let hp = HalfPlane::new(
            LatticeVector::rational(-a, -b).unwrap(),
            if hat { Variant::SvHat } else { Variant::Sv },
        );
        let jmax = 24i64;
        let cs = hp.corner_sequence(jmax).unwrap();
        let rec = cs.recover_vector().unwrap();
        let g = num_integer::gcd(a, b);
        let slope = num_rational::BigRational::new((b / g).into(), (a / g).into());
        for (idx, delta) in rec.delta_sequence.iter().enumerate() {
            let j = idx as i64 + 1;
            let err = (slope.clone() - delta).abs();
            let bound = num_rational::BigRational::new(1.into(), j.into());
            prop_assert!(err <= bound, "j={j}: err {err}");
        }
    }

    #[test]
    fn complement_diagram_matches_negated_membership(
        v in (-6i64..=-1, -6i64..=-1),
        hat in prop::bool::ANY,
    ) {
        let hp = HalfPlane::new(
            LatticeVector::rational(v.0, v.1).unwrap(),
            if hat { Variant::SvHat } else { Variant::Sv },
        );
        let w = 7i64;
        let d = halfplane_to_diagram(&hp, w).unwrap();
        for i in -w..=w {
            for j in -45..=45 {
                let in_d = d.contains((i, j)).unwrap();
                let expect = (i, j) == (0, 0) || !hp.contains((i, j)).unwrap();
                prop_assert_eq!(in_d, expect);
            }
        }
    }

    #[test]
    fn rotation_respects_membership(k in -10i64..=-1, l in -10i64..=-1) {
        prop_assume!(num_integer::gcd(-k, -l) == 1);
        let rot = wold2d::halfplane::LatticeRotation::for_vector(k, l).unwrap();
        prop_assert_eq!(rot.p * k + rot.q * l, -1);
        prop_assert_eq!(rot.det(), 1);
        let bottom = HalfPlane::bottom();
        let s = HalfPlane::rational(k, l).unwrap();
        for i in -15..=15i64 {
            for j in -15..=15i64 {
                let p = (i, j);
                if bottom.contains(p).unwrap() {
                    prop_assert!(s.contains(rot.forward(p)).unwrap());
                }
                if s.contains(p).unwrap() {
                    prop_assert!(bottom.contains(rot.inverse(p)).unwrap());
                }
                prop_assert_eq!(rot.inverse(rot.forward(p)), p);
            }
        }
    }
}
