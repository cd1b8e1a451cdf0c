//! Invariant batteries behind `--verify`: fixed-seed re-checks of the
//! documented properties of every layer, with one counted line per check.

use crate::config::CliError;
use crate::run::Report;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::time::Instant;
use wold2d::diagram::{halfplane_to_diagram, sheared_columns, ColumnBound, Diagram};
use wold2d::field::{
    classify, evanescent_model, innovate, innovate_over_points, ma_coefficients,
    remote_past_energy, simulate_ma, CovarianceModel, EvanescentKind, Label, PastSpec, SampleGrid,
    Tap,
};
use wold2d::halfplane::{verify_axioms, Direction, LatticeRotation, Transform};
use wold2d::operators::{
    bridge_check, build_bcl, build_diagram_shift, build_generalized_power, check_compatibility,
    check_wandering, ker_v1_star, matrix_power, projection_on_indices, unitary_cycle_with_phases,
    wold_split, BclData, GeneralizedPowerData,
};
use wold2d::{CMat, HalfPlane, LatticeVector, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    LatticeHalfplane,
    DiagramAlgebra,
    OperatorModels,
    FieldEngine,
}

impl std::str::FromStr for Scope {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "all" => Ok(Scope::All),
            "lattice_halfplane" => Ok(Scope::LatticeHalfplane),
            "diagram_algebra" => Ok(Scope::DiagramAlgebra),
            "operator_models" => Ok(Scope::OperatorModels),
            "field_engine" => Ok(Scope::FieldEngine),
            other => Err(CliError::Config(format!("unknown verify scope {other:?}"))),
        }
    }
}

/// Pass/fail sink shared by the batteries.
#[derive(Default)]
pub struct Battery {
    pub passed: usize,
    pub failed: usize,
    pub failures: Vec<String>,
}

impl Battery {
    pub fn check(&mut self, name: &str, ok: bool) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            self.failures.push(name.to_string());
        }
    }
}

fn coprime_pairs(limit: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for a in 1..=limit {
        for b in 1..=limit {
            if num_integer::gcd(a, b) == 1 {
                out.push((-a, -b));
            }
        }
    }
    out
}

fn rational_hp(v1: i64, v2: i64, variant: Variant) -> HalfPlane {
    HalfPlane::new(LatticeVector::rational(v1, v2).unwrap(), variant)
}

pub fn lattice_battery(b: &mut Battery) {
    // Axioms for every primitive vector in a small ball, both variants.
    for v1 in -5i64..=5 {
        for v2 in -5i64..=5 {
            if (v1, v2) == (0, 0) || num_integer::gcd(v1.abs(), v2.abs()) != 1 {
                continue;
            }
            for variant in [Variant::Sv, Variant::SvHat] {
                let hp = rational_hp(v1, v2, variant);
                let report = verify_axioms(|p| hp.contains(p).unwrap(), 10);
                b.check(&format!("axioms ({v1},{v2}) {variant:?}"), report.all_ok());
            }
        }
    }

    // Corner relations, round trip, slope recovery.
    for (v1, v2) in coprime_pairs(5) {
        for variant in [Variant::Sv, Variant::SvHat] {
            let hp = rational_hp(v1, v2, variant);
            if !hp.contains_seed_corner() {
                continue;
            }
            let jmax = 12;
            let cs = hp.corner_sequence(jmax).unwrap();
            let val = |j: i64| cs.value(j).and_then(wold2d::halfplane::CornerValue::finite);
            let mut ok = true;
            for j in 1..=jmax {
                if let (Some(a), Some(bb)) = (val(j), val(-j)) {
                    ok &= a == -bb - 1;
                }
            }
            for p in -jmax..=jmax {
                for j in -jmax..=jmax {
                    if (j + p).abs() > jmax {
                        continue;
                    }
                    if let (Some(mp), Some(mjp), Some(mj)) = (val(p), val(j + p), val(j)) {
                        ok &= mp <= mjp - mj && mjp - mj <= mp + 1;
                    }
                }
            }
            b.check(&format!("corner relations ({v1},{v2}) {variant:?}"), ok);

            let mut round = true;
            for j in -jmax..=jmax {
                for i in -64..=64 {
                    round &= cs.reconstructed_contains((i, j))
                        == Some(hp.contains((i, j)).unwrap());
                }
            }
            b.check(&format!("corner round trip ({v1},{v2}) {variant:?}"), round);

            if let Ok(rec) = cs.recover_vector() {
                let slope = num_rational::BigRational::new((-v2).into(), (-v1).into());
                let mut bound_ok = true;
                for (idx, d) in rec.delta_sequence.iter().enumerate() {
                    let j = idx as i64 + 1;
                    let err = num_traits::Signed::abs(&(slope.clone() - d));
                    bound_ok &= err <= num_rational::BigRational::new(1.into(), j.into());
                }
                b.check(&format!("slope recovery ({v1},{v2}) {variant:?}"), bound_ok);
            }
        }
    }

    rotation_battery(b, |k, l| {
        let r = LatticeRotation::for_vector(k, l).unwrap();
        (r.p, r.q)
    });

    // Transform laws on a window.
    for (v1, v2) in [(0, -1), (-1, -1), (-2, 3), (5, 2), (-1, 0)] {
        for variant in [Variant::Sv, Variant::SvHat] {
            let hp = rational_hp(v1, v2, variant);
            let neg = hp.transform(Transform::Negate);
            let refl = hp.transform(Transform::ReflectX);
            let mut ok = true;
            for i in -6i64..=6 {
                for j in -6i64..=6 {
                    ok &= neg.contains((i, j)).unwrap() == hp.contains((-i, -j)).unwrap();
                    ok &= refl.contains((i, j)).unwrap() == hp.contains((i, -j)).unwrap();
                }
            }
            ok &= hp.transform(Transform::Negate).transform(Transform::Negate) == hp;
            b.check(&format!("transform laws ({v1},{v2}) {variant:?}"), ok);
        }
    }
}

/// Rotation checks parameterized by the coefficient provider, so the
/// harness itself can be exercised against a corrupted one.
pub fn rotation_battery(b: &mut Battery, coefficients: impl Fn(i64, i64) -> (i64, i64)) {
    let bottom = HalfPlane::bottom();
    for (k, l) in coprime_pairs(6) {
        let (p, q) = coefficients(k, l);
        b.check(&format!("rotation relation ({k},{l})"), p * k + q * l == -1);
        b.check(&format!("rotation determinant ({k},{l})"), -l * q - p * k == 1);
        let target = HalfPlane::rational(k, l).unwrap();
        let fwd = |m: i64, n: i64| (p * n - l * m, q * n + k * m);
        let inv = |a: i64, bb: i64| (q * a - p * bb, -k * a - l * bb);
        let mut ok = true;
        for i in -10i64..=10 {
            for j in -10i64..=10 {
                if bottom.contains((i, j)).unwrap() {
                    let f = fwd(i, j);
                    ok &= target.contains(f).unwrap();
                }
                if target.contains((i, j)).unwrap() {
                    ok &= bottom.contains(inv(i, j)).unwrap();
                }
                let f = fwd(i, j);
                ok &= inv(f.0, f.1) == (i, j);
            }
        }
        b.check(&format!("rotation bijection ({k},{l})"), ok);
    }
}

pub fn diagram_battery(b: &mut Battery) {
    for (k, l) in [(-1i64, -1i64), (-1, -2), (-2, -3), (-3, -1)] {
        for variant in [Variant::Sv, Variant::SvHat] {
            let hp = rational_hp(k, l, variant);
            let w = 9;
            let d = halfplane_to_diagram(&hp, w).unwrap();
            let mut complement = true;
            for i in -w..=w {
                for j in -40..=40 {
                    complement &= d.contains((i, j)).unwrap()
                        == ((i, j) == (0, 0) || !hp.contains((i, j)).unwrap());
                }
            }
            b.check(&format!("complement identity ({k},{l}) {variant:?}"), complement);

            let mask = sheared_columns(&hp, w).unwrap();
            match d.find_period_masked(w, w, &mask) {
                Some(period) => {
                    b.check(
                        &format!("period slope ({k},{l}) {variant:?}"),
                        (period.m, period.n) == (-l, -k),
                    );
                    b.check(
                        &format!("period tiles ({k},{l}) {variant:?}"),
                        period.tiles(&d, &mask),
                    );
                }
                None => b.check(&format!("period slope ({k},{l}) {variant:?}"), false),
            }
        }
    }

    let qp = Diagram::quarter_plane(6);
    let moved = qp.translate((2, -1));
    b.check(
        "translation equivalence",
        qp.translation_equivalent(&moved) == Some((2, -1)),
    );
    let neg_l = halfplane_to_diagram(&HalfPlane::bottom(), 6).unwrap();
    b.check(
        "translation inequivalence",
        qp.translation_equivalent(&neg_l).is_none(),
    );

    let staircase = Diagram::from_fn(-6, 6, |i| ColumnBound::At(-i)).unwrap();
    b.check(
        "period of unit staircase",
        staircase
            .find_period(4, 4)
            .map(|p| (p.m, p.n) == (1, 1))
            .unwrap_or(false),
    );
    let flat = Diagram::from_fn(-4, 4, |_| ColumnBound::At(0)).unwrap();
    b.check(
        "period of flat boundary",
        flat.find_period(4, 4).map(|p| (p.m, p.n) == (1, 0)).unwrap_or(false),
    );
}

fn random_certified_model(rng: &mut ChaCha8Rng, window: i64) -> wold2d::operators::BclModel {
    let depth = rng.gen_range(3..=5usize);
    let needed = (2 * window + 1).max(depth as i64 - 1) as usize;
    let cycle = needed + 1 + rng.gen_range(1..=4usize);
    let phases: Vec<f64> = (0..cycle)
        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let u = unitary_cycle_with_phases(cycle, &phases);
    let p = projection_on_indices(cycle, &[0]);
    build_bcl(BclData::new(u, p, depth).unwrap()).unwrap()
}

pub fn operator_battery(b: &mut Battery, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f70);
    let window = 2i64;
    for trial in 0..3 {
        let model = random_certified_model(&mut rng, window);
        let interior = model.pair.interior_report();
        b.check(
            &format!("block model interior #{trial}"),
            interior.max() <= wold2d::operators::TOL_CONSTRUCTION,
        );
        b.check(
            &format!("block model kernel #{trial}"),
            ker_v1_star(&model).is_ok(),
        );
        // iterated defect identity
        let e = model.e_dim();
        let u = &model.data.unitary;
        let p = &model.data.projection;
        let mut defect_ok = true;
        for n in 1..model.depth() {
            let wn = matrix_power(&model.pair.v1, n);
            let prod = &wn * wn.adjoint();
            let mut want = CMat::identity(e, e);
            let mut ui = CMat::identity(e, e);
            for _ in 0..n {
                ui = u * ui;
                want -= &ui * p * ui.adjoint();
            }
            let top = prod.view((0, 0), (e, e)).clone_owned();
            defect_ok &= wold2d::operators::TOL_WANDERING
                >= (top - want).norm() / (e as f64).sqrt();
        }
        b.check(&format!("iterated defect identity #{trial}"), defect_ok);

        match wold_split(&model, window) {
            Ok(split) => b.check(&format!("wold split #{trial}"), split.report.pass),
            Err(_) => b.check(&format!("wold split #{trial}"), false),
        }
        b.check(
            &format!("compatibility #{trial}"),
            check_compatibility(&model.pair, 2, 2).pass,
        );
    }

    // Wandering certification detects short orbits.
    let u3 = wold2d::operators::unitary_cycle(3);
    let p3 = projection_on_indices(3, &[0]);
    b.check("wandering passes inside the orbit", check_wandering(&u3, &p3, 2).pass);
    b.check("wandering fails on the full cycle", !check_wandering(&u3, &p3, 3).pass);

    // Diagram shift of the quarter plane doubly commutes.
    let qp = Diagram::quarter_plane(4);
    let shift = build_diagram_shift(&qp, 1, 4).unwrap();
    let lhs = shift.pair.v1.adjoint() * &shift.pair.v2;
    let rhs = &shift.pair.v2 * shift.pair.v1.adjoint();
    let diff = lhs - rhs;
    let mut doubly = true;
    for &x in &shift.pair.interior {
        doubly &= diff.column(x).norm() < 1e-12;
    }
    b.check("quarter-plane shifts doubly commute", doubly);
    b.check(
        "quarter-plane shifts compatible",
        check_compatibility(&shift.pair, 2, 2).pass,
    );

    // Generalized powers: unitary extension and the diagram-shift bridge.
    for trial in 0..3 {
        let m = rng.gen_range(1..=3i64);
        let n = rng.gen_range(0..=2i64);
        let h = rng.gen_range(1..=2usize);
        let mut drops = vec![0i64; m as usize];
        let mut left = n;
        for d in drops.iter_mut() {
            let take = rng.gen_range(0..=left);
            *d = take;
            left -= take;
        }
        let mut bound = 3i64;
        let strip = Diagram::new(
            0,
            (0..m as usize)
                .map(|i| {
                    bound -= drops[i];
                    ColumnBound::At(bound)
                })
                .collect(),
        )
        .unwrap();
        let twist = wold2d::operators::random_unitary(h, &mut rng);
        let data = GeneralizedPowerData::new(strip, n, twist, -6, 8).unwrap();
        let model = build_generalized_power(data).unwrap();
        let (checked, residual) = model.unitary_extension_check();
        b.check(
            &format!("generalized power unitary extension #{trial}"),
            checked > 0 && residual <= 1e-12,
        );
    }
    let stair = Diagram::from_fn(-6, 6, |i| {
        let num = -i;
        ColumnBound::At(num.div_euclid(2) + if num.rem_euclid(2) != 0 { 1 } else { 0 })
    })
    .unwrap();
    match bridge_check(&stair, 2, 1, 1, 4) {
        Ok(res) => b.check("bridge to diagram shift", res.max_residual <= 1e-12),
        Err(_) => b.check("bridge to diagram shift", false),
    }
}

pub fn field_battery(b: &mut Battery, seed: u64) {
    let bottom = HalfPlane::bottom();
    let diagonal = HalfPlane::rational(-1, -1).unwrap();
    let white = CovarianceModel::WhiteNoise { variance: 1.0 };
    let row_line = CovarianceModel::LineField {
        c: 0,
        d: 1,
        variance: 1.0,
    };
    let diag_line = CovarianceModel::LineField {
        c: 1,
        d: 1,
        variance: 1.0,
    };

    for r in [8i64, 12] {
        let c1 = classify(&row_line, &bottom, r).unwrap();
        b.check(&format!("row field evanescent R={r}"), c1.label == Label::Evanescent);
        let c2 = classify(&diag_line, &diagonal, r).unwrap();
        b.check(&format!("diagonal field evanescent R={r}"), c2.label == Label::Evanescent);
        let c3 = classify(&diag_line, &bottom, r).unwrap();
        b.check(&format!("diagonal field deterministic R={r}"), c3.label == Label::Deterministic);
        let c4 = classify(&white, &bottom, r).unwrap();
        b.check(
            &format!("white noise purely nondeterministic R={r}"),
            c4.label == Label::PurelyNondeterministic,
        );
    }

    // Row moving average: innovation variance and coefficient recovery.
    let ma = CovarianceModel::MovingAverage {
        coeffs: vec![Tap::new(0, 0, Complex64::new(1.0, 0.0)), Tap::new(-1, 0, Complex64::new(0.5, 0.0))],
        noise_variance: 1.0,
    };
    let past = PastSpec::at_origin(bottom.clone(), 16).unwrap();
    let inn = innovate(&ma, &past).unwrap();
    b.check("row ma innovation variance", (inn.sigma2 - 1.0).abs() < 1e-6);
    let coeffs = ma_coefficients(&ma, &past, 3).unwrap();
    b.check(
        "row ma coefficient recovery",
        (coeffs[&(-1, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-3,
    );

    // Remote-past energies of the cited fields.
    let rem = remote_past_energy(&diag_line, &bottom, 6, 4).unwrap();
    b.check("diagonal field retains remote energy", rem.iter().all(|v| (v - 1.0).abs() < 1e-9));
    let rem = remote_past_energy(&row_line, &bottom, 6, 4).unwrap();
    b.check("row field loses remote energy", rem.iter().all(|v| v.abs() < 1e-9));

    // Additivity of independent components.
    let sum = CovarianceModel::Sum {
        components: vec![white.clone(), row_line.clone(), CovarianceModel::LineField {
            c: 1,
            d: 1,
            variance: 0.5,
        }],
    };
    let c = classify(&sum, &bottom, 12).unwrap();
    b.check(
        "mixed sum energies",
        (c.energies.ma - 1.0).abs() < 0.02
            && (c.energies.evan - 1.0).abs() < 0.05
            && (c.energies.det - 0.5).abs() < 0.05,
    );
    b.check("mixed sum label", c.label == Label::Mixed);

    // Rotation invariance over matched point sets.
    {
        let rot = LatticeRotation::for_vector(-1, -2).unwrap();
        let target = HalfPlane::rational(-1, -2).unwrap();
        let pts = PastSpec::at_origin(target, 6).unwrap().points().unwrap();
        let direct = innovate_over_points(&ma, (0, 0), &pts).unwrap();
        let pulled: Vec<(i64, i64)> = pts.iter().map(|p| rot.apply(*p, Direction::Inverse)).collect();
        let rotated = {
            let eval = ma.evaluator().unwrap();
            let mut entries = Vec::new();
            for i in -40..=40i64 {
                for j in -40..=40i64 {
                    let g = eval.gamma(rot.forward((i, j)));
                    if g.norm() > 0.0 {
                        entries.push(Tap::new(i, j, g));
                    }
                }
            }
            CovarianceModel::Table { entries }
        };
        let pullback = innovate_over_points(&rotated, (0, 0), &pulled).unwrap();
        b.check(
            "rotation preserves innovation variance",
            (direct.sigma2 - pullback.sigma2).abs() < 1e-9,
        );
    }

    // Evanescent model constructions collapse to the cited line fields.
    let horizontal = evanescent_model(&EvanescentKind::HorizontalL {
        taps: vec![Tap::new(0, 0, Complex64::new(1.0, 0.0))],
        copies: 1,
    })
    .unwrap();
    let he = horizontal.evaluator().unwrap();
    let re = row_line.evaluator().unwrap();
    let mut equal = true;
    for p in -5i64..=5 {
        for q in -5i64..=5 {
            equal &= (he.gamma((p, q)) - re.gamma((p, q))).norm() < 1e-14;
        }
    }
    b.check("horizontal evanescent base case", equal);
    let c = classify(&horizontal, &bottom, 10).unwrap();
    b.check("horizontal evanescent classifies", c.label == Label::Evanescent);

    let rational = evanescent_model(&EvanescentKind::Rational {
        k: -1,
        l: -1,
        taps: vec![Tap::new(0, 0, Complex64::new(1.0, 0.0))],
        copies: 1,
    })
    .unwrap();
    let c = classify(&rational, &diagonal, 10).unwrap();
    b.check("rational evanescent classifies", c.label == Label::Evanescent);

    // Simulation determinism and CSV round trip.
    let taps = vec![Tap::new(0, 0, Complex64::new(1.0, 0.0)), Tap::new(-1, 0, Complex64::new(0.5, 0.0))];
    let g1 = simulate_ma(&taps, 1.0, &bottom, seed, 8).unwrap();
    let g2 = simulate_ma(&taps, 1.0, &bottom, seed, 8).unwrap();
    b.check("simulation deterministic", g1 == g2);
    let back = SampleGrid::from_csv(&g1.to_csv()).unwrap();
    b.check("csv round trip", back == g1);
}

/// Run the selected batteries and assemble a report.
pub fn verify_suite(scope: Scope, seed: u64) -> Report {
    let start = Instant::now();
    let mut b = Battery::default();
    let mut sections: Vec<&str> = Vec::new();
    if matches!(scope, Scope::All | Scope::LatticeHalfplane) {
        sections.push("lattice_halfplane");
        lattice_battery(&mut b);
    }
    if matches!(scope, Scope::All | Scope::DiagramAlgebra) {
        sections.push("diagram_algebra");
        diagram_battery(&mut b);
    }
    if matches!(scope, Scope::All | Scope::OperatorModels) {
        sections.push("operator_models");
        operator_battery(&mut b, seed);
    }
    if matches!(scope, Scope::All | Scope::FieldEngine) {
        sections.push("field_engine");
        field_battery(&mut b, seed);
    }
    let results = json!({
        "verify": {
            "sections": sections,
            "seed": seed,
            "failures": b.failures,
        }
    });
    Report {
        config: json!({"command": "verify", "scope": format!("{scope:?}"), "seed": seed}),
        results,
        passed: b.passed,
        failed: b.failed,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        csv: None,
    }
}
