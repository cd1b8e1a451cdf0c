//! Command dispatch and report assembly.

use crate::canonical::to_canonical_json;
use crate::config::{
    require_bound, CliError, Command, OutputFormat, RunConfig, MAX_DEPTH, MAX_EDIM, MAX_RADIUS,
    MAX_WINDOW,
};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};
use std::time::Instant;
use wold2d::diagram::{halfplane_to_diagram, sheared_columns, Diagram};
use wold2d::field::{
    classify_with, evanescent_model, innovate, ma_coefficients, remote_past_energy, simulate_ma,
    ClassifyOptions, CovarianceModel, EvanescentKind, FieldError, PastSpec, Tap,
};
use wold2d::halfplane::{verify_axioms, CornerValue, LatticeRotation};
use wold2d::operators::{
    build_bcl, check_compatibility, check_wandering, ker_v1_star, projection_on_indices,
    unitary_cycle, unitary_cycle_with_phases, wold_split, BclData, OperatorError,
};
use wold2d::{CMat, HalfPlane};

/// Result of one run: echo of the config, a results object, check counts,
/// and an optional CSV payload. Wall time is kept out of the serialized
/// report so identical runs stay byte-identical.
#[derive(Debug)]
pub struct Report {
    pub config: Value,
    pub results: Value,
    pub passed: usize,
    pub failed: usize,
    pub wall_time_ms: f64,
    pub csv: Option<String>,
}

impl Report {
    pub fn to_value(&self) -> Value {
        json!({
            "config": self.config,
            "results": self.results,
            "checks": {"passed": self.passed, "failed": self.failed},
        })
    }

    pub fn emit(&self, format: OutputFormat) -> Result<Vec<u8>, CliError> {
        match format {
            OutputFormat::Json => {
                let mut s = to_canonical_json(&self.to_value());
                s.push('\n');
                Ok(s.into_bytes())
            }
            OutputFormat::Csv => self
                .csv
                .clone()
                .map(String::into_bytes)
                .ok_or_else(|| {
                    CliError::Config(
                        "csv output is only available for field runs with simulation".into(),
                    )
                }),
            OutputFormat::Text => Ok(self.render_text().into_bytes()),
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        // Field runs lead with the three-part energy table.
        if let Some(e) = self.results.get("energies") {
            let g = |k: &str| {
                e.get(k)
                    .and_then(Value::as_f64)
                    .map(crate::canonical::fmt_g12)
                    .unwrap_or_default()
            };
            out.push_str("total ma det evan\n");
            out.push_str(&format!(
                "{} {} {} {}\n",
                g("total"),
                g("ma"),
                g("det"),
                g("evan")
            ));
        }
        render_text_value(&self.results, 0, &mut out);
        out.push_str(&format!(
            "checks: {} passed, {} failed\n",
            self.passed, self.failed
        ));
        out
    }
}

fn render_text_value(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for key in keys {
                let item = &map[key];
                match item {
                    Value::Object(_) | Value::Array(_) => {
                        out.push_str(&format!("{pad}{key}:\n"));
                        render_text_value(item, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}{key}: {}\n", scalar_text(item))),
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::Object(_) | Value::Array(_) => {
                        out.push_str(&format!("{pad}-\n"));
                        render_text_value(item, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}- {}\n", scalar_text(item))),
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar_text(other))),
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    return crate::canonical::fmt_g12(f);
                }
            }
            n.to_string()
        }
        other => other.to_string(),
    }
}

#[derive(Default)]
struct Checks {
    items: Vec<Value>,
    passed: usize,
    failed: usize,
}

impl Checks {
    fn add(&mut self, name: &str, pass: bool, max_residual: Option<f64>) {
        let mut entry = json!({"check": name, "pass": pass});
        if let Some(r) = max_residual {
            entry["max_residual"] = json!(r);
        }
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.items.push(entry);
    }
}

fn params<T: serde::de::DeserializeOwned>(config: &RunConfig) -> Result<T, CliError> {
    serde_json::from_value(config.parameters.clone())
        .map_err(|e| CliError::Config(format!("bad parameters: {e}")))
}

fn field_err(e: FieldError) -> CliError {
    CliError::Run(e.to_string())
}

/// Execute a run configuration. The seed feeds simulation only.
pub fn run(config: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let start = Instant::now();
    let config_echo =
        serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
    let mut checks = Checks::default();
    let (results, csv) = match config.command {
        Command::Halfplane => (run_halfplane(config, &mut checks)?, None),
        Command::Psi => (run_psi(config, &mut checks)?, None),
        Command::Diagram => (run_diagram(config, &mut checks)?, None),
        Command::Operator => (run_operator(config, &mut checks)?, None),
        Command::Field => run_field(config, &mut checks, seed)?,
    };
    let mut results = results;
    results["check_details"] = Value::Array(checks.items.clone());
    Ok(Report {
        config: config_echo,
        results,
        passed: checks.passed,
        failed: checks.failed,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        csv,
    })
}

// --- halfplane ------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfplaneParams {
    halfplane: HalfPlane,
    #[serde(default = "default_window12")]
    window: i64,
    #[serde(default = "default_window12")]
    jmax: i64,
}

fn default_window12() -> i64 {
    12
}

fn corner_value_json(v: CornerValue) -> Value {
    match v {
        CornerValue::PosInf => json!("+inf"),
        CornerValue::NegInf => json!("-inf"),
        CornerValue::Finite(m) => json!(m),
    }
}

fn run_halfplane(config: &RunConfig, checks: &mut Checks) -> Result<Value, CliError> {
    let p: HalfplaneParams = params(config)?;
    require_bound("window", p.window, 1, MAX_WINDOW)?;
    require_bound("jmax", p.jmax, 0, MAX_WINDOW)?;
    let hp = p.halfplane;
    let membership = |q: (i64, i64)| -> Result<bool, CliError> {
        hp.contains(q)
            .map_err(|e| CliError::Config(format!("window unusable: {e}")))
    };
    // Probe the corners first so certification problems surface as config
    // errors instead of panics inside the scan.
    membership((p.window, p.window))?;
    let report = verify_axioms(|q| hp.contains(q).unwrap(), p.window);
    checks.add("origin_excluded", report.origin_ok, None);
    checks.add("semigroup", report.semigroup_ok, None);
    checks.add("antisymmetry", report.antisymmetry_ok, None);

    let mut results = json!({
        "axioms": {
            "origin_ok": report.origin_ok,
            "semigroup_ok": report.semigroup_ok,
            "antisymmetry_ok": report.antisymmetry_ok,
            "semigroup_counterexample": report.semigroup_counterexample
                .map(|(a, b)| json!([[a.0, a.1], [b.0, b.1]])).unwrap_or(Value::Null),
            "antisymmetry_counterexample": report.antisymmetry_counterexample
                .map(|q| json!([q.0, q.1])).unwrap_or(Value::Null),
        },
        "corner_sequence": Value::Null,
        "recovery": Value::Null,
    });

    if hp.contains_seed_corner() {
        let cs = hp
            .corner_sequence(p.jmax)
            .map_err(|e| CliError::Run(e.to_string()))?;
        let entries: Vec<Value> = (-p.jmax..=p.jmax)
            .map(|j| json!({"j": j, "m": corner_value_json(cs.value(j).unwrap())}))
            .collect();
        let val = |j: i64| cs.value(j).and_then(CornerValue::finite);
        let mut reflection_ok = true;
        let mut increments_ok = true;
        for j in 1..=p.jmax {
            if let (Some(a), Some(b)) = (val(j), val(-j)) {
                reflection_ok &= a == -b - 1;
            }
        }
        for q in -p.jmax..=p.jmax {
            for j in -p.jmax..=p.jmax {
                if (j + q).abs() > p.jmax {
                    continue;
                }
                if let (Some(mq), Some(mjq), Some(mj)) = (val(q), val(j + q), val(j)) {
                    increments_ok &= mq <= mjq - mj && mjq - mj <= mq + 1;
                }
            }
        }
        checks.add("corner_reflection_relation", reflection_ok, None);
        checks.add("corner_increment_relation", increments_ok, None);

        // Round trip against direct membership on the covered rows.
        let extent = (p.jmax * 10 + 2).min(10 * MAX_WINDOW);
        let mut round_trip = true;
        for j in -p.jmax..=p.jmax {
            for i in -extent..=extent {
                let direct = match hp.contains((i, j)) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                if cs.reconstructed_contains((i, j)) != Some(direct) {
                    round_trip = false;
                }
            }
        }
        checks.add("corner_membership_round_trip", round_trip, None);
        results["corner_sequence"] = json!({"jmax": p.jmax, "entries": entries});

        if p.jmax >= 1 {
            match cs.recover_vector() {
                Ok(rec) => {
                    results["recovery"] = json!({
                        "estimate": rec.estimate.to_string(),
                        "error_bound": rec.error_bound.to_string(),
                        "vector": [rec.vector.0.to_string(), rec.vector.1.to_string()],
                        "delta_sequence": rec.delta_sequence.iter()
                            .map(|d| json!(d.to_string())).collect::<Vec<_>>(),
                    });
                }
                Err(e) => {
                    results["recovery"] = json!({"degenerate": e.to_string()});
                }
            }
        }
    }
    Ok(results)
}

// --- psi --------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PsiParams {
    k: i64,
    l: i64,
    #[serde(default = "default_window15")]
    window: i64,
}

fn default_window15() -> i64 {
    15
}

fn run_psi(config: &RunConfig, checks: &mut Checks) -> Result<Value, CliError> {
    let p: PsiParams = params(config)?;
    require_bound("window", p.window, 1, MAX_WINDOW)?;
    let rot = LatticeRotation::for_vector(p.k, p.l)
        .map_err(|e| CliError::Config(e.to_string()))?;
    checks.add("coefficient_relation", rot.p * rot.k + rot.q * rot.l == -1, None);
    checks.add("determinant_plus_one", rot.det() == 1, None);

    let bottom = HalfPlane::bottom();
    let target = HalfPlane::rational(p.k, p.l).map_err(|e| CliError::Config(e.to_string()))?;
    let mut forward_ok = true;
    let mut inverse_ok = true;
    let mut identity_ok = true;
    for i in -p.window..=p.window {
        for j in -p.window..=p.window {
            let q = (i, j);
            if bottom.contains(q).unwrap() && !target.contains(rot.forward(q)).unwrap() {
                forward_ok = false;
            }
            if target.contains(q).unwrap() && !bottom.contains(rot.inverse(q)).unwrap() {
                inverse_ok = false;
            }
            if rot.inverse(rot.forward(q)) != q {
                identity_ok = false;
            }
        }
    }
    checks.add("forward_maps_into_target", forward_ok, None);
    checks.add("inverse_maps_into_bottom", inverse_ok, None);
    checks.add("inverse_of_forward_is_identity", identity_ok, None);

    let samples: Vec<Value> = [(-1, 0), (0, -1), (-3, 2), (5, -1)]
        .iter()
        .map(|&q| {
            let f = rot.forward(q);
            json!({"point": [q.0, q.1], "forward": [f.0, f.1]})
        })
        .collect();
    Ok(json!({
        "k": p.k,
        "l": p.l,
        "p": rot.p,
        "q": rot.q,
        "matrix": rot.matrix(),
        "determinant": rot.det(),
        "window": p.window,
        "samples": samples,
    }))
}

// --- diagram ------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagramParams {
    #[serde(default)]
    halfplane: Option<HalfPlane>,
    #[serde(default)]
    diagram: Option<Diagram>,
    #[serde(default = "default_window8")]
    window: i64,
    #[serde(default = "default_window8")]
    m_max: i64,
    #[serde(default = "default_window8")]
    n_max: i64,
}

fn default_window8() -> i64 {
    8
}

fn run_diagram(config: &RunConfig, checks: &mut Checks) -> Result<Value, CliError> {
    let p: DiagramParams = params(config)?;
    require_bound("window", p.window, 1, MAX_WINDOW)?;
    require_bound("m_max", p.m_max, 1, MAX_WINDOW)?;
    require_bound("n_max", p.n_max, 0, MAX_WINDOW)?;
    let (d, mask, expected_period) = match (&p.halfplane, &p.diagram) {
        (Some(hp), None) => {
            if !hp.contains_seed_corner() {
                return Err(CliError::Config(
                    "half-plane must contain (-1,0) and (0,-1); apply a transform first".into(),
                ));
            }
            let d = halfplane_to_diagram(hp, p.window)
                .map_err(|e| CliError::Run(e.to_string()))?;
            let mask = sheared_columns(hp, p.window).unwrap_or_default();
            let expected = match &hp.vector {
                wold2d::LatticeVector::Rational { v1, v2 } if *v1 < 0 && *v2 < 0 => {
                    Some((-v2, -v1))
                }
                _ => None,
            };
            // complement identity spot check, clipped to what membership
            // can certify
            let mut complement_ok = true;
            for i in -p.window..=p.window {
                for j in -(3 * p.window)..=(3 * p.window) {
                    let (Ok(in_d), Ok(in_hp)) = (d.contains((i, j)), hp.contains((i, j))) else {
                        continue;
                    };
                    complement_ok &= in_d == ((i, j) == (0, 0) || !in_hp);
                }
            }
            checks.add("complement_identity", complement_ok, None);
            (d, mask, expected)
        }
        (None, Some(d)) => (d.clone(), Vec::new(), None),
        _ => {
            return Err(CliError::Config(
                "provide exactly one of \"halfplane\" or \"diagram\"".into(),
            ))
        }
    };
    checks.add("boundary_monotone", true, None);

    let period = d.find_period_masked(p.m_max, p.n_max, &mask);
    let period_json = match &period {
        Some(desc) => {
            let tiles = desc.tiles(&d, &mask);
            checks.add("period_tiles_window", tiles, None);
            if let Some((em, en)) = expected_period {
                checks.add("period_matches_slope", (desc.m, desc.n) == (em, en), None);
            }
            json!({
                "m": desc.m,
                "n": desc.n,
                "period_strip": serde_json::to_value(&desc.period).unwrap(),
            })
        }
        None => Value::Null,
    };
    Ok(json!({
        "diagram": serde_json::to_value(&d).map_err(|e| CliError::Run(e.to_string()))?,
        "masked_columns": mask,
        "period": period_json,
    }))
}

// --- operator -------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum UnitarySpec {
    Cycle,
    CyclePhases { phases: Vec<f64> },
    Matrix { entries: Vec<Vec<[f64; 2]>> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProjectionSpec {
    Indices { indices: Vec<usize> },
    Matrix { entries: Vec<Vec<[f64; 2]>> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorParams {
    e_dim: usize,
    unitary: UnitarySpec,
    projection: ProjectionSpec,
    #[serde(default = "default_depth")]
    depth: usize,
    #[serde(default = "default_split_window")]
    window: i64,
    #[serde(default = "default_compat")]
    compat_max: usize,
}

fn default_depth() -> usize {
    4
}
fn default_split_window() -> i64 {
    2
}
fn default_compat() -> usize {
    2
}

fn matrix_from_entries(entries: &[Vec<[f64; 2]>]) -> Result<CMat, CliError> {
    let rows = entries.len();
    if rows == 0 || entries.iter().any(|r| r.len() != rows) {
        return Err(CliError::Config("matrix must be square".into()));
    }
    Ok(CMat::from_fn(rows, rows, |r, c| {
        Complex64::new(entries[r][c][0], entries[r][c][1])
    }))
}

pub fn matrix_json(m: &CMat) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|r| {
            let cols: Vec<Value> = (0..m.ncols())
                .map(|c| json!([m[(r, c)].re, m[(r, c)].im]))
                .collect();
            Value::Array(cols)
        })
        .collect();
    Value::Array(rows)
}

fn run_operator(config: &RunConfig, checks: &mut Checks) -> Result<Value, CliError> {
    let p: OperatorParams = params(config)?;
    if p.e_dim == 0 || p.e_dim > MAX_EDIM {
        return Err(CliError::Config(format!(
            "e_dim must lie in [1, {MAX_EDIM}]"
        )));
    }
    if p.depth < 2 || p.depth > MAX_DEPTH {
        return Err(CliError::Config(format!(
            "depth must lie in [2, {MAX_DEPTH}]"
        )));
    }
    require_bound("window", p.window, 0, 8)?;
    let unitary = match &p.unitary {
        UnitarySpec::Cycle => unitary_cycle(p.e_dim),
        UnitarySpec::CyclePhases { phases } => unitary_cycle_with_phases(p.e_dim, phases),
        UnitarySpec::Matrix { entries } => {
            let m = matrix_from_entries(entries)?;
            if m.nrows() != p.e_dim {
                return Err(CliError::Config("unitary size differs from e_dim".into()));
            }
            m
        }
    };
    let projection = match &p.projection {
        ProjectionSpec::Indices { indices } => {
            if indices.iter().any(|&i| i >= p.e_dim) {
                return Err(CliError::Config("projection index out of range".into()));
            }
            projection_on_indices(p.e_dim, indices)
        }
        ProjectionSpec::Matrix { entries } => {
            let m = matrix_from_entries(entries)?;
            if m.nrows() != p.e_dim {
                return Err(CliError::Config("projection size differs from e_dim".into()));
            }
            m
        }
    };
    let data = BclData::new(unitary.clone(), projection.clone(), p.depth)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let model = build_bcl(data).map_err(|e| CliError::Run(e.to_string()))?;
    let interior = model.pair.interior_report();
    checks.add(
        "interior_isometry_and_commutation",
        interior.max() <= wold2d::operators::TOL_CONSTRUCTION,
        Some(interior.max()),
    );

    let wandering_range = (2 * p.window + 1).max(p.depth as i64 - 1) as usize;
    let wandering = check_wandering(&unitary, &projection, wandering_range);
    let wandering_max = wandering.residuals.iter().cloned().fold(0.0f64, f64::max);
    checks.add("wandering", wandering.pass, Some(wandering_max));

    let compat = check_compatibility(&model.pair, p.compat_max, p.compat_max);
    checks.add("compatibility", compat.pass, Some(compat.max_violation));

    let kernel = ker_v1_star(&model).map_err(|e| CliError::Run(e.to_string()))?;

    let split_json = match wold_split(&model, p.window) {
        Ok(split) => {
            checks.add(
                "cells_pairwise_orthogonal",
                split.report.gram_offdiag_max <= wold2d::operators::TOL_DERIVED,
                Some(split.report.gram_offdiag_max),
            );
            checks.add(
                "first_action_unitary_on_complement",
                split.report.v1_norm_residual <= wold2d::operators::TOL_DERIVED
                    && split.report.v1_coisometry_residual <= wold2d::operators::TOL_DERIVED,
                Some(
                    split
                        .report
                        .v1_norm_residual
                        .max(split.report.v1_coisometry_residual),
                ),
            );
            checks.add(
                "second_action_pure_on_complement",
                split.report.v2_purity_residual <= wold2d::operators::TOL_DERIVED,
                Some(split.report.v2_purity_residual),
            );
            json!({
                "cell_count": split.report.cell_count,
                "nonunitary_dim": split.nonunitary.dim(),
                "unitary_shift_dim": split.unitary_shift.dim(),
                "gram_offdiag_max": split.report.gram_offdiag_max,
                "invariance_residual": split.report.invariance_residual,
            })
        }
        Err(OperatorError::OrderingHypothesis { max_offdiag }) => {
            checks.add("cells_pairwise_orthogonal", false, Some(max_offdiag));
            json!({"ordering_hypothesis_violation": max_offdiag})
        }
        Err(e) => return Err(CliError::Run(e.to_string())),
    };

    Ok(json!({
        "e_dim": p.e_dim,
        "depth": p.depth,
        "window": p.window,
        "kernel_dim": kernel.dim(),
        "kernel_basis": matrix_json(&kernel.columns),
        "wandering_residuals": wandering.residuals,
        "compatibility": {
            "max_violation": compat.max_violation,
            "pass": compat.pass,
        },
        "split": split_json,
    }))
}

// --- field -----------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    #[serde(default = "default_sim_window")]
    window: i64,
    #[serde(default)]
    coeffs: Option<Vec<Tap>>,
    #[serde(default)]
    noise_variance: Option<f64>,
}

fn default_sim_window() -> i64 {
    8
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldParams {
    #[serde(default)]
    cov: Option<CovarianceModel>,
    #[serde(default)]
    evanescent: Option<EvanescentKind>,
    past: HalfPlane,
    #[serde(rename = "R", default = "default_radius")]
    radius: i64,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(default)]
    support_window: Option<i64>,
    #[serde(default)]
    expect_label: Option<String>,
    #[serde(default)]
    simulate: Option<SimulateParams>,
}

fn default_radius() -> i64 {
    12
}
fn default_steps() -> usize {
    4
}

fn run_field(
    config: &RunConfig,
    checks: &mut Checks,
    seed: u64,
) -> Result<(Value, Option<String>), CliError> {
    let p: FieldParams = params(config)?;
    require_bound("R", p.radius, 1, MAX_RADIUS)?;
    require_bound("steps", p.steps as i64, 1, 16)?;
    if let Some(w) = p.support_window {
        require_bound("support_window", w, 1, MAX_RADIUS)?;
    }
    let cov = match (&p.cov, &p.evanescent) {
        (Some(c), None) => c.clone(),
        (None, Some(kind)) => evanescent_model(kind).map_err(|e| CliError::Config(e.to_string()))?,
        _ => {
            return Err(CliError::Config(
                "provide exactly one of \"cov\" or \"evanescent\"".into(),
            ))
        }
    };

    let past = PastSpec::at_origin(p.past.clone(), p.radius).map_err(field_err)?;
    let inn = innovate(&cov, &past).map_err(field_err)?;
    let opts = ClassifyOptions {
        steps: p.steps,
        ma_support_window: p.support_window,
        epsilon: wold2d::field::CLASSIFY_EPS,
    };
    let classification = classify_with(&cov, &p.past, p.radius, opts).map_err(field_err)?;
    let e = classification.energies;
    checks.add(
        "energies_nonnegative",
        e.ma >= -1e-8 * e.total && e.det >= -1e-8 * e.total && e.evan >= -1e-8 * e.total,
        None,
    );
    checks.add(
        "energies_add_to_total",
        ((e.ma + e.det + e.evan) - e.total).abs() <= 1e-6 * e.total,
        Some(((e.ma + e.det + e.evan) - e.total).abs()),
    );
    let remote = remote_past_energy(&cov, &p.past, p.radius, p.steps).map_err(field_err)?;
    let monotone = remote
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-8 * e.total.max(1.0));
    checks.add("remote_energy_nonincreasing", monotone, None);

    let label = format!("{:?}", classification.label);
    if let Some(expect) = &p.expect_label {
        checks.add("label_matches_expected", &label == expect, None);
    }

    let ma_json: Vec<Value> = match ma_coefficients(
        &cov,
        &past,
        p.support_window.unwrap_or_else(|| (p.radius / 2).clamp(1, 8)),
    ) {
        Ok(map) => map
            .iter()
            .map(|((k, l), a)| json!({"k": k, "l": l, "re": a.re, "im": a.im}))
            .collect(),
        Err(FieldError::TrivialInnovation) => Vec::new(),
        Err(e) => return Err(field_err(e)),
    };

    let mut csv = None;
    if let Some(sim) = &p.simulate {
        require_bound("simulate.window", sim.window, 1, MAX_WINDOW)?;
        let (taps, noise) = match (&sim.coeffs, &cov) {
            (Some(t), _) => (
                t.clone(),
                sim.noise_variance.unwrap_or(1.0),
            ),
            (None, CovarianceModel::MovingAverage {
                coeffs,
                noise_variance,
            }) => (coeffs.clone(), *noise_variance),
            _ => {
                return Err(CliError::Config(
                    "simulation needs moving-average taps (cov kind MovingAverage or simulate.coeffs)"
                        .into(),
                ))
            }
        };
        let grid =
            simulate_ma(&taps, noise, &p.past, seed, sim.window).map_err(field_err)?;
        csv = Some(grid.to_csv());
    }

    let results = json!({
        "past": serde_json::to_value(&p.past).unwrap(),
        "R": p.radius,
        "sigma2": classification.diagnostics.sigma2,
        "innovation_gram_cond": inn.residual_gram_cond,
        "ma": ma_json,
        "energies": {
            "total": e.total,
            "ma": e.ma,
            "det": e.det,
            "evan": e.evan,
        },
        "label": label,
        "predicted_evanescent_pair_type": format!("{:?}", classification.predicted_pair_type),
        "remote_energies": remote,
        "steps": p.steps,
    });
    Ok((results, csv))
}
