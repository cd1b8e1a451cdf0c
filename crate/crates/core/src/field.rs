//! Covariance-domain prediction for weak-stationary planar random fields.
//!
//! Everything here works through the covariance function `γ` alone: finite
//! Gram systems over truncated half-plane pasts yield innovations,
//! moving-average coefficients, remote-past energies and the three-part
//! classification (purely nondeterministic / evanescent / deterministic).
//! Monte Carlo sampling exists only to validate moving-average covariances;
//! no statistical noise enters the analysis path.

use crate::halfplane::{HalfPlane, HalfPlaneError, LatticePoint, LatticeVector};
use crate::linalg::{cr, hermitian_min_eig, hermitian_min_norm_solve, CMat, CVec};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

/// Relative slack allowed on Gram positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-8;
/// Relative eigenvalue cutoff of the minimum-norm pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;
/// Relative threshold separating the classification labels.
pub const CLASSIFY_EPS: f64 = 1e-6;
/// Innovations below this relative size count as trivial.
pub const TRIVIAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("truncated past is empty")]
    EmptyPast,
    #[error("covariance is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    InvalidCovariance { min_eig: f64 },
    #[error("innovation is trivial; the field has no moving-average part")]
    TrivialInnovation,
    #[error("causality violation: {0}")]
    Causality(String),
    #[error("window too small for a consistent energy split; retry with R = {suggested_r}")]
    WindowTooSmall { suggested_r: i64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    HalfPlane(#[from] HalfPlaneError),
}

type Result<T> = std::result::Result<T, FieldError>;

/// One complex filter tap or covariance table entry at a lattice offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub k: i64,
    pub l: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Tap {
    pub fn new(k: i64, l: i64, value: Complex64) -> Self {
        Tap {
            k,
            l,
            re: value.re,
            im: value.im,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn at(&self) -> LatticePoint {
        (self.k, self.l)
    }
}

/// A weak-stationary covariance function given in closed form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CovarianceModel {
    /// `γ(p) = variance · [p = 0]`.
    WhiteNoise { variance: f64 },
    /// `γ(p,q) = variance · [c·p + d·q = 0]`: the field `α_{cs+dt}` built
    /// from one orthonormal sequence, constant along the line direction.
    LineField { c: i64, d: i64, variance: f64 },
    /// Filtered white noise `X = Σ a_u ξ_{·+u}`.
    MovingAverage {
        coeffs: Vec<Tap>,
        noise_variance: f64,
    },
    /// Explicit covariance values on a finite lag set (hermitian closure
    /// is applied; unlisted lags evaluate to zero).
    Table { entries: Vec<Tap> },
    /// Independent sum of component fields.
    Sum { components: Vec<CovarianceModel> },
    /// A finitely filtered version of another covariance:
    /// `X = Σ t_u B_{·+u}` for a base field `B`.
    Filtered {
        base: Box<CovarianceModel>,
        taps: Vec<Tap>,
    },
}

impl CovarianceModel {
    pub fn evaluator(&self) -> Result<CovEval> {
        CovEval::new(self)
    }
}

/// Precompiled covariance evaluator.
#[derive(Debug, Clone)]
pub enum CovEval {
    White(f64),
    Line { c: i64, d: i64, variance: f64 },
    /// Finite-support autocovariance (moving averages, tables).
    Map(HashMap<LatticePoint, Complex64>),
    Sum(Vec<CovEval>),
    Filtered {
        base: Box<CovEval>,
        /// Tap autocorrelation `A(d) = Σ_{u-w=d} t_u conj(t_w)`.
        autocorr: Vec<(LatticePoint, Complex64)>,
    },
}

fn tap_autocorrelation(taps: &[Tap], scale: f64) -> HashMap<LatticePoint, Complex64> {
    let mut map: HashMap<LatticePoint, Complex64> = HashMap::new();
    for u in taps {
        for w in taps {
            let d = (u.k - w.k, u.l - w.l);
            *map.entry(d).or_insert_with(Complex64::zero) +=
                u.value() * w.value().conj() * cr(scale);
        }
    }
    map
}

impl CovEval {
    fn new(model: &CovarianceModel) -> Result<Self> {
        Ok(match model {
            CovarianceModel::WhiteNoise { variance } => {
                if *variance < 0.0 {
                    return Err(FieldError::Domain("negative variance".into()));
                }
                CovEval::White(*variance)
            }
            CovarianceModel::LineField { c, d, variance } => {
                if *variance < 0.0 {
                    return Err(FieldError::Domain("negative variance".into()));
                }
                CovEval::Line {
                    c: *c,
                    d: *d,
                    variance: *variance,
                }
            }
            CovarianceModel::MovingAverage {
                coeffs,
                noise_variance,
            } => {
                if *noise_variance < 0.0 {
                    return Err(FieldError::Domain("negative noise variance".into()));
                }
                check_duplicate_taps(coeffs)?;
                CovEval::Map(tap_autocorrelation(coeffs, *noise_variance))
            }
            CovarianceModel::Table { entries } => {
                let mut map: HashMap<LatticePoint, Complex64> = HashMap::new();
                for e in entries {
                    let at = e.at();
                    let neg = (-at.0, -at.1);
                    if let Some(prev) = map.get(&at).copied() {
                        if (prev - e.value()).norm() > 1e-12 {
                            return Err(FieldError::Domain(format!(
                                "conflicting table entries at {at:?}"
                            )));
                        }
                    }
                    if let Some(prev) = map.get(&neg) {
                        if (*prev - e.value().conj()).norm() > 1e-12 {
                            return Err(FieldError::Domain(format!(
                                "table entries at {at:?} violate hermitian symmetry"
                            )));
                        }
                    }
                    map.insert(at, e.value());
                    map.insert(neg, e.value().conj());
                }
                CovEval::Map(map)
            }
            CovarianceModel::Sum { components } => {
                CovEval::Sum(components.iter().map(CovEval::new).collect::<Result<_>>()?)
            }
            CovarianceModel::Filtered { base, taps } => {
                check_duplicate_taps(taps)?;
                CovEval::Filtered {
                    base: Box::new(CovEval::new(base)?),
                    autocorr: tap_autocorrelation(taps, 1.0).into_iter().collect(),
                }
            }
        })
    }

    pub fn gamma(&self, p: LatticePoint) -> Complex64 {
        match self {
            CovEval::White(v) => {
                if p == (0, 0) {
                    cr(*v)
                } else {
                    Complex64::zero()
                }
            }
            CovEval::Line { c, d, variance } => {
                if c * p.0 + d * p.1 == 0 {
                    cr(*variance)
                } else {
                    Complex64::zero()
                }
            }
            CovEval::Map(map) => map.get(&p).copied().unwrap_or_else(Complex64::zero),
            CovEval::Sum(parts) => parts.iter().map(|e| e.gamma(p)).sum(),
            CovEval::Filtered { base, autocorr } => autocorr
                .iter()
                .map(|(d, a)| *a * base.gamma((p.0 + d.0, p.1 + d.1)))
                .sum(),
        }
    }

    pub fn gamma00(&self) -> f64 {
        self.gamma((0, 0)).re
    }
}

fn check_duplicate_taps(taps: &[Tap]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for t in taps {
        if !seen.insert(t.at()) {
            return Err(FieldError::Domain(format!("duplicate tap at {:?}", t.at())));
        }
    }
    Ok(())
}

/// A truncated past: the half-plane translated to `base`, clipped to the
/// square box of the given radius around `base`.
#[derive(Debug, Clone)]
pub struct PastSpec {
    pub hp: HalfPlane,
    pub radius: i64,
    pub base: LatticePoint,
}

impl PastSpec {
    pub fn new(hp: HalfPlane, radius: i64, base: LatticePoint) -> Result<Self> {
        if radius < 1 {
            return Err(FieldError::Domain("radius must be at least 1".into()));
        }
        Ok(PastSpec { hp, radius, base })
    }

    pub fn at_origin(hp: HalfPlane, radius: i64) -> Result<Self> {
        PastSpec::new(hp, radius, (0, 0))
    }

    /// Offsets `u ∈ S` with `|u|_∞ ≤ radius`, in lexicographic order.
    pub fn offsets(&self) -> Result<Vec<LatticePoint>> {
        let r = self.radius;
        let mut out = Vec::new();
        for i in -r..=r {
            for j in -r..=r {
                if self.hp.contains((i, j))? {
                    out.push((i, j));
                }
            }
        }
        if out.is_empty() {
            return Err(FieldError::EmptyPast);
        }
        Ok(out)
    }

    /// Absolute past points `base + u`.
    pub fn points(&self) -> Result<Vec<LatticePoint>> {
        Ok(self
            .offsets()?
            .into_iter()
            .map(|u| (self.base.0 + u.0, self.base.1 + u.1))
            .collect())
    }
}

/// Gram matrix `G[a][b] = γ(points[a] - points[b])`, verified hermitian
/// positive semidefinite up to the tolerance.
pub fn gram(cov: &CovarianceModel, points: &[LatticePoint]) -> Result<CMat> {
    let eval = cov.evaluator()?;
    let g = gram_matrix(&eval, points);
    let min_eig = hermitian_min_eig(&g);
    if min_eig < -PSD_TOL * eval.gamma00().max(1e-300) {
        return Err(FieldError::InvalidCovariance { min_eig });
    }
    Ok(g)
}

fn gram_matrix(eval: &CovEval, points: &[LatticePoint]) -> CMat {
    let n = points.len();
    CMat::from_fn(n, n, |a, b| {
        eval.gamma((points[a].0 - points[b].0, points[a].1 - points[b].1))
    })
}

/// Least-squares innovation of the field value at `base` against a
/// truncated past.
#[derive(Debug, Clone)]
pub struct InnovationResult {
    /// Attained minimum of `‖X_base - Σ c_u X_{base+u}‖²`.
    pub sigma2: f64,
    /// Predictor coefficients keyed by past offset `u`.
    pub coeffs: BTreeMap<LatticePoint, Complex64>,
    /// Conditioning of the retained Gram eigenspace.
    pub residual_gram_cond: f64,
}

/// Solve the normal equations over an explicit set of past points for the
/// value at `base`. Exposed so that analyses may match point sets across a
/// lattice rotation; [`innovate`] supplies the box-truncated set.
pub fn innovate_over_points(
    cov: &CovarianceModel,
    base: LatticePoint,
    points: &[LatticePoint],
) -> Result<InnovationResult> {
    let eval = cov.evaluator()?;
    innovate_impl(&eval, base, points)
}

fn innovate_impl(
    eval: &CovEval,
    base: LatticePoint,
    points: &[LatticePoint],
) -> Result<InnovationResult> {
    if points.is_empty() {
        return Err(FieldError::EmptyPast);
    }
    let g = gram_matrix(eval, points);
    let gamma00 = eval.gamma00();
    let rhs = CVec::from_fn(points.len(), |a, _| {
        eval.gamma((points[a].0 - base.0, points[a].1 - base.1))
    });
    let solve = hermitian_min_norm_solve(&g, &rhs, PINV_CUTOFF);
    if solve.eig_min < -PSD_TOL * gamma00.max(1e-300) {
        return Err(FieldError::InvalidCovariance {
            min_eig: solve.eig_min,
        });
    }
    let predicted = rhs.dotc(&solve.solution).re;
    let sigma2 = gamma00 - predicted;
    let mut coeffs = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        coeffs.insert((p.0 - base.0, p.1 - base.1), solve.solution[i]);
    }
    Ok(InnovationResult {
        sigma2,
        coeffs,
        residual_gram_cond: solve.cond,
    })
}

/// Innovation of `X_base` against the box-truncated half-plane past.
pub fn innovate(cov: &CovarianceModel, past: &PastSpec) -> Result<InnovationResult> {
    let eval = cov.evaluator()?;
    let points = past.points()?;
    innovate_impl(&eval, past.base, &points)
}

/// Moving-average coefficients `a_u = ⟨X_0, I_u⟩ / ⟨I_0, I_0⟩` for offsets
/// `u` of the past (plus the origin) inside the support window. Each `I_u`
/// is the residual of `X_u` against its own truncated past at the same
/// radius; inner products expand bilinearly through `γ`.
pub fn ma_coefficients(
    cov: &CovarianceModel,
    past: &PastSpec,
    support_window: i64,
) -> Result<BTreeMap<LatticePoint, Complex64>> {
    let eval = cov.evaluator()?;
    let inn = innovate(cov, past)?;
    ma_from_innovation(&eval, &past.hp, &inn, support_window)
}

fn ma_from_innovation(
    eval: &CovEval,
    hp: &HalfPlane,
    inn: &InnovationResult,
    support_window: i64,
) -> Result<BTreeMap<LatticePoint, Complex64>> {
    let gamma00 = eval.gamma00();
    if inn.sigma2 <= TRIVIAL_TOL * gamma00 {
        return Err(FieldError::TrivialInnovation);
    }
    let mut out = BTreeMap::new();
    for k in -support_window..=support_window {
        for l in -support_window..=support_window {
            if (k, l) == (0, 0) {
                out.insert((0, 0), cr(1.0));
                continue;
            }
            if !hp.contains((k, l))? {
                continue;
            }
            // <X_0, I_(k,l)> expanded through gamma.
            let mut ip = eval.gamma((k, l));
            for (u, c) in &inn.coeffs {
                ip -= c.conj() * eval.gamma((k + u.0, l + u.1));
            }
            out.insert((k, l), ip / cr(inn.sigma2));
        }
    }
    Ok(out)
}

/// Primitive integer recession direction of a half-plane normal.
fn recession_direction(vector: &LatticeVector) -> Result<LatticePoint> {
    match vector {
        LatticeVector::Rational { v1, v2 } => Ok((*v1, *v2)),
        LatticeVector::IrrationalApprox { v1, v2, .. } => {
            // Clear denominators and reduce: the primitive vector of the
            // certified approximant.
            let n1 = v1.numer() * v2.denom();
            let n2 = v2.numer() * v1.denom();
            let g: BigInt = n1.gcd(&n2);
            if g.is_zero() {
                return Err(FieldError::Domain("zero approximant".into()));
            }
            let d1 = i64::try_from(&(&n1 / &g))
                .map_err(|_| FieldError::Domain("recession direction overflow".into()))?;
            let d2 = i64::try_from(&(&n2 / &g))
                .map_err(|_| FieldError::Domain("recession direction overflow".into()))?;
            Ok((d1, d2))
        }
    }
}

/// Energy `‖P_{past(base_s)} X_0‖²` along receding base points
/// `base_s = s·d`, where `d` is the primitive recession direction of the
/// half-plane normal. The last value proxies the deterministic energy.
pub fn remote_past_energy(
    cov: &CovarianceModel,
    hp: &HalfPlane,
    radius: i64,
    steps: usize,
) -> Result<Vec<f64>> {
    if steps < 1 {
        return Err(FieldError::Domain("steps must be at least 1".into()));
    }
    let eval = cov.evaluator()?;
    let dir = recession_direction(&hp.vector)?;
    let mut out = Vec::with_capacity(steps);
    for s in 1..=steps as i64 {
        let base = (s * dir.0, s * dir.1);
        let past = PastSpec::new(hp.clone(), radius, base)?;
        let points = past.points()?;
        let g = gram_matrix(&eval, &points);
        let rhs = CVec::from_fn(points.len(), |a, _| eval.gamma(points[a]));
        let solve = hermitian_min_norm_solve(&g, &rhs, PINV_CUTOFF);
        out.push(rhs.dotc(&solve.solution).re.max(0.0));
    }
    Ok(out)
}

/// Classification label of the three-part split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    PurelyNondeterministic,
    Evanescent,
    Deterministic,
    Mixed,
}

/// Model family predicted for the evanescent summand, from the slope of
/// the half-plane normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairTypePrediction {
    /// Axis-aligned past: one unitary, one unilateral shift.
    UnitaryShift,
    /// Rational slope: generalized powers over a periodic diagram.
    GeneralizedPowers,
    /// Irrational slope: continuously given, no finite structural model.
    ContinuouslyGiven,
}

/// Energy split of the field at the analysis radius.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Energies {
    pub total: f64,
    pub ma: f64,
    pub det: f64,
    pub evan: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sigma2: f64,
    pub remote_energies: Vec<f64>,
    pub steps: usize,
    pub ma_support_window: i64,
    pub epsilon: f64,
    /// Energy splits of the independent components of a sum model.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_component: Vec<Energies>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    pub energies: Energies,
    pub predicted_pair_type: PairTypePrediction,
    pub diagnostics: Diagnostics,
}

/// Tunables of [`classify`]; the defaults match the documented analysis.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub steps: usize,
    pub ma_support_window: Option<i64>,
    pub epsilon: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            steps: 4,
            ma_support_window: None,
            epsilon: CLASSIFY_EPS,
        }
    }
}

pub fn classify(cov: &CovarianceModel, hp: &HalfPlane, radius: i64) -> Result<Classification> {
    classify_with(cov, hp, radius, ClassifyOptions::default())
}

/// Three-part energy split and label. Sum models are analyzed component
/// by component and their energies added: independent summands decompose
/// orthogonally, so the per-component split is exact where a joint
/// truncated solve would only converge with the radius.
pub fn classify_with(
    cov: &CovarianceModel,
    hp: &HalfPlane,
    radius: i64,
    opts: ClassifyOptions,
) -> Result<Classification> {
    let parts = split_components(cov, hp, radius, opts)?;
    let total: f64 = parts.iter().map(|p| p.energies.total).sum();
    if total <= 0.0 {
        return Err(FieldError::Domain("zero total variance".into()));
    }
    let ma: f64 = parts.iter().map(|p| p.energies.ma).sum();
    let det: f64 = parts.iter().map(|p| p.energies.det).sum();
    let evan = total - ma - det;
    let sigma2: f64 = parts.iter().map(|p| p.sigma2).sum();
    let eps = opts.epsilon;
    if ma < -PSD_TOL * total || det < -PSD_TOL * total || evan < -PSD_TOL * total {
        return Err(FieldError::WindowTooSmall {
            suggested_r: radius * 2,
        });
    }
    let label = if det > (1.0 - eps) * total {
        Label::Deterministic
    } else if sigma2 <= eps * total && det <= eps * total {
        Label::Evanescent
    } else if ma > (1.0 - eps) * total {
        Label::PurelyNondeterministic
    } else {
        Label::Mixed
    };
    let predicted_pair_type = match &hp.vector {
        LatticeVector::Rational { v1, v2 } => {
            if *v1 == 0 || *v2 == 0 {
                PairTypePrediction::UnitaryShift
            } else {
                PairTypePrediction::GeneralizedPowers
            }
        }
        LatticeVector::IrrationalApprox { .. } => PairTypePrediction::ContinuouslyGiven,
    };
    let remote = parts
        .iter()
        .map(|p| p.remote.clone())
        .reduce(|a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect())
        .unwrap_or_default();
    let per_component = if parts.len() > 1 {
        parts.iter().map(|p| p.energies).collect()
    } else {
        Vec::new()
    };
    Ok(Classification {
        label,
        energies: Energies {
            total,
            ma,
            det,
            evan,
        },
        predicted_pair_type,
        diagnostics: Diagnostics {
            sigma2,
            remote_energies: remote,
            steps: opts.steps,
            ma_support_window: effective_ma_window(radius, opts),
            epsilon: eps,
            per_component,
        },
    })
}

struct ComponentSplit {
    energies: Energies,
    sigma2: f64,
    remote: Vec<f64>,
}

fn effective_ma_window(radius: i64, opts: ClassifyOptions) -> i64 {
    opts.ma_support_window.unwrap_or_else(|| (radius / 2).clamp(1, 8))
}

fn split_components(
    cov: &CovarianceModel,
    hp: &HalfPlane,
    radius: i64,
    opts: ClassifyOptions,
) -> Result<Vec<ComponentSplit>> {
    if let CovarianceModel::Sum { components } = cov {
        let mut out = Vec::new();
        for c in components {
            out.extend(split_components(c, hp, radius, opts)?);
        }
        return Ok(out);
    }
    let eval = cov.evaluator()?;
    let total = eval.gamma00();
    if total <= 0.0 {
        // A zero component contributes nothing.
        return Ok(vec![ComponentSplit {
            energies: Energies {
                total: 0.0,
                ma: 0.0,
                det: 0.0,
                evan: 0.0,
            },
            sigma2: 0.0,
            remote: vec![0.0; opts.steps],
        }]);
    }
    let past = PastSpec::at_origin(hp.clone(), radius)?;
    let inn = innovate(cov, &past)?;
    let sigma2 = inn.sigma2.max(0.0);
    let ma = if sigma2 > TRIVIAL_TOL * total {
        let w = effective_ma_window(radius, opts);
        let coeffs = ma_from_innovation(&eval, hp, &inn, w)?;
        sigma2 * coeffs.values().map(|a| a.norm_sqr()).sum::<f64>()
    } else {
        0.0
    };
    let remote = remote_past_energy(cov, hp, radius, opts.steps)?;
    let det = *remote.last().expect("steps >= 1");
    let evan = total - ma - det;
    Ok(vec![ComponentSplit {
        energies: Energies {
            total,
            ma,
            det,
            evan,
        },
        sigma2,
        remote,
    }])
}

// --- evanescent models -------------------------------------------------------

/// Construction recipes for evanescent covariances: a one-dimensional
/// driving field that is white across lines and constant along one lattice
/// direction, filtered by finitely many taps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EvanescentKind {
    /// Deterministic along `(1,0)`; taps supported in
    /// `0 ≤ s ≤ copies-1`, `t ≥ 0`.
    HorizontalL { taps: Vec<Tap>, copies: i64 },
    /// Deterministic along the period direction `(-l, k)` of the rational
    /// half-plane `S_(k,l)`; taps supported in the complement strip
    /// `{(s,t) ∈ -S ∪ {0} : 0 ≤ s ≤ -l·copies - 1}`.
    Rational {
        k: i64,
        l: i64,
        taps: Vec<Tap>,
        copies: i64,
    },
}

/// Covariance of `E_m = Σ β_u F_{m+u}` for the driving field prescribed
/// by the kind. Classifying the result against the matching past yields
/// the evanescent label.
pub fn evanescent_model(kind: &EvanescentKind) -> Result<CovarianceModel> {
    match kind {
        EvanescentKind::HorizontalL { taps, copies } => {
            if *copies < 1 {
                return Err(FieldError::Domain("copies must be at least 1".into()));
            }
            check_duplicate_taps(taps)?;
            if taps.is_empty() {
                return Err(FieldError::Domain("at least one tap required".into()));
            }
            for t in taps {
                if t.k < 0 || t.k >= *copies || t.l < 0 {
                    return Err(FieldError::Domain(format!(
                        "tap {:?} outside the horizontal support strip",
                        t.at()
                    )));
                }
            }
            Ok(CovarianceModel::Filtered {
                base: Box::new(CovarianceModel::LineField {
                    c: 0,
                    d: 1,
                    variance: 1.0,
                }),
                taps: taps.clone(),
            })
        }
        EvanescentKind::Rational {
            k,
            l,
            taps,
            copies,
        } => {
            if *k >= 0 || *l >= 0 {
                return Err(FieldError::Domain(
                    "rational kind requires negative components".into(),
                ));
            }
            if *copies < 1 {
                return Err(FieldError::Domain("copies must be at least 1".into()));
            }
            check_duplicate_taps(taps)?;
            if taps.is_empty() {
                return Err(FieldError::Domain("at least one tap required".into()));
            }
            let hp = HalfPlane::rational(*k, *l).map_err(FieldError::HalfPlane)?;
            let s_max = -l * copies - 1;
            for t in taps {
                let inside_complement = t.at() == (0, 0) || !hp.contains(t.at())?;
                if !inside_complement || t.k < 0 || t.k > s_max {
                    return Err(FieldError::Domain(format!(
                        "tap {:?} outside the complement strip",
                        t.at()
                    )));
                }
            }
            Ok(CovarianceModel::Filtered {
                base: Box::new(CovarianceModel::LineField {
                    c: *k,
                    d: *l,
                    variance: 1.0,
                }),
                taps: taps.clone(),
            })
        }
    }
}

// --- simulation ---------------------------------------------------------------

/// A complex sample grid over the square window `|s|,|t| ≤ window`.
/// Rows are indexed by `t` ascending, columns by `s` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub window: i64,
    pub values: Vec<Vec<Complex64>>,
}

impl SampleGrid {
    pub fn value(&self, s: i64, t: i64) -> Complex64 {
        self.values[(t + self.window) as usize][(s + self.window) as usize]
    }

    /// Biased sample autocovariance over the grid.
    pub fn sample_covariance(&self, lag: LatticePoint) -> Complex64 {
        let w = self.window;
        let mut acc = Complex64::zero();
        let mut count = 0usize;
        for t in -w..=w {
            for s in -w..=w {
                let (s2, t2) = (s + lag.0, t + lag.1);
                if s2.abs() > w || t2.abs() > w {
                    continue;
                }
                acc += self.value(s, t) * self.value(s2, t2).conj();
                count += 1;
            }
        }
        if count == 0 {
            Complex64::zero()
        } else {
            acc / cr(count as f64)
        }
    }

    pub fn cell_count(&self) -> usize {
        let side = (2 * self.window + 1) as usize;
        side * side
    }

    /// CSV rendering: one row per `t`, complex entries as `re+imi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let fields: Vec<String> = row.iter().map(|z| format_complex(*z)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<SampleGrid> {
        let mut values = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<Complex64>> = line.split(',').map(parse_complex).collect();
            values.push(row?);
        }
        let rows = values.len();
        if rows == 0 || rows % 2 == 0 {
            return Err(FieldError::Domain("grid must have odd size".into()));
        }
        if values.iter().any(|r| r.len() != rows) {
            return Err(FieldError::Domain("grid must be square".into()));
        }
        Ok(SampleGrid {
            window: (rows as i64 - 1) / 2,
            values,
        })
    }
}

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s = text.trim();
    let body = s
        .strip_suffix('i')
        .ok_or_else(|| FieldError::Domain(format!("complex value {s:?} must end in 'i'")))?;
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let mut split = None;
    for idx in (1..bytes.len()).rev() {
        let c = bytes[idx] as char;
        if (c == '+' || c == '-') && !matches!(bytes[idx - 1] as char, 'e' | 'E') {
            split = Some(idx);
            break;
        }
    }
    let split = split.ok_or_else(|| FieldError::Domain(format!("malformed complex {s:?}")))?;
    let re: f64 = body[..split]
        .parse()
        .map_err(|_| FieldError::Domain(format!("bad real part in {s:?}")))?;
    let im: f64 = body[split..]
        .parse()
        .map_err(|_| FieldError::Domain(format!("bad imaginary part in {s:?}")))?;
    Ok(Complex64::new(re, im))
}

/// Draw a moving-average sample: i.i.d. complex Gaussian innovations on an
/// enlarged window, convolved with the taps. Deterministic per seed.
pub fn simulate_ma(
    coeffs: &[Tap],
    noise_variance: f64,
    hp: &HalfPlane,
    seed: u64,
    window: i64,
) -> Result<SampleGrid> {
    if noise_variance < 0.0 {
        return Err(FieldError::Domain("negative noise variance".into()));
    }
    check_duplicate_taps(coeffs)?;
    let mut extent = 0i64;
    for t in coeffs {
        if t.at() != (0, 0) && !hp.contains(t.at())? {
            return Err(FieldError::Causality(format!(
                "tap {:?} lies outside the past",
                t.at()
            )));
        }
        extent = extent.max(t.k.abs()).max(t.l.abs());
    }
    let big = window + extent;
    let side = (2 * big + 1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (noise_variance / 2.0).sqrt();
    let mut noise = vec![vec![Complex64::zero(); side]; side];
    for row in noise.iter_mut() {
        for cell in row.iter_mut() {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            *cell = Complex64::new(re * scale, im * scale);
        }
    }
    let at = |s: i64, t: i64| noise[(t + big) as usize][(s + big) as usize];
    let mut values = Vec::with_capacity((2 * window + 1) as usize);
    for t in -window..=window {
        let mut row = Vec::with_capacity((2 * window + 1) as usize);
        for s in -window..=window {
            let mut acc = Complex64::zero();
            for tap in coeffs {
                acc += tap.value() * at(s + tap.k, t + tap.l);
            }
            row.push(acc);
        }
        values.push(row);
    }
    Ok(SampleGrid { window, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfplane::Variant;

    fn white(v: f64) -> CovarianceModel {
        CovarianceModel::WhiteNoise { variance: v }
    }

    fn line(c: i64, d: i64, v: f64) -> CovarianceModel {
        CovarianceModel::LineField { c, d, variance: v }
    }

    fn ma_row() -> CovarianceModel {
        CovarianceModel::MovingAverage {
            coeffs: vec![Tap::new(0, 0, cr(1.0)), Tap::new(-1, 0, cr(0.5))],
            noise_variance: 1.0,
        }
    }

    #[test]
    fn gram_examples() {
        let g = gram(&white(1.0), &[(0, 0), (3, 1), (-2, 5)]).unwrap();
        assert!(crate::linalg::opnorm(&(g - CMat::identity(3, 3))) < 1e-14);

        let g = gram(&line(1, 1, 1.0), &[(0, 0), (1, -1)]).unwrap();
        assert!((g[(0, 1)].re - 1.0).abs() < 1e-14);
        assert!((g[(1, 0)].re - 1.0).abs() < 1e-14);

        let eval = ma_row().evaluator().unwrap();
        assert!((eval.gamma((0, 0)).re - 1.25).abs() < 1e-14);
        assert!((eval.gamma((1, 0)).re - 0.5).abs() < 1e-14);
        assert!(eval.gamma((0, 1)).norm() < 1e-14);
    }

    #[test]
    fn invalid_table_is_rejected() {
        // gamma(0,0) = 0 with a nonzero off-diagonal cannot be PSD.
        let bad = CovarianceModel::Table {
            entries: vec![Tap::new(1, 0, cr(1.0))],
        };
        assert!(matches!(
            gram(&bad, &[(0, 0), (1, 0)]),
            Err(FieldError::InvalidCovariance { .. })
        ));
    }

    #[test]
    fn innovation_of_white_noise() {
        let past = PastSpec::at_origin(HalfPlane::bottom(), 8).unwrap();
        let inn = innovate(&white(1.0), &past).unwrap();
        assert!((inn.sigma2 - 1.0).abs() < 1e-10);
        for c in inn.coeffs.values() {
            assert!(c.norm() < 1e-10);
        }
    }

    #[test]
    fn innovation_of_constant_rows_vanishes() {
        // The row field is reproduced exactly by any same-row past point;
        // the minimum-norm predictor spreads unit weight over the class.
        let past = PastSpec::at_origin(HalfPlane::bottom(), 4).unwrap();
        let inn = innovate(&line(0, 1, 1.0), &past).unwrap();
        assert!(inn.sigma2.abs() < 1e-10);
        let row_sum: Complex64 = inn
            .coeffs
            .iter()
            .filter(|((_, l), _)| *l == 0)
            .map(|(_, c)| *c)
            .sum();
        assert!((row_sum - cr(1.0)).norm() < 1e-9);
    }

    /// One-dimensional Levinson-Durbin recursion; the independent oracle
    /// for row moving-average processes.
    fn levinson_prediction_error(autocov: &[f64], order: usize) -> f64 {
        let mut err = autocov[0];
        let mut a = vec![0.0f64; order + 1];
        for m in 1..=order {
            let mut acc = autocov[m];
            for j in 1..m {
                acc -= a[j] * autocov[m - j];
            }
            let k = acc / err;
            let mut next = a.clone();
            next[m] = k;
            for j in 1..m {
                next[j] = a[j] - k * a[m - j];
            }
            a = next;
            err *= 1.0 - k * k;
        }
        err
    }

    #[test]
    fn row_ma_innovation_matches_levinson() {
        let r = 16;
        let past = PastSpec::at_origin(HalfPlane::bottom(), r).unwrap();
        let inn = innovate(&ma_row(), &past).unwrap();
        let mut autocov = vec![0.0f64; r as usize + 1];
        autocov[0] = 1.25;
        autocov[1] = 0.5;
        let oracle = levinson_prediction_error(&autocov, r as usize);
        assert!(
            (inn.sigma2 - oracle).abs() < 1e-9,
            "sigma2 {} vs oracle {}",
            inn.sigma2,
            oracle
        );
        assert!((inn.sigma2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ma_recovery_row_model() {
        let past = PastSpec::at_origin(HalfPlane::bottom(), 16).unwrap();
        let a = ma_coefficients(&ma_row(), &past, 3).unwrap();
        assert_eq!(a[&(0, 0)], cr(1.0));
        assert!((a[&(-1, 0)] - cr(0.5)).norm() < 1e-3);
        for (u, v) in &a {
            if *u != (0, 0) && *u != (-1, 0) {
                assert!(v.norm() < 1e-3, "stray coefficient at {u:?}");
            }
        }
    }

    #[test]
    fn ma_recovery_rotated_model() {
        let cov = CovarianceModel::MovingAverage {
            coeffs: vec![
                Tap::new(0, 0, cr(1.0)),
                Tap::new(0, -1, cr(0.3)),
                Tap::new(-1, -1, cr(0.2)),
            ],
            noise_variance: 1.0,
        };
        let hp = HalfPlane::rational(-1, -1).unwrap();
        let past = PastSpec::at_origin(hp, 16).unwrap();
        let a = ma_coefficients(&cov, &past, 3).unwrap();
        assert!((a[&(0, -1)] - cr(0.3)).norm() < 1e-3);
        assert!((a[&(-1, -1)] - cr(0.2)).norm() < 1e-3);
    }

    #[test]
    fn ma_requires_nontrivial_innovation() {
        let past = PastSpec::at_origin(HalfPlane::bottom(), 8).unwrap();
        assert!(matches!(
            ma_coefficients(&line(0, 1, 1.0), &past, 3),
            Err(FieldError::TrivialInnovation)
        ));
    }

    #[test]
    fn remote_energy_examples() {
        let l = HalfPlane::bottom();
        for v in remote_past_energy(&white(1.0), &l, 6, 4).unwrap() {
            assert!(v.abs() < 1e-10);
        }
        for v in remote_past_energy(&line(0, 1, 1.0), &l, 6, 4).unwrap() {
            assert!(v.abs() < 1e-10);
        }
        for v in remote_past_energy(&line(1, 1, 1.0), &l, 6, 4).unwrap() {
            assert!((v - 1.0).abs() < 1e-9, "expected full retention, got {v}");
        }
    }

    #[test]
    fn classify_paper_examples() {
        let l = HalfPlane::bottom();
        let diag = HalfPlane::rational(-1, -1).unwrap();

        let c = classify(&line(0, 1, 1.0), &l, 12).unwrap();
        assert_eq!(c.label, Label::Evanescent);
        assert_eq!(c.predicted_pair_type, PairTypePrediction::UnitaryShift);

        let c = classify(&line(1, 1, 1.0), &diag, 12).unwrap();
        assert_eq!(c.label, Label::Evanescent);
        assert_eq!(c.predicted_pair_type, PairTypePrediction::GeneralizedPowers);

        let c = classify(&line(1, 1, 1.0), &l, 12).unwrap();
        assert_eq!(c.label, Label::Deterministic);

        let c = classify(&white(1.0), &l, 12).unwrap();
        assert_eq!(c.label, Label::PurelyNondeterministic);
        assert!((c.energies.ma - 1.0).abs() < 1e-9);
    }

    #[test]
    fn labels_stable_across_radii() {
        let l = HalfPlane::bottom();
        let diag = HalfPlane::rational(-1, -1).unwrap();
        for r in [8, 12, 16] {
            assert_eq!(classify(&line(0, 1, 1.0), &l, r).unwrap().label, Label::Evanescent);
            assert_eq!(classify(&line(1, 1, 1.0), &diag, r).unwrap().label, Label::Evanescent);
            assert_eq!(
                classify(&line(1, 1, 1.0), &l, r).unwrap().label,
                Label::Deterministic
            );
            assert_eq!(
                classify(&white(1.0), &l, r).unwrap().label,
                Label::PurelyNondeterministic
            );
        }
    }

    #[test]
    fn classify_mixed_sum() {
        let cov = CovarianceModel::Sum {
            components: vec![white(1.0), line(0, 1, 1.0)],
        };
        let c = classify(&cov, &HalfPlane::bottom(), 16).unwrap();
        assert_eq!(c.label, Label::Mixed);
        assert!((c.energies.ma - 1.0).abs() < 0.05);
        assert!((c.energies.evan - 1.0).abs() < 0.05);
        assert!(c.energies.det.abs() < 0.05);
        let total = c.energies.ma + c.energies.det + c.energies.evan;
        assert!((total - c.energies.total).abs() < 1e-6 * c.energies.total);
    }

    #[test]
    fn component_energies_add() {
        let l = HalfPlane::bottom();
        let a = classify(&white(1.0), &l, 10).unwrap();
        let b = classify(&line(1, 1, 0.5), &l, 10).unwrap();
        let sum = classify(
            &CovarianceModel::Sum {
                components: vec![white(1.0), line(1, 1, 0.5)],
            },
            &l,
            10,
        )
        .unwrap();
        let tol = 1e-6 * sum.energies.total;
        assert!((sum.energies.ma - (a.energies.ma + b.energies.ma)).abs() < tol);
        assert!((sum.energies.det - (a.energies.det + b.energies.det)).abs() < tol);
        assert!(
            (sum.diagnostics.sigma2 - (a.diagnostics.sigma2 + b.diagnostics.sigma2)).abs() < tol
        );
    }

    #[test]
    fn joint_solve_on_a_sum_converges_to_component_values() {
        // For white noise plus the row field under the bottom past, the
        // joint truncated problem has the closed form 1 + 1/(R+1): the
        // optimum spreads weight 1/(R+1) over the R same-row points,
        // trading predictor norm against the row-class target. This pins
        // the solver against an exact oracle and shows why sum models are
        // classified per component (the joint value exceeds the true
        // innovation variance 1 at any finite R).
        let sum = CovarianceModel::Sum {
            components: vec![white(1.0), line(0, 1, 1.0)],
        };
        for r in [4i64, 8, 16] {
            let past = PastSpec::at_origin(HalfPlane::bottom(), r).unwrap();
            let inn = innovate(&sum, &past).unwrap();
            let oracle = 1.0 + 1.0 / (r as f64 + 1.0);
            assert!(
                (inn.sigma2 - oracle).abs() < 1e-9,
                "R={r}: {} vs {oracle}",
                inn.sigma2
            );
        }
    }

    #[test]
    fn sigma2_nonincreasing_in_radius() {
        let mut last = f64::INFINITY;
        for r in [2, 4, 6, 8, 10] {
            let past = PastSpec::at_origin(HalfPlane::bottom(), r).unwrap();
            let inn = innovate(&ma_row(), &past).unwrap();
            assert!(inn.sigma2 <= last + 1e-10, "r={r}");
            last = inn.sigma2;
        }
    }

    #[test]
    fn rotation_matched_points_give_equal_sigma2() {
        use crate::halfplane::{Direction, LatticeRotation};
        let cov = ma_row();
        let eval_rotated = |rot: &LatticeRotation, p: LatticePoint| rot.forward(p);
        for (k, l) in [(-1i64, -1i64), (-1, -2), (-2, -3)] {
            let rot = LatticeRotation::for_vector(k, l).unwrap();
            let s = HalfPlane::rational(k, l).unwrap();
            let past = PastSpec::at_origin(s, 6).unwrap();
            let pts = past.points().unwrap();
            let direct = innovate_over_points(&cov, (0, 0), &pts).unwrap();

            // Pull the same points back to the bottom half-plane and
            // analyze the rotated covariance over them.
            let pulled: Vec<LatticePoint> = pts
                .iter()
                .map(|p| rot.apply(*p, Direction::Inverse))
                .collect();
            let rotated_cov = {
                let eval = cov.evaluator().unwrap();
                let mut entries = Vec::new();
                for i in -30..=30 {
                    for j in -30..=30 {
                        let g = eval.gamma(eval_rotated(&rot, (i, j)));
                        if g.norm() > 0.0 {
                            entries.push(Tap::new(i, j, g));
                        }
                    }
                }
                CovarianceModel::Table { entries }
            };
            let pullback = innovate_over_points(&rotated_cov, (0, 0), &pulled).unwrap();
            assert!(
                (direct.sigma2 - pullback.sigma2).abs() < 1e-9,
                "({k},{l}): {} vs {}",
                direct.sigma2,
                pullback.sigma2
            );
        }
    }

    #[test]
    fn evanescent_model_horizontal_base_case() {
        let kind = EvanescentKind::HorizontalL {
            taps: vec![Tap::new(0, 0, cr(1.0))],
            copies: 1,
        };
        let cov = evanescent_model(&kind).unwrap();
        let eval = cov.evaluator().unwrap();
        let reference = line(0, 1, 1.0).evaluator().unwrap();
        for p in -5..=5 {
            for q in -5..=5 {
                assert!((eval.gamma((p, q)) - reference.gamma((p, q))).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn evanescent_model_rational_base_case() {
        let kind = EvanescentKind::Rational {
            k: -1,
            l: -1,
            taps: vec![Tap::new(0, 0, cr(1.0))],
            copies: 1,
        };
        let cov = evanescent_model(&kind).unwrap();
        let eval = cov.evaluator().unwrap();
        let reference = line(1, 1, 1.0).evaluator().unwrap();
        for p in -5..=5 {
            for q in -5..=5 {
                // gamma(p,q) = [p + q = 0] either way: the line through
                // (-1,-1) and through (1,1) is the same lattice line.
                assert!((eval.gamma((p, q)) - reference.gamma((p, q))).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn evanescent_model_filtered_is_evanescent() {
        let kind = EvanescentKind::HorizontalL {
            taps: vec![Tap::new(0, 0, cr(1.0)), Tap::new(0, 1, cr(0.5))],
            copies: 1,
        };
        let cov = evanescent_model(&kind).unwrap();
        let eval = cov.evaluator().unwrap();
        assert!((eval.gamma((0, 0)).re - 1.25).abs() < 1e-14);
        assert!((eval.gamma((3, 1)).re - 0.5).abs() < 1e-14);
        assert!((eval.gamma((7, 0)).re - 1.25).abs() < 1e-14);
        let c = classify(&cov, &HalfPlane::bottom(), 12).unwrap();
        assert_eq!(c.label, Label::Evanescent);
    }

    #[test]
    fn evanescent_model_validates_support() {
        let kind = EvanescentKind::HorizontalL {
            taps: vec![Tap::new(0, -1, cr(1.0))],
            copies: 1,
        };
        assert!(matches!(
            evanescent_model(&kind),
            Err(FieldError::Domain(_))
        ));
        let kind = EvanescentKind::Rational {
            k: -1,
            l: -1,
            taps: vec![Tap::new(0, -3, cr(1.0))],
            copies: 2,
        };
        assert!(matches!(
            evanescent_model(&kind),
            Err(FieldError::Domain(_))
        ));
    }

    #[test]
    fn simulation_is_deterministic_and_causal() {
        let taps = vec![Tap::new(0, 0, cr(1.0)), Tap::new(-1, 0, cr(0.5))];
        let l = HalfPlane::bottom();
        let a = simulate_ma(&taps, 1.0, &l, 42, 6).unwrap();
        let b = simulate_ma(&taps, 1.0, &l, 42, 6).unwrap();
        assert_eq!(a, b);
        let c = simulate_ma(&taps, 1.0, &l, 43, 6).unwrap();
        assert_ne!(a, c);

        let bad = vec![Tap::new(0, 0, cr(1.0)), Tap::new(0, 1, cr(0.5))];
        assert!(matches!(
            simulate_ma(&bad, 1.0, &l, 1, 4),
            Err(FieldError::Causality(_))
        ));
    }

    #[test]
    fn simulation_sample_covariance_converges() {
        let taps = vec![Tap::new(0, 0, cr(1.0)), Tap::new(-1, 0, cr(0.5))];
        let l = HalfPlane::bottom();
        let grid = simulate_ma(&taps, 1.0, &l, 7, 24).unwrap();
        let eval = ma_row().evaluator().unwrap();
        let n = grid.cell_count() as f64;
        let tol = 5.0 * eval.gamma00() / n.sqrt();
        for p in -2..=2 {
            for q in -2..=2 {
                let sample = grid.sample_covariance((p, q));
                let truth = eval.gamma((p, q));
                assert!(
                    (sample - truth).norm() <= tol,
                    "lag ({p},{q}): {sample} vs {truth}"
                );
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let taps = vec![Tap::new(0, 0, Complex64::new(1.0, -0.25))];
        let grid = simulate_ma(&taps, 1.0, &HalfPlane::bottom(), 5, 3).unwrap();
        let csv = grid.to_csv();
        let back = SampleGrid::from_csv(&csv).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn complex_formatting_handles_exponents() {
        for z in [
            Complex64::new(1.5, 0.25),
            Complex64::new(-1e-7, 2.5e-12),
            Complex64::new(0.0, -3.25),
            Complex64::new(4.0, 0.0),
        ] {
            let s = format_complex(z);
            let back = parse_complex(&s).unwrap();
            assert_eq!(z.re.to_bits(), back.re.to_bits(), "{s}");
            assert_eq!(z.im.abs().to_bits(), back.im.abs().to_bits(), "{s}");
        }
    }

    #[test]
    fn irrational_past_classifies_as_continuously_given() {
        use num_rational::BigRational;
        let v = LatticeVector::irrational_approx(
            BigRational::from_integer((-1).into()),
            BigRational::new((-99).into(), 70.into()),
            40,
        )
        .unwrap();
        let hp = HalfPlane::new(v, Variant::Sv);
        let c = classify(&white(1.0), &hp, 8).unwrap();
        assert_eq!(c.label, Label::PurelyNondeterministic);
        assert_eq!(
            c.predicted_pair_type,
            PairTypePrediction::ContinuouslyGiven
        );
    }
}
