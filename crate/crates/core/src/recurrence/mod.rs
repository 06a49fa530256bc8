//! Extremal index, the `L_{α,s}` family, the localized escape rate and the
//! union identity behind the `α = 0` limit.

mod extrapolate;
mod hypotheses;

use num::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HitError, Result};
use crate::measures::MeasureModel;
use crate::open_system::{compile_hole_capped, monte_carlo_survival, OpenChain, DEFAULT_STATE_CAP};
use crate::rational::{self, Rational};
use crate::symbolic::{
    cylinder_around, enumerate_join_capped, intersected_cylinder, HoleSpec, PointSpec, Symbol,
    SymbolicSystem, DEFAULT_ENUMERATION_CAP,
};

pub use extrapolate::{extrapolate_limit, Extrapolation, ExtrapolationMethod, DEFAULT_EXTRAPOLATION_TOL};
pub use hypotheses::{
    b1_condition, check_hypotheses, evaluate_case, ASchedule, CaseReport, HypothesisParams,
    HypothesisReport, N1Report, N2Report,
};

/// Default tolerance on the spread of the last three θ ratios.
pub const DEFAULT_THETA_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub n: usize,
    pub ratio: f64,
    pub ratio_exact: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub p: usize,
    pub per_n: Vec<ThetaPoint>,
    pub limit: f64,
    pub limit_exact: String,
    pub converged: bool,
    pub below_half: bool,
}

/// `θ = lim μ(U_n ∩ T^{-p}U_n)/μ(U_n)` for the cylinders `U_n` around a
/// `p`-periodic point.
pub fn theta(z: &PointSpec, p: usize, mu: &MeasureModel, n_range: &[usize]) -> Result<ThetaEstimate> {
    match z.exact_period() {
        Some(q) if q == p => {}
        Some(q) => {
            return Err(HitError::NotPeriodic(format!("prime period is {q}, not {p}")));
        }
        None => return Err(HitError::NotPeriodic("point is not shift-periodic".into())),
    }
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(HitError::Precondition("n range must be non-empty and positive".into()));
    }
    let mut exact = Vec::new();
    for &n in n_range {
        let num = mu.cylinder_measure(&intersected_cylinder(z, n, p, 1)?)?;
        let den = mu.cylinder_measure(&cylinder_around(z, n))?;
        exact.push(num / den);
    }
    let per_n: Vec<ThetaPoint> = n_range
        .iter()
        .zip(&exact)
        .map(|(&n, r)| ThetaPoint {
            n,
            ratio: rational::to_f64(r),
            ratio_exact: rational::display(r),
        })
        .collect();
    let tail = &per_n[per_n.len().saturating_sub(3)..];
    let spread = tail.iter().map(|t| t.ratio).fold(f64::MIN, f64::max)
        - tail.iter().map(|t| t.ratio).fold(f64::MAX, f64::min);
    let last = exact.last().unwrap();
    Ok(ThetaEstimate {
        p,
        limit: rational::to_f64(last),
        limit_exact: rational::display(last),
        converged: spread <= DEFAULT_THETA_TOL,
        below_half: *last < rational::ratio(1, 2),
        per_n,
    })
}

/// The exponent `α` of the `L_{α,s}` family; `Infinity` is the localized
/// escape rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Infinity,
}

impl Serialize for Alpha {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(*a),
            Alpha::Infinity => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => Ok(Alpha::Finite(a)),
            Raw::Text(t) if t == "infinity" || t == "inf" => Ok(Alpha::Infinity),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid alpha {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointMethod {
    ExactChain,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LPoint {
    pub n: usize,
    pub mu_u: f64,
    /// Survival horizon `⌈s μ(U_n)^{-α}⌉`; absent for the localized escape rate.
    pub t: Option<u64>,
    pub value: f64,
    pub method: PointMethod,
    /// 95% half-width for Monte Carlo points.
    pub ci_halfwidth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LCurve {
    pub alpha: Alpha,
    pub s: Option<f64>,
    pub per_n: Vec<LPoint>,
    pub extrapolated: f64,
    pub bracket: (f64, f64),
    pub converged: bool,
    pub notes: Vec<String>,
}

impl LCurve {
    fn assemble(alpha: Alpha, s: Option<f64>, per_n: Vec<LPoint>, notes: Vec<String>, tol: f64) -> Self {
        let points: Vec<(f64, f64)> = per_n.iter().map(|p| (p.n as f64, p.value)).collect();
        let (extrapolated, bracket, converged) = match extrapolate_limit(&points, tol) {
            Ok(e) => (e.limit, e.bracket, e.converged),
            Err(_) => {
                let last = points.last().map_or(f64::NAN, |p| p.1);
                (last, (last, last), false)
            }
        };
        Self {
            alpha,
            s,
            per_n,
            extrapolated,
            bracket,
            converged,
            notes,
        }
    }

    /// Convergence table with the running extrapolation bracket.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,value,bracket_low,bracket_high\n");
        let mut points = Vec::new();
        for p in &self.per_n {
            points.push((p.n as f64, p.value));
            let (lo, hi) = match extrapolate_limit(&points, DEFAULT_EXTRAPOLATION_TOL) {
                Ok(e) => e.bracket,
                Err(_) => match p.ci_halfwidth {
                    Some(h) => (p.value - h, p.value + h),
                    None => (p.value, p.value),
                },
            };
            out.push_str(&format!("{},{},{},{}\n", p.n, p.value, lo, hi));
        }
        out
    }
}

/// Shared options of the curve computations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveOptions {
    pub extrapolation_tol: f64,
    pub state_cap: usize,
    /// Monte Carlo trials used when the open chain exceeds the state cap; 0
    /// disables the fallback.
    pub mc_trials: u64,
    pub mc_seed: u64,
    /// Longest horizon attempted by Monte Carlo.
    pub mc_horizon: u64,
    pub escape_tol: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            extrapolation_tol: DEFAULT_EXTRAPOLATION_TOL,
            state_cap: DEFAULT_STATE_CAP,
            mc_trials: 0,
            mc_seed: 0,
            mc_horizon: 100_000,
            escape_tol: 1e-12,
        }
    }
}

fn check_range(n_range: &[usize]) -> Result<()> {
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(HitError::Precondition("n range must be non-empty and positive".into()));
    }
    if n_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HitError::Precondition("n range must be increasing".into()));
    }
    Ok(())
}

fn hole_at(z: &PointSpec, n: usize, system: &SymbolicSystem) -> Result<HoleSpec> {
    HoleSpec::single(system, cylinder_around(z, n))
}

/// `⌈s μ^{-α}⌉`, exact for integer `α`.
pub(crate) fn horizon(s: f64, alpha: f64, mu: &Rational) -> Option<u64> {
    if alpha.fract() == 0.0 && (0.0..=64.0).contains(&alpha) {
        let s = Rational::from_float(s)?;
        let t = s * rational::pow(&mu.recip(), alpha as usize);
        return rational::ceil(&t).to_u64().map(|t| t.max(1));
    }
    let t = (s.ln() - alpha * rational::ln(mu)).exp().ceil();
    (t.is_finite() && t < 9.0e18).then(|| (t as u64).max(1))
}

fn survival_point(
    system: &SymbolicSystem,
    mu: &MeasureModel,
    hole: &HoleSpec,
    t: u64,
    opts: &CurveOptions,
) -> Result<(f64, PointMethod, Option<f64>)> {
    match compile_hole_capped(system, mu, hole, opts.state_cap) {
        Ok(chain) => Ok((chain.log_survival(t)?, PointMethod::ExactChain, None)),
        Err(HitError::CapExceeded { .. }) if opts.mc_trials > 0 && t <= opts.mc_horizon => {
            let curve = monte_carlo_survival(system, mu, hole, t, opts.mc_trials, opts.mc_seed)?;
            let p = curve.survival[t as usize];
            // delta method for ln p
            let half = 1.96 * ((1.0 - p) / (p * opts.mc_trials as f64)).sqrt();
            Ok((p.ln(), PointMethod::MonteCarlo, Some(half)))
        }
        Err(e) => Err(e),
    }
}

/// Finite-`n` values of `−log μ(τ_{U_n} > ⌈s μ(U_n)^{-α}⌉) / (s μ(U_n)^{1-α})` and
/// their extrapolated limit.
pub fn l_alpha_s(
    z: &PointSpec,
    alpha: f64,
    s: f64,
    mu: &MeasureModel,
    system: &SymbolicSystem,
    n_range: &[usize],
    opts: &CurveOptions,
) -> Result<LCurve> {
    if alpha.is_nan() || alpha <= 0.0 || alpha.is_infinite() {
        return Err(HitError::Precondition(format!("alpha must lie in (0, ∞), got {alpha}")));
    }
    if s.is_nan() || s <= 0.0 || s.is_infinite() {
        return Err(HitError::Precondition(format!("s must be positive, got {s}")));
    }
    check_range(n_range)?;
    mu.check_compatible(system)?;
    let z = z.clone().validated(system)?;
    let results: Vec<Result<Option<LPoint>>> = n_range
        .par_iter()
        .map(|&n| {
            let hole = hole_at(&z, n, system)?;
            let m = mu.hole_measure(&hole)?;
            let Some(t) = horizon(s, alpha, &m) else {
                return Ok(None);
            };
            let scale = s * ((1.0 - alpha) * rational::ln(&m)).exp();
            match survival_point(system, mu, &hole, t, opts) {
                Ok((log_s, method, half)) => Ok(Some(LPoint {
                    n,
                    mu_u: rational::to_f64(&m),
                    t: Some(t),
                    value: -log_s / scale,
                    method,
                    ci_halfwidth: half.map(|h| h / scale),
                })),
                Err(HitError::CapExceeded { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut per_n = Vec::new();
    let mut notes = Vec::new();
    for (n, r) in n_range.iter().zip(results) {
        match r? {
            Some(p) => per_n.push(p),
            None => notes.push(format!("n={n}: horizon or state budget exceeded; point skipped")),
        }
    }
    Ok(LCurve::assemble(Alpha::Finite(alpha), Some(s), per_n, notes, opts.extrapolation_tol))
}

/// Localized escape rate `ρ(U_n)/μ(U_n)` per `n` and its extrapolated limit.
pub fn localized_escape_rate(
    z: &PointSpec,
    mu: &MeasureModel,
    system: &SymbolicSystem,
    n_range: &[usize],
    opts: &CurveOptions,
) -> Result<LCurve> {
    check_range(n_range)?;
    mu.check_compatible(system)?;
    let z = z.clone().validated(system)?;
    let per_n = n_range
        .par_iter()
        .map(|&n| {
            let hole = hole_at(&z, n, system)?;
            let chain = compile_hole_capped(system, mu, &hole, opts.state_cap)?;
            let rate = chain.escape_rate(opts.escape_tol)?;
            Ok(LPoint {
                n,
                mu_u: rate.mu_u,
                t: None,
                value: rate.rho / rate.mu_u,
                method: PointMethod::ExactChain,
                ci_halfwidth: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LCurve::assemble(Alpha::Infinity, None, per_n, Vec::new(), opts.extrapolation_tol))
}

/// Bounds from monotonicity of survival: with `s = kp + r`, `0 <= r < p`,
/// `μ(τ > (k+1)p−1) <= μ(τ > s) <= μ(τ > kp−1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub k: u64,
    pub r: u64,
    /// Normalized value at `kp − 1` (lower bound of the `s` value).
    pub low: Vec<f64>,
    /// Normalized value at `(k+1)p − 1` (upper bound).
    pub high: Vec<f64>,
    pub contains: bool,
    pub limit_bracket: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LZeroPoint {
    pub s: u64,
    pub per_n: Vec<(usize, f64)>,
    pub inner: Extrapolation,
    pub sandwich: Option<Sandwich>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LZeroCurve {
    pub per_s: Vec<LZeroPoint>,
    pub extrapolated: f64,
    pub bracket: (f64, f64),
    pub converged: bool,
}

impl LZeroCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,inner_limit,bracket_low,bracket_high\n");
        for p in &self.per_s {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.s, p.inner.limit, p.inner.bracket.0, p.inner.bracket.1
            ));
        }
        out
    }
}

/// `α = 0`: the inner limit over `n` of `−log μ(τ_{U_n} > s)/(s μ(U_n))` for each
/// `s`, followed by the outer limit in `s`.
pub fn l_zero(
    z: &PointSpec,
    s_range: &[u64],
    mu: &MeasureModel,
    system: &SymbolicSystem,
    n_range: &[usize],
    opts: &CurveOptions,
) -> Result<LZeroCurve> {
    check_range(n_range)?;
    if s_range.is_empty() || s_range.contains(&0) || s_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HitError::Precondition("s range must be positive and increasing".into()));
    }
    if n_range.len() < 4 {
        return Err(HitError::Precondition("inner limit needs at least 4 values of n".into()));
    }
    mu.check_compatible(system)?;
    let z = z.clone().validated(system)?;
    let period = z.exact_period();

    // times needed per s: s itself and, for periodic points, the sandwich ends
    let mut times: Vec<u64> = Vec::new();
    for &s in s_range {
        times.push(s);
        if let Some(p) = period {
            let p = p as u64;
            let k = s / p;
            times.push((k * p).saturating_sub(1));
            times.push((k + 1) * p - 1);
        }
    }

    // per n: (μ(U_n), log survival at each requested time)
    let rows: Vec<(f64, Vec<f64>)> = n_range
        .par_iter()
        .map(|&n| {
            let hole = hole_at(&z, n, system)?;
            let chain: OpenChain = compile_hole_capped(system, mu, &hole, opts.state_cap)?;
            Ok((chain.hole_measure_f64(), chain.log_survival_many(&times)?))
        })
        .collect::<Result<_>>()?;

    let mut per_s = Vec::new();
    let stride = if period.is_some() { 3 } else { 1 };
    for (i, &s) in s_range.iter().enumerate() {
        let col = i * stride;
        let norm = |row: &(f64, Vec<f64>), c: usize| -row.1[c] / (s as f64 * row.0);
        let values: Vec<(usize, f64)> = n_range
            .iter()
            .zip(&rows)
            .map(|(&n, row)| (n, norm(row, col)))
            .collect();
        let pts: Vec<(f64, f64)> = values.iter().map(|&(n, v)| (n as f64, v)).collect();
        let inner = extrapolate_limit(&pts, opts.extrapolation_tol)?;
        let sandwich = period.map(|p| {
            let p = p as u64;
            let low: Vec<f64> = rows.iter().map(|row| norm(row, col + 1)).collect();
            let high: Vec<f64> = rows.iter().map(|row| norm(row, col + 2)).collect();
            let contains = values
                .iter()
                .zip(low.iter().zip(&high))
                .all(|(&(_, v), (&lo, &hi))| lo <= v && v <= hi);
            let ext = |v: &[f64]| {
                let pts: Vec<(f64, f64)> = n_range.iter().map(|&n| n as f64).zip(v.iter().copied()).collect();
                extrapolate_limit(&pts, opts.extrapolation_tol).map(|e| e.limit)
            };
            let limit_bracket = match (ext(&low), ext(&high)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => (f64::NAN, f64::NAN),
            };
            Sandwich {
                k: s / p,
                r: s % p,
                low,
                high,
                contains,
                limit_bracket,
            }
        });
        per_s.push(LZeroPoint {
            s,
            per_n: values,
            inner,
            sandwich,
        });
    }
    let outer_pts: Vec<(f64, f64)> = per_s.iter().map(|p| (p.s as f64, p.inner.limit)).collect();
    let (extrapolated, bracket, converged) = match extrapolate_limit(&outer_pts, opts.extrapolation_tol) {
        Ok(e) => (e.limit, e.bracket, e.converged),
        Err(_) => {
            let last = outer_pts.last().unwrap().1;
            (last, (last, last), false)
        }
    };
    Ok(LZeroCurve {
        per_s,
        extrapolated,
        bracket,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionCheck {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub theta_exact: String,
    pub exact: f64,
    pub exact_rational: String,
    pub prediction: f64,
    pub prediction_rational: String,
    /// `|exact − prediction| / prediction`, exact.
    pub defect: f64,
    pub defect_rational: String,
    /// Whether `U_n ∩ T^{-ip}U_n`, `i = 0..=k`, is a decreasing sequence.
    pub decreasing: bool,
    /// Whether `T^{-j}U_n`, `j = 0..p`, are pairwise disjoint.
    pub disjoint_shifts: bool,
}

/// Pattern of `⋂_{i ∈ shifts} T^{-i}[w]`; `None` when two windows disagree.
fn window_pattern(w: &[Symbol], shifts: &[usize]) -> Option<Vec<Option<Symbol>>> {
    let len = shifts.iter().max().copied().unwrap_or(0) + w.len();
    let mut pat: Vec<Option<Symbol>> = vec![None; len];
    for &i in shifts {
        for (j, &c) in w.iter().enumerate() {
            match pat[i + j] {
                Some(d) if d != c => return None,
                _ => pat[i + j] = Some(c),
            }
        }
    }
    Some(pat)
}

/// Exact `μ(⋃_{i=0}^{k} T^{-ip}U_n)` against `μ(U_n)(k+1−kθ)`.
pub fn union_measure_check(
    z: &PointSpec,
    p: usize,
    n: usize,
    k: usize,
    mu: &MeasureModel,
    system: &SymbolicSystem,
) -> Result<UnionCheck> {
    union_measure_check_capped(z, p, n, k, mu, system, DEFAULT_ENUMERATION_CAP)
}

pub fn union_measure_check_capped(
    z: &PointSpec,
    p: usize,
    n: usize,
    k: usize,
    mu: &MeasureModel,
    system: &SymbolicSystem,
    cap: u128,
) -> Result<UnionCheck> {
    mu.check_compatible(system)?;
    let z = z.clone().validated(system)?;
    if z.exact_period() != Some(p) {
        return Err(HitError::NotPeriodic(format!("point is not {p}-periodic")));
    }
    let w = cylinder_around(&z, n);
    let mu_u = mu.cylinder_measure(&w)?;
    let theta = mu.cylinder_measure(&intersected_cylinder(&z, n, p, 1)?)? / &mu_u;
    let len = n + k * p;
    let words = enumerate_join_capped(system, len, cap)?;
    let mut exact = Rational::zero();
    for x in &words {
        let s = x.symbols();
        if (0..=k).any(|i| &s[i * p..i * p + n] == w.symbols()) {
            exact += mu.cylinder_measure(x)?;
        }
    }
    let kr = rational::int(k as i64);
    let prediction = &mu_u * (&kr + Rational::one() - &kr * &theta);
    let defect = ((&exact - &prediction) / &prediction).abs();

    let decreasing = (1..=k).all(|i| {
        let shifts_prev: Vec<usize> = vec![0, (i - 1) * p];
        let shifts: Vec<usize> = vec![0, i * p];
        match (window_pattern(w.symbols(), &shifts), window_pattern(w.symbols(), &shifts_prev)) {
            (Some(a), Some(b)) => b
                .iter()
                .enumerate()
                .all(|(j, c)| c.is_none() || a.get(j).copied().flatten() == *c),
            _ => false,
        }
    });
    // T^{-i}U ∩ T^{-j}U = T^{-i}(U ∩ T^{-(j-i)}U), so gaps 1..p suffice
    let disjoint_shifts = (1..p).all(|j| window_pattern(w.symbols(), &[0, j]).is_none());
    Ok(UnionCheck {
        n,
        k,
        p,
        theta_exact: rational::display(&theta),
        exact: rational::to_f64(&exact),
        exact_rational: rational::display(&exact),
        prediction: rational::to_f64(&prediction),
        prediction_rational: rational::display(&prediction),
        defect: rational::to_f64(&defect),
        defect_rational: rational::display(&defect),
        decreasing,
        disjoint_shifts,
    })
}

pub(crate) fn pattern_for_shifts(w: &[Symbol], shifts: &[usize]) -> Option<Vec<Option<Symbol>>> {
    window_pattern(w, shifts)
}
