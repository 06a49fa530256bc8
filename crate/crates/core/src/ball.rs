//! Metric balls for the doubling map `x ↦ 2x mod 1` and their inner/outer
//! dyadic-cylinder approximations.
//!
//! Points of `[0, 1)` are coded by binary digits, so the generation-`n` dyadic
//! cell `[j 2^{-n}, (j+1) 2^{-n})` is the `n`-cylinder of the binary word of `j`.
//! The invariant measure is a Bernoulli measure on the digits; `(1/2, 1/2)` is
//! Lebesgue measure.

use std::collections::HashMap;

use num::bigint::BigInt;
use num::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HitError, Result};
use crate::measures::{MeasureKind, MeasureModel};
use crate::open_system::{compile_hole, trial_rng};
use crate::rational::{self, Rational};
use crate::recurrence::{extrapolate_limit, Extrapolation, ThetaEstimate, ThetaPoint, DEFAULT_THETA_TOL};
use crate::symbolic::{check_enumeration, HoleSpec, Symbol, SymbolicSystem, Word, DEFAULT_ENUMERATION_CAP};

/// Distance used to define balls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `min(|x − y|, 1 − |x − y|)` on the circle `R/Z`.
    #[default]
    Circle,
    /// `|x − y|` on the interval `[0, 1)`.
    Line,
}

/// A set `{x : lo < x < hi}` (or `lo <= x < hi` when `lo_closed`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub lo: Rational,
    pub hi: Rational,
    pub lo_closed: bool,
}

impl Piece {
    fn contains_cell(&self, a: &Rational, b: &Rational) -> bool {
        let left = if self.lo_closed { a >= &self.lo } else { a > &self.lo };
        left && b <= &self.hi
    }

    fn meets_cell(&self, a: &Rational, b: &Rational) -> bool {
        a < &self.hi && b > &self.lo
    }

    fn contains(&self, x: &Rational) -> bool {
        let left = if self.lo_closed { x >= &self.lo } else { x > &self.lo };
        left && x < &self.hi
    }
}

/// Open ball `B_r(z)` with rational centre and radius.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    center: Rational,
    radius: Rational,
    metric: Metric,
}

impl Ball {
    pub fn new(center: Rational, radius: Rational, metric: Metric) -> Result<Self> {
        if center.is_negative() || center >= Rational::one() {
            return Err(HitError::Precondition("ball centre must lie in [0, 1)".into()));
        }
        if !radius.is_positive() || radius >= rational::ratio(1, 2) {
            return Err(HitError::Precondition("ball radius must lie in (0, 1/2)".into()));
        }
        Ok(Self { center, radius, metric })
    }

    pub fn center(&self) -> &Rational {
        &self.center
    }

    pub fn radius(&self) -> &Rational {
        &self.radius
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// The ball as disjoint pieces of `[0, 1)`.
    pub fn pieces(&self) -> Vec<Piece> {
        let zero = Rational::zero();
        let one = Rational::one();
        let lo = &self.center - &self.radius;
        let hi = &self.center + &self.radius;
        let mut out = Vec::new();
        match self.metric {
            Metric::Line => {
                if lo.is_negative() {
                    out.push(Piece { lo: zero, hi: hi.min(one), lo_closed: true });
                } else {
                    out.push(Piece { lo, hi: hi.min(one), lo_closed: false });
                }
            }
            Metric::Circle => {
                if lo.is_negative() {
                    out.push(Piece { lo: zero, hi, lo_closed: true });
                    out.push(Piece { lo: lo + &one, hi: one, lo_closed: false });
                } else if hi > one {
                    out.push(Piece { lo, hi: one.clone(), lo_closed: false });
                    out.push(Piece { lo: zero, hi: hi - one, lo_closed: true });
                } else {
                    out.push(Piece { lo, hi, lo_closed: false });
                }
            }
        }
        out.retain(|p| p.lo < p.hi);
        out
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.pieces().iter().any(|p| p.contains(x))
    }
}

/// Inner and outer unions of generation-`n` dyadic cells, as half-open ranges
/// of cell indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderUnionPair {
    pub n: usize,
    pub inner: Vec<(u64, u64)>,
    pub outer: Vec<(u64, u64)>,
}

fn cell(j: u64, n: usize) -> (Rational, Rational) {
    let d = BigInt::one() << n;
    (
        Rational::new(BigInt::from(j), d.clone()),
        Rational::new(BigInt::from(j + 1), d),
    )
}

fn push_range(ranges: &mut Vec<(u64, u64)>, a: u64, b: u64) {
    if a >= b {
        return;
    }
    if let Some(last) = ranges.last_mut() {
        if last.1 == a {
            last.1 = b;
            return;
        }
    }
    ranges.push((a, b));
}

fn word_of_cell(j: u64, len: usize) -> Word {
    Word::new((0..len).rev().map(|i| ((j >> i) & 1) as Symbol).collect())
}

/// Minimal prefix-free cylinder cover of the cell range `[a, b)` at generation `n`.
fn dyadic_words(a: u64, b: u64, n: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut a = a;
    while a < b {
        let mut k = 0;
        while k < n && a % (1 << (k + 1)) == 0 && a + (1 << (k + 1)) <= b {
            k += 1;
        }
        out.push(word_of_cell(a >> k, n - k));
        a += 1 << k;
    }
    out
}

impl CylinderUnionPair {
    fn count(ranges: &[(u64, u64)]) -> u64 {
        ranges.iter().map(|r| r.1 - r.0).sum()
    }

    pub fn inner_count(&self) -> u64 {
        Self::count(&self.inner)
    }

    pub fn outer_count(&self) -> u64 {
        Self::count(&self.outer)
    }

    /// Every cell word of the inner union (length `n`).
    pub fn inner_words(&self) -> Vec<Word> {
        self.inner.iter().flat_map(|&(a, b)| (a..b).map(|j| word_of_cell(j, self.n))).collect()
    }

    pub fn outer_words(&self) -> Vec<Word> {
        self.outer.iter().flat_map(|&(a, b)| (a..b).map(|j| word_of_cell(j, self.n))).collect()
    }

    fn hole(&self, ranges: &[(u64, u64)]) -> Result<Option<HoleSpec>> {
        let words: Vec<Word> = ranges.iter().flat_map(|&(a, b)| dyadic_words(a, b, self.n)).collect();
        if words.is_empty() {
            return Ok(None);
        }
        HoleSpec::new(&SymbolicSystem::full_shift(2)?, words).map(Some)
    }

    /// The inner union as a compact hole; `None` when it is empty.
    pub fn inner_hole(&self) -> Result<Option<HoleSpec>> {
        self.hole(&self.inner)
    }

    pub fn outer_hole(&self) -> Result<Option<HoleSpec>> {
        self.hole(&self.outer)
    }

    fn mass(ranges: &[(u64, u64)], n: usize, mu: &MeasureModel) -> Result<Rational> {
        ranges.iter().map(|&(a, b)| {
            let (lo, _) = cell(a, n);
            let (hi, _) = cell(b, n);
            interval_measure(mu, &lo, &hi)
        }).sum()
    }

    pub fn inner_mass(&self, mu: &MeasureModel) -> Result<Rational> {
        Self::mass(&self.inner, self.n, mu)
    }

    pub fn outer_mass(&self, mu: &MeasureModel) -> Result<Rational> {
        Self::mass(&self.outer, self.n, mu)
    }

    /// Exact check of `⋃inner ⊆ ball ⊆ ⋃outer` and `inner ⊆ outer`.
    pub fn verify_containment(&self, ball: &Ball) -> bool {
        let pieces = ball.pieces();
        let inner_ok = self.inner.iter().all(|&(a, b)| {
            (a..b).all(|j| {
                let (lo, hi) = cell(j, self.n);
                pieces.iter().any(|p| p.contains_cell(&lo, &hi))
            })
        });
        // each piece [lo, hi) must lie in one contiguous outer range
        let outer_ok = pieces.iter().all(|p| {
            self.outer.iter().any(|&(a, b)| {
                let (start, _) = cell(a, self.n);
                let (end, _) = cell(b, self.n);
                start <= p.lo && p.hi <= end
            })
        });
        let nested = self.inner.iter().all(|&(a, b)| self.outer.iter().any(|&(c, d)| c <= a && b <= d));
        inner_ok && outer_ok && nested
    }
}

/// Inner (contained) and outer (meeting) generation-`n` cells of `ball`.
pub fn ball_to_cylinders(ball: &Ball, n: usize) -> Result<CylinderUnionPair> {
    if n == 0 {
        return Err(HitError::Precondition("n must be positive".into()));
    }
    check_enumeration(2, n, DEFAULT_ENUMERATION_CAP.min(1 << 40))?;
    let scale = Rational::from_integer(BigInt::one() << n);
    let total = 1u64 << n;
    let mut pieces = ball.pieces();
    pieces.sort_by(|a, b| a.lo.cmp(&b.lo));
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for p in &pieces {
        let first = (&p.lo * &scale).floor().to_integer().to_u64().unwrap_or(0);
        let last = (&p.hi * &scale).ceil().to_integer().to_u64().unwrap_or(total).min(total);
        let meets = |j: u64| {
            let (a, b) = cell(j, n);
            p.meets_cell(&a, &b)
        };
        // interior cells always meet the piece; only the two ends need checking
        let mut a = first;
        while a < last && !meets(a) {
            a += 1;
        }
        let mut b = last;
        while b > a && !meets(b - 1) {
            b -= 1;
        }
        push_range(&mut outer, a, b);
        // only the boundary cells can fail to be inside
        let mut lo_in = first;
        while lo_in < last && !{
            let (a, b) = cell(lo_in, n);
            p.contains_cell(&a, &b)
        } {
            lo_in += 1;
        }
        let mut hi_in = last;
        while hi_in > lo_in && !{
            let (a, b) = cell(hi_in - 1, n);
            p.contains_cell(&a, &b)
        } {
            hi_in -= 1;
        }
        push_range(&mut inner, lo_in, hi_in);
    }
    Ok(CylinderUnionPair { n, inner, outer })
}

fn coded_probs(mu: &MeasureModel) -> Result<(Rational, Rational)> {
    if mu.kind() != MeasureKind::Bernoulli || mu.alphabet_size() != 2 {
        return Err(HitError::InvalidMeasure(
            "ball computations need a Bernoulli measure on binary digits".into(),
        ));
    }
    Ok((mu.initial()[0].clone(), mu.initial()[1].clone()))
}

/// Binary digits of `x ∈ [0, 1)` as `(preperiod, period)`; dyadic rationals
/// end in the period `0`.
pub fn binary_expansion(x: &Rational) -> (Vec<Symbol>, Vec<Symbol>) {
    let den = x.denom().clone();
    let mut rem = x.numer().clone();
    let mut seen: HashMap<BigInt, usize> = HashMap::new();
    let mut digits = Vec::new();
    loop {
        if let Some(&start) = seen.get(&rem) {
            let period = digits.split_off(start);
            return (digits, period);
        }
        seen.insert(rem.clone(), digits.len());
        rem <<= 1;
        if rem >= den {
            digits.push(1);
            rem -= &den;
        } else {
            digits.push(0);
        }
    }
}

/// `μ([0, x))` for the coded Bernoulli measure, exact for rational `x ∈ [0, 1]`.
pub fn cdf(mu: &MeasureModel, x: &Rational) -> Result<Rational> {
    let (q0, q1) = coded_probs(mu)?;
    if x.is_negative() || x > &Rational::one() {
        return Err(HitError::Precondition("cdf argument outside [0, 1]".into()));
    }
    if x.is_one() {
        return Ok(Rational::one());
    }
    let (pre, period) = binary_expansion(x);
    // digit 1 at a position adds the mass of the sibling 0-branch
    let walk = |digits: &[Symbol], weight: &mut Rational| -> Rational {
        let mut acc = Rational::zero();
        for &d in digits {
            if d == 1 {
                acc += &*weight * &q0;
                *weight *= &q1;
            } else {
                *weight *= &q0;
            }
        }
        acc
    };
    let mut weight = Rational::one();
    let head = walk(&pre, &mut weight);
    let start = weight.clone();
    let mut cycle_weight = Rational::one();
    let cycle = walk(&period, &mut cycle_weight);
    Ok(head + start * cycle / (Rational::one() - cycle_weight))
}

/// `μ([lo, hi))`.
pub fn interval_measure(mu: &MeasureModel, lo: &Rational, hi: &Rational) -> Result<Rational> {
    if hi <= lo {
        return Ok(Rational::zero());
    }
    Ok(cdf(mu, hi)? - cdf(mu, lo)?)
}

fn pieces_measure(mu: &MeasureModel, pieces: &[Piece]) -> Result<Rational> {
    pieces.iter().map(|p| interval_measure(mu, &p.lo, &p.hi)).sum()
}

pub fn ball_measure(mu: &MeasureModel, ball: &Ball) -> Result<Rational> {
    pieces_measure(mu, &ball.pieces())
}

/// `T(x) = 2x mod 1`.
pub fn doubling(x: &Rational) -> Rational {
    let y = x * rational::int(2);
    if y >= Rational::one() {
        y - Rational::one()
    } else {
        y
    }
}

/// Smallest `p <= bound` with `2^p x ≡ x (mod 1)`.
pub fn doubling_period(x: &Rational, bound: usize) -> Option<usize> {
    let mut y = doubling(x);
    for p in 1..=bound {
        if &y == x {
            return Some(p);
        }
        y = doubling(&y);
    }
    None
}

/// First `n` coding symbols of `x` from its forward orbit.
pub fn coding_symbols(x: &Rational, n: usize) -> Vec<Symbol> {
    let half = rational::ratio(1, 2);
    let mut y = x.clone();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(if y < half { 0 } else { 1 });
        y = doubling(&y);
    }
    out
}

/// Index of the generation-`n` dyadic cell containing `x`.
pub fn dyadic_cell(x: &Rational, n: usize) -> u64 {
    (x * Rational::from_integer(BigInt::one() << n)).floor().to_integer().to_u64().unwrap_or(0)
}

/// Does the cell of `x` coincide with the cylinder of its coding?
pub fn coding_matches(x: &Rational, n: usize) -> bool {
    word_of_cell(dyadic_cell(x, n), n).symbols() == coding_symbols(x, n).as_slice()
}

/// The real number with Thue–Morse binary digits, truncated to `bits` digits.
pub fn thue_morse_real(bits: usize) -> Rational {
    let mut num = BigInt::zero();
    for i in 0..bits as u64 {
        num <<= 1;
        num += BigInt::from(i.count_ones() % 2);
    }
    Rational::new(num, BigInt::one() << bits)
}

/// `θ` for balls: `μ(B ∩ T^{-p}B)/μ(B)` per radius, exactly.
pub fn theta_ball(
    center: &Rational,
    p: usize,
    radii: &[Rational],
    mu: &MeasureModel,
    metric: Metric,
) -> Result<ThetaEstimate> {
    match doubling_period(center, 64) {
        Some(q) if q == p => {}
        Some(q) => return Err(HitError::NotPeriodic(format!("prime period is {q}, not {p}"))),
        None => return Err(HitError::NotPeriodic("centre is not periodic under doubling".into())),
    }
    if radii.is_empty() {
        return Err(HitError::Precondition("need at least one radius".into()));
    }
    let scale = Rational::from_integer(BigInt::one() << p);
    let mut per_n = Vec::new();
    let mut last = Rational::zero();
    for (i, r) in radii.iter().enumerate() {
        let ball = Ball::new(center.clone(), r.clone(), metric)?;
        let pieces = ball.pieces();
        let mut meet = Rational::zero();
        for j in 0..(1u64 << p) {
            let shift = Rational::from_integer(BigInt::from(j));
            for piece in &pieces {
                let pre_lo = (&piece.lo + &shift) / &scale;
                let pre_hi = (&piece.hi + &shift) / &scale;
                for other in &pieces {
                    let lo = (&pre_lo).max(&other.lo).clone();
                    let hi = (&pre_hi).min(&other.hi).clone();
                    meet += interval_measure(mu, &lo, &hi)?;
                }
            }
        }
        let ratio = meet / pieces_measure(mu, &pieces)?;
        per_n.push(ThetaPoint {
            n: i + 1,
            ratio: rational::to_f64(&ratio),
            ratio_exact: rational::display(&ratio),
        });
        last = ratio;
    }
    let tail = &per_n[per_n.len().saturating_sub(3)..];
    let spread = tail.iter().map(|t| t.ratio).fold(f64::MIN, f64::max)
        - tail.iter().map(|t| t.ratio).fold(f64::MAX, f64::min);
    Ok(ThetaEstimate {
        p,
        limit: rational::to_f64(&last),
        limit_exact: rational::display(&last),
        converged: spread <= DEFAULT_THETA_TOL,
        below_half: last < rational::ratio(1, 2),
        per_n,
    })
}

/// Smallest `n` with `2^{-n} <= r^v`.
pub fn n_rule(r: &Rational, v: u32) -> usize {
    let target = rational::pow(r, v as usize);
    let mut n = 0;
    let mut cell = Rational::one();
    let half = rational::ratio(1, 2);
    while cell > target {
        cell *= &half;
        n += 1;
    }
    n.max(1)
}

/// `μ(B_{r+r^v}(z)) / μ(B_r(z))`.
pub fn growth_ratio(mu: &MeasureModel, center: &Rational, r: &Rational, v: u32, metric: Metric) -> Result<Rational> {
    let big = r + rational::pow(r, v as usize);
    let outer = Ball::new(center.clone(), big, metric)?;
    let inner = Ball::new(center.clone(), r.clone(), metric)?;
    Ok(ball_measure(mu, &outer)? / ball_measure(mu, &inner)?)
}

/// Lazily compares a random binary expansion against rational endpoints.
struct DigitStream<'a, R: Rng> {
    digits: Vec<Symbol>,
    rng: &'a mut R,
    q0: f64,
}

impl<R: Rng> DigitStream<'_, R> {
    fn digit(&mut self, i: usize) -> Symbol {
        while self.digits.len() <= i {
            let d = if self.rng.random::<f64>() < self.q0 { 0 } else { 1 };
            self.digits.push(d);
        }
        self.digits[i]
    }

    /// Sign of `T^j x − e` where `e` is given by its first digits.
    fn compare(&mut self, j: usize, e: &[Symbol]) -> std::cmp::Ordering {
        for (i, &d) in e.iter().enumerate() {
            let x = self.digit(j + i);
            if x != d {
                return x.cmp(&d);
            }
        }
        std::cmp::Ordering::Equal
    }
}

const ENDPOINT_DIGITS: usize = 192;

fn leading_digits(x: &Rational) -> Vec<Symbol> {
    if x >= &Rational::one() {
        return vec![1; ENDPOINT_DIGITS];
    }
    let (pre, period) = binary_expansion(x);
    pre.iter().chain(period.iter().cycle()).take(ENDPOINT_DIGITS).copied().collect()
}

/// Real-orbit Monte Carlo estimate of `μ(τ_B > t)`: digits of `x` are drawn from
/// the coded measure and `T^j x ∈ B` is decided against exact endpoints.
pub fn ball_survival_monte_carlo(ball: &Ball, mu: &MeasureModel, t: u64, trials: u64, seed: u64) -> Result<f64> {
    let (q0, _) = coded_probs(mu)?;
    if trials == 0 {
        return Err(HitError::Precondition("need at least one trial".into()));
    }
    let q0 = rational::to_f64(&q0);
    let pieces: Vec<(Vec<Symbol>, Vec<Symbol>, bool, bool)> = ball
        .pieces()
        .iter()
        .map(|p| (leading_digits(&p.lo), leading_digits(&p.hi), p.lo_closed, p.hi >= Rational::one()))
        .collect();
    let survivors: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut stream = DigitStream { digits: Vec::new(), rng: &mut rng, q0 };
            for j in 1..=t as usize {
                let inside = pieces.iter().any(|(lo, hi, lo_closed, to_one)| {
                    use std::cmp::Ordering::*;
                    let above = match stream.compare(j, lo) {
                        Greater => true,
                        Equal => *lo_closed,
                        Less => false,
                    };
                    above && (*to_one || stream.compare(j, hi) == Less)
                });
                if inside {
                    return 0;
                }
            }
            1
        })
        .sum();
    Ok(survivors as f64 / trials as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMonteCarlo {
    pub trials: u64,
    pub t: u64,
    pub value: f64,
    /// Three standard errors of the estimate.
    pub tolerance: f64,
    pub inside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallPoint {
    pub r: String,
    pub r_f64: f64,
    pub n: usize,
    pub ball_mass: f64,
    pub inner_mass: f64,
    pub outer_mass: f64,
    pub containment: bool,
    pub l_low: Option<f64>,
    /// `None` when the inner union is empty and no finite upper bound exists.
    pub l_high: Option<f64>,
    pub growth_ratio: f64,
    pub monte_carlo: Option<BallMonteCarlo>,
}

impl BallPoint {
    pub fn bracket(&self) -> Option<(f64, f64)> {
        self.l_low.zip(self.l_high)
    }

    pub fn width(&self) -> Option<f64> {
        self.bracket().map(|(lo, hi)| hi - lo)
    }

    pub fn center(&self) -> Option<f64> {
        self.bracket().map(|(lo, hi)| 0.5 * (lo + hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCurve {
    pub alpha: f64,
    pub s: f64,
    pub v: u32,
    pub metric: Metric,
    pub per_r: Vec<BallPoint>,
    /// Bracket widths are non-increasing as `r` decreases.
    pub shrinking: bool,
    pub final_bracket: Option<(f64, f64)>,
    pub low_limit: Option<Extrapolation>,
    pub high_limit: Option<Extrapolation>,
}

impl BallCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,n,inner_mass,outer_mass,L_low,L_high\n");
        for p in &self.per_r {
            let low = p.l_low.map_or(String::new(), |v| v.to_string());
            let high = p.l_high.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.r_f64, p.n, p.inner_mass, p.outer_mass, low, high
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallOptions {
    pub v: u32,
    pub metric: Metric,
    /// Real-orbit Monte Carlo trials per radius; 0 disables the check.
    pub mc_trials: u64,
    pub mc_seed: u64,
    /// Radii whose ball horizon exceeds this are not sampled.
    pub mc_max_horizon: u64,
    pub extrapolation_tol: f64,
}

impl Default for BallOptions {
    fn default() -> Self {
        Self {
            v: 2,
            metric: Metric::Circle,
            mc_trials: 0,
            mc_seed: 0,
            mc_max_horizon: 5_000,
            extrapolation_tol: 1e-2,
        }
    }
}

/// Bracket for the finite-radius value of `L_{α,s}` on `B_r(z)` from its cylinder
/// approximations.
///
/// With `μ⁻ <= μ(B) <= μ⁺` and `S_{U⁺} <= S_B <= S_{U⁻}` pointwise, monotonicity
/// of survival in `t` gives
/// `−log S_{U⁻}(⌈sμ⁺^{-α}⌉) <= −log S_B(⌈sμ(B)^{-α}⌉) <= −log S_{U⁺}(⌈sμ⁻^{-α}⌉)`,
/// and the normalisation `s μ(B)^{1-α}` lies between the values at `μ⁻` and `μ⁺`.
pub fn l_ball(
    center: &Rational,
    radii: &[Rational],
    alpha: f64,
    s: f64,
    mu: &MeasureModel,
    opts: &BallOptions,
) -> Result<BallCurve> {
    coded_probs(mu)?;
    if alpha.is_nan() || alpha <= 0.0 || alpha.is_infinite() {
        return Err(HitError::Precondition(format!("alpha must lie in (0, ∞), got {alpha}")));
    }
    if s.is_nan() || s <= 0.0 {
        return Err(HitError::Precondition("s must be positive".into()));
    }
    if radii.windows(2).any(|w| w[0] <= w[1]) {
        return Err(HitError::Precondition("radii must be decreasing".into()));
    }
    let system = SymbolicSystem::full_shift(2)?;
    let per_r = radii
        .par_iter()
        .enumerate()
        .map(|(idx, r)| {
            let ball = Ball::new(center.clone(), r.clone(), opts.metric)?;
            let n = n_rule(r, opts.v);
            let pair = ball_to_cylinders(&ball, n)?;
            let containment = pair.verify_containment(&ball);
            let m_in = pair.inner_mass(mu)?;
            let m_out = pair.outer_mass(mu)?;
            let m_ball = ball_measure(mu, &ball)?;
            let norm = |m: &Rational| s * ((1.0 - alpha) * rational::ln(m)).exp();
            let horizon = |m: &Rational| {
                crate::recurrence::horizon(s, alpha, m)
                    .ok_or_else(|| HitError::CapExceeded { what: "survival horizon", requested: u128::MAX, cap: u64::MAX as u128 })
            };
            let (l_low, l_high) = match pair.inner_hole()? {
                Some(inner_hole) => {
                    let outer_hole = pair.outer_hole()?.expect("outer union is never empty");
                    let inner_chain = compile_hole(&system, mu, &inner_hole)?;
                    let outer_chain = compile_hole(&system, mu, &outer_hole)?;
                    let (n_in, n_out) = (norm(&m_in), norm(&m_out));
                    let low = -inner_chain.log_survival(horizon(&m_out)?)? / n_in.max(n_out);
                    let high = -outer_chain.log_survival(horizon(&m_in)?)? / n_in.min(n_out);
                    (Some(low), Some(high))
                }
                // μ⁻ = 0 leaves the upper horizon unbounded
                None => (None, None),
            };
            let monte_carlo = if opts.mc_trials > 0 {
                let t = horizon(&m_ball)?;
                if t <= opts.mc_max_horizon {
                    let seed = opts.mc_seed.wrapping_add(idx as u64);
                    let p = ball_survival_monte_carlo(&ball, mu, t, opts.mc_trials, seed)?;
                    let scale = norm(&m_ball);
                    let value = -p.ln() / scale;
                    let tolerance = 3.0 * ((1.0 - p) / (p * opts.mc_trials as f64)).sqrt() / scale;
                    let inside = l_low.is_none_or(|lo| value >= lo - tolerance)
                        && l_high.is_none_or(|hi| value <= hi + tolerance);
                    Some(BallMonteCarlo { trials: opts.mc_trials, t, value, tolerance, inside })
                } else {
                    None
                }
            } else {
                None
            };
            Ok(BallPoint {
                r: rational::display(r),
                r_f64: rational::to_f64(r),
                n,
                ball_mass: rational::to_f64(&m_ball),
                inner_mass: rational::to_f64(&m_in),
                outer_mass: rational::to_f64(&m_out),
                containment,
                l_low,
                l_high,
                growth_ratio: rational::to_f64(&growth_ratio(mu, center, r, opts.v, opts.metric)?),
                monte_carlo,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let widths: Vec<Option<f64>> = per_r.iter().map(BallPoint::width).collect();
    let shrinking = widths.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => b <= a,
        (None, _) => true,
        (Some(_), None) => false,
    });
    let final_bracket = per_r.last().and_then(BallPoint::bracket);
    let ext = |f: &dyn Fn(&BallPoint) -> Option<f64>| {
        let pts: Vec<(f64, f64)> = per_r
            .iter()
            .enumerate()
            .filter_map(|(i, p)| f(p).map(|v| (i as f64, v)))
            .collect();
        extrapolate_limit(&pts, opts.extrapolation_tol).ok()
    };
    let low_limit = ext(&|p| p.l_low);
    let high_limit = ext(&|p| p.l_high);
    Ok(BallCurve {
        alpha,
        s,
        v: opts.v,
        metric: opts.metric,
        per_r,
        shrinking,
        final_bracket,
        low_limit,
        high_limit,
    })
}

/// Radii `(2/3)·2^{-k}` for `k` in `range`, decreasing. The factor keeps ball
/// boundaries off the dyadic grid.
pub fn default_radii(range: std::ops::RangeInclusive<u32>) -> Vec<Rational> {
    range.map(|k| rational::ratio(2, 3) / Rational::from_integer(BigInt::one() << k)).collect()
}
