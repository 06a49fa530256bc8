//! Bernoulli and stationary Markov measures on symbolic systems: exact cylinder
//! measures, stationarity checks and φ-mixing coefficients.
//!
//! All model parameters are stored as exact rationals; `f64` copies are kept
//! for the floating-point paths.
//!
//! φ-mixing is indexed by the gap `k` of the mixing condition
//! `|μ(A ∩ T^{-n-k}B) − μ(A)μ(B)| ≤ φ(k)μ(A)`, where `A` depends on the first `n`
//! coordinates. The last coordinate of `A` and the first of `T^{-n-k}B` are
//! `k + 1` transitions apart, so for a Markov chain with kernel `P` the left
//! coefficient is `max_a TV(P^{k+1}(a, ·), π)`.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{HitError, Result};
use crate::numeric::linear_fit;
use crate::rational::{self, Rational};
use crate::symbolic::{enumerate_join_capped, HoleSpec, Side, Symbol, SymbolicSystem, Word};

/// Tolerance on probability-vector normalization and on stationarity.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Bernoulli,
    Markov,
}

/// A shift-invariant measure given by an initial law and a transition kernel.
/// A Bernoulli measure is stored as a kernel with identical rows.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureModel {
    kind: MeasureKind,
    initial: Vec<Rational>,
    kernel: Vec<Vec<Rational>>,
    initial_f: Vec<f64>,
    kernel_f: Vec<Vec<f64>>,
}

fn normalized(v: Vec<Rational>, what: &str) -> Result<Vec<Rational>> {
    let sum: Rational = v.iter().sum();
    let defect = rational::to_f64(&(sum.clone() - Rational::one())).abs();
    if defect > PROBABILITY_TOLERANCE {
        return Err(HitError::InvalidMeasure(format!(
            "{what} sums to {} (must be 1 within {PROBABILITY_TOLERANCE:e})",
            rational::to_f64(&sum)
        )));
    }
    if v.iter().any(|x| x.is_negative()) {
        return Err(HitError::InvalidMeasure(format!("{what} has a negative entry")));
    }
    Ok(v.into_iter().map(|x| x / &sum).collect())
}

impl MeasureModel {
    /// Product measure with the given symbol probabilities (all positive).
    pub fn bernoulli(probs: Vec<Rational>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(HitError::InvalidMeasure("need at least two symbols".into()));
        }
        if probs.iter().any(|p| !p.is_positive()) {
            return Err(HitError::InvalidMeasure(
                "Bernoulli probabilities must be positive".into(),
            ));
        }
        let probs = normalized(probs, "probability vector")?;
        let kernel = vec![probs.clone(); probs.len()];
        Ok(Self::assemble(MeasureKind::Bernoulli, probs, kernel))
    }

    /// Convenience constructor from decimal/fraction strings.
    pub fn bernoulli_str(probs: &[&str]) -> Result<Self> {
        Self::bernoulli(
            probs
                .iter()
                .map(|s| rational::parse_rational(s))
                .collect::<Result<_>>()?,
        )
    }

    /// Stationary Markov measure; the stationary vector is solved exactly.
    pub fn markov(kernel: Vec<Vec<Rational>>) -> Result<Self> {
        let kernel = check_kernel(kernel)?;
        let pi = stationary_vector(&kernel)?;
        if pi.iter().any(|p| !p.is_positive()) {
            return Err(HitError::InvalidMeasure(
                "stationary vector has a zero entry (chain not irreducible)".into(),
            ));
        }
        Ok(Self::assemble(MeasureKind::Markov, pi, kernel))
    }

    pub fn markov_str(rows: &[&[&str]]) -> Result<Self> {
        Self::markov(parse_matrix(rows)?)
    }

    /// Markov measure with a user-supplied stationary vector, which must satisfy
    /// `πP = π` within the probability tolerance.
    pub fn markov_with_stationary(kernel: Vec<Vec<Rational>>, pi: Vec<Rational>) -> Result<Self> {
        let model = Self::markov_unchecked(kernel, pi)?;
        let defect = model.stationarity_defect();
        if rational::to_f64(&defect) > PROBABILITY_TOLERANCE {
            return Err(HitError::InvalidMeasure(format!(
                "initial vector is not stationary (defect {})",
                rational::to_f64(&defect)
            )));
        }
        Ok(model)
    }

    /// Markov model whose initial vector is not required to be stationary.
    /// Only meant for diagnostics such as [`stationarity_check`].
    pub fn markov_unchecked(kernel: Vec<Vec<Rational>>, pi: Vec<Rational>) -> Result<Self> {
        let kernel = check_kernel(kernel)?;
        if pi.len() != kernel.len() {
            return Err(HitError::InvalidMeasure("initial vector has wrong length".into()));
        }
        if pi.iter().any(|p| !p.is_positive()) {
            return Err(HitError::InvalidMeasure("initial vector entries must be positive".into()));
        }
        let pi = normalized(pi, "initial vector")?;
        Ok(Self::assemble(MeasureKind::Markov, pi, kernel))
    }

    fn assemble(kind: MeasureKind, initial: Vec<Rational>, kernel: Vec<Vec<Rational>>) -> Self {
        let initial_f = initial.iter().map(rational::to_f64).collect();
        let kernel_f = kernel
            .iter()
            .map(|row| row.iter().map(rational::to_f64).collect())
            .collect();
        Self {
            kind,
            initial,
            kernel,
            initial_f,
            kernel_f,
        }
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn alphabet_size(&self) -> usize {
        self.initial.len()
    }

    /// True when the next symbol does not depend on the previous one.
    pub fn is_memoryless(&self) -> bool {
        self.kind == MeasureKind::Bernoulli
    }

    pub fn initial(&self) -> &[Rational] {
        &self.initial
    }

    pub fn kernel(&self) -> &[Vec<Rational>] {
        &self.kernel
    }

    pub fn initial_f64(&self) -> &[f64] {
        &self.initial_f
    }

    pub fn kernel_f64(&self) -> &[Vec<f64>] {
        &self.kernel_f
    }

    /// Checks that the measure is supported exactly on the admissible words of
    /// `system`.
    pub fn check_compatible(&self, system: &SymbolicSystem) -> Result<()> {
        if system.alphabet_size() != self.alphabet_size() {
            return Err(HitError::InvalidMeasure(format!(
                "measure has {} symbols, system has {}",
                self.alphabet_size(),
                system.alphabet_size()
            )));
        }
        for a in 0..self.alphabet_size() {
            for b in 0..self.alphabet_size() {
                let positive = self.kernel[a][b].is_positive();
                if positive != system.admissible(a as Symbol, b as Symbol) {
                    return Err(HitError::InvalidMeasure(format!(
                        "transition {a}->{b}: support does not match admissibility"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `max |Σ_a π_a P(a, b) − π_b|`.
    pub fn stationarity_defect(&self) -> Rational {
        let k = self.alphabet_size();
        (0..k)
            .map(|b| {
                let flow: Rational = (0..k).map(|a| &self.initial[a] * &self.kernel[a][b]).sum();
                (flow - &self.initial[b]).abs()
            })
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Exact measure of the cylinder `[w]`.
    pub fn cylinder_measure(&self, w: &Word) -> Result<Rational> {
        let s = w.symbols();
        self.check_symbols(s)?;
        let mut m = self.initial[s[0] as usize].clone();
        for pair in s.windows(2) {
            let p = &self.kernel[pair[0] as usize][pair[1] as usize];
            if p.is_zero() {
                return Err(HitError::InvalidWord(format!(
                    "word {w} is not admissible for the measure"
                )));
            }
            m *= p;
        }
        Ok(m)
    }

    pub fn cylinder_measure_f64(&self, w: &Word) -> Result<f64> {
        let s = w.symbols();
        self.check_symbols(s)?;
        let mut m = self.initial_f[s[0] as usize];
        for pair in s.windows(2) {
            let p = self.kernel_f[pair[0] as usize][pair[1] as usize];
            if p == 0.0 {
                return Err(HitError::InvalidWord(format!(
                    "word {w} is not admissible for the measure"
                )));
            }
            m *= p;
        }
        Ok(m)
    }

    fn check_symbols(&self, s: &[Symbol]) -> Result<()> {
        if s.is_empty() {
            return Err(HitError::InvalidWord("empty word".into()));
        }
        if s.iter().any(|&x| x as usize >= self.alphabet_size()) {
            return Err(HitError::InvalidWord("symbol outside alphabet".into()));
        }
        Ok(())
    }

    /// Measure of a (prefix-free) union of cylinders.
    pub fn hole_measure(&self, hole: &HoleSpec) -> Result<Rational> {
        hole.words().iter().map(|w| self.cylinder_measure(w)).sum()
    }

    pub fn hole_measure_f64(&self, hole: &HoleSpec) -> Result<f64> {
        hole.words().iter().map(|w| self.cylinder_measure_f64(w)).sum()
    }

    /// Measure of a pattern in which `None` positions are unconstrained.
    pub fn pattern_measure(&self, pattern: &[Option<Symbol>]) -> Rational {
        let k = self.alphabet_size();
        let mut dist: Vec<Rational> = self.initial.clone();
        for (i, constraint) in pattern.iter().enumerate() {
            if i > 0 {
                dist = (0..k)
                    .map(|b| (0..k).map(|a| &dist[a] * &self.kernel[a][b]).sum())
                    .collect();
            }
            if let Some(c) = constraint {
                for (a, d) in dist.iter_mut().enumerate() {
                    if a != *c as usize {
                        *d = Rational::zero();
                    }
                }
            }
        }
        dist.into_iter().sum()
    }

    /// `P^m` in exact arithmetic.
    pub fn kernel_power(&self, m: usize) -> Vec<Vec<Rational>> {
        matrix_power(&self.kernel, m)
    }

    /// The time-reversed kernel `P*(b, a) = π_a P(a, b) / π_b`.
    pub fn reversed_kernel(&self) -> Vec<Vec<Rational>> {
        let k = self.alphabet_size();
        (0..k)
            .map(|b| {
                (0..k)
                    .map(|a| &self.initial[a] * &self.kernel[a][b] / &self.initial[b])
                    .collect()
            })
            .collect()
    }
}

fn parse_matrix(rows: &[&[&str]]) -> Result<Vec<Vec<Rational>>> {
    rows.iter()
        .map(|r| r.iter().map(|s| rational::parse_rational(s)).collect())
        .collect()
}

fn check_kernel(kernel: Vec<Vec<Rational>>) -> Result<Vec<Vec<Rational>>> {
    let k = kernel.len();
    if k < 2 || kernel.iter().any(|r| r.len() != k) {
        return Err(HitError::InvalidMeasure(
            "transition matrix must be square with at least two states".into(),
        ));
    }
    kernel
        .into_iter()
        .enumerate()
        .map(|(i, row)| normalized(row, &format!("row {i}")))
        .collect()
}

fn matrix_power(m: &[Vec<Rational>], e: usize) -> Vec<Vec<Rational>> {
    let k = m.len();
    let mut result: Vec<Vec<Rational>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect();
    for _ in 0..e {
        result = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| (0..k).map(|l| &result[i][l] * &m[l][j]).sum())
                    .collect()
            })
            .collect();
    }
    result
}

/// Solves `πP = π`, `Σπ = 1` by exact Gaussian elimination.
fn stationary_vector(p: &[Vec<Rational>]) -> Result<Vec<Rational>> {
    let k = p.len();
    // rows: equations; columns: unknowns π_0..π_{k-1}, then the right-hand side
    let mut a: Vec<Vec<Rational>> = (0..k - 1)
        .map(|j| {
            let mut row: Vec<Rational> = (0..k)
                .map(|i| {
                    let d = if i == j { Rational::one() } else { Rational::zero() };
                    &p[i][j] - d
                })
                .collect();
            row.push(Rational::zero());
            row
        })
        .collect();
    let mut ones = vec![Rational::one(); k];
    ones.push(Rational::one());
    a.push(ones);
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| HitError::InvalidMeasure("stationary vector is not unique".into()))?;
        a.swap(col, pivot);
        let pv = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &pv;
        }
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(pivot_row) {
                    *x -= &f * y;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[k].clone()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub passed: bool,
    /// Exact maximal defect `|Σ_a μ([a·w]) − μ([w])|` as `n/d`.
    pub max_defect_exact: String,
    pub max_defect: f64,
    pub words_checked: usize,
}

/// Verifies `Σ_a μ([a·w]) = μ([w])` for every admissible `w` of length `n`.
pub fn stationarity_check(
    mu: &MeasureModel,
    system: &SymbolicSystem,
    n: usize,
    cap: u128,
) -> Result<StationarityReport> {
    let words = enumerate_join_capped(system, n, cap)?;
    let mut worst = Rational::zero();
    for w in &words {
        let lhs: Rational = system
            .extensions(&[], 1)
            .into_iter()
            .filter(|a| system.admissible(a.symbols()[0], w.symbols()[0]))
            .map(|a| {
                let mut s = a.into_inner();
                s.extend_from_slice(w.symbols());
                mu.cylinder_measure(&Word::new(s))
            })
            .sum::<Result<Rational>>()?;
        let d = (lhs - mu.cylinder_measure(w)?).abs();
        if d > worst {
            worst = d;
        }
    }
    let max_defect = rational::to_f64(&worst);
    Ok(StationarityReport {
        passed: worst.is_zero() || max_defect <= PROBABILITY_TOLERANCE,
        max_defect_exact: rational::display(&worst),
        max_defect,
        words_checked: words.len(),
    })
}

/// φ-mixing coefficient at gap `k`; gaps below zero carry no information and
/// return the trivial bound 1.
pub fn phi_coefficient_exact(mu: &MeasureModel, k: i64, side: Side) -> f64 {
    if k < 0 {
        return 1.0;
    }
    rational::to_f64(&phi_coefficient_rational(mu, k as usize, side))
}

/// Exact rational form of [`phi_coefficient_exact`] for `k >= 0`.
pub fn phi_coefficient_rational(mu: &MeasureModel, k: usize, side: Side) -> Rational {
    if mu.is_memoryless() {
        return Rational::zero();
    }
    let base = match side {
        Side::Left => mu.kernel().to_vec(),
        Side::Right => mu.reversed_kernel(),
    };
    let power = matrix_power(&base, k + 1);
    let half = rational::ratio(1, 2);
    power
        .iter()
        .map(|row| {
            let l1: Rational = row
                .iter()
                .zip(mu.initial())
                .map(|(p, pi)| (p - pi).abs())
                .sum();
            l1 * &half
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Oracle for [`phi_coefficient_exact`]: the supremum of the mixing ratio over
/// explicit cylinder events with `A` of depth `n <= depth_cap` and `B` of depth
/// `<= depth_cap`, with every gap word enumerated.
///
/// For a fixed `B` the left ratio of a union `A = ⋃A_i` is at most the largest
/// ratio of its members, so `A` ranges over single cylinders; the best union
/// `B` of `j`-cylinders is then the set of cylinders with a positive (or,
/// for the other sign, negative) deviation. The right side is symmetric.
pub fn phi_coefficient_bruteforce(
    mu: &MeasureModel,
    system: &SymbolicSystem,
    k: usize,
    side: Side,
    depth_cap: usize,
) -> Result<f64> {
    if depth_cap == 0 {
        return Err(HitError::Precondition("depth cap must be positive".into()));
    }
    let cap = crate::symbolic::DEFAULT_ENUMERATION_CAP;
    crate::symbolic::check_enumeration(system.alphabet_size(), 2 * depth_cap + k, cap)?;
    let measure = |s: &[Symbol]| -> f64 {
        if s.windows(2).any(|w| !system.admissible(w[0], w[1])) {
            0.0
        } else {
            mu.cylinder_measure_f64(&Word::new(s.to_vec())).unwrap_or(0.0)
        }
    };
    let gaps = if k == 0 {
        vec![Vec::new()]
    } else {
        enumerate_join_capped(system, k, cap)?
            .into_iter()
            .map(Word::into_inner)
            .collect()
    };
    // μ(A ∩ T^{-n-k}B) for single cylinders A, B
    let joint = |a: &[Symbol], b: &[Symbol]| -> f64 {
        gaps.iter()
            .map(|g| {
                let mut s = a.to_vec();
                s.extend_from_slice(g);
                s.extend_from_slice(b);
                measure(&s)
            })
            .sum()
    };
    let mut best: f64 = 0.0;
    for n in 1..=depth_cap {
        let a_words = enumerate_join_capped(system, n, cap)?;
        for j in 1..=depth_cap {
            let b_words = enumerate_join_capped(system, j, cap)?;
            match side {
                Side::Left => {
                    for a in &a_words {
                        let ma = measure(a.symbols());
                        let (mut pos, mut neg) = (0.0, 0.0);
                        for b in &b_words {
                            let d = joint(a.symbols(), b.symbols()) - ma * measure(b.symbols());
                            if d > 0.0 {
                                pos += d;
                            } else {
                                neg -= d;
                            }
                        }
                        best = best.max(pos.max(neg) / ma);
                    }
                }
                Side::Right => {
                    for b in &b_words {
                        let mb = measure(b.symbols());
                        let (mut pos, mut neg) = (0.0, 0.0);
                        for a in &a_words {
                            let d = joint(a.symbols(), b.symbols()) - measure(a.symbols()) * mb;
                            if d > 0.0 {
                                pos += d;
                            } else {
                                neg -= d;
                            }
                        }
                        best = best.max(pos.max(neg) / mb);
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Asymptotic decay class of a coefficient sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum DecayClass {
    Exponential { rate: f64 },
    Polynomial { power: f64 },
    Undetermined,
}

/// Default RMS residual (in log space) above which a fit is rejected.
pub const DEFAULT_FIT_THRESHOLD: f64 = 0.05;

/// Classifies `values[i] = φ(i + 1)` by least-squares fits of `log φ` against
/// `k` and against `log k` over the tail half of the sequence.
pub fn classify_decay(values: &[f64], threshold: f64) -> Result<DecayClass> {
    if values.len() < 8 {
        return Err(HitError::Precondition(format!(
            "need at least 8 values to classify decay, got {}",
            values.len()
        )));
    }
    let start = values.len() / 2;
    let tail: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(start)
        .map(|(i, &v)| ((i + 1) as f64, v))
        .collect();
    if tail.iter().any(|&(_, v)| v <= 0.0) {
        // vanishing coefficients decay faster than any exponential
        return Ok(DecayClass::Exponential { rate: 0.0 });
    }
    let ks: Vec<f64> = tail.iter().map(|t| t.0).collect();
    let log_k: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let log_v: Vec<f64> = tail.iter().map(|t| t.1.ln()).collect();
    let exp_fit = linear_fit(&ks, &log_v);
    let poly_fit = linear_fit(&log_k, &log_v);
    let (exp_fit, poly_fit) = match (exp_fit, poly_fit) {
        (Some(e), Some(p)) => (e, p),
        _ => return Ok(DecayClass::Undetermined),
    };
    if exp_fit.rms > threshold && poly_fit.rms > threshold {
        return Ok(DecayClass::Undetermined);
    }
    if exp_fit.rms <= poly_fit.rms {
        Ok(DecayClass::Exponential {
            rate: exp_fit.slope.exp(),
        })
    } else {
        Ok(DecayClass::Polynomial {
            power: -poly_fit.slope,
        })
    }
}

/// The φ-mixing profile φ(1..=k_max) with its non-increasing envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiProfile {
    pub side: Side,
    pub values: Vec<f64>,
    /// Running maximum from the right: non-increasing and `>= values`.
    pub envelope: Vec<f64>,
    pub classification: DecayClass,
}

impl PhiProfile {
    pub fn compute(mu: &MeasureModel, k_max: usize, side: Side) -> Result<Self> {
        let values: Vec<f64> = (1..=k_max as i64)
            .map(|k| phi_coefficient_exact(mu, k, side))
            .collect();
        Self::from_values(values, side)
    }

    pub fn from_values(values: Vec<f64>, side: Side) -> Result<Self> {
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(HitError::Precondition("φ values must be finite and non-negative".into()));
        }
        let mut envelope = values.clone();
        for i in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[i] = envelope[i].max(envelope[i + 1]);
        }
        let classification = if values.len() >= 8 {
            classify_decay(&values, DEFAULT_FIT_THRESHOLD)?
        } else {
            DecayClass::Undetermined
        };
        Ok(Self {
            side,
            values,
            envelope,
            classification,
        })
    }

    /// Envelope value at gap `k` (1-based); 1 outside the stored range below,
    /// the last value beyond it.
    pub fn at(&self, k: i64) -> f64 {
        if k < 1 || self.envelope.is_empty() {
            1.0
        } else {
            let i = (k as usize - 1).min(self.envelope.len() - 1);
            self.envelope[i]
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,phi,envelope\n");
        for (i, (v, e)) in self.values.iter().zip(&self.envelope).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, v, e));
        }
        out
    }
}
