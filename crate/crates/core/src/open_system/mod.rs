//! Survival functions `μ(τ_U > t)` and escape rates for cylinder holes.
//!
//! The hole is compiled into a pattern automaton whose product with the symbol
//! chain gives a sub-stochastic matrix; transitions that complete an
//! occurrence of the hole are deleted. Reading `z_1 .. z_{t+n-1}` decides
//! whether `T^j z ∉ U` for every `1 <= j <= t`.

mod automaton;
mod monte_carlo;

use std::collections::HashMap;

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{HitError, Result};
use crate::measures::{phi_coefficient_exact, phi_coefficient_rational, MeasureModel};
use crate::rational::{self, Rational};
use crate::symbolic::{HoleSpec, Side, Symbol, SymbolicSystem};

pub use automaton::PatternAutomaton;
pub use monte_carlo::{monte_carlo_survival, sample_stationary, sup_distance, trial_rng};

/// Maximal number of product-chain states.
pub const DEFAULT_STATE_CAP: usize = 200_000;
/// Iteration cap for power iteration and log-survival propagation.
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct StateKey {
    node: u32,
    last: Symbol,
    /// Steps until a pending occurrence kills the path; 0 means none.
    pending: u16,
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    target: u32,
    from: Symbol,
    symbol: Symbol,
}

/// The open (sub-stochastic) chain of a hole.
#[derive(Clone, Debug)]
pub struct OpenChain {
    measure: MeasureModel,
    hole: HoleSpec,
    hole_measure: Rational,
    hole_measure_f: f64,
    keys: Vec<StateKey>,
    edges: Vec<Vec<Edge>>,
    escape: Vec<f64>,
    initial: Vec<Rational>,
    initial_f: Vec<f64>,
    initial_escape: f64,
}

/// Builds the open chain of `hole` under `mu`.
pub fn compile_hole(system: &SymbolicSystem, mu: &MeasureModel, hole: &HoleSpec) -> Result<OpenChain> {
    compile_hole_capped(system, mu, hole, DEFAULT_STATE_CAP)
}

pub fn compile_hole_capped(
    system: &SymbolicSystem,
    mu: &MeasureModel,
    hole: &HoleSpec,
    state_cap: usize,
) -> Result<OpenChain> {
    mu.check_compatible(system)?;
    if hole.words().is_empty() {
        return Err(HitError::InvalidHole("empty hole".into()));
    }
    for w in hole.words() {
        system.check_word(w)?;
    }
    let hole_measure = mu.hole_measure(hole)?;
    if hole_measure >= Rational::one() {
        return Err(HitError::Degenerate(
            "hole has full measure; every orbit escapes at the first step".into(),
        ));
    }
    let k = mu.alphabet_size();
    let n = hole.depth();
    let ac = PatternAutomaton::new(hole.words(), k);
    let memoryless = mu.is_memoryless();
    let kernel_f = mu.kernel_f64();

    // Moves to the next state; `None` when the transition completes an occurrence.
    let advance = |key: Option<StateKey>, b: Symbol| -> Option<StateKey> {
        let (node, pending) = key.map_or((ac.root(), 0), |s| (s.node, s.pending));
        let node = ac.step(node, b);
        let mut due = if pending > 0 { Some(pending - 1) } else { None };
        let len = ac.out_len(node);
        if len > 0 {
            let d = (n - len) as u16;
            due = Some(due.map_or(d, |p| p.min(d)));
        }
        match due {
            Some(0) => None,
            other => Some(StateKey {
                node,
                last: if memoryless { 0 } else { b },
                pending: other.unwrap_or(0),
            }),
        }
    };

    let mut index: HashMap<StateKey, u32> = HashMap::new();
    let mut keys: Vec<StateKey> = Vec::new();
    let mut intern = |key: StateKey, keys: &mut Vec<StateKey>| -> Result<u32> {
        if let Some(&id) = index.get(&key) {
            return Ok(id);
        }
        if keys.len() >= state_cap {
            return Err(HitError::CapExceeded {
                what: "product-chain states (use Monte Carlo instead)",
                requested: state_cap as u128 + 1,
                cap: state_cap as u128,
            });
        }
        let id = keys.len() as u32;
        index.insert(key, id);
        keys.push(key);
        Ok(id)
    };

    let mut initial_pairs: Vec<(u32, Symbol)> = Vec::new();
    let mut initial_escape = 0.0;
    for a in 0..k as Symbol {
        match advance(None, a) {
            Some(key) => initial_pairs.push((intern(key, &mut keys)?, a)),
            None => initial_escape += mu.initial_f64()[a as usize],
        }
    }

    let mut edges: Vec<Vec<Edge>> = Vec::new();
    let mut escape: Vec<f64> = Vec::new();
    let mut cursor = 0;
    while cursor < keys.len() {
        let key = keys[cursor];
        let from = key.last;
        let mut out = Vec::new();
        let mut esc = 0.0;
        for b in 0..k as Symbol {
            let w = kernel_f[from as usize][b as usize];
            if w == 0.0 {
                continue;
            }
            match advance(Some(key), b) {
                Some(next) => out.push(Edge {
                    target: intern(next, &mut keys)?,
                    from,
                    symbol: b,
                }),
                None => esc += w,
            }
        }
        edges.push(out);
        escape.push(esc);
        cursor += 1;
    }

    let mut initial = vec![Rational::zero(); keys.len()];
    for &(state, a) in &initial_pairs {
        initial[state as usize] += &mu.initial()[a as usize];
    }
    let initial_f = initial.iter().map(rational::to_f64).collect();
    Ok(OpenChain {
        measure: mu.clone(),
        hole: hole.clone(),
        hole_measure_f: rational::to_f64(&hole_measure),
        hole_measure,
        keys,
        edges,
        escape,
        initial,
        initial_f,
        initial_escape,
    })
}

/// Per-step log-mass propagation of the normalized survival vector.
struct Propagator<'a> {
    chain: &'a OpenChain,
    v: Vec<f64>,
    next: Vec<f64>,
    dead: bool,
}

impl<'a> Propagator<'a> {
    fn new(chain: &'a OpenChain) -> Self {
        let mass: f64 = chain.initial_f.iter().sum();
        let v = chain.initial_f.iter().map(|x| x / mass).collect();
        Self {
            chain,
            v,
            next: vec![0.0; chain.keys.len()],
            dead: mass == 0.0,
        }
    }

    /// Advances one symbol; returns `ln` of the surviving fraction.
    fn step(&mut self) -> f64 {
        if self.dead {
            return f64::NEG_INFINITY;
        }
        let kernel = self.chain.measure.kernel_f64();
        self.next.iter_mut().for_each(|x| *x = 0.0);
        let mut killed = 0.0;
        for (i, &vi) in self.v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            killed += vi * self.chain.escape[i];
            for e in &self.chain.edges[i] {
                self.next[e.target as usize] += vi * kernel[e.from as usize][e.symbol as usize];
            }
        }
        let mass: f64 = self.next.iter().sum();
        if mass <= 0.0 {
            self.dead = true;
            return f64::NEG_INFINITY;
        }
        for x in self.next.iter_mut() {
            *x /= mass;
        }
        std::mem::swap(&mut self.v, &mut self.next);
        // the escaping fraction is computed directly for relative accuracy
        (-killed.min(1.0)).ln_1p()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRate {
    pub hole: Vec<String>,
    pub mu_u: f64,
    pub rho: f64,
    pub lambda: f64,
    pub iterations: usize,
}

impl OpenChain {
    pub fn num_states(&self) -> usize {
        self.keys.len()
    }

    pub fn hole(&self) -> &HoleSpec {
        &self.hole
    }

    pub fn hole_depth(&self) -> usize {
        self.hole.depth()
    }

    pub fn measure(&self) -> &MeasureModel {
        &self.measure
    }

    pub fn hole_measure(&self) -> &Rational {
        &self.hole_measure
    }

    pub fn hole_measure_f64(&self) -> f64 {
        self.hole_measure_f
    }

    /// Row sums of the sub-stochastic matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        let kernel = self.measure.kernel_f64();
        self.edges
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| kernel[e.from as usize][e.symbol as usize])
                    .sum()
            })
            .collect()
    }

    /// Number of matrix steps after the initial read for survival at `t >= 1`.
    fn steps_for(&self, t: u64) -> u64 {
        t + self.hole_depth() as u64 - 2
    }

    /// `ln μ(τ_U > t)` for each requested `t`.
    ///
    /// Once the per-step log increment has settled to machine precision the
    /// remaining steps are extrapolated linearly, which makes very large `t`
    /// affordable.
    pub fn log_survival_many(&self, ts: &[u64]) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by_key(|&i| ts[i]);
        let mut out = vec![0.0; ts.len()];
        let mut prop = Propagator::new(self);
        let mut log_mass = (-self.initial_escape.min(1.0)).ln_1p();
        let mut done: u64 = 0;
        let mut recent: Vec<f64> = Vec::new();
        let mut stable_run = 0usize;
        let mut slope: Option<f64> = None;
        for i in order {
            let t = ts[i];
            if t == 0 {
                out[i] = 0.0;
                continue;
            }
            let target = self.steps_for(t);
            while done < target && slope.is_none() {
                if done as usize >= DEFAULT_MAX_ITERATIONS * 10 {
                    return Err(HitError::NonConvergence(format!(
                        "log-survival increments did not settle within {done} steps"
                    )));
                }
                let inc = prop.step();
                done += 1;
                log_mass += inc;
                if !inc.is_finite() {
                    break;
                }
                // pending kills of short matches make the first increments artificially flat
                let warm = done > 2 * self.hole_depth() as u64;
                if let (true, Some(&prev)) = (warm, recent.last()) {
                    let tol = (1e-12 * inc.abs()).max(4e-16);
                    if (inc - prev).abs() <= tol {
                        stable_run += 1;
                    } else {
                        stable_run = 0;
                    }
                }
                recent.push(inc);
                if recent.len() > 10 {
                    recent.remove(0);
                }
                if stable_run >= 10 {
                    slope = Some(recent.iter().sum::<f64>() / recent.len() as f64);
                }
            }
            out[i] = if log_mass == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if done >= target {
                log_mass
            } else {
                log_mass + (target - done) as f64 * slope.unwrap_or(f64::NEG_INFINITY)
            };
        }
        Ok(out)
    }

    pub fn log_survival(&self, t: u64) -> Result<f64> {
        Ok(self.log_survival_many(&[t])?[0])
    }

    /// `μ(τ_U > t)` in floating point.
    pub fn survival(&self, t: u64) -> f64 {
        self.survival_curve(t).survival[t as usize]
    }

    /// Survival for `t = 0..=t_max` by plain iterated vector–matrix products.
    pub fn survival_curve(&self, t_max: u64) -> SurvivalCurve {
        let kernel = self.measure.kernel_f64();
        let mut v = self.initial_f.clone();
        let mut next = vec![0.0; v.len()];
        let mut values = vec![1.0];
        let mut steps_done = 0;
        for t in 1..=t_max {
            let target = self.steps_for(t);
            while steps_done < target {
                next.iter_mut().for_each(|x| *x = 0.0);
                for (i, &vi) in v.iter().enumerate() {
                    if vi != 0.0 {
                        for e in &self.edges[i] {
                            next[e.target as usize] += vi * kernel[e.from as usize][e.symbol as usize];
                        }
                    }
                }
                std::mem::swap(&mut v, &mut next);
                steps_done += 1;
            }
            values.push(v.iter().sum::<f64>().clamp(0.0, 1.0));
        }
        SurvivalCurve::from_values((0..=t_max).collect(), values)
    }

    /// Exact `μ(τ_U > t)` for each requested `t`.
    pub fn survival_exact_many(&self, ts: &[u64]) -> Vec<Rational> {
        let kernel = self.measure.kernel();
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by_key(|&i| ts[i]);
        let mut out = vec![Rational::one(); ts.len()];
        let mut v = self.initial.clone();
        let mut done = 0;
        for i in order {
            if ts[i] == 0 {
                continue;
            }
            let target = self.steps_for(ts[i]);
            while done < target {
                let mut next = vec![Rational::zero(); v.len()];
                for (j, vj) in v.iter().enumerate() {
                    if vj.is_zero() {
                        continue;
                    }
                    for e in &self.edges[j] {
                        next[e.target as usize] += vj * &kernel[e.from as usize][e.symbol as usize];
                    }
                }
                v = next;
                done += 1;
            }
            out[i] = v.iter().sum();
        }
        out
    }

    pub fn survival_exact(&self, t: u64) -> Rational {
        self.survival_exact_many(&[t]).remove(0)
    }

    /// Escape rate `ρ(U) = −ln λ` with `tol = 1e-12` by default.
    pub fn escape_rate(&self, tol: f64) -> Result<EscapeRate> {
        self.escape_rate_with(tol, DEFAULT_MAX_ITERATIONS)
    }

    /// Power iteration on the survival vector. The per-step decay `ρ_k = −ln λ_k`
    /// must change by less than `tol·min(ρ_k, 1)` for 10 consecutive iterations
    /// and agree with the log-survival slope over `[T, 2T]` within ten times
    /// that. For `ρ >= 1` this is the relative change of `λ_k`; for small holes
    /// it is relative to `ρ` itself, which `λ ≈ 1` would otherwise hide.
    pub fn escape_rate_with(&self, tol: f64, max_iterations: usize) -> Result<EscapeRate> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(HitError::Precondition("tolerance must be positive".into()));
        }
        let mut prop = Propagator::new(self);
        let mut history = vec![0.0f64];
        let mut prev_rho = f64::NAN;
        let mut run = 0;
        for k in 1..=max_iterations {
            let inc = prop.step();
            if !inc.is_finite() {
                return Err(HitError::Degenerate(
                    "all mass escapes in finitely many steps".into(),
                ));
            }
            history.push(history[k - 1] + inc);
            let rho = -inc;
            if (rho - prev_rho).abs() < tol * rho.min(1.0) {
                run += 1;
            } else {
                run = 0;
            }
            prev_rho = rho;
            if run >= 10 && k % 2 == 0 {
                let half = k / 2;
                let slope_rho = -(history[k] - history[half]) / half as f64;
                if (slope_rho - rho).abs() <= 10.0 * tol * rho.min(1.0) {
                    return Ok(EscapeRate {
                        hole: self.hole.words().iter().map(|w| w.to_string()).collect(),
                        mu_u: self.hole_measure_f,
                        rho,
                        lambda: (-rho).exp(),
                        iterations: k,
                    });
                }
            }
        }
        Err(HitError::NonConvergence(format!(
            "power iteration did not converge within {max_iterations} iterations"
        )))
    }
}

/// Survival values at increasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t_values: Vec<u64>,
    pub survival: Vec<f64>,
    pub log_survival: Vec<f64>,
}

impl SurvivalCurve {
    pub fn from_values(t_values: Vec<u64>, survival: Vec<f64>) -> Self {
        let log_survival = survival.iter().map(|s| s.ln()).collect();
        Self {
            t_values,
            survival,
            log_survival,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,survival,log_survival\n");
        for i in 0..self.t_values.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.t_values[i], self.survival[i], self.log_survival[i]
            ));
        }
        out
    }
}

/// Gap and block parameters of the product relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductRelationParams {
    pub s: u64,
    pub t: u64,
    pub k: u64,
    pub gap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductRelationReport {
    pub params: ProductRelationParams,
    pub n: usize,
    pub q: u64,
    pub eta: f64,
    pub mu_u: f64,
    pub phi: f64,
    pub delta: f64,
    pub exact: bool,
    /// `|S(t+s) − S(t)S(s)| <= δ·S(t−Δ)`.
    pub product_bound: InequalityCheck,
    /// `|S(ks)^{1/(k−2)} − S(s)| <= δ^η`.
    pub kfold: InequalityCheck,
}

/// Evaluates the one-step product inequality and the implied `k`-fold
/// relation for the survival function of `chain`, with
/// `δ = 2(Δμ(U) + φ(Δ−n))` and `η = q/(q+1)`, `s = qΔ`.
pub fn product_relation_residual(
    chain: &OpenChain,
    params: ProductRelationParams,
    exact: bool,
) -> Result<ProductRelationReport> {
    let ProductRelationParams { s, t, k, gap } = params;
    if gap == 0 || 2 * gap >= s {
        return Err(HitError::Precondition(format!("need 0 < Δ < s/2, got Δ={gap}, s={s}")));
    }
    if s % gap != 0 {
        return Err(HitError::Precondition(format!("s={s} is not a multiple of Δ={gap}")));
    }
    if t <= s {
        return Err(HitError::Precondition(format!("need s < t, got s={s}, t={t}")));
    }
    if k < 3 {
        return Err(HitError::Precondition(format!("need k >= 3, got {k}")));
    }
    let n = chain.hole_depth();
    let q = s / gap;
    let eta = q as f64 / (q as f64 + 1.0);
    let phi_gap = gap as i64 - n as i64;
    let mu = chain.measure();
    let times = [s, t, t + s, t - gap, k * s];

    let (product_bound, delta, phi) = if exact {
        let sv = chain.survival_exact_many(&times);
        let phi_r = if phi_gap < 0 {
            Rational::one()
        } else {
            phi_coefficient_rational(mu, phi_gap as usize, Side::Left)
        };
        let delta_r = rational::int(2) * (rational::int(gap as i64) * chain.hole_measure() + &phi_r);
        let lhs = (&sv[2] - &sv[1] * &sv[0]).abs();
        let rhs = &delta_r * &sv[3];
        let check = InequalityCheck {
            lhs: rational::to_f64(&lhs),
            rhs: rational::to_f64(&rhs),
            slack: rational::to_f64(&(&rhs - &lhs)),
            passed: lhs <= rhs,
        };
        (check, rational::to_f64(&delta_r), rational::to_f64(&phi_r))
    } else {
        let sv = chain.log_survival_many(&times)?;
        let sv: Vec<f64> = sv.iter().map(|x| x.exp()).collect();
        let phi = phi_coefficient_exact(mu, phi_gap, Side::Left);
        let delta = 2.0 * (gap as f64 * chain.hole_measure_f64() + phi);
        let lhs = (sv[2] - sv[1] * sv[0]).abs();
        let rhs = delta * sv[3];
        let check = InequalityCheck {
            lhs,
            rhs,
            slack: rhs - lhs,
            passed: lhs <= rhs + 4.0 * f64::EPSILON,
        };
        (check, delta, phi)
    };

    let ln = chain.log_survival_many(&[s, k * s])?;
    let lhs = ((ln[1] / (k - 2) as f64).exp() - ln[0].exp()).abs();
    let rhs = delta.powf(eta);
    let kfold = InequalityCheck {
        lhs,
        rhs,
        slack: rhs - lhs,
        passed: lhs <= rhs,
    };
    Ok(ProductRelationReport {
        params,
        n,
        q,
        eta,
        mu_u: chain.hole_measure_f64(),
        phi,
        delta,
        exact,
        product_bound,
        kfold,
    })
}
