//! Numerical checklist for the hypotheses of the hitting-time limit theorem:
//! outer-approximation decay (N1), product structure at periodic points (N2),
//! the polynomial/exponential case conditions and `θ < 1/2`.

use serde::{Deserialize, Serialize};

use super::{pattern_for_shifts, theta};
use crate::error::{HitError, Result};
use crate::measures::{DecayClass, MeasureModel, PhiProfile};
use crate::numeric::linear_fit;
use crate::rational::{self, Rational};
use crate::symbolic::{
    cylinder_around, intersected_cylinder, outer_j_approximation, HoleSpec, PointSpec, Side,
    SymbolicSystem,
};

/// Schedule `a_n` bounding the largest index `i_k <= a_n·n` in (N2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ASchedule {
    /// `a_n = a`.
    Constant { a: f64 },
    /// `a_n = n^{-(1-ξ)}`.
    Power { xi: f64 },
}

impl ASchedule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            ASchedule::Constant { a } => a,
            ASchedule::Power { xi } => (n as f64).powf(-(1.0 - xi)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// `K` in (N1).
    pub k_factor: f64,
    /// Defaults to `a = 0.5` for exponential φ and `ξ = 0.5` for polynomial φ.
    pub a_schedule: Option<ASchedule>,
    pub n2_tol: f64,
    pub phi_k_max: usize,
    /// Half-width added around the fitted decay rate or power.
    pub fit_margin: f64,
}

impl Default for HypothesisParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            epsilon: 0.5,
            beta: 0.9,
            k_factor: 1.0,
            a_schedule: None,
            n2_tol: 1e-9,
            phi_k_max: 30,
            fit_margin: 0.01,
        }
    }
}

impl HypothesisParams {
    fn validate(&self) -> Result<()> {
        let eps_max = self.alpha.min(1.0);
        if !(self.epsilon > 0.0 && self.epsilon < eps_max) {
            return Err(HitError::Precondition(format!(
                "epsilon must lie in (0, min(1, alpha)) = (0, {eps_max}), got {}",
                self.epsilon
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(HitError::Precondition(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.k_factor > 0.0 && self.k_factor <= 1.0) {
            return Err(HitError::Precondition(format!("K must lie in (0, 1], got {}", self.k_factor)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct N1Report {
    pub n: usize,
    pub k_factor: f64,
    pub j_max: usize,
    pub gamma_prime: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct N2Report {
    pub applicable: bool,
    pub a_schedule: Option<ASchedule>,
    /// `(n, a_n, number of index vectors, max relative defect)`.
    pub per_n: Vec<(usize, f64, usize, f64)>,
    pub max_defect: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum CaseReport {
    B1 {
        gamma_prime: f64,
        gamma_double_prime: f64,
        m: f64,
        m_required: f64,
        epsilon: f64,
        beta: f64,
        pass: bool,
    },
    B2 {
        xi1: f64,
        xi2: f64,
        /// The φ-decay condition is void in the exponential case.
        phi_condition_vacuous: bool,
        pass: bool,
    },
    Undetermined {
        pass: bool,
    },
}

impl CaseReport {
    pub fn pass(&self) -> bool {
        match self {
            CaseReport::B1 { pass, .. } | CaseReport::B2 { pass, .. } | CaseReport::Undetermined { pass } => *pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub phi_class: DecayClass,
    pub n1: N1Report,
    pub n2: N2Report,
    pub case: CaseReport,
    pub theta_below_half: Option<bool>,
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// `m >= (1−ε)/(βε)`; returns the required power and the verdict.
pub fn b1_condition(m: f64, epsilon: f64, beta: f64) -> (f64, bool) {
    let required = (1.0 - epsilon) / (beta * epsilon);
    (required, m >= required)
}

/// Case (B1)/(B2) from a φ profile and the measures `(n, μ(U_n))`.
pub fn evaluate_case(
    phi: &PhiProfile,
    mu_values: &[(usize, f64)],
    epsilon: f64,
    beta: f64,
    margin: f64,
) -> Result<CaseReport> {
    if mu_values.len() < 2 {
        return Err(HitError::Precondition("need at least two values of μ(U_n)".into()));
    }
    let ns: Vec<f64> = mu_values.iter().map(|v| v.0 as f64).collect();
    let logs: Vec<f64> = mu_values.iter().map(|v| v.1.ln()).collect();
    Ok(match phi.classification {
        DecayClass::Exponential { .. } => {
            let fit = linear_fit(&ns, &logs)
                .ok_or_else(|| HitError::Precondition("degenerate n range".into()))?;
            let rate = fit.slope.exp();
            let (xi1, xi2) = (rate - margin, rate + margin);
            CaseReport::B2 {
                xi1,
                xi2,
                phi_condition_vacuous: true,
                pass: xi1 > 0.0 && xi2 < 1.0 && fit.rms <= 0.1,
            }
        }
        DecayClass::Polynomial { power } => {
            let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
            let fit = linear_fit(&log_n, &logs)
                .ok_or_else(|| HitError::Precondition("degenerate n range".into()))?;
            let gamma = -fit.slope;
            let (m_required, m_ok) = b1_condition(power, epsilon, beta);
            let gamma_prime = gamma - margin;
            CaseReport::B1 {
                gamma_prime,
                gamma_double_prime: gamma + margin,
                m: power,
                m_required,
                epsilon,
                beta,
                pass: gamma_prime > 1.0 && m_ok,
            }
        }
        DecayClass::Undetermined => CaseReport::Undetermined { pass: false },
    })
}

fn subsets_of_multiples(m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u64..(1u64 << m)).map(move |mask| {
        std::iter::once(0)
            .chain((1..=m).filter(|i| mask & (1 << (i - 1)) != 0))
            .collect()
    })
}

/// Runs the checklist for the cylinders `U_n` around `z`.
pub fn check_hypotheses(
    z: &PointSpec,
    mu: &MeasureModel,
    system: &SymbolicSystem,
    n_range: &[usize],
    params: &HypothesisParams,
) -> Result<HypothesisReport> {
    params.validate()?;
    super::check_range(n_range)?;
    if n_range.len() < 2 {
        return Err(HitError::Precondition("need at least two values of n".into()));
    }
    mu.check_compatible(system)?;
    let z = z.clone().validated(system)?;
    let period = z.exact_period();
    let mut reasons = Vec::new();

    let phi = PhiProfile::compute(mu, params.phi_k_max, Side::Left)?;

    // (N1)
    let n = *n_range.last().unwrap();
    let n_eff = n;
    let j_max = ((params.k_factor * n_eff as f64).floor() as usize).min(n).max(1);
    let hole = HoleSpec::single(system, cylinder_around(&z, n))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 1..=j_max {
        let approx = outer_j_approximation(&hole, j, Side::Left, system)?;
        let m: Rational = approx.iter().map(|w| mu.cylinder_measure(w)).sum::<Result<_>>()?;
        xs.push((j as f64).ln());
        ys.push(rational::ln(&m));
    }
    let gamma_prime = linear_fit(&xs, &ys).map_or(f64::NAN, |f| -f.slope);
    let n1 = N1Report {
        n,
        k_factor: params.k_factor,
        j_max,
        gamma_prime,
        pass: gamma_prime > 1.0,
    };
    if !n1.pass {
        reasons.push(format!("(N1): fitted γ′ = {gamma_prime} is not > 1"));
    }

    // (N2)
    let schedule = params.a_schedule.unwrap_or(match phi.classification {
        DecayClass::Polynomial { .. } => ASchedule::Power { xi: 0.5 },
        _ => ASchedule::Constant { a: 0.5 },
    });
    let n2 = match period {
        None => N2Report {
            applicable: false,
            a_schedule: None,
            per_n: Vec::new(),
            max_defect: 0.0,
            pass: true,
        },
        Some(p) => {
            let mut per_n = Vec::new();
            let mut max_defect: f64 = 0.0;
            for &n in n_range {
                let a_n = schedule.at(n);
                let m = ((a_n * n as f64).floor() as usize / p).min(16);
                let w = cylinder_around(&z, n);
                let mut worst: f64 = 0.0;
                let mut count = 0;
                for idx in subsets_of_multiples(m) {
                    let shifts: Vec<usize> = idx.iter().map(|i| i * p).collect();
                    let last = *idx.last().unwrap();
                    let target = mu.cylinder_measure(&intersected_cylinder(&z, n, p, last)?)?;
                    let got = match pattern_for_shifts(w.symbols(), &shifts) {
                        Some(pat) => mu.pattern_measure(&pat),
                        None => Rational::from_integer(0.into()),
                    };
                    let d = rational::to_f64(&((got - &target) / &target)).abs();
                    worst = worst.max(d);
                    count += 1;
                }
                max_defect = max_defect.max(worst);
                per_n.push((n, a_n, count, worst));
            }
            N2Report {
                applicable: true,
                a_schedule: Some(schedule),
                pass: max_defect <= params.n2_tol,
                per_n,
                max_defect,
            }
        }
    };
    if !n2.pass {
        reasons.push(format!("(N2): max relative defect {} exceeds {}", n2.max_defect, params.n2_tol));
    }

    // (B1)/(B2)
    let mu_values: Vec<(usize, f64)> = n_range
        .iter()
        .map(|&n| Ok((n, mu.cylinder_measure_f64(&cylinder_around(&z, n))?)))
        .collect::<Result<_>>()?;
    let case = evaluate_case(&phi, &mu_values, params.epsilon, params.beta, params.fit_margin)?;
    match &case {
        CaseReport::B1 { pass: false, m, m_required, .. } => reasons.push(format!(
            "(B1): requires m >= {m_required:.4} (or γ′ > 1), fitted m = {m}"
        )),
        CaseReport::B2 { pass: false, xi1, xi2, .. } => {
            reasons.push(format!("(B2): decay bounds ξ₁ = {xi1}, ξ₂ = {xi2} are not in (0, 1)"))
        }
        CaseReport::Undetermined { .. } => reasons.push("φ decay class undetermined".into()),
        _ => {}
    }

    let theta_below_half = match period {
        Some(p) => Some(theta(&z, p, mu, n_range)?.below_half),
        None => None,
    };
    if theta_below_half == Some(false) {
        reasons.push("θ is not less than 1/2".into());
    }

    let pass = n1.pass && n2.pass && case.pass() && theta_below_half != Some(false);
    Ok(HypothesisReport {
        phi_class: phi.classification,
        n1,
        n2,
        case,
        theta_below_half,
        pass,
        reasons,
    })
}
