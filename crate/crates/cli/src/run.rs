//! Dispatch from a validated configuration to the engine.

use hitlab_core::ball::{l_ball, theta_ball, BallCurve};
use hitlab_core::measures::PhiProfile;
use hitlab_core::open_system::{monte_carlo_survival, product_relation_residual, sup_distance};
use hitlab_core::rational;
use hitlab_core::recurrence::{
    check_hypotheses, l_alpha_s, l_zero, localized_escape_rate, theta, union_measure_check_capped, Alpha,
    ThetaEstimate,
};
use hitlab_core::{compile_hole, HitError, Side, SurvivalCurve};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, Mode, Prepared};

/// Results of one run. `error` holds the first failure; whatever was computed
/// before it is kept.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: serde_json::Map<String, Value>,
    pub csv: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub error: Option<HitError>,
}

impl Outcome {
    fn insert(&mut self, key: &str, value: impl serde::Serialize) {
        let v = serde_json::to_value(value).expect("results are serializable");
        self.results.insert(key.to_string(), v);
    }

    fn fail(&mut self, context: &str, e: HitError) {
        self.warnings.push(format!("{context}: {e}"));
        if self.error.is_none() {
            self.error = Some(e);
        }
    }
}

fn theta_csv(t: &ThetaEstimate) -> String {
    let mut out = String::from("n,ratio,ratio_exact\n");
    for p in &t.per_n {
        out.push_str(&format!("{},{},{}\n", p.n, p.ratio, p.ratio_exact));
    }
    out
}

fn label(x: f64) -> String {
    x.to_string().replace('.', "p")
}

pub fn execute(config: &ExperimentConfig, prepared: &Prepared) -> Outcome {
    let mut out = Outcome::default();
    let r = match prepared.kind {
        Kind::Survival => survival(config, prepared, &mut out),
        Kind::EscapeRate => escape_rate(config, prepared, &mut out),
        Kind::Theta => theta_kind(config, prepared, &mut out),
        Kind::Lcurve => lcurve(config, prepared, &mut out),
        Kind::Lzero => lzero(config, prepared, &mut out),
        Kind::UnionCheck => union_check(config, prepared, &mut out),
        Kind::Hypotheses => hypotheses(config, prepared, &mut out),
        Kind::Phi => phi(config, prepared, &mut out),
        Kind::Ball => ball(config, prepared, &mut out),
    };
    if let Err(e) = r {
        out.fail(prepared.kind.name(), e);
    }
    out
}

type Step = Result<(), HitError>;

fn survival(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let hole = p.hole.as_ref().expect("validated");
    let t_max = config.grids.t_max.expect("resolved");
    let chain = compile_hole(&p.system, &p.measure, hole)?;
    out.insert("states", chain.num_states());
    out.insert("mu_u", chain.hole_measure_f64());
    out.insert("mu_u_exact", rational::display(chain.hole_measure()));
    let curve = match config.mode {
        Mode::Exact => {
            let ts: Vec<u64> = (0..=t_max).collect();
            let exact = chain.survival_exact_many(&ts);
            out.insert("survival_exact", exact.iter().map(rational::display).collect::<Vec<_>>());
            SurvivalCurve::from_values(ts, exact.iter().map(rational::to_f64).collect())
        }
        Mode::Float => chain.survival_curve(t_max),
    };
    out.csv.push(("survival.csv".into(), curve.to_csv()));
    if config.monte_carlo.trials > 0 {
        let mc = monte_carlo_survival(
            &p.system,
            &p.measure,
            hole,
            t_max,
            config.monte_carlo.trials,
            config.master_seed,
        )?;
        let d = sup_distance(&mc.survival, &curve.survival);
        let bound = 3.0 / (config.monte_carlo.trials as f64).sqrt();
        if d > bound {
            out.warnings.push(format!("Monte Carlo sup distance {d} exceeds 3/sqrt(N) = {bound}"));
        }
        out.insert("monte_carlo", json!({
            "trials": config.monte_carlo.trials,
            "sup_distance": d,
            "bound": bound,
            "survival": mc.survival,
        }));
        out.csv.push(("survival_mc.csv".into(), mc.to_csv()));
    }
    out.insert("survival", &curve);
    let mut reports = Vec::new();
    for params in &config.grids.product_relation {
        match product_relation_residual(&chain, *params, config.mode == Mode::Exact) {
            Ok(r) => {
                if !r.product_bound.passed {
                    out.warnings.push(format!("product relation fails at {params:?}"));
                }
                reports.push(r);
            }
            Err(e) => out.fail(&format!("product relation {params:?}"), e),
        }
    }
    if !reports.is_empty() {
        out.insert("product_relation", reports);
    }
    Ok(())
}

fn escape_rate(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let chain = compile_hole(&p.system, &p.measure, p.hole.as_ref().expect("validated"))?;
    let e = chain.escape_rate(config.curve.escape_tol)?;
    out.insert("escape_rate", e);
    Ok(())
}

fn theta_kind(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let t = theta(
        p.point.as_ref().expect("validated"),
        config.grids.p.expect("resolved"),
        &p.measure,
        config.grids.n_range.as_deref().expect("resolved"),
    )?;
    if !t.below_half {
        out.warnings.push(format!("θ = {} is not below 1/2", t.limit_exact));
    }
    out.csv.push(("theta.csv".into(), theta_csv(&t)));
    out.insert("theta", t);
    Ok(())
}

fn lcurve(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let z = p.point.as_ref().expect("validated");
    let n_range = config.grids.n_range.as_deref().expect("resolved");
    let mut curves = Vec::new();
    for &alpha in config.grids.alpha.as_deref().expect("resolved") {
        let ss: &[f64] = match alpha {
            Alpha::Infinity => &[1.0],
            Alpha::Finite(_) => config.grids.s.as_deref().expect("resolved"),
        };
        for &s in ss {
            let r = match alpha {
                Alpha::Finite(a) => l_alpha_s(z, a, s, &p.measure, &p.system, n_range, &config.curve),
                Alpha::Infinity => localized_escape_rate(z, &p.measure, &p.system, n_range, &config.curve),
            };
            let name = match alpha {
                Alpha::Finite(a) => format!("lcurve_alpha{}_s{}.csv", label(a), label(s)),
                Alpha::Infinity => "lcurve_alphainf.csv".to_string(),
            };
            match r {
                Ok(c) => {
                    if !c.converged {
                        out.warnings.push(format!("{name}: extrapolation did not converge"));
                    }
                    out.csv.push((name, c.to_csv()));
                    curves.push(c);
                }
                Err(e) => out.fail(&name, e),
            }
        }
    }
    out.insert("curves", curves);
    Ok(())
}

fn lzero(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let c = l_zero(
        p.point.as_ref().expect("validated"),
        config.grids.s_range.as_deref().expect("resolved"),
        &p.measure,
        &p.system,
        config.grids.n_range.as_deref().expect("resolved"),
        &config.curve,
    )?;
    out.csv.push(("lzero.csv".into(), c.to_csv()));
    out.insert("lzero", c);
    Ok(())
}

fn union_check(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let z = p.point.as_ref().expect("validated");
    let period = config.grids.p.expect("resolved");
    let mut rows = Vec::new();
    let mut csv = String::from("n,k,exact,prediction,defect,decreasing,disjoint_shifts\n");
    for &n in config.grids.n_range.as_deref().expect("resolved") {
        for &k in config.grids.k.as_deref().expect("resolved") {
            match union_measure_check_capped(z, period, n, k, &p.measure, &p.system, config.enumeration_cap as u128) {
                Ok(u) => {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        u.n,
                        u.k,
                        u.exact_rational,
                        u.prediction_rational,
                        u.defect_rational,
                        u.decreasing,
                        u.disjoint_shifts
                    ));
                    if u.decreasing && u.disjoint_shifts && u.defect != 0.0 {
                        out.warnings.push(format!("union identity fails at n={n}, k={k}"));
                    }
                    rows.push(u);
                }
                Err(e) => out.fail(&format!("union check n={n} k={k}"), e),
            }
        }
    }
    out.csv.push(("union_check.csv".into(), csv));
    out.insert("union_check", rows);
    Ok(())
}

fn hypotheses(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let r = check_hypotheses(
        p.point.as_ref().expect("validated"),
        &p.measure,
        &p.system,
        config.grids.n_range.as_deref().expect("resolved"),
        &config.hypotheses,
    )?;
    out.warnings.extend(r.reasons.iter().cloned());
    out.insert("hypotheses", r);
    Ok(())
}

fn phi(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let k_max = config.grids.k_max.expect("resolved");
    let sides = match config.side {
        Some(s) => vec![s],
        None => vec![Side::Left, Side::Right],
    };
    let mut profiles = Vec::new();
    for side in sides {
        let prof = PhiProfile::compute(&p.measure, k_max, side)?;
        let name = match side {
            Side::Left => "phi_left.csv",
            Side::Right => "phi_right.csv",
        };
        out.csv.push((name.into(), prof.to_csv()));
        profiles.push(prof);
    }
    out.insert("phi", profiles);
    Ok(())
}

fn ball(config: &ExperimentConfig, p: &Prepared, out: &mut Outcome) -> Step {
    let cfg = config.ball.as_ref().expect("resolved");
    let center = p.center.as_ref().expect("validated");
    if let Some(period) = hitlab_core::ball::doubling_period(center, 64) {
        let t = theta_ball(center, period, &p.radii, &p.measure, cfg.options.metric)?;
        if !t.below_half {
            out.warnings.push(format!("ball θ = {} is not below 1/2", t.limit_exact));
        }
        out.insert("theta", t);
    }
    let mut curves: Vec<BallCurve> = Vec::new();
    for &alpha in config.grids.alpha.as_deref().expect("resolved") {
        let Alpha::Finite(a) = alpha else { unreachable!("validated") };
        for &s in config.grids.s.as_deref().expect("resolved") {
            let name = format!("ball_alpha{}_s{}.csv", label(a), label(s));
            match l_ball(center, &p.radii, a, s, &p.measure, &cfg.options) {
                Ok(c) => {
                    if !c.shrinking {
                        out.warnings.push(format!("{name}: bracket does not shrink"));
                    }
                    for pt in &c.per_r {
                        if !pt.containment {
                            out.warnings.push(format!("{name}: containment fails at r={}", pt.r));
                        }
                        if pt.monte_carlo.as_ref().is_some_and(|m| !m.inside) {
                            out.warnings.push(format!("{name}: Monte Carlo outside bracket at r={}", pt.r));
                        }
                    }
                    out.csv.push((name, c.to_csv()));
                    curves.push(c);
                }
                Err(e) => out.fail(&name, e),
            }
        }
    }
    out.insert("center", rational::display(center));
    out.insert("curves", curves);
    Ok(())
}
