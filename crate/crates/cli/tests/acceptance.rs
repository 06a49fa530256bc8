//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero when any
//! criterion fails.

use std::time::Instant;

use hitlab_cli::{load_config, replay, run_and_write, Overrides};
use hitlab_core::ball::{default_radii, l_ball, BallOptions, Metric};
use hitlab_core::measures::{phi_coefficient_bruteforce, phi_coefficient_exact, PhiProfile};
use hitlab_core::open_system::{monte_carlo_survival, product_relation_residual, sup_distance, ProductRelationParams};
use hitlab_core::rational::ratio;
use hitlab_core::recurrence::{l_alpha_s, localized_escape_rate, theta, union_measure_check, CurveOptions};
use hitlab_core::{
    compile_hole, DecayClass, HitError, HoleSpec, MeasureModel, PointSpec, Rational, Side, Symbol, SymbolicSystem, Word,
};
use num::BigInt;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn fair() -> MeasureModel {
    MeasureModel::bernoulli_str(&["1/2", "1/2"]).unwrap()
}

fn b37() -> MeasureModel {
    MeasureModel::bernoulli_str(&["0.3", "0.7"]).unwrap()
}

fn markov() -> MeasureModel {
    MeasureModel::markov_str(&[&["0.9", "0.1"], &["0.2", "0.8"]]).unwrap()
}

fn full2() -> SymbolicSystem {
    SymbolicSystem::full_shift(2).unwrap()
}

fn zeros() -> PointSpec {
    PointSpec::periodic(vec![0]).unwrap()
}

fn alternating() -> PointSpec {
    PointSpec::periodic(vec![0, 1]).unwrap()
}

fn words_of_len(len: usize) -> Vec<Vec<Symbol>> {
    (0..1u32 << len)
        .map(|j| (0..len).rev().map(|i| ((j >> i) & 1) as Symbol).collect())
        .collect()
}

/// Integer weights of a measure: `μ[x_1..x_L] = num / den(L)`.
struct IntWeights {
    initial: [u128; 2],
    kernel: [[u128; 2]; 2],
    init_den: u128,
    step_den: u128,
}

impl IntWeights {
    fn den(&self, len: usize) -> u128 {
        self.init_den * self.step_den.pow(len as u32 - 1)
    }
}

/// Survival numerators for `t = 1..=t_max` by depth-first enumeration of all
/// words of length `t + n − 1`, cut off once a hit makes a branch irrelevant.
fn dfs_survival(words: &[Vec<Symbol>], w: &IntWeights, t_max: usize) -> Vec<u128> {
    let n = words.iter().map(Vec::len).max().unwrap();
    let max_len = t_max + n - 1;
    let mut acc = vec![0u128; t_max + 1];
    let mut seq: Vec<Symbol> = Vec::with_capacity(max_len);
    fn go(
        seq: &mut Vec<Symbol>,
        weight: u128,
        first_hit: usize,
        ctx: (&[Vec<Symbol>], &IntWeights, usize, usize),
        acc: &mut [u128],
    ) {
        let (words, w, n, t_max) = ctx;
        let d = seq.len();
        let mut hit = first_hit;
        for word in words {
            if word.len() <= d && seq.ends_with(word) {
                hit = hit.min(d - word.len() + 1);
            }
        }
        if d >= n {
            let t = d + 1 - n;
            if t <= t_max && hit > t {
                acc[t] += weight * w.step_den.pow((t_max + n - 1 - d) as u32);
            }
        }
        // later lengths only matter while t = d + 2 − n can still be below the hit
        if d == t_max + n - 1 || d + 2 >= hit.saturating_add(n) {
            return;
        }
        for a in 0..2 {
            let step = match seq.last() {
                None => w.initial[a],
                Some(&b) => w.kernel[b as usize][a],
            };
            if step == 0 {
                continue;
            }
            seq.push(a as Symbol);
            go(seq, weight * step, hit, ctx, acc);
            seq.pop();
        }
    }
    go(&mut seq, 1, usize::MAX, (words, w, n, t_max), &mut acc);
    acc
}

fn prefix_free(ws: &[Vec<Symbol>]) -> bool {
    ws.iter().enumerate().all(|(i, a)| ws.iter().enumerate().all(|(j, b)| i == j || !b.starts_with(a)))
}

fn criterion_1() -> Verdict {
    let mut holes: Vec<Vec<Vec<Symbol>>> = Vec::new();
    for len in 1..=4 {
        for w in words_of_len(len) {
            holes.push(vec![w]);
        }
    }
    let two = words_of_len(2);
    for mask in 1u32..16 {
        if mask.count_ones() > 1 {
            holes.push((0..4).filter(|i| mask >> i & 1 == 1).map(|i| two[i].clone()).collect());
        }
    }
    let three = words_of_len(3);
    for i in 0..8 {
        for j in i + 1..8 {
            holes.push(vec![three[i].clone(), three[j].clone()]);
        }
    }
    for short in 1..=2 {
        for long in 3..=4 {
            for a in words_of_len(short) {
                for b in words_of_len(long) {
                    let h = vec![a.clone(), b];
                    if prefix_free(&h) {
                        holes.push(h);
                    }
                }
            }
        }
    }
    let measures = [
        ("Bernoulli(1/2,1/2)", fair(), IntWeights { initial: [1, 1], kernel: [[1, 1], [1, 1]], init_den: 2, step_den: 2 }),
        ("Markov example", markov(), IntWeights { initial: [2, 1], kernel: [[9, 1], [2, 8]], init_den: 3, step_den: 10 }),
    ];
    let t_max = 16;
    let ts: Vec<u64> = (1..=t_max as u64).collect();
    let system = full2();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (name, mu, weights) in &measures {
        for h in &holes {
            let hole = HoleSpec::new(&system, h.iter().map(|w| Word::new(w.clone()))).unwrap();
            let n = h.iter().map(Vec::len).max().unwrap();
            let oracle = dfs_survival(h, weights, t_max);
            let engine = match compile_hole(&system, mu, &hole) {
                Ok(chain) => chain.survival_exact_many(&ts),
                // a hole of full measure is refused; its survival is identically 0
                Err(HitError::Degenerate(_)) => vec![Rational::from_integer(BigInt::from(0)); t_max],
                Err(e) => panic!("{name} {:?}: {e}", hole.words()),
            };
            let den = weights.den(t_max + n - 1);
            for t in 1..=t_max {
                let expected = Rational::new(BigInt::from(oracle[t]), BigInt::from(den));
                checked += 1;
                if engine[t - 1] != expected {
                    mismatches.push(format!("{name} hole {:?} t={t}", hole.words()));
                }
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{} holes x 2 measures x t<=16: {checked} exact comparisons, {} mismatches{}",
            holes.len(),
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn criterion_2() -> Verdict {
    let system = full2();
    let c0 = compile_hole(&system, &b37(), &HoleSpec::single(&system, "0".parse().unwrap()).unwrap()).unwrap();
    let r0 = c0.escape_rate(1e-13).unwrap().rho;
    let e0 = (r0 - (-(0.7f64).ln())).abs();
    let c00 = compile_hole(&system, &fair(), &HoleSpec::single(&system, "00".parse().unwrap()).unwrap()).unwrap();
    let r00 = c00.escape_rate(1e-13).unwrap().rho;
    // S(t) = S(t−1)/2 + S(t−2)/4, so λ is the root of λ² = λ/2 + 1/4
    let closed = -((1.0 + 5f64.sqrt()) / 4.0).ln();
    let e00 = (r00 - closed).abs();
    verdict(
        e0 <= 1e-10 && e00 <= 1e-8,
        format!("rho[0]={r0:.12} (err {e0:.1e}), rho[00]={r00:.12} vs {closed:.12} (err {e00:.1e})"),
    )
}

fn criterion_3() -> Verdict {
    let n: Vec<usize> = (1..=10).collect();
    let a = theta(&zeros(), 1, &b37(), &n).unwrap();
    let b = theta(&alternating(), 2, &fair(), &n).unwrap();
    let c = theta(&zeros(), 1, &fair(), &n).unwrap();
    let pass = a.limit_exact == "3/10"
        && a.below_half
        && b.limit_exact == "1/4"
        && b.below_half
        && c.limit_exact == "1/2"
        && !c.below_half;
    verdict(
        pass,
        format!(
            "theta(0^inf; 0.3,0.7)={}, theta((01)^inf; fair)={}, theta(0^inf; fair)={} flagged={}",
            a.limit_exact, b.limit_exact, c.limit_exact, !c.below_half
        ),
    )
}

fn criterion_4() -> Verdict {
    let opts = CurveOptions::default();
    let system = full2();
    let n_range: Vec<usize> = (2..=14).collect();
    let mut worst_periodic: f64 = 0.0;
    let mut worst_tm: f64 = 0.0;
    let mut lines = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        for s in [1.0, 2.0] {
            let p = l_alpha_s(&zeros(), alpha, s, &b37(), &system, &n_range, &opts).unwrap();
            let q = l_alpha_s(&PointSpec::thue_morse(), alpha, s, &fair(), &system, &n_range, &opts).unwrap();
            worst_periodic = worst_periodic.max((p.extrapolated - 0.7).abs());
            worst_tm = worst_tm.max((q.extrapolated - 1.0).abs());
            lines.push(format!("a={alpha},s={s}: {:.4}/{:.4}", p.extrapolated, q.extrapolated));
        }
    }
    verdict(
        worst_periodic <= 0.05 && worst_tm <= 0.1,
        format!(
            "max |L-0.7| at 0^inf = {worst_periodic:.4}, max |L-1| at Thue-Morse = {worst_tm:.4} [{}]",
            lines.join("; ")
        ),
    )
}

fn criterion_5() -> Verdict {
    let system = full2();
    let instances = [("0^inf", zeros(), 1, b37()), ("(01)^inf", alternating(), 2, fair())];
    let mut total = 0;
    let mut failing = Vec::new();
    let mut inside = 0;
    let mut inside_failing = 0;
    let mut example = String::new();
    for (name, z, p, mu) in &instances {
        for n in 1..=6 {
            for k in 0..=4 {
                let u = union_measure_check(z, *p, n, k, mu, &system).unwrap();
                total += 1;
                if *name == "0^inf" && n == 2 && k == 2 {
                    example = format!("n=2,k=2: exact {} prediction {}", u.exact_rational, u.prediction_rational);
                }
                if u.decreasing && u.disjoint_shifts {
                    inside += 1;
                    if u.defect_rational != "0" {
                        inside_failing += 1;
                    }
                }
                if u.defect_rational != "0" {
                    failing.push(format!("{name} n={n} k={k} (defect {})", u.defect_rational));
                }
            }
        }
    }
    verdict(
        failing.is_empty(),
        format!(
            "{example}; full grid: {} of {total} points with non-zero defect, e.g. {}; \
             points satisfying the lemma hypotheses (disjoint shifts, decreasing sets): {inside}, of which {inside_failing} fail",
            failing.len(),
            failing.iter().take(3).cloned().collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_6() -> Verdict {
    let n_range: Vec<usize> = (1..=14).collect();
    let c = localized_escape_rate(&zeros(), &b37(), &full2(), &n_range, &CurveOptions::default()).unwrap();
    let dist: Vec<f64> = c.per_n.iter().map(|p| (p.value - 0.7).abs()).collect();
    let monotone = dist.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let last = c.per_n.last().unwrap().value;
    verdict(
        monotone && (last - 0.7).abs() <= 0.02,
        format!(
            "n=1: {:.5}, n=14: {last:.10}, monotone approach: {monotone}",
            c.per_n[0].value
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut bern_max: f64 = 0.0;
    for mu in [fair(), b37()] {
        for side in [Side::Left, Side::Right] {
            for k in 0..=10 {
                bern_max = bern_max.max(phi_coefficient_exact(&mu, k, side));
            }
        }
    }
    let mu = markov();
    let system = full2();
    let mut brute_err: f64 = 0.0;
    for side in [Side::Left, Side::Right] {
        for k in 0..=5 {
            let exact = phi_coefficient_exact(&mu, k as i64, side);
            let brute = phi_coefficient_bruteforce(&mu, &system, k, side, 5).unwrap();
            brute_err = brute_err.max((exact - brute).abs());
        }
    }
    let profile = PhiProfile::compute(&mu, 30, Side::Left).unwrap();
    let rate = match profile.classification {
        DecayClass::Exponential { rate } => rate,
        _ => f64::NAN,
    };
    let rel = (rate - 0.7).abs() / 0.7;
    verdict(
        bern_max == 0.0 && brute_err <= 1e-10 && rel <= 0.02,
        format!("Bernoulli max phi = {bern_max}, Markov |exact-brute| = {brute_err:.1e}, fitted rate {rate:.6} ({:.3}% off 0.7)", rel * 100.0),
    )
}

fn criterion_8() -> Verdict {
    let system = full2();
    let measures = [("Bernoulli(0.3,0.7)", b37()), ("Bernoulli(1/2,1/2)", fair()), ("Markov example", markov())];
    let holes = ["0", "00", "01", "010"];
    let mut points = 0;
    let mut failures = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut zero_lhs = true;
    for (name, mu) in &measures {
        for h in holes {
            let chain = compile_hole(&system, mu, &HoleSpec::single(&system, h.parse().unwrap()).unwrap()).unwrap();
            for s in [8u64, 12, 20] {
                for gap in (1..s).filter(|g| s % g == 0 && 2 * g < s) {
                    for t in [s + 1, 2 * s, 3 * s] {
                        let params = ProductRelationParams { s, t, k: 3, gap };
                        let r = product_relation_residual(&chain, params, true).unwrap();
                        points += 1;
                        if r.product_bound.rhs > 0.0 {
                            max_ratio = max_ratio.max(r.product_bound.lhs / r.product_bound.rhs);
                        }
                        if !r.product_bound.passed {
                            failures.push(format!("{name} U={h} {params:?}"));
                        }
                        if h == "0" && *name != "Markov example" && r.product_bound.lhs != 0.0 {
                            zero_lhs = false;
                        }
                    }
                }
            }
        }
    }
    verdict(
        failures.is_empty() && zero_lhs,
        format!(
            "{points} grid points, {} violations, max lhs/rhs = {max_ratio:.3}, lhs exactly 0 for U=[0] under Bernoulli: {zero_lhs}",
            failures.len()
        ),
    )
}

fn criterion_9() -> (Verdict, String) {
    let radii = default_radii(3..=9);
    let opts = BallOptions { metric: Metric::Line, mc_trials: 20_000, mc_seed: 9, ..Default::default() };
    let c = l_ball(&ratio(0, 1), &radii, 1.0, 1.0, &b37(), &opts).unwrap();
    let containment = c.per_r.iter().all(|p| p.containment);
    let mc: Vec<_> = c.per_r.iter().filter_map(|p| p.monte_carlo.as_ref()).collect();
    let mc_inside = !mc.is_empty() && mc.iter().all(|m| m.inside);
    let (lo, hi) = c.final_bracket.unwrap();
    let center = 0.5 * (lo + hi);
    let v = verdict(
        c.shrinking && containment && mc_inside && (center - 0.7).abs() <= 0.07,
        format!(
            "line-metric balls: final bracket [{lo:.5}, {hi:.5}] center {center:.5}, shrinking {}, containment {containment}, \
             Monte Carlo inside at {}/{} radii",
            c.shrinking,
            mc.iter().filter(|m| m.inside).count(),
            mc.len()
        ),
    );
    let circle = BallOptions { metric: Metric::Circle, ..Default::default() };
    let cc = l_ball(&ratio(0, 1), &radii, 1.0, 1.0, &b37(), &circle).unwrap();
    let info = match cc.final_bracket {
        Some((a, b)) => format!(
            "circle-metric balls at 0 under the same coding: final bracket [{a:.5}, {b:.5}] (the arc's 1^k side carries the mass, theta = 0.7, so the limit is 0.3)"
        ),
        None => "circle-metric balls: no bracket".into(),
    };
    (v, info)
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let instances = [
        ("markov-01", r#"{"kind":"survival","measure":{"type":"markov","kernel":[["0.9","0.1"],["0.2","0.8"]]},"hole":["01"],"grids":{"t_max":30},"monte_carlo":{"trials":100000},"master_seed":101}"#),
        ("fair-00", r#"{"kind":"survival","measure":{"type":"bernoulli","probs":["1/2","1/2"]},"hole":["00"],"grids":{"t_max":30},"monte_carlo":{"trials":100000},"master_seed":202}"#),
        ("b37-mixed", r#"{"kind":"survival","measure":{"type":"bernoulli","probs":["0.3","0.7"]},"hole":["0110","11"],"grids":{"t_max":40},"monte_carlo":{"trials":100000},"master_seed":303}"#),
    ];
    let bound = 3.0 / (100_000f64).sqrt();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, text) in instances {
        let out = dir.path().join(name);
        let config = load_config(text, &Overrides { out: Some(out.clone()), ..Default::default() }).unwrap();
        let record = run_and_write(&config).unwrap();
        let d = record.results["monte_carlo"]["sup_distance"].as_f64().unwrap();
        let replayed = replay(&out.join("record.json"), None, None).is_ok();
        // bitwise: two direct runs with the same seed
        let prepared = config.validate().unwrap();
        let hole = prepared.hole.as_ref().unwrap();
        let t_max = config.grids.t_max.unwrap();
        let a = monte_carlo_survival(&prepared.system, &prepared.measure, hole, t_max, 100_000, config.master_seed).unwrap();
        let b = monte_carlo_survival(&prepared.system, &prepared.measure, hole, t_max, 100_000, config.master_seed).unwrap();
        let bitwise = a.survival.iter().zip(&b.survival).all(|(x, y)| x.to_bits() == y.to_bits());
        let exact = compile_hole(&prepared.system, &prepared.measure, hole).unwrap().survival_curve(t_max);
        let d_direct = sup_distance(&a.survival, &exact.survival);
        pass &= d <= bound && d_direct <= bound && replayed && bitwise;
        parts.push(format!("{name}: sup {d:.5}, replay {replayed}, bitwise {bitwise}"));
    }
    verdict(pass, format!("bound 3/sqrt(N) = {bound:.5}; {}", parts.join("; ")))
}

/// The union identity restricted to points where the lemma's decreasing-sets
/// hypothesis holds.
fn union_within_hypothesis() -> Verdict {
    let system = full2();
    let mut checked = 0;
    let mut bad = 0;
    for (z, p, mu) in [(zeros(), 1, b37()), (zeros(), 1, fair()), (alternating(), 2, fair()), (alternating(), 2, b37())] {
        for n in 1..=6 {
            for k in 0..=4 {
                let u = union_measure_check(&z, p, n, k, &mu, &system).unwrap();
                if u.decreasing && u.disjoint_shifts {
                    checked += 1;
                    bad += (u.defect_rational != "0") as usize;
                }
            }
        }
    }
    verdict(bad == 0, format!("{checked} points with disjoint shifts and decreasing U_n ∩ T^(-ip) U_n, {bad} with non-zero defect"))
}

fn print(label: &str, v: &Verdict, seconds: f64) {
    println!("{label}: {} ({seconds:.1}s) {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("criterion 1 exact engine vs enumeration", criterion_1),
        ("criterion 2 escape-rate closed forms", criterion_2),
        ("criterion 3 theta dichotomy inputs", criterion_3),
        ("criterion 4 L dichotomy at desk scale", criterion_4),
        ("criterion 5 union identity on the full grid", criterion_5),
        ("criterion 6 localized escape rate", criterion_6),
        ("criterion 7 phi coefficients", criterion_7),
        ("criterion 8 product-relation inequality sweep", criterion_8),
    ];
    let mut failed = Vec::new();
    for (label, f) in criteria {
        let start = Instant::now();
        let v = f();
        print(label, &v, start.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(label);
        }
    }
    let start = Instant::now();
    let (v9, info9) = criterion_9();
    print("criterion 9 ball sandwich", &v9, start.elapsed().as_secs_f64());
    println!("  info: {info9}");
    if !v9.pass {
        failed.push("criterion 9 ball sandwich");
    }
    let start = Instant::now();
    let v10 = criterion_10();
    print("criterion 10 Monte Carlo consistency and replay", &v10, start.elapsed().as_secs_f64());
    if !v10.pass {
        failed.push("criterion 10 Monte Carlo consistency and replay");
    }
    let u = union_within_hypothesis();
    println!(
        "  info: union identity within the lemma hypothesis {}: {}",
        if u.pass { "holds" } else { "FAILS" },
        u.detail
    );
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!("acceptance: {} failing: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}
