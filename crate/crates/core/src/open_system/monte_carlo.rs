//! Monte Carlo survival estimates from sampled stationary symbol streams.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::SurvivalCurve;
use crate::error::{HitError, Result};
use crate::measures::MeasureModel;
use crate::symbolic::{HoleSpec, Symbol, SymbolicSystem};

/// Random stream for trial `trial`: the master seed picks the key, the trial
/// index the ChaCha stream, so results do not depend on scheduling.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> Symbol {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as Symbol;
        }
    }
    // rounding in the cumulative sum: fall back to the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as Symbol
}

/// `len` symbols `z_1 .. z_len` of a stationary path.
pub fn sample_stationary(mu: &MeasureModel, len: usize, rng: &mut ChaCha8Rng) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let mut prev = draw(rng, mu.initial_f64());
    out.push(prev);
    for _ in 1..len {
        prev = draw(rng, &mu.kernel_f64()[prev as usize]);
        out.push(prev);
    }
    out
}

/// Empirical `μ(τ_U > t)` for `t = 0..=t_max` from `trials` independent paths.
pub fn monte_carlo_survival(
    system: &SymbolicSystem,
    mu: &MeasureModel,
    hole: &HoleSpec,
    t_max: u64,
    trials: u64,
    master_seed: u64,
) -> Result<SurvivalCurve> {
    if trials == 0 {
        return Err(HitError::Precondition("need at least one trial".into()));
    }
    mu.check_compatible(system)?;
    let n = hole.depth();
    let words: HashSet<&[Symbol]> = hole.words().iter().map(|w| w.symbols()).collect();
    let mut lengths: Vec<usize> = hole.words().iter().map(|w| w.len()).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let path_len = t_max as usize + n - 1;

    let first_hits: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, trial);
            let z = sample_stationary(mu, path_len, &mut rng);
            // z[j-1] is coordinate j
            (1..=t_max).find(|&j| {
                let start = j as usize - 1;
                lengths
                    .iter()
                    .any(|&l| start + l <= z.len() && words.contains(&z[start..start + l]))
            })
        })
        .collect();

    let mut hits_at = vec![0u64; t_max as usize + 1];
    for j in first_hits.into_iter().flatten() {
        hits_at[j as usize] += 1;
    }
    let mut alive = trials;
    let mut survival = Vec::with_capacity(t_max as usize + 1);
    for h in hits_at {
        alive -= h;
        survival.push(alive as f64 / trials as f64);
    }
    Ok(SurvivalCurve::from_values((0..=t_max).collect(), survival))
}

/// `sup_t |a(t) − b(t)|` over the common range.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::open_system::compile_hole;
    use crate::symbolic::Word;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn single_trial_is_a_step_function() {
        let sys = SymbolicSystem::full_shift(2).unwrap();
        let mu = MeasureModel::bernoulli_str(&["0.3", "0.7"]).unwrap();
        let hole = HoleSpec::single(&sys, w("0")).unwrap();
        let c = monte_carlo_survival(&sys, &mu, &hole, 20, 1, 3).unwrap();
        assert_eq!(c.survival[0], 1.0);
        assert!(c.survival.iter().all(|&s| s == 0.0 || s == 1.0));
        assert!(c.survival.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn deterministic_given_seed() {
        let sys = SymbolicSystem::full_shift(2).unwrap();
        let mu = MeasureModel::markov_str(&[&["0.9", "0.1"], &["0.2", "0.8"]]).unwrap();
        let hole = HoleSpec::single(&sys, w("01")).unwrap();
        let a = monte_carlo_survival(&sys, &mu, &hole, 30, 2000, 11).unwrap();
        let b = monte_carlo_survival(&sys, &mu, &hole, 30, 2000, 11).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_survival(&sys, &mu, &hole, 30, 2000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn agrees_with_exact_engine() {
        let sys = SymbolicSystem::full_shift(2).unwrap();
        let mu = MeasureModel::bernoulli_str(&["0.3", "0.7"]).unwrap();
        let hole = HoleSpec::single(&sys, w("0")).unwrap();
        let trials = 10_000;
        let mc = monte_carlo_survival(&sys, &mu, &hole, 20, trials, 1).unwrap();
        let exact: Vec<f64> = (0..=20).map(|t| 0.7f64.powi(t)).collect();
        assert!(sup_distance(&mc.survival, &exact) <= 3.0 / (trials as f64).sqrt());
        let chain = compile_hole(&sys, &mu, &hole).unwrap();
        assert!(sup_distance(&mc.survival, &chain.survival_curve(20).survival) <= 0.03);
    }
}
