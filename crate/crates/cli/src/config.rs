//! Experiment configuration: parsing, defaults and validation.

use std::path::PathBuf;

use hitlab_core::ball::{default_radii, thue_morse_real, BallOptions, Metric};
use hitlab_core::open_system::ProductRelationParams;
use hitlab_core::rational::{self, parse_rational};
use hitlab_core::recurrence::{Alpha, CurveOptions, HypothesisParams};
use hitlab_core::symbolic::{Word, DEFAULT_ENUMERATION_CAP};
use hitlab_core::{HitError, HoleSpec, MeasureModel, PointSpec, Rational, Side, SymbolicSystem};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Survival,
    EscapeRate,
    Theta,
    Lcurve,
    Lzero,
    UnionCheck,
    Hypotheses,
    Phi,
    Ball,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Survival => "survival",
            Kind::EscapeRate => "escape-rate",
            Kind::Theta => "theta",
            Kind::Lcurve => "lcurve",
            Kind::Lzero => "lzero",
            Kind::UnionCheck => "union-check",
            Kind::Hypotheses => "hypotheses",
            Kind::Phi => "phi",
            Kind::Ball => "ball",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum SystemConfig {
    FullShift { alphabet: usize },
    /// 0/1 transition matrix of a subshift of finite type.
    Subshift { matrix: Vec<Vec<u8>> },
    GoldenMean,
    /// The doubling map on the circle, coded by binary digits.
    Doubling,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::FullShift { alphabet: 2 }
    }
}

/// A probability written as a string (`"3/10"`, `"0.3"`) or a JSON number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Text(String),
    Number(f64),
}

impl Prob {
    pub fn to_rational(&self) -> Result<Rational, HitError> {
        match self {
            Prob::Text(t) => parse_rational(t),
            // shortest round-trip decimal, so 0.3 means 3/10
            Prob::Number(x) => parse_rational(&x.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum MeasureConfig {
    Bernoulli { probs: Vec<Prob> },
    Markov { kernel: Vec<Vec<Prob>> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Float,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub n_range: Option<Vec<usize>>,
    pub alpha: Option<Vec<Alpha>>,
    pub s: Option<Vec<f64>>,
    /// Gap values for the `α = 0` curve.
    pub s_range: Option<Vec<u64>>,
    pub t_max: Option<u64>,
    pub p: Option<usize>,
    /// Union sizes for the union check.
    pub k: Option<Vec<usize>>,
    pub k_max: Option<usize>,
    pub r_schedule: Option<Vec<String>>,
    pub product_relation: Vec<ProductRelationParams>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Trajectories for the empirical survival curve; 0 disables it.
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallConfig {
    /// Rational centre such as `"0"` or `"1/3"`, or `"thue-morse"`.
    pub center: String,
    /// Binary digits kept when the centre is the Thue–Morse real.
    pub center_bits: usize,
    pub options: BallOptions,
}

impl Default for BallConfig {
    fn default() -> Self {
        Self {
            center: "0".into(),
            center_bits: 96,
            options: BallOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Set by the subcommand when omitted.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub system: SystemConfig,
    pub measure: MeasureConfig,
    #[serde(default)]
    pub point: Option<PointSpec>,
    #[serde(default)]
    pub hole: Vec<String>,
    #[serde(default)]
    pub side: Option<Side>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_enumeration_cap")]
    pub enumeration_cap: u64,
    #[serde(default)]
    pub curve: CurveOptions,
    #[serde(default)]
    pub hypotheses: HypothesisParams,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub ball: Option<BallConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_enumeration_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP as u64
}

fn invalid(msg: impl Into<String>) -> HitError {
    HitError::Precondition(msg.into())
}

/// Domain objects built from a validated configuration.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub kind: Kind,
    pub system: SymbolicSystem,
    pub measure: MeasureModel,
    pub point: Option<PointSpec>,
    pub hole: Option<HoleSpec>,
    pub center: Option<Rational>,
    pub radii: Vec<Rational>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HitError> {
        serde_json::from_str(text).map_err(|e| HitError::Parse(e.to_string()))
    }

    pub fn kind(&self) -> Kind {
        self.kind.expect("kind is set before validation")
    }

    fn needs_point(&self) -> bool {
        matches!(
            self.kind(),
            Kind::Theta | Kind::Lcurve | Kind::Lzero | Kind::UnionCheck | Kind::Hypotheses
        )
    }

    /// Fills every grid default for the configured kind, so the echoed
    /// configuration records exactly what was run.
    pub fn resolve(&mut self) -> Result<(), HitError> {
        let kind = self.kind.ok_or_else(|| invalid("experiment kind is missing"))?;
        let g = &mut self.grids;
        match kind {
            Kind::Survival => {
                g.t_max.get_or_insert(50);
            }
            Kind::EscapeRate => {}
            Kind::Theta => {
                g.n_range.get_or_insert_with(|| (1..=8).collect());
            }
            Kind::Lcurve => {
                g.n_range.get_or_insert_with(|| (2..=12).collect());
                g.alpha.get_or_insert_with(|| vec![Alpha::Finite(1.0)]);
                g.s.get_or_insert_with(|| vec![1.0]);
            }
            Kind::Lzero => {
                g.n_range.get_or_insert_with(|| (4..=10).collect());
                g.s_range.get_or_insert_with(|| vec![5, 9, 17, 33]);
            }
            Kind::UnionCheck => {
                g.n_range.get_or_insert_with(|| (1..=6).collect());
                g.k.get_or_insert_with(|| (0..=4).collect());
            }
            Kind::Hypotheses => {
                g.n_range.get_or_insert_with(|| (2..=10).collect());
            }
            Kind::Phi => {
                g.k_max.get_or_insert(30);
            }
            Kind::Ball => {
                g.alpha.get_or_insert_with(|| vec![Alpha::Finite(1.0)]);
                g.s.get_or_insert_with(|| vec![1.0]);
                g.r_schedule
                    .get_or_insert_with(|| default_radii(3..=9).iter().map(rational::display).collect());
                self.ball.get_or_insert_with(BallConfig::default);
            }
        }
        if matches!(kind, Kind::Theta | Kind::UnionCheck) && self.grids.p.is_none() {
            let p = self
                .point
                .as_ref()
                .and_then(|z| z.exact_period())
                .ok_or_else(|| invalid("grids.p is required for a point without a detectable period"))?;
            self.grids.p = Some(p);
        }
        if self.curve.mc_seed != 0 && self.curve.mc_seed != self.master_seed {
            return Err(invalid("curve.mc_seed must be left unset; use master_seed"));
        }
        self.curve.mc_seed = self.master_seed;
        if let Some(b) = self.ball.as_mut() {
            if b.options.mc_seed != 0 && b.options.mc_seed != self.master_seed {
                return Err(invalid("ball.options.mc_seed must be left unset; use master_seed"));
            }
            b.options.mc_seed = self.master_seed;
        }
        Ok(())
    }

    fn build_system(&self) -> Result<SymbolicSystem, HitError> {
        match &self.system {
            SystemConfig::FullShift { alphabet } => SymbolicSystem::full_shift(*alphabet),
            SystemConfig::Subshift { matrix } => SymbolicSystem::subshift(
                matrix.iter().map(|row| row.iter().map(|&x| x != 0).collect()).collect(),
            ),
            SystemConfig::GoldenMean => Ok(SymbolicSystem::golden_mean()),
            SystemConfig::Doubling => SymbolicSystem::full_shift(2),
        }
    }

    fn build_measure(&self) -> Result<MeasureModel, HitError> {
        match &self.measure {
            MeasureConfig::Bernoulli { probs } => {
                MeasureModel::bernoulli(probs.iter().map(Prob::to_rational).collect::<Result<_, _>>()?)
            }
            MeasureConfig::Markov { kernel } => MeasureModel::markov(
                kernel
                    .iter()
                    .map(|row| row.iter().map(Prob::to_rational).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<_, _>>()?,
            ),
        }
    }

    fn check_grids(&self) -> Result<(), HitError> {
        let g = &self.grids;
        if let Some(n) = &g.n_range {
            if n.is_empty() || n.contains(&0) || n.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("grids.n_range must be increasing positive integers"));
            }
        }
        if let Some(a) = &g.alpha {
            if a.is_empty() {
                return Err(invalid("grids.alpha must be non-empty"));
            }
            for x in a {
                if let Alpha::Finite(v) = x {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(invalid(format!("alpha must be positive, got {v}")));
                    }
                }
            }
        }
        if let Some(s) = &g.s {
            if s.is_empty() || s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(invalid("grids.s must be positive"));
            }
        }
        if g.t_max == Some(0) {
            return Err(invalid("grids.t_max must be positive"));
        }
        if g.k_max == Some(0) {
            return Err(invalid("grids.k_max must be positive"));
        }
        if self.kind() == Kind::Ball && g.alpha.iter().flatten().any(|a| *a == Alpha::Infinity) {
            return Err(invalid("ball experiments need finite alpha"));
        }
        if let Some(cfg) = &self.ball {
            if cfg.options.v < 2 {
                return Err(invalid("ball.options.v must be at least 2"));
            }
        }
        Ok(())
    }

    /// Checks the whole configuration and builds the domain objects. Nothing is
    /// computed or written before this succeeds.
    pub fn validate(&self) -> Result<Prepared, HitError> {
        let kind = self.kind.ok_or_else(|| invalid("experiment kind is missing"))?;
        self.check_grids()?;
        let system = self.build_system()?;
        let measure = self.build_measure()?;
        measure.check_compatible(&system)?;
        let point = match (&self.point, self.needs_point()) {
            (Some(z), _) => Some(z.clone().validated(&system)?),
            (None, true) => return Err(invalid(format!("{} needs a point", kind.name()))),
            (None, false) => None,
        };
        let hole = if self.hole.is_empty() {
            if matches!(kind, Kind::Survival | Kind::EscapeRate) {
                return Err(invalid(format!("{} needs a hole", kind.name())));
            }
            None
        } else {
            let words = self
                .hole
                .iter()
                .map(|w| w.parse::<Word>())
                .collect::<Result<Vec<_>, _>>()?;
            Some(HoleSpec::new(&system, words)?)
        };
        let (center, radii) = if kind == Kind::Ball {
            if self.system != SystemConfig::Doubling {
                return Err(invalid("ball experiments need the doubling system"));
            }
            let cfg = self.ball.as_ref().ok_or_else(|| invalid("ball section is missing"))?;
            let center = if cfg.center == "thue-morse" {
                thue_morse_real(cfg.center_bits)
            } else {
                parse_rational(&cfg.center)?
            };
            let radii = self
                .grids
                .r_schedule
                .as_ref()
                .ok_or_else(|| invalid("grids.r_schedule is missing"))?
                .iter()
                .map(|r| parse_rational(r))
                .collect::<Result<Vec<_>, _>>()?;
            if radii.windows(2).any(|w| w[0] <= w[1]) {
                return Err(invalid("grids.r_schedule must be decreasing"));
            }
            hitlab_core::Ball::new(center.clone(), radii[0].clone(), Metric::Circle)?;
            (Some(center), radii)
        } else {
            (None, Vec::new())
        };
        Ok(Prepared { kind, system, measure, point, hole, center, radii })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn numbers_and_strings_are_exact() {
        let c = parse(r#"{"kind":"phi","measure":{"type":"bernoulli","probs":[0.3,"7/10"]}}"#);
        let p = c.validate().unwrap();
        assert_eq!(p.measure.initial()[0], rational::ratio(3, 10));
    }

    #[test]
    fn rejects_bad_probabilities() {
        let c = parse(r#"{"kind":"phi","measure":{"type":"bernoulli","probs":["0.3","0.6"]}}"#);
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let r = ExperimentConfig::from_json(r#"{"kind":"phi","measure":{"type":"bernoulli","probs":[1]},"bogus":1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn defaults_are_filled() {
        let mut c = parse(
            r#"{"kind":"theta","measure":{"type":"bernoulli","probs":["0.3","0.7"]},
                "point":{"eventually-periodic":{"preperiod":[],"period":[0]}}}"#,
        );
        c.resolve().unwrap();
        assert_eq!(c.grids.p, Some(1));
        assert_eq!(c.grids.n_range.as_deref(), Some(&[1, 2, 3, 4, 5, 6, 7, 8][..]));
        c.validate().unwrap();
    }

    #[test]
    fn seeds_have_one_source() {
        let mut c = parse(
            r#"{"kind":"lcurve","measure":{"type":"bernoulli","probs":["1/2","1/2"]},
                "point":{"stream":{"generator":"thue-morse","seed":0}},
                "master_seed":7,"curve":{"mc_seed":3}}"#,
        );
        assert!(c.resolve().is_err());
    }
}
