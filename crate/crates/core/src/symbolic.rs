//! Symbolic dynamics: one-sided shifts of finite type, points, cylinders and
//! cylinder unions ("holes"), n-th joins and outer cylinder approximations.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HitError, Result};

pub type Symbol = u8;

/// Default limit on `alphabet_size^n` for exhaustive enumerations.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

/// Which side of the mixing condition (and of the cylinder approximation) is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    FullShift,
    Transitions(Vec<Vec<bool>>),
}

/// A one-sided shift space: the full shift on `alphabet_size` symbols or a
/// mixing subshift of finite type given by a 0/1 transition matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicSystem {
    alphabet_size: usize,
    admissibility: Admissibility,
}

impl SymbolicSystem {
    pub fn full_shift(alphabet_size: usize) -> Result<Self> {
        check_alphabet(alphabet_size)?;
        Ok(Self {
            alphabet_size,
            admissibility: Admissibility::FullShift,
        })
    }

    /// Subshift of finite type. The matrix must be primitive (irreducible and
    /// aperiodic); this is verified by looking for a strictly positive power
    /// with exponent at most `alphabet_size^2`.
    pub fn subshift(matrix: Vec<Vec<bool>>) -> Result<Self> {
        let k = matrix.len();
        check_alphabet(k)?;
        if matrix.iter().any(|row| row.len() != k) {
            return Err(HitError::InvalidSystem(
                "transition matrix must be square".into(),
            ));
        }
        if !is_primitive(&matrix) {
            return Err(HitError::InvalidSystem(
                "transition matrix is not irreducible and aperiodic".into(),
            ));
        }
        let admissibility = if matrix.iter().flatten().all(|&b| b) {
            Admissibility::FullShift
        } else {
            Admissibility::Transitions(matrix)
        };
        Ok(Self {
            alphabet_size: k,
            admissibility,
        })
    }

    /// The golden-mean shift on {0, 1}: the word `11` is forbidden.
    pub fn golden_mean() -> Self {
        Self::subshift(vec![vec![true, true], vec![true, false]]).expect("golden mean is primitive")
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn admissibility(&self) -> &Admissibility {
        &self.admissibility
    }

    pub fn is_full_shift(&self) -> bool {
        matches!(self.admissibility, Admissibility::FullShift)
    }

    #[inline]
    pub fn admissible(&self, a: Symbol, b: Symbol) -> bool {
        match &self.admissibility {
            Admissibility::FullShift => true,
            Admissibility::Transitions(m) => m[a as usize][b as usize],
        }
    }

    pub fn successors(&self, a: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.alphabet_size as Symbol).filter(move |&b| self.admissible(a, b))
    }

    pub fn check_symbols(&self, symbols: &[Symbol]) -> Result<()> {
        if let Some(&s) = symbols.iter().find(|&&s| s as usize >= self.alphabet_size) {
            return Err(HitError::InvalidWord(format!(
                "symbol {s} outside alphabet of size {}",
                self.alphabet_size
            )));
        }
        if let Some(w) = symbols.windows(2).find(|w| !self.admissible(w[0], w[1])) {
            return Err(HitError::InvalidWord(format!(
                "transition {}->{} is not admissible",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    pub fn check_word(&self, word: &Word) -> Result<()> {
        if word.is_empty() {
            return Err(HitError::InvalidWord("empty word".into()));
        }
        self.check_symbols(word.symbols())
    }

    /// All admissible words of length `len` that start with `prefix`
    /// (lexicographic order).
    pub fn extensions(&self, prefix: &[Symbol], len: usize) -> Vec<Word> {
        let mut out = Vec::new();
        if prefix.len() > len {
            return out;
        }
        let mut buf = prefix.to_vec();
        self.extend_into(&mut buf, len, &mut out);
        out
    }

    fn extend_into(&self, buf: &mut Vec<Symbol>, len: usize, out: &mut Vec<Word>) {
        if buf.len() == len {
            out.push(Word(buf.clone()));
            return;
        }
        for b in 0..self.alphabet_size as Symbol {
            if buf.last().is_none_or(|&a| self.admissible(a, b)) {
                buf.push(b);
                self.extend_into(buf, len, out);
                buf.pop();
            }
        }
    }
}

fn check_alphabet(k: usize) -> Result<()> {
    if k < 2 {
        return Err(HitError::InvalidSystem(format!(
            "alphabet size must be at least 2, got {k}"
        )));
    }
    if k > Symbol::MAX as usize + 1 {
        return Err(HitError::InvalidSystem(format!("alphabet size {k} too large")));
    }
    Ok(())
}

fn is_primitive(m: &[Vec<bool>]) -> bool {
    let k = m.len();
    let mut power = m.to_vec();
    for _ in 0..k * k {
        if power.iter().flatten().all(|&b| b) {
            return true;
        }
        let mut next = vec![vec![false; k]; k];
        for (i, row) in next.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..k).any(|l| power[i][l] && m[l][j]);
            }
        }
        power = next;
    }
    false
}

/// A finite word; as a set it is the cylinder of all sequences starting with it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    pub fn suffix(&self, len: usize) -> Word {
        Word(self.0[self.0.len() - len..].to_vec())
    }

    pub fn into_inner(self) -> Vec<Symbol> {
        self.0
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&s| s < 10) {
            for s in &self.0 {
                write!(f, "{s}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

impl FromStr for Word {
    type Err = HitError;

    /// Digit strings (`"0101"`) or dot-separated symbols (`"10.3.11"`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            t.parse::<Symbol>()
                .map_err(|_| HitError::InvalidWord(format!("cannot parse {s:?}")))
        };
        let symbols = if s.contains('.') {
            s.split('.').map(parse).collect::<Result<Vec<_>>>()?
        } else {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as Symbol)
                        .ok_or_else(|| HitError::InvalidWord(format!("cannot parse {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        if symbols.is_empty() {
            return Err(HitError::InvalidWord("empty word".into()));
        }
        Ok(Word(symbols))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamGenerator {
    /// i.i.d. uniform symbols drawn from a seeded ChaCha stream.
    IidUniform { alphabet_size: usize },
    /// The Thue–Morse sequence: parity of the binary digit sum of the index.
    ThueMorse,
}

/// A point of the shift space: an eventually periodic sequence or a
/// deterministic stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointSpec {
    EventuallyPeriodic {
        preperiod: Vec<Symbol>,
        period: Vec<Symbol>,
    },
    Stream { generator: StreamGenerator, seed: u64 },
}

/// Result of searching for a shift period of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "value")]
pub enum PeriodStatus {
    Periodic(usize),
    /// Purely periodic, but the prime period exceeds the bound.
    PeriodAboveBound(usize),
    /// Eventually periodic with a non-trivial preperiod: never shift-periodic.
    Preperiodic,
    /// Stream point whose prefix rules out every period up to the bound.
    NoPeriodUpTo(usize),
    /// Stream point whose inspected prefix is consistent with some period.
    Undecided,
}

impl PointSpec {
    /// Builds `preperiod · period^∞` in canonical form: primitive period and
    /// the shortest possible preperiod.
    pub fn eventually_periodic(preperiod: Vec<Symbol>, period: Vec<Symbol>) -> Result<Self> {
        if period.is_empty() {
            return Err(HitError::InvalidPoint("period must be non-empty".into()));
        }
        let mut period = primitive_root(&period).to_vec();
        let mut preperiod = preperiod;
        while let (Some(&a), Some(&b)) = (preperiod.last(), period.last()) {
            if a != b {
                break;
            }
            preperiod.pop();
            period.rotate_right(1);
        }
        Ok(PointSpec::EventuallyPeriodic { preperiod, period })
    }

    pub fn periodic(period: Vec<Symbol>) -> Result<Self> {
        Self::eventually_periodic(Vec::new(), period)
    }

    pub fn thue_morse() -> Self {
        PointSpec::Stream {
            generator: StreamGenerator::ThueMorse,
            seed: 0,
        }
    }

    pub fn iid_uniform(alphabet_size: usize, seed: u64) -> Self {
        PointSpec::Stream {
            generator: StreamGenerator::IidUniform { alphabet_size },
            seed,
        }
    }

    /// Re-canonicalizes deserialized points and checks them against `system`.
    pub fn validated(self, system: &SymbolicSystem) -> Result<Self> {
        let point = match self {
            PointSpec::EventuallyPeriodic { preperiod, period } => {
                Self::eventually_periodic(preperiod, period)?
            }
            other => other,
        };
        match &point {
            PointSpec::EventuallyPeriodic { preperiod, period } => {
                let mut probe = preperiod.clone();
                probe.extend_from_slice(period);
                probe.extend_from_slice(period);
                system
                    .check_symbols(&probe)
                    .map_err(|e| HitError::InvalidPoint(e.to_string()))?;
            }
            PointSpec::Stream { generator, .. } => {
                if let StreamGenerator::IidUniform { alphabet_size } = generator {
                    if *alphabet_size != system.alphabet_size() || !system.is_full_shift() {
                        return Err(HitError::InvalidPoint(
                            "iid-uniform streams require the full shift on the same alphabet"
                                .into(),
                        ));
                    }
                }
                system
                    .check_symbols(&point.prefix(256))
                    .map_err(|e| HitError::InvalidPoint(e.to_string()))?;
            }
        }
        Ok(point)
    }

    /// The first `n` symbols of the point.
    pub fn prefix(&self, n: usize) -> Vec<Symbol> {
        match self {
            PointSpec::EventuallyPeriodic { preperiod, period } => preperiod
                .iter()
                .chain(period.iter().cycle())
                .take(n)
                .copied()
                .collect(),
            PointSpec::Stream { generator, seed } => match generator {
                StreamGenerator::ThueMorse => {
                    (0..n as u64).map(|i| (i.count_ones() % 2) as Symbol).collect()
                }
                StreamGenerator::IidUniform { alphabet_size } => {
                    use rand::{Rng, SeedableRng};
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                    (0..n)
                        .map(|_| rng.random_range(0..*alphabet_size) as Symbol)
                        .collect()
                }
            },
        }
    }

    pub fn period_status(&self, bound: usize) -> PeriodStatus {
        match self {
            PointSpec::EventuallyPeriodic { preperiod, period } => {
                if !preperiod.is_empty() {
                    PeriodStatus::Preperiodic
                } else if period.len() <= bound {
                    PeriodStatus::Periodic(period.len())
                } else {
                    PeriodStatus::PeriodAboveBound(period.len())
                }
            }
            PointSpec::Stream { .. } => {
                let window = self.prefix(4 * bound + 64);
                let consistent =
                    (1..=bound).any(|p| window[p..].iter().zip(&window).all(|(a, b)| a == b));
                if consistent {
                    PeriodStatus::Undecided
                } else {
                    PeriodStatus::NoPeriodUpTo(bound)
                }
            }
        }
    }

    /// The exact shift-period of a purely periodic point, if any.
    pub fn exact_period(&self) -> Option<usize> {
        match self {
            PointSpec::EventuallyPeriodic { preperiod, period } if preperiod.is_empty() => {
                Some(period.len())
            }
            _ => None,
        }
    }
}

fn primitive_root(w: &[Symbol]) -> &[Symbol] {
    let n = w.len();
    for p in 1..n {
        if n % p == 0 && (p..n).all(|i| w[i] == w[i - p]) {
            return &w[..p];
        }
    }
    w
}

/// The n-th join: all admissible words of length `n` in lexicographic order.
pub fn enumerate_join(system: &SymbolicSystem, n: usize) -> Result<Vec<Word>> {
    enumerate_join_capped(system, n, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_join_capped(system: &SymbolicSystem, n: usize, cap: u128) -> Result<Vec<Word>> {
    if n == 0 {
        return Err(HitError::Precondition("join order must be at least 1".into()));
    }
    check_enumeration(system.alphabet_size(), n, cap)?;
    Ok(system.extensions(&[], n))
}

pub(crate) fn check_enumeration(alphabet: usize, n: usize, cap: u128) -> Result<()> {
    let requested = (alphabet as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if requested > cap {
        return Err(HitError::CapExceeded {
            what: "word enumeration",
            requested,
            cap,
        });
    }
    Ok(())
}

/// The n-cylinder containing `z`.
pub fn cylinder_around(z: &PointSpec, n: usize) -> Word {
    Word(z.prefix(n))
}

/// Smallest `p <= bound` with `shift^p(z) = z`, if any.
pub fn prime_period(z: &PointSpec, bound: usize) -> Option<usize> {
    match z.period_status(bound) {
        PeriodStatus::Periodic(p) => Some(p),
        _ => None,
    }
}

/// `U_{n,u} = ⋂_{j=0}^{u} T^{-pj} U_n` for a `p`-periodic point: the cylinder of
/// the first `n + u·p` symbols.
pub fn intersected_cylinder(z: &PointSpec, n: usize, p: usize, u: usize) -> Result<Word> {
    if n == 0 || p == 0 {
        return Err(HitError::Precondition("n and p must be positive".into()));
    }
    match z.exact_period() {
        Some(q) if p % q == 0 => Ok(Word(z.prefix(n + u * p))),
        Some(q) => Err(HitError::NotPeriodic(format!(
            "prime period is {q}, which does not divide {p}"
        ))),
        None => Err(HitError::NotPeriodic("point is not shift-periodic".into())),
    }
}

/// A hole: a finite union of cylinders, stored as a sorted prefix-free word set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleSpec {
    words: Vec<Word>,
    depth: usize,
}

impl HoleSpec {
    /// Validates and normalizes: a word with a proper prefix in the set is
    /// already covered by that prefix and is dropped.
    pub fn new(system: &SymbolicSystem, words: impl IntoIterator<Item = Word>) -> Result<Self> {
        let mut words: Vec<Word> = words.into_iter().collect();
        if words.is_empty() {
            return Err(HitError::InvalidHole("a hole needs at least one word".into()));
        }
        for w in &words {
            system
                .check_word(w)
                .map_err(|e| HitError::InvalidHole(e.to_string()))?;
        }
        words.sort();
        words.dedup();
        let mut kept: Vec<Word> = Vec::with_capacity(words.len());
        for w in words {
            // sorted order puts a prefix right before its extensions
            if kept.last().is_some_and(|p| p.is_prefix_of(&w)) {
                continue;
            }
            kept.push(w);
        }
        let depth = kept.iter().map(Word::len).max().unwrap_or(0);
        Ok(Self { words: kept, depth })
    }

    pub fn single(system: &SymbolicSystem, word: Word) -> Result<Self> {
        Self::new(system, [word])
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Does `seq[start..]` begin with a word of the hole?
    pub fn matches_at(&self, seq: &[Symbol], start: usize) -> bool {
        let tail = &seq[start..];
        self.words.iter().any(|w| tail.starts_with(w.symbols()))
    }

    /// The hole as a set of admissible words of length `depth`.
    pub fn expanded(&self, system: &SymbolicSystem, cap: u128) -> Result<Vec<Word>> {
        let mut total: u128 = 0;
        let mut out = Vec::new();
        for w in &self.words {
            let extra = self.depth - w.len();
            let count = (system.alphabet_size() as u128)
                .checked_pow(extra as u32)
                .unwrap_or(u128::MAX);
            total = total.saturating_add(count);
            if total > cap {
                return Err(HitError::CapExceeded {
                    what: "hole expansion",
                    requested: total,
                    cap,
                });
            }
            out.extend(system.extensions(w.symbols(), self.depth));
        }
        out.sort();
        Ok(out)
    }
}

/// Outer `j`-cylinder approximation of a hole `U` of depth `n`.
///
/// Right side: the `j`-cylinders meeting `U`, i.e. the `j`-prefixes of the
/// depth-`n` words of `U`. Left side: the `j`-cylinders meeting `T^{n-j} U`; on a
/// mixing SFT the image of `[w]` under `T^{n-j}` is the cylinder of the last `j`
/// symbols of `w`, so these are the `j`-suffixes.
pub fn outer_j_approximation(
    hole: &HoleSpec,
    j: usize,
    side: Side,
    system: &SymbolicSystem,
) -> Result<BTreeSet<Word>> {
    let n = hole.depth();
    if j == 0 || j > n {
        return Err(HitError::Precondition(format!(
            "j = {j} outside 1..={n}"
        )));
    }
    let expanded = hole.expanded(system, DEFAULT_ENUMERATION_CAP)?;
    Ok(expanded
        .iter()
        .map(|w| match side {
            Side::Right => w.prefix(j),
            Side::Left => w.suffix(j),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn words(list: &[&str]) -> Vec<Word> {
        list.iter().map(|s| w(s)).collect()
    }

    #[test]
    fn join_of_full_shift() {
        let sys = SymbolicSystem::full_shift(2).unwrap();
        assert_eq!(enumerate_join(&sys, 2).unwrap(), words(&["00", "01", "10", "11"]));
        assert_eq!(enumerate_join(&sys, 1).unwrap(), words(&["0", "1"]));
    }

    #[test]
    fn join_of_golden_mean_matches_filtered_brute_force() {
        let sys = SymbolicSystem::golden_mean();
        let brute: Vec<Word> = ["00", "01", "10", "11"]
            .iter()
            .map(|s| w(s))
            .filter(|x| sys.admissible(x.symbols()[0], x.symbols()[1]))
            .collect();
        assert_eq!(enumerate_join(&sys, 2).unwrap(), brute);
        assert_eq!(brute, words(&["00", "01", "10"]));
    }

    #[test]
    fn join_cap_is_enforced() {
        let sys = SymbolicSystem::full_shift(2).unwrap();
        assert!(matches!(
            enumerate_join(&sys, 25),
            Err(HitError::CapExceeded { .. })
        ));
        assert!(enumerate_join(&sys, 0).is_err());
    }

    #[test]
    fn rejects_bad_systems() {
        assert!(SymbolicSystem::full_shift(1).is_err());
        // periodic: 0 -> 1 -> 0
        assert!(SymbolicSystem::subshift(vec![vec![false, true], vec![true, false]]).is_err());
        // reducible
        assert!(SymbolicSystem::subshift(vec![vec![true, true], vec![false, true]]).is_err());
        let all = SymbolicSystem::subshift(vec![vec![true; 3]; 3]).unwrap();
        assert!(all.is_full_shift());
    }

    #[test]
    fn cylinders_around_points() {
        let zero = PointSpec::periodic(vec![0]).unwrap();
        let alt = PointSpec::periodic(vec![0, 1]).unwrap();
        assert_eq!(cylinder_around(&zero, 3), w("000"));
        assert_eq!(cylinder_around(&alt, 3), w("010"));
        // Thue–Morse oracle: parity of the bit count of the index
        let tm: Vec<Symbol> = (0u32..4).map(|i| (i.count_ones() & 1) as Symbol).collect();
        assert_eq!(cylinder_around(&PointSpec::thue_morse(), 4), Word::new(tm));
        assert_eq!(cylinder_around(&PointSpec::thue_morse(), 4), w("0110"));
    }

    #[test]
    fn prime_periods() {
        assert_eq!(prime_period(&PointSpec::periodic(vec![0]).unwrap(), 8), Some(1));
        assert_eq!(prime_period(&PointSpec::periodic(vec![0, 1]).unwrap(), 8), Some(2));
        assert_eq!(prime_period(&PointSpec::periodic(vec![0, 1, 0, 1]).unwrap(), 8), Some(2));
        assert_eq!(prime_period(&PointSpec::periodic(vec![0, 0, 1]).unwrap(), 2), None);
        assert_eq!(
            PointSpec::periodic(vec![0, 0, 1]).unwrap().period_status(2),
            PeriodStatus::PeriodAboveBound(3)
        );
        let tm = PointSpec::thue_morse();
        assert_eq!(prime_period(&tm, 64), None);
        assert_eq!(tm.period_status(64), PeriodStatus::NoPeriodUpTo(64));
        // brute force: for every p <= 64 the shifted prefix disagrees somewhere
        let prefix = tm.prefix(512);
        for p in 1..=64 {
            assert!((0..256).any(|i| prefix[i] != prefix[i + p]));
        }
        let pre = PointSpec::eventually_periodic(vec![1], vec![0]).unwrap();
        assert_eq!(prime_period(&pre, 8), None);
        assert_eq!(pre.period_status(8), PeriodStatus::Preperiodic);
        // a redundant preperiod is absorbed into the period
        let same = PointSpec::eventually_periodic(vec![0, 0], vec![0]).unwrap();
        assert_eq!(prime_period(&same, 8), Some(1));
    }

    #[test]
    fn intersected_cylinders() {
        let zero = PointSpec::periodic(vec![0]).unwrap();
        let alt = PointSpec::periodic(vec![0, 1]).unwrap();
        assert_eq!(intersected_cylinder(&zero, 2, 1, 1).unwrap(), w("000"));
        assert_eq!(intersected_cylinder(&zero, 2, 1, 0).unwrap(), w("00"));
        assert_eq!(intersected_cylinder(&alt, 3, 2, 1).unwrap(), w("01010"));
        assert!(intersected_cylinder(&PointSpec::thue_morse(), 3, 2, 1).is_err());
        assert!(intersected_cylinder(&alt, 3, 1, 1).is_err());

        // brute force: words of length 5 in [010] ∩ T^{-2}[010]
        let sys = SymbolicSystem::full_shift(2).unwrap();
        let hits: Vec<Word> = enumerate_join(&sys, 5)
            .unwrap()
            .into_iter()
            .filter(|x| x.symbols().starts_with(&[0, 1, 0]) && x.symbols()[2..].starts_with(&[0, 1, 0]))
            .collect();
        assert_eq!(hits, vec![w("01010")]);
    }

    #[test]
    fn hole_normalization() {
        let sys = SymbolicSystem::full_shift(2).unwrap();
        let hole = HoleSpec::new(&sys, words(&["01", "0", "011", "11", "0"])).unwrap();
        assert_eq!(hole.words(), &words(&["0", "11"])[..]);
        assert_eq!(hole.depth(), 2);
        assert!(HoleSpec::new(&sys, Vec::new()).is_err());
        assert!(HoleSpec::new(&SymbolicSystem::golden_mean(), words(&["011"])).is_err());
    }

    #[test]
    fn outer_approximations() {
        let sys = SymbolicSystem::full_shift(2).unwrap();
        let hole = HoleSpec::single(&sys, w("0101")).unwrap();
        for side in [Side::Left, Side::Right] {
            let all: Vec<Word> = outer_j_approximation(&hole, 4, side, &sys)
                .unwrap()
                .into_iter()
                .collect();
            assert_eq!(all, words(&["0101"]));
        }
        let right: Vec<Word> = outer_j_approximation(&hole, 2, Side::Right, &sys)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(right, words(&["01"]));
        let left: Vec<Word> = outer_j_approximation(&hole, 2, Side::Left, &sys)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(left, words(&["01"]));
        assert!(outer_j_approximation(&hole, 0, Side::Left, &sys).is_err());
        assert!(outer_j_approximation(&hole, 5, Side::Left, &sys).is_err());
    }

    /// Brute-force cylinder-meets-set checks over enumerated words.
    fn check_outer_containment(sys: &SymbolicSystem, hole: &HoleSpec) {
        let n = hole.depth();
        for j in 1..=n {
            let right = outer_j_approximation(hole, j, Side::Right, sys).unwrap();
            let brute_right: BTreeSet<Word> = enumerate_join(sys, n)
                .unwrap()
                .into_iter()
                .filter(|x| hole.matches_at(x.symbols(), 0))
                .map(|x| x.prefix(j))
                .collect();
            assert_eq!(right, brute_right);

            // y ranges over words of length n + (n - j); T^{n-j} y starts at n - j
            let left = outer_j_approximation(hole, j, Side::Left, sys).unwrap();
            let brute_left: BTreeSet<Word> = enumerate_join(sys, 2 * n - j)
                .unwrap()
                .into_iter()
                .filter(|y| hole.matches_at(y.symbols(), 0))
                .map(|y| Word::new(y.symbols()[n - j..n].to_vec()))
                .collect();
            assert_eq!(left, brute_left);
        }
    }

    #[test]
    fn outer_approximation_brute_force_on_golden_mean() {
        let sys = SymbolicSystem::golden_mean();
        let hole = HoleSpec::new(&sys, words(&["0100", "10", "001"])).unwrap();
        check_outer_containment(&sys, &hole);
    }

    proptest! {
        #[test]
        fn join_refines(n in 1usize..9, golden in any::<bool>()) {
            let sys = if golden { SymbolicSystem::golden_mean() } else { SymbolicSystem::full_shift(2).unwrap() };
            let coarse = enumerate_join(&sys, n).unwrap();
            let fine = enumerate_join(&sys, n + 1).unwrap();
            let mut restricted: Vec<Word> = fine.iter().map(|x| x.prefix(n)).collect();
            restricted.dedup();
            prop_assert_eq!(restricted, coarse);
        }

        #[test]
        fn cylinders_nest(period in proptest::collection::vec(0u8..3, 1..5), pre in proptest::collection::vec(0u8..3, 0..3), n in 1usize..20) {
            let z = PointSpec::eventually_periodic(pre, period).unwrap();
            let a = cylinder_around(&z, n);
            let b = cylinder_around(&z, n + 1);
            prop_assert!(a.is_prefix_of(&b));
        }

        #[test]
        fn prime_period_is_minimal(period in proptest::collection::vec(0u8..2, 1..9)) {
            let z = PointSpec::periodic(period).unwrap();
            let p = prime_period(&z, 16).unwrap();
            let prefix = z.prefix(64);
            let is_period = |q: usize| (0..48).all(|i| prefix[i] == prefix[i + q]);
            prop_assert!(is_period(p));
            for q in 1..p {
                prop_assert!(!is_period(q));
            }
        }

        #[test]
        fn outer_containment_random_holes(raw in proptest::collection::vec(proptest::collection::vec(0u8..2, 1..5), 1..4)) {
            let sys = SymbolicSystem::full_shift(2).unwrap();
            let hole = HoleSpec::new(&sys, raw.into_iter().map(Word::new)).unwrap();
            check_outer_containment(&sys, &hole);
        }
    }
}
