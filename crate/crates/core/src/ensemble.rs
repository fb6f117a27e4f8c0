//! Factor-parameter sequences, their frequency measures, and the shift
//! constants s_n(L) that put finite-L and Ginibre factors on the same scale.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{digamma, harmonic, EULER_GAMMA};

/// Tolerance on the total mass of a [`FrequencyMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// The unitary-group size of one factor: a finite `L` (truncated Haar corner
/// of U(L)) or infinity (complex Ginibre).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entry {
    Finite(u64),
    Infinity,
}

impl Entry {
    /// `L − n`, or `None` for a Ginibre factor.
    pub fn gap(self, n: usize) -> Option<u64> {
        match self {
            Entry::Finite(l) => Some(l - n as u64),
            Entry::Infinity => None,
        }
    }

    pub fn check(self, n: usize) -> Result<()> {
        match self {
            Entry::Finite(l) if l <= n as u64 => Err(Error::Domain(format!(
                "factor parameter L = {l} must exceed n = {n}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Finite(l) => write!(f, "{l}"),
            Entry::Infinity => f.write_str("inf"),
        }
    }
}

/// One token of the textual pattern grammar.
///
/// `inf` and plain integers name `L` directly; `+k` names the gap `L − n = k`
/// so the same pattern can be reused across a grid of dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternToken {
    Absolute(u64),
    Gap(u64),
    Infinity,
}

impl PatternToken {
    pub fn resolve(self, n: usize) -> Entry {
        match self {
            PatternToken::Absolute(l) => Entry::Finite(l),
            PatternToken::Gap(k) => Entry::Finite(n as u64 + k),
            PatternToken::Infinity => Entry::Infinity,
        }
    }
}

impl fmt::Display for PatternToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternToken::Absolute(l) => write!(f, "{l}"),
            PatternToken::Gap(k) => write!(f, "+{k}"),
            PatternToken::Infinity => f.write_str("inf"),
        }
    }
}

/// A parsed pattern string such as `inf,5,5` or `inf,+3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern(pub Vec<PatternToken>);

impl Pattern {
    pub fn resolve(&self, n: usize) -> Vec<Entry> {
        self.0.iter().map(|t| t.resolve(n)).collect()
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut offset = 0;
        for raw in s.split(',') {
            let lead = raw.len() - raw.trim_start().len();
            let position = offset + lead;
            let text = raw.trim();
            let token = parse_token(text).map_err(|message| Error::Parse { position, message })?;
            tokens.push(token);
            offset += raw.len() + 1;
        }
        Ok(Pattern(tokens))
    }
}

fn parse_token(text: &str) -> std::result::Result<PatternToken, String> {
    if text.is_empty() {
        return Err("empty pattern entry".into());
    }
    if text.eq_ignore_ascii_case("inf") {
        return Ok(PatternToken::Infinity);
    }
    let (digits, gap) = match text.strip_prefix('+') {
        Some(rest) => (rest, true),
        None => (text, false),
    };
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("expected a positive integer or \"inf\", found {text:?}"));
    }
    let value: u64 = digits
        .parse()
        .map_err(|e| format!("invalid integer {text:?}: {e}"))?;
    if value == 0 {
        return Err("entries must be positive".into());
    }
    Ok(if gap {
        PatternToken::Gap(value)
    } else {
        PatternToken::Absolute(value)
    })
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// The sequence (L_τ)_{τ≥1} obtained by repeating a finite pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleSequence {
    n: usize,
    pattern: Vec<Entry>,
}

impl EnsembleSequence {
    pub fn new(n: usize, pattern: Vec<Entry>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("dimension n must be positive".into()));
        }
        if pattern.is_empty() {
            return Err(Error::Validation("pattern must contain at least one entry".into()));
        }
        for (idx, e) in pattern.iter().enumerate() {
            e.check(n)
                .map_err(|err| Error::Validation(format!("pattern entry {}: {err}", idx + 1)))?;
        }
        Ok(Self { n, pattern })
    }

    /// Parse the textual pattern grammar and resolve it at dimension `n`.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let pattern: Pattern = text.parse()?;
        Self::new(n, pattern.resolve(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pattern(&self) -> &[Entry] {
        &self.pattern
    }

    pub fn period(&self) -> usize {
        self.pattern.len()
    }

    /// L_τ for τ ≥ 1.
    pub fn entry(&self, tau: usize) -> Entry {
        assert!(tau >= 1, "factor index is 1-based");
        self.pattern[(tau - 1) % self.pattern.len()]
    }

    /// The first `t` entries L_1, …, L_t.
    pub fn prefix(&self, t: usize) -> Vec<Entry> {
        (1..=t).map(|tau| self.entry(tau)).collect()
    }

    fn count_gap_at_least(&self, k: u64, t: usize) -> u64 {
        let hit = |e: &Entry| e.gap(self.n).is_none_or(|g| g >= k);
        let per_period = self.pattern.iter().filter(|e| hit(e)).count() as u64;
        let full = (t / self.period()) as u64;
        let rest = self.pattern[..t % self.period()].iter().filter(|e| hit(e)).count() as u64;
        full * per_period + rest
    }
}

impl fmt::Display for EnsembleSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.pattern.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Discrete probability measure on the positive integers plus an atom at
/// infinity, restricted to finite support.
///
/// Tail weights ρ(⟦k,∞⟧) are stored directly so that measures derived from a
/// pattern carry the exactly rounded count ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct FrequencyMeasure {
    atoms: BTreeMap<u64, f64>,
    infinity: f64,
    /// tails[k-1] = ρ(⟦k,∞⟧) for k = 1..=max support.
    tails: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: BTreeMap<u64, f64>,
    infinity: f64,
}

impl TryFrom<MeasureRepr> for FrequencyMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        FrequencyMeasure::new(r.atoms, r.infinity)
    }
}

impl From<FrequencyMeasure> for MeasureRepr {
    fn from(m: FrequencyMeasure) -> Self {
        MeasureRepr {
            atoms: m.atoms,
            infinity: m.infinity,
        }
    }
}

impl FrequencyMeasure {
    pub fn new(atoms: BTreeMap<u64, f64>, weight_at_infinity: f64) -> Result<Self> {
        let bad = |w: f64| !w.is_finite() || w < 0.0;
        if bad(weight_at_infinity) {
            return Err(Error::Validation(format!(
                "weight at infinity must be a nonnegative number, got {weight_at_infinity}"
            )));
        }
        let mut kept = BTreeMap::new();
        for (&k, &w) in &atoms {
            if k == 0 {
                return Err(Error::Validation("support points must be positive integers".into()));
            }
            if bad(w) {
                return Err(Error::Validation(format!("atom at {k} has invalid weight {w}")));
            }
            if w > 0.0 {
                kept.insert(k, w);
            }
        }
        let total: f64 = kept.values().sum::<f64>() + weight_at_infinity;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Validation(format!(
                "total mass must be 1 within {MASS_TOLERANCE:e}, got {total}"
            )));
        }
        let max = kept.keys().next_back().copied().unwrap_or(0) as usize;
        let mut tails = vec![0.0; max];
        let mut running = weight_at_infinity;
        for k in (1..=max).rev() {
            running += kept.get(&(k as u64)).copied().unwrap_or(0.0);
            tails[k - 1] = running;
        }
        Ok(Self {
            atoms: kept,
            infinity: weight_at_infinity,
            tails,
        })
    }

    /// All mass at infinity: every factor is Ginibre.
    pub fn ginibre() -> Self {
        Self::new(BTreeMap::new(), 1.0).expect("unit mass at infinity")
    }

    pub fn atoms(&self) -> &BTreeMap<u64, f64> {
        &self.atoms
    }

    pub fn weight_at_infinity(&self) -> f64 {
        self.infinity
    }

    /// Largest finite support point (0 when there is none).
    pub fn max_support(&self) -> u64 {
        self.tails.len() as u64
    }

    /// First index from which the tail weight is constant (= weight at ∞).
    pub fn tail_start(&self) -> u64 {
        self.max_support() + 1
    }

    /// ρ(⟦k,∞⟧).
    pub fn tail_weight(&self, k: u64) -> Result<f64> {
        if k < 1 {
            return Err(Error::Domain("tail index k must be at least 1".into()));
        }
        Ok(self.tail(k))
    }

    pub(crate) fn tail(&self, k: u64) -> f64 {
        self.tails
            .get(k as usize - 1)
            .copied()
            .unwrap_or(self.infinity)
    }
}

/// Exact frequency measure of the gaps L_τ − n over one pattern period.
pub fn measure_from_sequence(seq: &EnsembleSequence) -> FrequencyMeasure {
    let period = seq.period() as u64;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut at_infinity = 0u64;
    for e in seq.pattern() {
        match e.gap(seq.n()) {
            Some(g) => *counts.entry(g).or_default() += 1,
            None => at_infinity += 1,
        }
    }
    let ratio = |c: u64| Ratio::new(c, period);
    let atoms = counts.iter().map(|(&k, &c)| (k, to_f64(ratio(c)))).collect();
    let max = counts.keys().next_back().copied().unwrap_or(0) as usize;
    let mut tails = vec![0.0; max];
    let mut running = at_infinity;
    for k in (1..=max).rev() {
        running += counts.get(&(k as u64)).copied().unwrap_or(0);
        tails[k - 1] = to_f64(ratio(running));
    }
    FrequencyMeasure {
        atoms,
        infinity: to_f64(ratio(at_infinity)),
        tails,
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// ρ_{n,T}(⟦k,∞⟧) = #{τ ≤ T : L_τ − n ≥ k} / T, kept as an exact rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmpiricalFrequency {
    pub k: u64,
    pub t: usize,
    pub value: Ratio<u64>,
}

impl EmpiricalFrequency {
    pub fn to_f64(&self) -> f64 {
        to_f64(self.value)
    }
}

pub fn empirical_tail(seq: &EnsembleSequence, k: u64, t: usize) -> Result<EmpiricalFrequency> {
    if k < 1 {
        return Err(Error::Domain("tail index k must be at least 1".into()));
    }
    if t < 1 {
        return Err(Error::Domain("prefix length T must be at least 1".into()));
    }
    let count = seq.count_gap_at_least(k, t);
    Ok(EmpiricalFrequency {
        k,
        t,
        value: Ratio::new(count, t as u64),
    })
}

/// s_n(L) = H_{L−n} − log L, and s_n(∞) = γ.
pub fn shift_s(n: usize, entry: Entry) -> Result<f64> {
    entry.check(n)?;
    Ok(match entry {
        Entry::Finite(l) => harmonic(l - n as u64) - (l as f64).ln(),
        Entry::Infinity => EULER_GAMMA,
    })
}

/// α = Σ_k ρ(⟦k,∞⟧)(1/k + log(1 − 1/(k+n))), the long-run average of s_n(L_τ).
///
/// Terms below K = max support + 1 are summed directly; the constant tail
/// ρ∞ Σ_{k≥K}(…) telescopes to ρ∞(log(K+n−1) − ψ(K)).
pub fn alpha(measure: &FrequencyMeasure, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be positive".into()));
    }
    let nf = n as f64;
    let big_k = measure.tail_start();
    let mut sum = 0.0;
    for k in 1..big_k {
        let kf = k as f64;
        sum += measure.tail(k) * (1.0 / kf + (-1.0 / (kf + nf)).ln_1p());
    }
    let rho_inf = measure.weight_at_infinity();
    if rho_inf > 0.0 {
        let kf = big_k as f64;
        sum += rho_inf * ((kf + nf - 1.0).ln() - digamma(kf)?);
    }
    Ok(sum)
}

/// lim (1/T) Σ_τ s_n(L_τ) = α − log n.
///
/// Summation by parts of Σ_k ρ(k)(H_k − log(k+n)) leaves the boundary term
/// −ρ(⟦1,∞⟧)·log n = −log n next to the α series.
pub fn mean_shift(measure: &FrequencyMeasure, n: usize) -> Result<f64> {
    Ok(alpha(measure, n)? - (n as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn seq(n: usize, text: &str) -> EnsembleSequence {
        EnsembleSequence::parse(n, text).unwrap()
    }

    #[test]
    fn tail_weight_examples() {
        let all_inf = measure_from_sequence(&seq(3, "inf"));
        for k in [1, 2, 100] {
            assert_eq!(all_inf.tail_weight(k).unwrap(), 1.0);
        }
        let mixed = measure_from_sequence(&seq(2, "inf,5"));
        assert_eq!(mixed.tail_weight(3).unwrap(), 1.0);
        assert_eq!(mixed.tail_weight(4).unwrap(), 0.5);
        let single = measure_from_sequence(&seq(1, "4"));
        assert_eq!(single.tail_weight(4).unwrap(), 0.0);
        assert!(single.tail_weight(0).is_err());
    }

    #[test]
    fn measure_examples() {
        let m = measure_from_sequence(&seq(2, "inf,5"));
        assert_eq!(m.atoms(), &BTreeMap::from([(3, 0.5)]));
        assert_eq!(m.weight_at_infinity(), 0.5);

        let m = measure_from_sequence(&seq(1, "2"));
        assert_eq!(m.atoms(), &BTreeMap::from([(1, 1.0)]));
        assert_eq!(m.weight_at_infinity(), 0.0);

        assert_eq!(measure_from_sequence(&seq(3, "inf")), FrequencyMeasure::ginibre());
    }

    #[test]
    fn sequence_validation() {
        assert!(EnsembleSequence::parse(2, "inf,2").is_err());
        assert!(EnsembleSequence::parse(0, "inf").is_err());
        assert!(EnsembleSequence::new(2, vec![]).is_err());
        assert_eq!(seq(4, "+1,inf").pattern(), &[Entry::Finite(5), Entry::Infinity]);
    }

    #[test]
    fn pattern_parse_errors_carry_position() {
        match "inf, 5,x7".parse::<Pattern>() {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!("inf,,3".parse::<Pattern>(), Err(Error::Parse { position: 4, .. })));
        assert!("0".parse::<Pattern>().is_err());
        assert_eq!("inf,5,+3".parse::<Pattern>().unwrap().to_string(), "inf,5,+3");
    }

    #[test]
    fn empirical_tail_examples() {
        let s = seq(2, "inf,5");
        assert_eq!(empirical_tail(&s, 4, 2).unwrap().value, Ratio::new(1, 2));
        assert_eq!(empirical_tail(&s, 4, 1).unwrap().value, Ratio::new(1, 1));
        assert_eq!(empirical_tail(&seq(1, "2"), 1, 7).unwrap().value, Ratio::new(1, 1));
        assert!(empirical_tail(&s, 1, 0).is_err());
    }

    #[test]
    fn shift_examples() {
        assert_abs_diff_eq!(shift_s(1, Entry::Finite(2)).unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            shift_s(2, Entry::Finite(5)).unwrap(),
            11.0 / 6.0 - 5f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(shift_s(2, Entry::Finite(5)).unwrap(), 0.2238954, epsilon = 1e-7);
        assert_eq!(shift_s(7, Entry::Infinity).unwrap(), EULER_GAMMA);
        assert!(shift_s(3, Entry::Finite(3)).is_err());
    }

    #[test]
    fn shift_approaches_gamma() {
        for n in [1usize, 3, 10] {
            for l in [1_000u64, 10_000, 100_000] {
                let s = shift_s(n, Entry::Finite(l)).unwrap();
                let bound = 1.0 / (2.0 * (l - n as u64) as f64) + n as f64 / l as f64;
                assert!((s - EULER_GAMMA).abs() <= bound, "n={n} L={l}");
            }
        }
    }

    /// Direct partial sum of the α series to `upto` plus the leading
    /// Euler–Maclaurin tail of the constant-ρ∞ remainder.
    fn alpha_partial(m: &FrequencyMeasure, n: usize, upto: u64) -> f64 {
        let nf = n as f64;
        let mut s = 0.0;
        for k in (1..=upto).rev() {
            let kf = k as f64;
            s += m.tail(k) * (1.0 / kf + (-1.0 / (kf + nf)).ln_1p());
        }
        // Σ_{k>M} (1/k − 1/(k+n) + O(k⁻²)) ≈ n/M
        s + m.weight_at_infinity() * (nf - 0.5) / upto as f64
    }

    fn test_measures() -> Vec<FrequencyMeasure> {
        vec![
            FrequencyMeasure::ginibre(),
            FrequencyMeasure::new(BTreeMap::from([(1, 1.0)]), 0.0).unwrap(),
            FrequencyMeasure::new(BTreeMap::from([(3, 0.5)]), 0.5).unwrap(),
            FrequencyMeasure::new(BTreeMap::from([(1, 0.25), (4, 0.25), (9, 0.2)]), 0.3).unwrap(),
        ]
    }

    #[test]
    fn alpha_examples() {
        let g = FrequencyMeasure::ginibre();
        assert_abs_diff_eq!(alpha(&g, 1).unwrap(), EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha(&g, 3).unwrap(), EULER_GAMMA + 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(alpha(&g, 3).unwrap(), 1.6758268, epsilon = 2e-6);
        let one = FrequencyMeasure::new(BTreeMap::from([(1, 1.0)]), 0.0).unwrap();
        assert_abs_diff_eq!(alpha(&one, 1).unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn alpha_closed_form_matches_partial_sums() {
        for m in test_measures() {
            for n in [1usize, 2, 5, 17] {
                let closed = alpha(&m, n).unwrap();
                let brute = alpha_partial(&m, n, 1_000_000);
                assert!((closed - brute).abs() < 1e-5, "n={n} {closed} vs {brute}");
            }
        }
    }

    #[test]
    fn average_shift_over_periods() {
        for (n, text) in [(1usize, "inf,2"), (2, "inf,5,3,+7"), (3, "inf"), (5, "+1,+1,+4")] {
            let s = seq(n, text);
            let m = measure_from_sequence(&s);
            let avg: f64 = s.pattern().iter().map(|&e| shift_s(n, e).unwrap()).sum::<f64>()
                / s.period() as f64;
            assert_abs_diff_eq!(avg, mean_shift(&m, n).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(avg, alpha(&m, n).unwrap() - (n as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn measure_json_round_trip() {
        let m = FrequencyMeasure::new(BTreeMap::from([(3, 0.5)]), 0.5).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"atoms":{"3":0.5},"infinity":0.5}"#);
        let back: FrequencyMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<FrequencyMeasure>(r#"{"atoms":{"3":0.5},"infinity":0.6}"#).is_err());
    }

    fn arb_pattern() -> impl Strategy<Value = (usize, Vec<Entry>)> {
        (1usize..6).prop_flat_map(|n| {
            let entry = prop_oneof![
                Just(Entry::Infinity),
                (1u64..12).prop_map(move |g| Entry::Finite(n as u64 + g)),
            ];
            (Just(n), prop::collection::vec(entry, 1..9))
        })
    }

    proptest! {
        #[test]
        fn tails_nonincreasing_and_settle((n, pattern) in arb_pattern()) {
            let s = EnsembleSequence::new(n, pattern).unwrap();
            let m = measure_from_sequence(&s);
            let mut prev = 1.0;
            for k in 1..=m.max_support() + 3 {
                let t = m.tail_weight(k).unwrap();
                prop_assert!(t <= prev);
                prev = t;
            }
            prop_assert_eq!(m.tail_weight(m.max_support() + 1).unwrap(), m.weight_at_infinity());
        }

        #[test]
        fn empirical_tail_exact_on_whole_periods((n, pattern) in arb_pattern(), periods in 1usize..5) {
            let s = EnsembleSequence::new(n, pattern).unwrap();
            let m = measure_from_sequence(&s);
            for k in 1..=m.max_support() + 2 {
                let emp = empirical_tail(&s, k, periods * s.period()).unwrap();
                prop_assert_eq!(emp.to_f64(), m.tail_weight(k).unwrap());
            }
        }
    }
}
