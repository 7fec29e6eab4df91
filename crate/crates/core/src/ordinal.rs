//! Countable ordinals below ε₀ in Cantor normal form.
//!
//! An [`Ordinal`] is stored as the list of its CNF terms `ω^e₁·c₁ + ω^e₂·c₂ + …`
//! with strictly decreasing exponents and positive coefficients. The exponents
//! are themselves ordinals, so the representation is a finite tree whose height
//! is capped (see [`DEFAULT_HEIGHT_CAP`]).
//!
//! Only the arithmetic needed to build and compare dimension values is provided:
//! successor, finite suprema, ordinal addition and `ω·k`. The first uncountable
//! ordinal exists only as the report sentinel [`OrdinalValue::Uncountable`].
//!
//! Text form uses `w` for ω, e.g. `w^{w+1}*2+w*3+4`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default cap on the exponent tower height accepted by [`Ordinal::validate`]
/// and by the parser.
pub const DEFAULT_HEIGHT_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrdinalError {
    #[error("cannot parse ordinal {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("ordinal exponent tower of height {height} exceeds cap {cap}")]
    TooDeep { height: usize, cap: usize },
    #[error("exponents must be strictly decreasing and coefficients positive")]
    NotNormal,
    #[error("arithmetic on the uncountable sentinel")]
    UncountableArithmetic,
    #[error("coefficient overflow")]
    Overflow,
}

/// Returned when a symbolic evaluation falls outside the recognized closed forms.
///
/// This is an "unknown", not a failure of the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unresolved: {0}")]
pub struct Unresolved(pub String);

/// A countable ordinal below ε₀ in Cantor normal form.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Ordinal {
    terms: Vec<Term>,
}

/// One CNF term `ω^exponent · coefficient`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Term {
    pub exponent: Ordinal,
    pub coefficient: u64,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn finite(n: u64) -> Self {
        if n == 0 {
            return Self::zero();
        }
        Ordinal {
            terms: vec![Term {
                exponent: Self::zero(),
                coefficient: n,
            }],
        }
    }

    pub fn omega() -> Self {
        Self::omega_pow(Self::finite(1))
    }

    /// `ω^e`.
    pub fn omega_pow(exponent: Ordinal) -> Self {
        Ordinal {
            terms: vec![Term {
                exponent,
                coefficient: 1,
            }],
        }
    }

    /// `ω·k`; zero when `k == 0`.
    pub fn omega_times(k: u64) -> Self {
        if k == 0 {
            return Self::zero();
        }
        Ordinal {
            terms: vec![Term {
                exponent: Self::finite(1),
                coefficient: k,
            }],
        }
    }

    /// Builds an ordinal from terms, checking the normal-form invariants.
    pub fn from_terms(terms: Vec<Term>) -> Result<Self, OrdinalError> {
        let ord = Ordinal { terms };
        if ord.is_normal() {
            Ok(ord)
        } else {
            Err(OrdinalError::NotNormal)
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|t| t.exponent.is_zero())
    }

    pub fn as_finite(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [t] if t.exponent.is_zero() => Some(t.coefficient),
            _ => None,
        }
    }

    /// True for limit ordinals (nonzero, no finite part).
    pub fn is_limit(&self) -> bool {
        match self.terms.last() {
            None => false,
            Some(t) => !t.exponent.is_zero(),
        }
    }

    /// Height of the exponent tower: 0 for zero, 1 for positive integers,
    /// 2 for `ω·k + n`, 3 for `ω^ω`, and so on.
    pub fn height(&self) -> usize {
        self.terms
            .iter()
            .map(|t| 1 + t.exponent.height())
            .max()
            .unwrap_or(0)
    }

    fn is_normal(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient > 0 && t.exponent.is_normal())
            && self
                .terms
                .windows(2)
                .all(|w| w[0].exponent.cmp(&w[1].exponent) == Ordering::Greater)
    }

    /// Checks the CNF invariants and the tower height cap.
    pub fn validate(&self, height_cap: usize) -> Result<(), OrdinalError> {
        if !self.is_normal() {
            return Err(OrdinalError::NotNormal);
        }
        let height = self.height();
        if height > height_cap {
            return Err(OrdinalError::TooDeep {
                height,
                cap: height_cap,
            });
        }
        Ok(())
    }

    /// `self + 1`.
    pub fn succ(&self) -> Ordinal {
        let mut terms = self.terms.clone();
        match terms.last_mut() {
            Some(t) if t.exponent.is_zero() => t.coefficient += 1,
            _ => terms.push(Term {
                exponent: Ordinal::zero(),
                coefficient: 1,
            }),
        }
        Ordinal { terms }
    }

    /// Ordinal sum `self + rhs` (not commutative: `1 + ω = ω`).
    pub fn add(&self, rhs: &Ordinal) -> Ordinal {
        let Some(lead) = rhs.terms.first() else {
            return self.clone();
        };
        let mut terms: Vec<Term> = self
            .terms
            .iter()
            .take_while(|t| t.exponent >= lead.exponent)
            .cloned()
            .collect();
        let mut rest = rhs.terms.iter();
        if let Some(last) = terms.last_mut() {
            if last.exponent == lead.exponent {
                last.coefficient += lead.coefficient;
                rest.next();
            }
        }
        terms.extend(rest.cloned());
        Ordinal { terms }
    }

    /// `sup` of a finite list; the empty supremum is 0.
    pub fn sup<'a, I: IntoIterator<Item = &'a Ordinal>>(items: I) -> Ordinal {
        items.into_iter().max().cloned().unwrap_or_default()
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::finite(n)
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.terms.iter().zip(&other.terms) {
            let by_exp = a.exponent.cmp(&b.exponent);
            if by_exp != Ordering::Equal {
                return by_exp;
            }
            let by_coef = a.coefficient.cmp(&b.coefficient);
            if by_coef != Ordering::Equal {
                return by_coef;
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            if t.exponent.is_zero() {
                write!(f, "{}", t.coefficient)?;
                continue;
            }
            f.write_str("w")?;
            match t.exponent.as_finite() {
                Some(1) => {}
                Some(e) => write!(f, "^{e}")?,
                None => write!(f, "^{{{}}}", t.exponent)?,
            }
            if t.coefficient != 1 {
                write!(f, "*{}", t.coefficient)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ordinal({self})")
    }
}

impl FromStr for Ordinal {
    type Err = OrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parser = Parser {
            input: s,
            bytes: s.as_bytes(),
            pos: 0,
        };
        let ord = parser.ordinal()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(parser.error("trailing input"));
        }
        ord.validate(DEFAULT_HEIGHT_CAP)?;
        Ok(ord)
    }
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> OrdinalError {
        OrdinalError::Parse {
            input: self.input.to_string(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn skip_ws(&mut self) {
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<u64, OrdinalError> {
        self.skip_ws();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        self.input[start..self.pos]
            .parse()
            .map_err(|_| OrdinalError::Overflow)
    }

    fn ordinal(&mut self) -> Result<Ordinal, OrdinalError> {
        let mut terms: Vec<Term> = Vec::new();
        loop {
            let term = self.term()?;
            if let Some(t) = term {
                if let Some(prev) = terms.last() {
                    if prev.exponent <= t.exponent {
                        return Err(self.error("exponents must strictly decrease"));
                    }
                }
                terms.push(t);
            } else if !terms.is_empty() {
                return Err(self.error("zero term inside a sum"));
            }
            if !self.eat(b'+') {
                break;
            }
            if terms.is_empty() {
                return Err(self.error("zero term inside a sum"));
            }
        }
        Ok(Ordinal { terms })
    }

    /// Parses one term; `None` for a literal `0`.
    fn term(&mut self) -> Result<Option<Term>, OrdinalError> {
        match self.peek() {
            Some(b'w') => {
                self.pos += 1;
                let exponent = if self.eat(b'^') {
                    if self.eat(b'{') {
                        let e = self.ordinal()?;
                        if !self.eat(b'}') {
                            return Err(self.error("expected '}'"));
                        }
                        e
                    } else {
                        Ordinal::finite(self.integer()?)
                    }
                } else {
                    Ordinal::finite(1)
                };
                if exponent.is_zero() {
                    return Err(self.error("use a plain integer for w^0"));
                }
                let coefficient = if self.eat(b'*') { self.integer()? } else { 1 };
                if coefficient == 0 {
                    return Err(self.error("zero coefficient"));
                }
                Ok(Some(Term {
                    exponent,
                    coefficient,
                }))
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok((n > 0).then(|| Term {
                    exponent: Ordinal::zero(),
                    coefficient: n,
                }))
            }
            _ => Err(self.error("expected 'w' or an integer")),
        }
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A reported dimension value: a CNF ordinal or the uncountable sentinel ω₁.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OrdinalValue {
    Cnf(Ordinal),
    Uncountable,
}

impl OrdinalValue {
    pub fn succ(&self) -> Result<OrdinalValue, OrdinalError> {
        match self {
            OrdinalValue::Cnf(o) => Ok(OrdinalValue::Cnf(o.succ())),
            OrdinalValue::Uncountable => Err(OrdinalError::UncountableArithmetic),
        }
    }

    pub fn add(&self, rhs: &OrdinalValue) -> Result<OrdinalValue, OrdinalError> {
        match (self, rhs) {
            (OrdinalValue::Cnf(a), OrdinalValue::Cnf(b)) => Ok(OrdinalValue::Cnf(a.add(b))),
            _ => Err(OrdinalError::UncountableArithmetic),
        }
    }
}

impl From<Ordinal> for OrdinalValue {
    fn from(o: Ordinal) -> Self {
        OrdinalValue::Cnf(o)
    }
}

impl Ord for OrdinalValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (OrdinalValue::Cnf(a), OrdinalValue::Cnf(b)) => a.cmp(b),
            (OrdinalValue::Cnf(_), OrdinalValue::Uncountable) => Ordering::Less,
            (OrdinalValue::Uncountable, OrdinalValue::Cnf(_)) => Ordering::Greater,
            (OrdinalValue::Uncountable, OrdinalValue::Uncountable) => Ordering::Equal,
        }
    }
}

impl PartialOrd for OrdinalValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for OrdinalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrdinalValue::Cnf(o) => o.fmt(f),
            OrdinalValue::Uncountable => f.write_str("w_1"),
        }
    }
}

impl FromStr for OrdinalValue {
    type Err = OrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "w_1" {
            Ok(OrdinalValue::Uncountable)
        } else {
            s.parse().map(OrdinalValue::Cnf)
        }
    }
}

/// The closed forms a parametrized family `a ↦ f(a)` (a = 1, 2, …) may take.
///
/// `prefix` lists `f(1), …, f(k)` explicitly; the tail rule applies from
/// `a = k + 1` on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceForm {
    /// `f(a) = value` for every `a` past the prefix.
    EventuallyConstant { prefix: Vec<Ordinal>, value: Ordinal },
    /// `f(a) = slope·a + offset` (a finite ordinal) for every `a` past the prefix.
    Affine {
        prefix: Vec<Ordinal>,
        slope: u64,
        offset: i64,
    },
    /// A sequence the evaluator has no closed form for.
    Other(String),
}

/// A supremum together with whether some term attains it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Supremum {
    pub value: Ordinal,
    pub attained: bool,
}

/// `sup { f(a) : a ≥ 1 }` for a recognized closed form.
pub fn sup_of_parametrized(form: &SequenceForm) -> Result<Supremum, Unresolved> {
    let (prefix, tail) = match form {
        SequenceForm::EventuallyConstant { prefix, value } => (
            prefix,
            Supremum {
                value: value.clone(),
                attained: true,
            },
        ),
        SequenceForm::Affine {
            prefix,
            slope,
            offset,
        } => {
            let first = prefix.len() as i128 + 1;
            if (*slope as i128) * first + (*offset as i128) < 0 {
                return Err(Unresolved(format!(
                    "affine tail {slope}·a{offset:+} is negative at a = {first}"
                )));
            }
            if *slope == 0 {
                (
                    prefix,
                    Supremum {
                        value: Ordinal::finite(*offset as u64),
                        attained: true,
                    },
                )
            } else {
                (
                    prefix,
                    Supremum {
                        value: Ordinal::omega(),
                        attained: false,
                    },
                )
            }
        }
        SequenceForm::Other(what) => {
            return Err(Unresolved(format!("no closed form for {what}")));
        }
    };
    let head = Ordinal::sup(prefix);
    Ok(match head.cmp(&tail.value) {
        Ordering::Less => tail,
        Ordering::Equal => Supremum {
            value: head,
            attained: true,
        },
        Ordering::Greater => Supremum {
            value: head,
            attained: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(s: &str) -> Ordinal {
        s.parse().unwrap()
    }

    #[test]
    fn compare_examples() {
        assert_eq!(Ordinal::zero().cmp(&Ordinal::zero()), Ordering::Equal);
        assert_eq!(o("w+3").cmp(&o("w*2")), Ordering::Less);
        assert_eq!(o("w^2").cmp(&o("w*1000")), Ordering::Greater);
        assert!(o("w^{w}") > o("w^100*7+3"));
    }

    #[test]
    fn succ_examples() {
        assert_eq!(Ordinal::zero().succ(), Ordinal::finite(1));
        assert_eq!(Ordinal::omega().succ(), o("w+1"));
        assert_eq!(o("w*2+4").succ(), o("w*2+5"));
    }

    #[test]
    fn sup_examples() {
        assert_eq!(Ordinal::sup(&[]), Ordinal::zero());
        let v: Vec<Ordinal> = [3, 7, 2].into_iter().map(Ordinal::finite).collect();
        assert_eq!(Ordinal::sup(&v), Ordinal::finite(7));
        let v = vec![Ordinal::omega(), Ordinal::finite(5), o("w+1")];
        assert_eq!(Ordinal::sup(&v), o("w+1"));
    }

    #[test]
    fn parametrized_sup() {
        let constant = SequenceForm::EventuallyConstant {
            prefix: vec![],
            value: Ordinal::finite(5),
        };
        assert_eq!(
            sup_of_parametrized(&constant).unwrap(),
            Supremum {
                value: Ordinal::finite(5),
                attained: true
            }
        );
        // a - 1 and 2a + 3
        for (slope, offset) in [(1, -1), (2, 3)] {
            let form = SequenceForm::Affine {
                prefix: vec![],
                slope,
                offset,
            };
            let sup = sup_of_parametrized(&form).unwrap();
            assert_eq!(sup.value, Ordinal::omega());
            assert!(!sup.attained);
            // every term stays finite and grows
            let mut prev = None;
            for a in (1..=1_000_000i64).step_by(997) {
                let v = Ordinal::finite((slope as i64 * a + offset) as u64);
                assert!(v < sup.value);
                if let Some(p) = prev {
                    assert!(v > p);
                }
                prev = Some(v);
            }
        }
        let big_prefix = SequenceForm::Affine {
            prefix: vec![o("w+2")],
            slope: 1,
            offset: 0,
        };
        assert_eq!(
            sup_of_parametrized(&big_prefix).unwrap(),
            Supremum {
                value: o("w+2"),
                attained: true
            }
        );
        assert!(sup_of_parametrized(&SequenceForm::Other("x".into())).is_err());
    }

    #[test]
    fn addition() {
        assert_eq!(Ordinal::finite(3).add(&Ordinal::omega()), Ordinal::omega());
        assert_eq!(Ordinal::omega().add(&Ordinal::omega()), Ordinal::omega_times(2));
        assert_eq!(o("w^2+w").add(&o("w^2*3+1")), o("w^2*4+1"));
        assert_eq!(o("w*2").add(&Ordinal::finite(4)), o("w*2+4"));
    }

    #[test]
    fn text_round_trip() {
        for s in ["0", "7", "w", "w+1", "w*2+4", "w^2", "w^{w+1}*3+w^5+2", "w^{w^{w}}"] {
            assert_eq!(o(s).to_string(), s);
        }
        assert_eq!(o(" w * 2 + 4 "), o("w*2+4"));
        assert_eq!(o("w^{3}"), o("w^3"));
    }

    #[test]
    fn parse_rejects_non_normal() {
        for s in ["3+w", "w+w", "w*0", "", "w+", "w^0", "w^{w}+w^{w}", "x"] {
            assert!(s.parse::<Ordinal>().is_err(), "{s}");
        }
    }

    #[test]
    fn height_cap() {
        let mut tower = Ordinal::omega();
        for _ in 0..10 {
            tower = Ordinal::omega_pow(tower);
        }
        assert!(tower.validate(DEFAULT_HEIGHT_CAP).is_err());
        assert!(tower.to_string().parse::<Ordinal>().is_err());
        assert!(tower.validate(20).is_ok());
    }

    #[test]
    fn uncountable_sentinel() {
        let w1 = OrdinalValue::Uncountable;
        assert!(w1 > OrdinalValue::Cnf(o("w^{w^{w}}*99")));
        assert_eq!(w1.succ(), Err(OrdinalError::UncountableArithmetic));
        assert_eq!("w_1".parse::<OrdinalValue>().unwrap(), w1);
        assert_eq!(w1.to_string(), "w_1");
        assert!(OrdinalValue::Cnf(Ordinal::omega()).succ().is_ok());
    }
}
