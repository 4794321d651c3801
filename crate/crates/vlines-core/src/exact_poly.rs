//! Exact polynomial arithmetic.
//!
//! [`UniPoly`] is a univariate polynomial in `x` with arbitrary-precision
//! integer coefficients; virtual Poincaré polynomials live here.
//! [`MultiPoly`] is a multivariate polynomial over the rationals in named
//! variables; gluing polynomials live here.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parse `p/q`, `p` or `-p/q` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("malformed rational `{s}`"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Render a rational as `p` or `p/q`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

// ---------------------------------------------------------------------------
// Univariate integer polynomials
// ---------------------------------------------------------------------------

/// Univariate polynomial with integer coefficients, ascending by degree.
/// Canonical: no trailing zeros (the zero polynomial has no coefficients).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct UniPoly {
    coeffs: Vec<BigInt>,
}

impl UniPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn from_i64s(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(1)
    }

    pub fn constant(c: i64) -> Self {
        Self::from_i64s(&[c])
    }

    /// The monomial `c * x^k`.
    pub fn monomial(c: i64, k: usize) -> Self {
        let mut v = vec![BigInt::zero(); k + 1];
        v[k] = BigInt::from(c);
        Self::new(v)
    }

    /// `x^2 - c`.
    pub fn x2_minus(c: i64) -> Self {
        Self::from_i64s(&[-c, 0, 1])
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> BigInt {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn leading_coeff(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_default()
    }

    /// Exact division by `x^2`; `None` if the low coefficients are nonzero.
    pub fn div_x2(&self) -> Option<Self> {
        if self.is_zero() {
            return Some(Self::zero());
        }
        if self.coeff(0).is_zero() && self.coeff(1).is_zero() {
            Some(Self::new(self.coeffs[2..].to_vec()))
        } else {
            None
        }
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        self.coeffs
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * x + c)
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::one(), |acc, _| &acc * self)
    }

    /// Coefficients as `i64`, when they all fit.
    pub fn to_i64s(&self) -> Option<Vec<i64>> {
        self.coeffs.iter().map(|c| c.to_i64()).collect()
    }
}

impl fmt::Display for UniPoly {
    /// Pretty form in decreasing degree, e.g. `x^4 + 4x^2 + 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let a = c.abs();
            let coeff_txt = if a.is_one() && k > 0 {
                String::new()
            } else {
                a.to_string()
            };
            match k {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{coeff_txt}x")?,
                _ => write!(f, "{coeff_txt}x^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl Add for &UniPoly {
    type Output = UniPoly;
    fn add(self, rhs: &UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPoly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &UniPoly {
    type Output = UniPoly;
    fn sub(self, rhs: &UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPoly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &UniPoly {
    type Output = UniPoly;
    fn mul(self, rhs: &UniPoly) -> UniPoly {
        if self.is_zero() || rhs.is_zero() {
            return UniPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPoly::new(out)
    }
}

impl Neg for &UniPoly {
    type Output = UniPoly;
    fn neg(self) -> UniPoly {
        UniPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

macro_rules! forward_owned_binop {
    ($ty:ty, $tr:ident, $m:ident) => {
        impl $tr for $ty {
            type Output = $ty;
            fn $m(self, rhs: $ty) -> $ty {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned_binop!(UniPoly, Add, add);
forward_owned_binop!(UniPoly, Sub, sub);
forward_owned_binop!(UniPoly, Mul, mul);

impl std::iter::Sum for UniPoly {
    fn sum<I: Iterator<Item = UniPoly>>(iter: I) -> Self {
        iter.fold(UniPoly::zero(), |a, b| &a + &b)
    }
}

impl std::iter::Product for UniPoly {
    fn product<I: Iterator<Item = UniPoly>>(iter: I) -> Self {
        iter.fold(UniPoly::one(), |a, b| &a * &b)
    }
}

/// JSON number when the coefficient fits in `i64`, decimal string otherwise.
fn bigint_to_json(c: &BigInt) -> serde_json::Value {
    match c.to_i64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::from(c.to_string()),
    }
}

fn bigint_from_json(v: &serde_json::Value) -> std::result::Result<BigInt, String> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| format!("non-integer coefficient {n}")),
        serde_json::Value::String(s) => s.parse().map_err(|_| format!("bad coefficient {s}")),
        other => Err(format!("bad coefficient {other}")),
    }
}

impl Serialize for UniPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs: Vec<serde_json::Value> = self.coeffs.iter().map(bigint_to_json).collect();
        serde_json::json!({ "coeffs": coeffs }).serialize(s)
    }
}

impl<'de> Deserialize<'de> for UniPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            coeffs: Vec<serde_json::Value>,
        }
        let raw = Raw::deserialize(d)?;
        let coeffs = raw
            .coeffs
            .iter()
            .map(bigint_from_json)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(de::Error::custom)?;
        Ok(UniPoly::new(coeffs))
    }
}

/// Ordered configuration-space factor `∏_{i=0}^{ell-1} (x^2 - k - i)`.
pub fn config_poly(ell: usize, k: usize) -> UniPoly {
    (0..ell)
        .map(|i| UniPoly::x2_minus((k + i) as i64))
        .product()
}

/// Configurations of `m` distinct points modulo translation and dilation:
/// `∏_{j=2}^{m-1} (x^2 - j)`, which is `1` for `m <= 2`.
pub fn quotient_config_poly(m: usize) -> UniPoly {
    (2..m.max(2)).map(|j| UniPoly::x2_minus(j as i64)).product()
}

// ---------------------------------------------------------------------------
// Multivariate rational polynomials
// ---------------------------------------------------------------------------

/// A monomial: variable name to positive exponent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(BTreeMap<String, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial(BTreeMap::from([(name.to_string(), 1)]))
    }

    pub fn from_map(map: BTreeMap<String, u32>) -> Self {
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn exponents(&self) -> &BTreeMap<String, u32> {
        &self.0
    }

    pub fn exponent(&self, v: &str) -> u32 {
        self.0.get(v).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (v, e) in &other.0 {
            *m.entry(v.clone()).or_insert(0) += e;
        }
        Monomial(m)
    }

    /// `self / other`, assuming `other` divides `self`.
    fn div(&self, other: &Monomial) -> Monomial {
        Monomial::from_map(
            self.0
                .iter()
                .map(|(v, e)| (v.clone(), e - other.exponent(v)))
                .collect(),
        )
    }

    pub fn eval(&self, assignment: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        let mut acc = BigRational::one();
        for (v, e) in &self.0 {
            let val = assignment
                .get(v)
                .ok_or_else(|| Error::MissingVariable(v.clone()))?;
            acc *= num_traits::pow(val.clone(), *e as usize);
        }
        Ok(acc)
    }
}

impl Ord for Monomial {
    /// Graded lexicographic order on sorted variable names.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let vars: BTreeSet<&String> = self.0.keys().chain(other.0.keys()).collect();
            for v in vars {
                let c = self.exponent(v).cmp(&other.exponent(v));
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(v, e)| {
                if *e == 1 {
                    v.clone()
                } else {
                    format!("{v}^{e}")
                }
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Multivariate polynomial with rational coefficients; zero coefficients are
/// never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MultiPoly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl MultiPoly {
    pub fn zero() -> Self {
        MultiPoly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn from_int(c: i64) -> Self {
        Self::constant(BigRational::from_integer(c.into()))
    }

    pub fn var(name: &str) -> Self {
        Self::term(BigRational::one(), Monomial::var(name))
    }

    pub fn term(c: BigRational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        MultiPoly { terms }
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> BigRational {
        self.terms
            .get(&Monomial::one())
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|m| m.0.keys().cloned())
            .collect()
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self
            .terms
            .entry(m.clone())
            .or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, c: &BigRational) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a * c);
        }
        out
    }

    pub fn mul_monomial(&self, mono: &Monomial) -> MultiPoly {
        MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.mul(mono), c.clone()))
                .collect(),
        }
    }

    /// Exact evaluation; every variable must be assigned.
    pub fn eval(&self, assignment: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            acc += c * m.eval(assignment)?;
        }
        Ok(acc)
    }

    /// Substitute values for some variables, leaving the others symbolic.
    pub fn partial_eval(&self, assignment: &BTreeMap<String, BigRational>) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut rest = BTreeMap::new();
            for (v, e) in &m.0 {
                match assignment.get(v) {
                    Some(val) => coeff *= num_traits::pow(val.clone(), *e as usize),
                    None => {
                        rest.insert(v.clone(), *e);
                    }
                }
            }
            out.add_term(Monomial(rest), coeff);
        }
        out
    }

    /// Split `p = content * reduced`, where `content` is the greatest common
    /// monomial divisor of all terms restricted to `vars`.
    pub fn monomial_content_split(&self, vars: &BTreeSet<String>) -> Result<(Monomial, MultiPoly)> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let mut content = BTreeMap::new();
        for v in vars {
            let e = self.terms.keys().map(|m| m.exponent(v)).min().unwrap_or(0);
            if e > 0 {
                content.insert(v.clone(), e);
            }
        }
        let content = Monomial(content);
        let reduced = MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.div(&content), c.clone()))
                .collect(),
        };
        Ok((content, reduced))
    }
}

impl fmt::Display for MultiPoly {
    /// Terms in decreasing graded-lex order, e.g. `b1*b2 + 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let a = c.abs();
            if m.is_one() {
                write!(f, "{}", format_rational(&a))?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", format_rational(&a))?;
            }
        }
        Ok(())
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(&-BigRational::one())
    }
}

forward_owned_binop!(MultiPoly, Add, add);
forward_owned_binop!(MultiPoly, Sub, sub);
forward_owned_binop!(MultiPoly, Mul, mul);

#[derive(Serialize, Deserialize)]
struct TermJson {
    coeff: String,
    monomial: BTreeMap<String, u32>,
}

impl Serialize for MultiPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermJson> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| TermJson {
                coeff: format_rational(c),
                monomial: m.0.clone(),
            })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<TermJson>::deserialize(d)?;
        let mut out = MultiPoly::zero();
        for t in raw {
            let c = parse_rational(&t.coeff).map_err(de::Error::custom)?;
            out.add_term(Monomial::from_map(t.monomial), c);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn assign(pairs: &[(&str, BigRational)]) -> BTreeMap<String, BigRational> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    #[test]
    fn uni_arith_examples() {
        let p = UniPoly::x2_minus(2) * UniPoly::x2_minus(3);
        assert_eq!(p, UniPoly::from_i64s(&[6, 0, -5, 0, 1]));
        assert_eq!(p.to_string(), "x^4 - 5x^2 + 6");
        assert_eq!(&p * &UniPoly::one(), p);
        let s = UniPoly::from_i64s(&[1, 0, 1]) + UniPoly::from_i64s(&[-1, 0, 1]);
        assert_eq!(s, UniPoly::from_i64s(&[0, 0, 2]));
        assert_eq!(s.to_string(), "2x^2");
        assert_eq!((&s - &s), UniPoly::zero());
    }

    #[test]
    fn pretty_printing_matches_table_typography() {
        assert_eq!(
            UniPoly::from_i64s(&[1, 0, 4, 0, 1]).to_string(),
            "x^4 + 4x^2 + 1"
        );
        assert_eq!(UniPoly::from_i64s(&[0, 1]).to_string(), "x");
        assert_eq!(UniPoly::from_i64s(&[-1, 0, -1]).to_string(), "-x^2 - 1");
        assert_eq!(UniPoly::zero().to_string(), "0");
    }

    #[test]
    fn config_poly_examples() {
        assert_eq!(config_poly(2, 0), UniPoly::from_i64s(&[0, 0, -1, 0, 1]));
        assert_eq!(config_poly(0, 7), UniPoly::one());
        let expected = UniPoly::x2_minus(2) * UniPoly::x2_minus(3) * UniPoly::x2_minus(4);
        assert_eq!(config_poly(3, 2), expected);
        assert_eq!(config_poly(3, 2).degree(), Some(6));
    }

    #[test]
    fn quotient_config_poly_examples() {
        assert_eq!(quotient_config_poly(3), UniPoly::x2_minus(2));
        assert_eq!(quotient_config_poly(2), UniPoly::one());
        assert_eq!(quotient_config_poly(1), UniPoly::one());
        assert_eq!(quotient_config_poly(0), UniPoly::one());
    }

    #[test]
    fn div_x2_is_exact_or_refuses() {
        let p = config_poly(2, 0);
        assert_eq!(p.div_x2(), Some(UniPoly::x2_minus(1)));
        assert_eq!(UniPoly::x2_minus(1).div_x2(), None);
    }

    #[test]
    fn unipoly_json_round_trip() {
        let p = UniPoly::from_i64s(&[1, 0, 4, 0, 1]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"coeffs":[1,0,4,0,1]}"#);
        let back: UniPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let big = UniPoly::new(vec![BigInt::from(10).pow(30)]);
        let back: UniPoly = serde_json::from_str(&serde_json::to_string(&big).unwrap()).unwrap();
        assert_eq!(back, big);
    }

    #[test]
    fn multi_eval_examples() {
        let b1 = MultiPoly::var("b1");
        let b2 = MultiPoly::var("b2");
        let p = &(&b1 * &b2) + &MultiPoly::from_int(1);
        let v = assign(&[("b1", q(2, 1)), ("b2", q(3, 1))]);
        assert_eq!(p.eval(&v).unwrap(), q(7, 1));
        let c = MultiPoly::constant(q(5, 3));
        assert_eq!(c.eval(&BTreeMap::new()).unwrap(), q(5, 3));
        assert_eq!(
            b1.eval(&BTreeMap::new()),
            Err(Error::MissingVariable("b1".into()))
        );
    }

    #[test]
    fn product_with_gluing_variable_vanishes_at_zero() {
        // x * b evaluated at b = 0 equals the symbolic substitution b -> 0.
        let p = MultiPoly::var("b").scale(&q(3, 2));
        let at0 = p.eval(&assign(&[("b", q(0, 1))])).unwrap();
        let sym = p.partial_eval(&assign(&[("b", q(0, 1))]));
        assert!(at0.is_zero());
        assert!(sym.is_zero());
    }

    #[test]
    fn monomial_content_split_examples() {
        let vars: BTreeSet<String> = ["b1".to_string(), "b2".to_string()].into();
        let b1 = MultiPoly::var("b1");
        let b2 = MultiPoly::var("b2");
        let p = &(&(&b1 * &b1) * &b2) + &(&(&b1 * &b1) * &(&b2 * &b2));
        let (content, reduced) = p.monomial_content_split(&vars).unwrap();
        assert_eq!(content.to_string(), "b1^2*b2");
        assert_eq!(reduced, &MultiPoly::from_int(1) + &b2);

        let (content, reduced) = (&b1 + &b2).monomial_content_split(&vars).unwrap();
        assert!(content.is_one());
        assert_eq!(reduced, &b1 + &b2);

        let only_b1: BTreeSet<String> = ["b1".to_string()].into();
        let x = MultiPoly::var("x");
        let y = MultiPoly::var("y");
        let p = &(&x * &b1) + &(&y * &b1);
        let (content, reduced) = p.monomial_content_split(&only_b1).unwrap();
        assert_eq!(content, Monomial::var("b1"));
        assert_eq!(reduced, &x + &y);
        assert_eq!(reduced.mul_monomial(&content), p);

        assert_eq!(
            MultiPoly::zero().monomial_content_split(&vars),
            Err(Error::ZeroPolynomial)
        );
    }

    #[test]
    fn multipoly_printing_and_json() {
        let b1 = MultiPoly::var("b1");
        let b2 = MultiPoly::var("b2");
        let p = &(&(&b1 * &b2) + &MultiPoly::from_int(1)) - &b2.scale(&q(1, 2));
        assert_eq!(p.to_string(), "b1*b2 - 1/2*b2 + 1");
        let json = serde_json::to_string(&p).unwrap();
        let back: MultiPoly = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(json.contains(r#""coeff":"-1/2""#));
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_rational("-4").unwrap(), q(-4, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    fn arb_uni() -> impl Strategy<Value = UniPoly> {
        proptest::collection::vec(-20i64..20, 0..6).prop_map(|v| UniPoly::from_i64s(&v))
    }

    fn arb_multi() -> impl Strategy<Value = MultiPoly> {
        let term = (-5i64..5, 1i64..4, 0u32..3, 0u32..3, 0u32..2);
        proptest::collection::vec(term, 0..5).prop_map(|ts| {
            ts.into_iter()
                .fold(MultiPoly::zero(), |acc, (n, d, e1, e2, e3)| {
                    let m = Monomial::from_map(BTreeMap::from([
                        ("b1".to_string(), e1),
                        ("b2".to_string(), e2),
                        ("x".to_string(), e3),
                    ]));
                    &acc + &MultiPoly::term(q(n, d), m)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn uni_ring_laws(a in arb_uni(), b in arb_uni(), c in arb_uni()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&(&a - &b) + &b, a.clone());
            if let Some(d) = a.degree() {
                prop_assert!(!a.coeffs()[d].is_zero());
            }
        }

        #[test]
        fn config_poly_at_one(ell in 0usize..6, k in 0usize..6) {
            let expected: i64 = (0..ell as i64).map(|i| 1 - k as i64 - i).product();
            prop_assert_eq!(config_poly(ell, k).eval(&BigInt::one()), BigInt::from(expected));
        }

        #[test]
        fn multi_eval_is_multiplicative(p in arb_multi(), r in arb_multi(),
                                        v1 in -4i64..4, v2 in -4i64..4, v3 in 1i64..4) {
            let v = assign(&[("b1", q(v1, 1)), ("b2", q(v2, v3)), ("x", q(v3, 2))]);
            prop_assert_eq!((&p * &r).eval(&v).unwrap(), p.eval(&v).unwrap() * r.eval(&v).unwrap());
        }

        #[test]
        fn content_split_reexpands(p in arb_multi()) {
            prop_assume!(!p.is_zero());
            let vars: BTreeSet<String> = ["b1".to_string(), "b2".to_string()].into();
            let (content, reduced) = p.monomial_content_split(&vars).unwrap();
            prop_assert_eq!(reduced.mul_monomial(&content), p);
            for v in &vars {
                prop_assert!(reduced.terms().keys().any(|m| m.exponent(v) == 0));
            }
        }
    }
}
