use std::fmt;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Parse `"p/q"`, an integer, or a finite decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// `"p/q"`, or `"p"` for integers.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // huge numerator/denominator: fall back to a ratio of logs
        let sign = if r.is_negative() { -1.0 } else { 1.0 };
        let n = r.numer().abs().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        sign * n / d
    })
}

/// A point of ℝ^d with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub Vec<BigRational>);

impl Point {
    pub fn zero(dim: usize) -> Self {
        Point(vec![BigRational::zero(); dim])
    }

    pub fn from_ints(xs: &[i64]) -> Self {
        Point(xs.iter().map(|&x| BigRational::from_integer(x.into())).collect())
    }

    pub fn parse(coords: &[&str]) -> Result<Self> {
        coords.iter().map(|c| parse_rational(c)).collect::<Result<_>>().map(Point)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational_to_f64).collect()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: &BigRational) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    /// `s·self + t`
    pub fn scale_add(&self, s: &BigRational, t: &Point) -> Point {
        Point(self.0.iter().zip(&t.0).map(|(a, b)| a * s + b).collect())
    }

    pub fn dist2(&self, other: &Point) -> BigRational {
        let mut acc = BigRational::zero();
        for (a, b) in self.0.iter().zip(&other.0) {
            let d = a - b;
            acc += &d * &d;
        }
        acc
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(format_rational).collect()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_strings().join(", "))
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|c| parse_rational(c))
            .collect::<Result<_>>()
            .map(Point)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("1/2").unwrap(), BigRational::new(1.into(), 2.into()));
        assert_eq!(parse_rational("-0.25").unwrap(), BigRational::new((-1).into(), 4.into()));
        assert_eq!(parse_rational("3").unwrap(), BigRational::from_integer(3.into()));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn format_round_trip() {
        for s in ["1/3", "-5/7", "4", "0"] {
            assert_eq!(format_rational(&parse_rational(s).unwrap()), s);
        }
    }
}
