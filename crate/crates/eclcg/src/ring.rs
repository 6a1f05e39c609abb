//! Coefficient rings for curve arithmetic: a prime field, a residue ring
//! with odd modulus coprime to 3, or the rationals. Modular elements are
//! canonical representatives in `[0, m)`; rational elements are exact
//! fractions in lowest terms.

use crate::jsonio;
use crate::nt::{ext_gcd, gcd, mod_reduce};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("prime field modulus must exceed 3 and be coprime to 6, got {0}")]
    BadPrimeFieldModulus(BigInt),
    #[error("residue ring modulus must be >= 2 and coprime to 6, got {0}")]
    BadResidueModulus(BigInt),
}

/// Division failed: either a modular zero divisor or a rational zero.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingDivisionError {
    #[error("zero divisor: gcd with modulus is {g}")]
    NotInvertible { g: BigInt },
    #[error("division by zero over the rationals")]
    ZeroDenominator,
}

/// A coefficient ring, fixed per curve or model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RingSpec {
    PrimeField { p: BigInt },
    ResidueRing { m: BigInt },
    Rationals,
}

/// One ring element; the variant always matches the ring it lives in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coord {
    Int(BigInt),
    Rat(BigRational),
}

impl Coord {
    /// Modular payload; panics on a rational element.
    pub fn as_int(&self) -> &BigInt {
        match self {
            Coord::Int(v) => v,
            Coord::Rat(_) => panic!("expected a modular element"),
        }
    }

    /// Rational payload; panics on a modular element.
    pub fn as_rat(&self) -> &BigRational {
        match self {
            Coord::Rat(v) => v,
            Coord::Int(_) => panic!("expected a rational element"),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coord::Int(v) => v.is_zero(),
            Coord::Rat(v) => v.is_zero(),
        }
    }
}

impl RingSpec {
    /// Field `Z_p`; requires `p > 3` with `gcd(p, 6) = 1`.
    pub fn prime_field(p: BigInt) -> Result<Self, RingError> {
        if p <= BigInt::from(3) || !gcd(&p, &BigInt::from(6)).is_one() {
            return Err(RingError::BadPrimeFieldModulus(p));
        }
        Ok(RingSpec::PrimeField { p })
    }

    /// Ring `Z_m`; requires `m >= 2` with `gcd(m, 6) = 1`.
    pub fn residue_ring(m: BigInt) -> Result<Self, RingError> {
        if m < BigInt::from(2) || !gcd(&m, &BigInt::from(6)).is_one() {
            return Err(RingError::BadResidueModulus(m));
        }
        Ok(RingSpec::ResidueRing { m })
    }

    pub fn rationals() -> Self {
        RingSpec::Rationals
    }

    pub fn modulus(&self) -> Option<&BigInt> {
        match self {
            RingSpec::PrimeField { p } => Some(p),
            RingSpec::ResidueRing { m } => Some(m),
            RingSpec::Rationals => None,
        }
    }

    pub fn is_modular(&self) -> bool {
        self.modulus().is_some()
    }

    /// Embed an integer.
    pub fn from_bigint(&self, v: &BigInt) -> Coord {
        match self.modulus() {
            Some(m) => Coord::Int(mod_reduce(v, m)),
            None => Coord::Rat(BigRational::from_integer(v.clone())),
        }
    }

    pub fn int(&self, v: i64) -> Coord {
        self.from_bigint(&BigInt::from(v))
    }

    /// Embed an exact fraction; only meaningful over the rationals.
    pub fn rational(&self, num: &BigInt, den: &BigInt) -> Coord {
        assert!(
            matches!(self, RingSpec::Rationals),
            "fractions only live in the rational ring"
        );
        assert!(!den.is_zero(), "zero denominator");
        Coord::Rat(BigRational::new(num.clone(), den.clone()))
    }

    fn canon(&self, v: BigInt) -> Coord {
        match self.modulus() {
            Some(m) => Coord::Int(mod_reduce(&v, m)),
            None => unreachable!("canon is for modular rings"),
        }
    }

    pub fn add(&self, a: &Coord, b: &Coord) -> Coord {
        match (a, b) {
            (Coord::Int(a), Coord::Int(b)) => self.canon(a + b),
            (Coord::Rat(a), Coord::Rat(b)) => Coord::Rat(a + b),
            _ => panic!("mixed ring elements"),
        }
    }

    pub fn sub(&self, a: &Coord, b: &Coord) -> Coord {
        match (a, b) {
            (Coord::Int(a), Coord::Int(b)) => self.canon(a - b),
            (Coord::Rat(a), Coord::Rat(b)) => Coord::Rat(a - b),
            _ => panic!("mixed ring elements"),
        }
    }

    pub fn mul(&self, a: &Coord, b: &Coord) -> Coord {
        match (a, b) {
            (Coord::Int(a), Coord::Int(b)) => self.canon(a * b),
            (Coord::Rat(a), Coord::Rat(b)) => Coord::Rat(a * b),
            _ => panic!("mixed ring elements"),
        }
    }

    pub fn neg(&self, a: &Coord) -> Coord {
        match a {
            Coord::Int(a) => self.canon(-a),
            Coord::Rat(a) => Coord::Rat(-a),
        }
    }

    /// Multiplicative inverse; over `Z_m` a zero divisor reports its gcd
    /// with the modulus (`g = m` for zero itself).
    pub fn inv(&self, a: &Coord) -> Result<Coord, RingDivisionError> {
        match a {
            Coord::Int(a) => {
                let m = self.modulus().expect("modular element in modular ring");
                let (g, s, _) = ext_gcd(a, m);
                if g.is_one() {
                    Ok(Coord::Int(mod_reduce(&s, m)))
                } else {
                    let g = if g.is_zero() { m.clone() } else { g };
                    Err(RingDivisionError::NotInvertible { g })
                }
            }
            Coord::Rat(a) => {
                if a.is_zero() {
                    Err(RingDivisionError::ZeroDenominator)
                } else {
                    Ok(Coord::Rat(a.recip()))
                }
            }
        }
    }

    pub fn div(&self, a: &Coord, b: &Coord) -> Result<Coord, RingDivisionError> {
        Ok(self.mul(a, &self.inv(b)?))
    }
}

pub fn coord_to_string(c: &Coord) -> String {
    match c {
        Coord::Int(v) => v.to_str_radix(10),
        Coord::Rat(v) => format!("{}/{}", v.numer(), v.denom()),
    }
}

fn coord_from_string(s: &str) -> Result<Coord, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|e| format!("bad numerator: {e}"))?;
            let d: BigInt = d.trim().parse().map_err(|e| format!("bad denominator: {e}"))?;
            if d.is_zero() {
                return Err("zero denominator".into());
            }
            Ok(Coord::Rat(BigRational::new(n, d)))
        }
        None => Ok(Coord::Int(
            s.parse().map_err(|e| format!("bad integer: {e}"))?,
        )),
    }
}

impl Serialize for Coord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&coord_to_string(self))
    }
}

impl<'de> Deserialize<'de> for Coord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        coord_from_string(&s).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RingSpecWire {
    PrimeField {
        #[serde(with = "jsonio::dec")]
        modulus: BigInt,
    },
    ResidueRing {
        #[serde(with = "jsonio::dec")]
        modulus: BigInt,
    },
    Rationals,
}

impl Serialize for RingSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let wire = match self {
            RingSpec::PrimeField { p } => RingSpecWire::PrimeField { modulus: p.clone() },
            RingSpec::ResidueRing { m } => RingSpecWire::ResidueRing { modulus: m.clone() },
            RingSpec::Rationals => RingSpecWire::Rationals,
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RingSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RingSpecWire::deserialize(d)? {
            RingSpecWire::PrimeField { modulus } => {
                RingSpec::prime_field(modulus).map_err(D::Error::custom)
            }
            RingSpecWire::ResidueRing { modulus } => {
                RingSpec::residue_ring(modulus).map_err(D::Error::custom)
            }
            RingSpecWire::Rationals => Ok(RingSpec::Rationals),
        }
    }
}
