//! Short Weierstrass curves `y^2 = x^3 + Ax + B` with affine points plus a
//! formal point at infinity, over any `RingSpec`. The chord-and-tangent law
//! is the classical case split; over a residue ring a non-invertible
//! denominator surfaces as `AdditionFailure` carrying the revealed factor,
//! instead of silently picking a branch.

use crate::nt::{gcd, mod_reduce, sqrt_mod_prime};
use crate::ring::{Coord, RingDivisionError, RingSpec};
use num_bigint::{BigInt, RandBigInt};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    /// The discriminant `4A^3 + 27B^2` is not a unit; over a modular ring
    /// `g` is its gcd with the modulus, over the rationals `g = 0`.
    #[error("singular curve: discriminant obstruction {g}")]
    Singular { g: BigInt },
    #[error("point does not satisfy the curve equation")]
    OffCurve,
}

/// Which denominator turned out to be a zero divisor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdditionContext {
    /// `x_Q - x_P` in the distinct-x chord case.
    Chord,
    /// `2 y_P` in the doubling case.
    Tangent,
    /// Equal x but `y_P != +/- y_Q`: the case split itself disagrees across
    /// the factors of the modulus; `g` divides `y_P - y_Q`.
    EqualX,
}

/// A denominator in the group law shared a factor `1 < g < m` with the
/// modulus; `g` reveals a nontrivial divisor in the style of ECM.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("group law denominator shares factor {g} with the modulus ({context:?})")]
pub struct AdditionFailure {
    pub g: BigInt,
    pub context: AdditionContext,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Point {
    Infinity,
    Affine { x: Coord, y: Coord },
}

impl Point {
    pub fn is_infinity(&self) -> bool {
        matches!(self, Point::Infinity)
    }

    /// x-coordinate of an affine point; panics at infinity.
    pub fn x(&self) -> &Coord {
        match self {
            Point::Affine { x, .. } => x,
            Point::Infinity => panic!("infinity has no x-coordinate"),
        }
    }

    pub fn y(&self) -> &Coord {
        match self {
            Point::Affine { y, .. } => y,
            Point::Infinity => panic!("infinity has no y-coordinate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curve {
    ring: RingSpec,
    a: Coord,
    b: Coord,
}

impl Curve {
    /// Validates that the discriminant is a unit in the ring.
    pub fn new(ring: RingSpec, a: Coord, b: Coord) -> Result<Curve, CurveError> {
        let curve = Curve { ring, a, b };
        let disc = curve.discriminant();
        match (&curve.ring, &disc) {
            (RingSpec::Rationals, d) => {
                if d.is_zero() {
                    return Err(CurveError::Singular { g: BigInt::zero() });
                }
            }
            (ring, Coord::Int(d)) => {
                let m = ring.modulus().expect("modular ring");
                let g = gcd(d, m);
                if !g.is_one() {
                    return Err(CurveError::Singular { g });
                }
            }
            _ => unreachable!("rational element in modular ring"),
        }
        Ok(curve)
    }

    /// Convenience constructor from integer coefficients.
    pub fn from_integers(ring: RingSpec, a: &BigInt, b: &BigInt) -> Result<Curve, CurveError> {
        let a = ring.from_bigint(a);
        let b = ring.from_bigint(b);
        Curve::new(ring, a, b)
    }

    pub fn ring(&self) -> &RingSpec {
        &self.ring
    }

    pub fn a(&self) -> &Coord {
        &self.a
    }

    pub fn b(&self) -> &Coord {
        &self.b
    }

    /// `4A^3 + 27B^2`.
    pub fn discriminant(&self) -> Coord {
        let r = &self.ring;
        let a3 = r.mul(&r.mul(&self.a, &self.a), &self.a);
        let b2 = r.mul(&self.b, &self.b);
        r.add(&r.mul(&r.int(4), &a3), &r.mul(&r.int(27), &b2))
    }

    /// `x^3 + Ax + B`.
    pub fn rhs(&self, x: &Coord) -> Coord {
        let r = &self.ring;
        let x2 = r.mul(x, x);
        let x3 = r.mul(&x2, x);
        r.add(&r.add(&x3, &r.mul(&self.a, x)), &self.b)
    }

    /// Checked affine point constructor.
    pub fn point(&self, x: Coord, y: Coord) -> Result<Point, CurveError> {
        let p = Point::Affine { x, y };
        if self.contains(&p) {
            Ok(p)
        } else {
            Err(CurveError::OffCurve)
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match p {
            Point::Infinity => true,
            Point::Affine { x, y } => {
                let lhs = self.ring.mul(y, y);
                lhs == self.rhs(x)
            }
        }
    }

    pub fn negate(&self, p: &Point) -> Point {
        match p {
            Point::Infinity => Point::Infinity,
            Point::Affine { x, y } => Point::Affine {
                x: x.clone(),
                y: self.ring.neg(y),
            },
        }
    }

    /// Chord-and-tangent addition.
    pub fn add(&self, p: &Point, q: &Point) -> Result<Point, AdditionFailure> {
        let r = &self.ring;
        let (x1, y1, x2, y2) = match (p, q) {
            (Point::Infinity, _) => return Ok(q.clone()),
            (_, Point::Infinity) => return Ok(p.clone()),
            (Point::Affine { x: x1, y: y1 }, Point::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
        };
        if x1 != x2 {
            let den = r.sub(x2, x1);
            let s = self.checked_div(&r.sub(y2, y1), &den, AdditionContext::Chord)?;
            return Ok(self.chord_result(&s, x1, y1, x2));
        }
        if y1 == &r.neg(y2) {
            return Ok(Point::Infinity);
        }
        if y1 == y2 {
            let num = r.add(&r.mul(&r.int(3), &r.mul(x1, x1)), &self.a);
            let den = r.mul(&r.int(2), y1);
            let s = self.checked_div(&num, &den, AdditionContext::Tangent)?;
            return Ok(self.chord_result(&s, x1, y1, x1));
        }
        // Equal x with y1 != +/- y2 only happens over a composite modulus,
        // where (y1 - y2)(y1 + y2) = 0 splits it.
        let m = r.modulus().expect("impossible over a field");
        let g = gcd(&r.sub(y1, y2).as_int().clone(), m);
        debug_assert!(g > BigInt::one() && &g < m);
        Err(AdditionFailure {
            g,
            context: AdditionContext::EqualX,
        })
    }

    fn chord_result(&self, s: &Coord, x1: &Coord, y1: &Coord, x2: &Coord) -> Point {
        let r = &self.ring;
        let x3 = r.sub(&r.sub(&r.mul(s, s), x1), x2);
        let y3 = r.sub(&r.mul(s, &r.sub(x1, &x3)), y1);
        Point::Affine { x: x3, y: y3 }
    }

    fn checked_div(
        &self,
        num: &Coord,
        den: &Coord,
        context: AdditionContext,
    ) -> Result<Coord, AdditionFailure> {
        self.ring.div(num, den).map_err(|e| match e {
            RingDivisionError::NotInvertible { g } => AdditionFailure { g, context },
            RingDivisionError::ZeroDenominator => {
                unreachable!("field denominators are nonzero in the reached cases")
            }
        })
    }

    pub fn sub_points(&self, p: &Point, q: &Point) -> Result<Point, AdditionFailure> {
        self.add(p, &self.negate(q))
    }

    /// `n * p` for `n >= 0` by double-and-add.
    pub fn scalar_mul(&self, n: &BigInt, p: &Point) -> Result<Point, AdditionFailure> {
        assert!(!n.is_negative(), "negative scalar; negate the point instead");
        let mut acc = Point::Infinity;
        for i in (0..n.bits()).rev() {
            acc = self.add(&acc, &acc)?;
            if n.bit(i) {
                acc = self.add(&acc, p)?;
            }
        }
        Ok(acc)
    }

    /// Uniform affine point over a prime field, up to the y-sign choice.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let p = match &self.ring {
            RingSpec::PrimeField { p } => p.clone(),
            _ => panic!("random points need a prime field"),
        };
        loop {
            let x = rng.gen_bigint_range(&BigInt::zero(), &p);
            let x = Coord::Int(x);
            let rhs = self.rhs(&x);
            if let Ok(y0) = sqrt_mod_prime(rhs.as_int(), &p) {
                let y = if rng.gen_bool(0.5) {
                    mod_reduce(&-&y0, &p)
                } else {
                    y0
                };
                return Point::Affine {
                    x,
                    y: Coord::Int(y),
                };
            }
        }
    }

    /// Same curve with coefficients reduced into `target`.
    pub fn reduce(&self, target: &RingSpec) -> Result<Curve, ReduceError> {
        let a = reduce_coord(&self.ring, &self.a, target)?;
        let b = reduce_coord(&self.ring, &self.b, target)?;
        Curve::new(target.clone(), a, b).map_err(|e| match e {
            CurveError::Singular { g } => ReduceError::SingularImage { g },
            CurveError::OffCurve => unreachable!("coefficients are not points"),
        })
    }

    /// Point of this curve mapped into `target`: rational coordinates via
    /// `a * b^-1 mod m`, modular coordinates via reduction of a residue,
    /// which requires the target modulus to divide the source modulus.
    pub fn reduce_point(&self, p: &Point, target: &RingSpec) -> Result<Point, ReduceError> {
        match p {
            Point::Infinity => Ok(Point::Infinity),
            Point::Affine { x, y } => Ok(Point::Affine {
                x: reduce_coord(&self.ring, x, target)?,
                y: reduce_coord(&self.ring, y, target)?,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("denominator shares factor {g} with the target modulus")]
    NotInvertible { g: BigInt },
    #[error("target modulus must divide the source modulus")]
    IncompatibleModuli,
    #[error("target ring must be modular")]
    TargetNotModular,
    #[error("curve becomes singular after reduction: obstruction {g}")]
    SingularImage { g: BigInt },
}

pub fn reduce_coord(source: &RingSpec, c: &Coord, target: &RingSpec) -> Result<Coord, ReduceError> {
    let Some(m) = target.modulus() else {
        return Err(ReduceError::TargetNotModular);
    };
    match (source, c) {
        (RingSpec::Rationals, Coord::Rat(v)) => {
            let den = target.from_bigint(v.denom());
            let inv = target.inv(&den).map_err(|e| match e {
                RingDivisionError::NotInvertible { g } => ReduceError::NotInvertible { g },
                RingDivisionError::ZeroDenominator => unreachable!("target is modular"),
            })?;
            Ok(target.mul(&target.from_bigint(v.numer()), &inv))
        }
        (ring, Coord::Int(v)) => {
            let src_m = ring.modulus().expect("modular source");
            if !(src_m % m).is_zero() {
                return Err(ReduceError::IncompatibleModuli);
            }
            Ok(Coord::Int(mod_reduce(v, m)))
        }
        _ => unreachable!("element variant matches its ring"),
    }
}
