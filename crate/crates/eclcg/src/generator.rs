//! Output streams of the x-coordinate generator and the x-only prediction
//! recurrence that drives a recovered model forward.
//!
//! A [`GeneratorInstance`] walks `W_n = W_{n-1} + G` over a prime-field curve
//! and emits `x(W_n)` for `n = 1, 2, ...`.  An [`XSequenceModel`] carries only
//! `(x_G, y_G^2, A, B)` over an arbitrary coefficient ring and advances the
//! stream without ever seeing a y-coordinate:
//!
//! ```text
//! x_n = 2 (x_{n-1}^3 + A x_{n-1} + B + y_G^2) / (x_{n-1} - x_G)^2
//!       - 2 (x_{n-1} + x_G) - x_{n-2}
//! ```
//!
//! Over a residue ring the division can hit a zero divisor; the failure
//! carries `gcd` evidence so the caller can decide which factor to keep.

use crate::curve::{Curve, CurveError, Point};
use crate::nt;
use crate::ring::{Coord, RingDivisionError, RingSpec};
use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

/// How many leading values participate in the duplicate scan.
const DUPLICATE_SCAN_WINDOW: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("generator instances require a prime-field curve")]
    NotPrimeField,
    #[error("the composer point must be affine")]
    InfiniteComposer,
    #[error("point is not on the curve")]
    OffCurve,
}

/// A fully specified generator: prime-field curve, composer `G`, seed `W0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorInstance {
    curve: Curve,
    g: Point,
    w0: Point,
}

impl GeneratorInstance {
    pub fn new(curve: Curve, g: Point, w0: Point) -> Result<Self, InstanceError> {
        if !matches!(curve.ring(), RingSpec::PrimeField { .. }) {
            return Err(InstanceError::NotPrimeField);
        }
        if g.is_infinity() {
            return Err(InstanceError::InfiniteComposer);
        }
        if !curve.contains(&g) || !curve.contains(&w0) {
            return Err(InstanceError::OffCurve);
        }
        Ok(GeneratorInstance { curve, g, w0 })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn composer(&self) -> &Point {
        &self.g
    }

    pub fn initial_point(&self) -> &Point {
        &self.w0
    }

    pub fn modulus(&self) -> &BigInt {
        self.curve.ring().modulus().expect("prime-field curve")
    }

    /// The state point `W_n = nG + W0`.
    pub fn state_at(&self, n: u64) -> Point {
        let shift = self
            .curve
            .scalar_mul(&BigInt::from(n), &self.g)
            .expect("prime-field addition cannot fail");
        self.curve
            .add(&shift, &self.w0)
            .expect("prime-field addition cannot fail")
    }

    /// The model holding the true parameters, for congruence checks.
    pub fn true_model(&self) -> XSequenceModel {
        let y_g = self.g.y();
        XSequenceModel::new(
            self.curve.ring().clone(),
            self.g.x().clone(),
            self.curve.ring().mul(y_g, y_g),
            self.curve.a().clone(),
            self.curve.b().clone(),
        )
    }

    /// Walks the orbit and reports `count` x-values with per-index flags.
    ///
    /// If some `W_n` is the point at infinity there is no x-value to emit:
    /// that slot gets a flag entry with `hit_infinity` set and the stream
    /// stops, so `flags` may be one longer than `values`.  `hit_plus_minus_g`
    /// marks states equal to the composer or its negative, and `duplicate_x`
    /// marks values that repeat among the first seven: both configurations
    /// void the guarantees of the recovery algorithm.
    pub fn emit_sequence(&self, count: usize) -> StreamReport {
        let mut values = Vec::with_capacity(count);
        let mut flags = Vec::with_capacity(count);
        let neg_g = self.curve.negate(&self.g);
        let mut w = self.w0.clone();
        for _ in 0..count {
            w = self
                .curve
                .add(&w, &self.g)
                .expect("prime-field addition cannot fail");
            if w.is_infinity() {
                flags.push(StepFlags {
                    hit_infinity: true,
                    ..StepFlags::default()
                });
                break;
            }
            values.push(w.x().as_int().clone());
            flags.push(StepFlags {
                hit_plus_minus_g: w == self.g || w == neg_g,
                ..StepFlags::default()
            });
        }
        mark_duplicates(&values, &mut flags);
        StreamReport { values, flags }
    }
}

/// Per-index degeneracy markers for an emitted stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepFlags {
    /// The state reached the point at infinity; the stream stops here.
    #[serde(default, skip_serializing_if = "is_false")]
    pub hit_infinity: bool,
    /// The state equals `G` or `-G`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub hit_plus_minus_g: bool,
    /// The value repeats among the first seven emitted values.
    #[serde(default, skip_serializing_if = "is_false")]
    pub duplicate_x: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl StepFlags {
    pub fn clean(&self) -> bool {
        !(self.hit_infinity || self.hit_plus_minus_g || self.duplicate_x)
    }
}

/// An emitted stream: the x-values plus one flag entry per visited index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamReport {
    #[serde(with = "crate::jsonio::dec_vec")]
    pub values: Vec<BigInt>,
    pub flags: Vec<StepFlags>,
}

impl StreamReport {
    /// True when every flag in the first `upto` slots is clear.
    pub fn clean_prefix(&self, upto: usize) -> bool {
        self.values.len() >= upto && self.flags.iter().take(upto).all(StepFlags::clean)
    }
}

fn mark_duplicates(values: &[BigInt], flags: &mut [StepFlags]) {
    let scan = values.len().min(DUPLICATE_SCAN_WINDOW);
    for i in 0..scan {
        for j in 0..scan {
            if i != j && values[i] == values[j] {
                flags[i].duplicate_x = true;
                break;
            }
        }
    }
}

/// Both sides of the x-coordinate sum identity
/// `x(W+G) + x(W-G) = 2 (x_W^3 + A x_W + B + y_G^2) / (x_W - x_G)^2
///  - 2 (x_W + x_G)`, for cross-checking the recurrence against the group
/// law.  Requires an affine `W` distinct from `G` and `-G` on a prime-field
/// curve, so every division below is by a unit.
pub fn x_sum_oracle(curve: &Curve, w: &Point, g: &Point) -> (Coord, Coord) {
    assert!(matches!(curve.ring(), RingSpec::PrimeField { .. }));
    assert!(!w.is_infinity() && !g.is_infinity());
    assert!(*w != *g && *w != curve.negate(g));
    let ring = curve.ring();

    let plus = curve.add(w, g).expect("W != -G");
    let minus = curve.sub_points(w, g).expect("W != G");
    let side = |p: &Point| {
        if p.is_infinity() {
            unreachable!("W +/- G is affine when W != +/-G");
        } else {
            p.x().clone()
        }
    };
    let left = ring.add(&side(&plus), &side(&minus));

    let x_w = w.x();
    let x_g = g.x();
    let y_g2 = ring.mul(g.y(), g.y());
    let num = ring.add(&curve.rhs(x_w), &y_g2);
    let diff = ring.sub(x_w, x_g);
    let den = ring.mul(&diff, &diff);
    let quot = ring.div(&num, &den).expect("x_W != x_G over a field");
    let two = ring.int(2);
    let right = ring.sub(
        &ring.mul(&two, &quot),
        &ring.mul(&two, &ring.add(x_w, x_g)),
    );
    (left, right)
}

/// The denominator `(x_{n-1} - x_G)^2` was not invertible; `g` is a
/// divisor of the ring modulus with `1 < g <= m` (`g = m` when the
/// denominator vanishes outright, over the rationals this is `g = 0`).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("prediction denominator shares factor {g} with the modulus")]
pub struct DenominatorFailure {
    pub g: BigInt,
}

impl Serialize for DenominatorFailure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        crate::jsonio::dec::serialize(&self.g, s)
    }
}

impl<'de> Deserialize<'de> for DenominatorFailure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(DenominatorFailure {
            g: crate::jsonio::dec::deserialize(d)?,
        })
    }
}

/// The x-only face of a generator: enough to advance the stream, nothing
/// more.  `y_g2` stores the square of the composer's y-coordinate; the model
/// never needs (and the recovery cannot always provide) `y_G` itself, so the
/// square need not be a quadratic residue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XSequenceModel {
    pub ring: RingSpec,
    pub x_g: Coord,
    pub y_g2: Coord,
    pub a: Coord,
    pub b: Coord,
}

impl XSequenceModel {
    /// Canonicalizes every field into `ring`.
    pub fn new(ring: RingSpec, x_g: Coord, y_g2: Coord, a: Coord, b: Coord) -> Self {
        let canon = |c: &Coord| match c {
            Coord::Int(v) => ring.from_bigint(v),
            Coord::Rat(r) => ring.rational(r.numer(), r.denom()),
        };
        XSequenceModel {
            x_g: canon(&x_g),
            y_g2: canon(&y_g2),
            a: canon(&a),
            b: canon(&b),
            ring,
        }
    }

    /// One step of the recurrence from the two previous values.
    pub fn predict_next(
        &self,
        x_prev2: &Coord,
        x_prev1: &Coord,
    ) -> Result<Coord, DenominatorFailure> {
        let ring = &self.ring;
        let x3 = ring.mul(&ring.mul(x_prev1, x_prev1), x_prev1);
        let num = ring.add(
            &ring.add(&x3, &ring.mul(&self.a, x_prev1)),
            &ring.add(&self.b, &self.y_g2),
        );
        let diff = ring.sub(x_prev1, &self.x_g);
        let den = ring.mul(&diff, &diff);
        let quot = ring.div(&num, &den).map_err(|e| match e {
            RingDivisionError::NotInvertible { g } => DenominatorFailure { g },
            RingDivisionError::ZeroDenominator => DenominatorFailure { g: BigInt::ZERO },
        })?;
        let two = ring.int(2);
        Ok(ring.sub(
            &ring.sub(&ring.mul(&two, &quot), &ring.mul(&two, &ring.add(x_prev1, &self.x_g))),
            x_prev2,
        ))
    }

    /// Iterates the recurrence seeded with the first two known values,
    /// returning the predictions for indices 3, 4, ... and, if a division
    /// failed, the step (0-based within the returned list) and divisor.
    pub fn predict_run(&self, x1: &Coord, x2: &Coord, count: usize) -> PredictionRun {
        let mut values = Vec::with_capacity(count);
        let mut prev2 = x1.clone();
        let mut prev1 = x2.clone();
        let mut stop = None;
        for step in 0..count {
            match self.predict_next(&prev2, &prev1) {
                Ok(next) => {
                    values.push(next.clone());
                    prev2 = prev1;
                    prev1 = next;
                }
                Err(failure) => {
                    stop = Some(PredictionStop { step, failure });
                    break;
                }
            }
        }
        PredictionRun { values, stop }
    }

    /// `predict_run` with integer seeds, canonicalized into the ring.
    pub fn predict_run_ints(&self, x1: &BigInt, x2: &BigInt, count: usize) -> PredictionRun {
        self.predict_run(
            &self.ring.from_bigint(x1),
            &self.ring.from_bigint(x2),
            count,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionStop {
    /// Index into the prediction list at which the failure occurred.
    pub step: usize,
    pub failure: DenominatorFailure,
}

/// Predictions for indices 3, 4, ... plus the stop reason if the run ended
/// early.  Never longer than requested; `stop` is `None` on a full run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRun {
    pub values: Vec<Coord>,
    pub stop: Option<PredictionStop>,
}

impl PredictionRun {
    pub fn completed(&self) -> bool {
        self.stop.is_none()
    }
}

/// Wire form of a generator instance for the CLI: prime modulus, curve
/// coefficients and both secret points as decimal strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceWire {
    #[serde(with = "crate::jsonio::dec")]
    pub p: BigInt,
    #[serde(with = "crate::jsonio::dec")]
    pub a: BigInt,
    #[serde(with = "crate::jsonio::dec")]
    pub b: BigInt,
    #[serde(with = "crate::jsonio::dec")]
    pub gx: BigInt,
    #[serde(with = "crate::jsonio::dec")]
    pub gy: BigInt,
    #[serde(with = "crate::jsonio::dec")]
    pub w0x: BigInt,
    #[serde(with = "crate::jsonio::dec")]
    pub w0y: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("bad modulus: {0}")]
    Ring(#[from] crate::ring::RingError),
    #[error("modulus is not prime")]
    NotPrime,
    #[error("bad curve: {0}")]
    Curve(#[from] CurveError),
    #[error("bad instance: {0}")]
    Instance(#[from] InstanceError),
}

impl InstanceWire {
    pub fn from_instance(inst: &GeneratorInstance) -> Self {
        InstanceWire {
            p: inst.modulus().clone(),
            a: inst.curve().a().as_int().clone(),
            b: inst.curve().b().as_int().clone(),
            gx: inst.composer().x().as_int().clone(),
            gy: inst.composer().y().as_int().clone(),
            w0x: inst.initial_point().x().as_int().clone(),
            w0y: inst.initial_point().y().as_int().clone(),
        }
    }

    /// Validates primality, the curve equation and point membership.
    pub fn into_instance<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<GeneratorInstance, WireError> {
        if !nt::is_probable_prime(&self.p, nt::DEFAULT_MR_ROUNDS, rng) {
            return Err(WireError::NotPrime);
        }
        let ring = RingSpec::prime_field(self.p.clone())?;
        let curve = Curve::from_integers(ring.clone(), &self.a, &self.b)?;
        let g = curve.point(ring.from_bigint(&self.gx), ring.from_bigint(&self.gy))?;
        let w0 = curve.point(ring.from_bigint(&self.w0x), ring.from_bigint(&self.w0y))?;
        Ok(GeneratorInstance::new(curve, g, w0)?)
    }
}

/// Samples a uniform curve with unit discriminant and two uniform affine
/// points over a fresh prime of exactly `bits` bits.
pub fn random_instance<R: rand::Rng + ?Sized>(
    bits: u64,
    mr_rounds: u32,
    rng: &mut R,
) -> GeneratorInstance {
    let p = nt::random_prime(bits, mr_rounds, rng);
    random_instance_mod(&p, rng)
}

/// Samples a uniform instance over the given prime.
pub fn random_instance_mod<R: rand::Rng + ?Sized>(p: &BigInt, rng: &mut R) -> GeneratorInstance {
    use num_bigint::RandBigInt;
    let ring = RingSpec::prime_field(p.clone()).expect("prime > 3");
    loop {
        let a = rng.gen_bigint_range(&BigInt::ZERO, p);
        let b = rng.gen_bigint_range(&BigInt::ZERO, p);
        let Ok(curve) = Curve::from_integers(ring.clone(), &a, &b) else {
            continue;
        };
        let g = curve.random_point(rng);
        let w0 = curve.random_point(rng);
        if g.is_infinity() {
            continue;
        }
        return GeneratorInstance::new(curve, g, w0).expect("sampled points are on the curve");
    }
}

/// True when a curve with coefficients `(a, b)` exists mod `p` and the pair
/// `(x, y)` can serve as a composer; used by exhaustive small-field scans.
pub fn composer_order(curve: &Curve, g: &Point) -> BigInt {
    let mut n = BigInt::one();
    let mut acc = g.clone();
    while !acc.is_infinity() {
        acc = curve.add(&acc, g).expect("prime-field addition cannot fail");
        n += 1;
    }
    n
}
