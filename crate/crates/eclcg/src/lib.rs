//! Elliptic curve congruential generator (EC-LCG) and a parameter-recovery
//! attack on its x-coordinate output stream.
//!
//! The generator walks `W_n = W_{n-1} + G` on a Weierstrass curve over a prime
//! field and reveals `x_n = x(W_n)`. Seven consecutive outputs determine a
//! linear system whose integer determinant is divisible by the secret prime;
//! the attack recovers a modulus `m` with `p | m` together with curve and
//! point parameters that reproduce the stream, usually with `m = p` exactly.

pub mod nt;
pub mod linalg;
pub mod ring;
pub mod curve;
pub mod generator;
pub mod attack;
pub mod harness;
pub mod jsonio;

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
