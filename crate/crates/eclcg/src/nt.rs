//! Exact integer number theory: the gcd family, modular inverses, primality
//! testing, prime sampling and square roots modulo a prime.

use num_bigint::{BigInt, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::sync::OnceLock;
use thiserror::Error;

/// Miller-Rabin round count used when the caller does not pick one.
pub const DEFAULT_MR_ROUNDS: u32 = 40;

/// Inversion failed; `g` is the offending gcd with the modulus.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not invertible: gcd with modulus is {g}")]
pub struct NotInvertible {
    pub g: BigInt,
}

/// The argument is a quadratic non-residue and has no square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("quadratic non-residue")]
pub struct NonResidue;

/// Canonical representative of `a` in `[0, m)`; requires `m >= 1`.
pub fn mod_reduce(a: &BigInt, m: &BigInt) -> BigInt {
    debug_assert!(m.is_positive());
    let r = a % m;
    if r.is_negative() {
        r + m
    } else {
        r
    }
}

/// Nonnegative gcd with `gcd(0, 0) = 0`.
pub fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    a.gcd(b)
}

/// `gcd` folded over `init` and every element of `rest`.
pub fn gcd_many<'a, I>(init: &BigInt, rest: I) -> BigInt
where
    I: IntoIterator<Item = &'a BigInt>,
{
    let mut g = init.abs();
    for v in rest {
        g = g.gcd(v);
    }
    g
}

/// Extended gcd: `(g, s, t)` with `g = s*a + t*b` and `g >= 0`.
///
/// `(0, 0)` yields `(0, 0, 0)`; `(a, 0)` yields `(|a|, sign(a), 0)`.
pub fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    if a.is_zero() && b.is_zero() {
        return (BigInt::zero(), BigInt::zero(), BigInt::zero());
    }
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (BigInt::one(), BigInt::zero());
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let s2 = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    if r0.is_negative() {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Inverse of `a` modulo `m >= 2`, canonical in `[0, m)`.
pub fn mod_inv(a: &BigInt, m: &BigInt) -> Result<BigInt, NotInvertible> {
    debug_assert!(m >= &BigInt::from(2));
    let (g, s, _) = ext_gcd(&mod_reduce(a, m), m);
    if g.is_one() {
        Ok(mod_reduce(&s, m))
    } else {
        Err(NotInvertible { g })
    }
}

/// Largest divisor of `m >= 1` coprime to `w`, by repeated division.
pub fn coprime_part(m: &BigInt, w: &BigInt) -> BigInt {
    debug_assert!(m.is_positive());
    let mut m = m.clone();
    loop {
        let g = m.gcd(w);
        if g.is_one() {
            return m;
        }
        m /= g;
    }
}

fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = 10_000usize;
        let mut sieve = vec![true; limit];
        sieve[0] = false;
        sieve[1] = false;
        let mut p = 2usize;
        while p * p < limit {
            if sieve[p] {
                let mut k = p * p;
                while k < limit {
                    sieve[k] = false;
                    k += p;
                }
            }
            p += 1;
        }
        (0..limit).filter(|&i| sieve[i]).map(|i| i as u64).collect()
    })
}

/// Miller-Rabin with `rounds` random bases after small-prime trial division.
/// A composite passes with probability at most `4^-rounds`; primes always pass.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigInt, rounds: u32, rng: &mut R) -> bool {
    let two = BigInt::from(2);
    if n < &two {
        return false;
    }
    for &q in small_primes() {
        let q = BigInt::from(q);
        if &q > n {
            return false;
        }
        if n == &q {
            return true;
        }
        if (n % &q).is_zero() {
            return false;
        }
    }
    if n < &BigInt::from(100_000_000u64) {
        return true;
    }
    let one = BigInt::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().expect("n - 1 > 0");
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_bigint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = &x * &x % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Uniform probable prime with exactly `bits >= 3` bits; coprime to 6.
pub fn random_prime<R: Rng + ?Sized>(bits: u64, rounds: u32, rng: &mut R) -> BigInt {
    assert!(bits >= 3, "need bits >= 3 so that p > 3");
    loop {
        let mut n = rng.gen_biguint(bits);
        n.set_bit(bits - 1, true);
        n.set_bit(0, true);
        let n = BigInt::from(n);
        if is_probable_prime(&n, rounds, rng) {
            return n;
        }
    }
}

/// One square root of `a` modulo an odd prime `p`, via Tonelli-Shanks.
pub fn sqrt_mod_prime(a: &BigInt, p: &BigInt) -> Result<BigInt, NonResidue> {
    let a = mod_reduce(a, p);
    if a.is_zero() {
        return Ok(BigInt::zero());
    }
    let one = BigInt::one();
    let p_minus_1 = p - &one;
    let legendre_exp = &p_minus_1 >> 1;
    if a.modpow(&legendre_exp, p) != one {
        return Err(NonResidue);
    }
    if p % 4u32 == BigInt::from(3) {
        return Ok(a.modpow(&((p + &one) >> 2), p));
    }
    let s = p_minus_1.trailing_zeros().expect("p > 1");
    let q = &p_minus_1 >> s;
    let mut z = BigInt::from(2);
    while z.modpow(&legendre_exp, p) == one {
        z += 1;
    }
    let mut m = s;
    let mut c = z.modpow(&q, p);
    let mut t = a.modpow(&q, p);
    let mut r = a.modpow(&((&q + &one) >> 1), p);
    while !t.is_one() {
        let mut i = 0u64;
        let mut t2 = t.clone();
        while !t2.is_one() {
            t2 = &t2 * &t2 % p;
            i += 1;
        }
        let b = c.modpow(&(BigInt::one() << (m - i - 1)), p);
        r = &r * &b % p;
        c = &b * &b % p;
        t = &t * &c % p;
        m = i;
    }
    Ok(r)
}
