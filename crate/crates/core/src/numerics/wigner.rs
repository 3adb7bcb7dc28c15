//! Wigner 3j symbols from the Racah formula in exact arithmetic.
//!
//! Factorials are carried as prime-exponent vectors, so the square-root
//! prefactor and the alternating Racah sum are both exact rationals until the
//! final conversion to `f64`. This keeps the symbols accurate for angular
//! momenta well past the point where `f64` factorials overflow.

use std::cell::RefCell;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::halfint::HalfInt;
use crate::error::Result;

thread_local! {
    static CACHE: RefCell<HashMap<[i32; 6], f64>> = RefCell::new(HashMap::new());
    static PRIMES: RefCell<Vec<u32>> = const { RefCell::new(Vec::new()) };
}

const CACHE_LIMIT: usize = 1 << 20;

fn ensure_primes(n: u32) -> Vec<u32> {
    PRIMES.with(|p| {
        let mut p = p.borrow_mut();
        let have = p.last().copied().unwrap_or(1);
        if have < n || p.is_empty() {
            let limit = (n.max(16) * 2) as usize;
            let mut sieve = vec![true; limit + 1];
            sieve[0] = false;
            sieve[1] = false;
            let mut i = 2;
            while i * i <= limit {
                if sieve[i] {
                    let mut k = i * i;
                    while k <= limit {
                        sieve[k] = false;
                        k += i;
                    }
                }
                i += 1;
            }
            *p = (2..=limit).filter(|&k| sieve[k]).map(|k| k as u32).collect();
        }
        p.clone()
    })
}

/// Exponent vector over the first `len` primes.
#[derive(Clone, Debug)]
struct Factored(Vec<i32>);

impl Factored {
    fn one(len: usize) -> Self {
        Factored(vec![0; len])
    }

    fn factorial(n: u32, primes: &[u32]) -> Self {
        // Legendre's formula.
        let exps = primes
            .iter()
            .map(|&p| {
                let mut e = 0i64;
                let mut q = p as u64;
                while q <= n as u64 {
                    e += (n as u64 / q) as i64;
                    q *= p as u64;
                }
                e as i32
            })
            .collect();
        Factored(exps)
    }

    fn mul(&mut self, other: &Factored) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    fn div(&mut self, other: &Factored) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a -= b;
        }
    }

    fn max_with(&mut self, other: &Factored) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = (*a).max(*b);
        }
    }

    fn to_rational(&self, primes: &[u32]) -> BigRational {
        let mut num = BigInt::one();
        let mut den = BigInt::one();
        for (&p, &e) in primes.iter().zip(&self.0) {
            if e > 0 {
                num *= BigInt::from(p).pow(e as u32);
            } else if e < 0 {
                den *= BigInt::from(p).pow((-e) as u32);
            }
        }
        BigRational::new(num, den)
    }

    fn to_integer(&self, primes: &[u32]) -> BigInt {
        let mut num = BigInt::one();
        for (&p, &e) in primes.iter().zip(&self.0) {
            debug_assert!(e >= 0);
            if e > 0 {
                num *= BigInt::from(p).pow(e as u32);
            }
        }
        num
    }
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Returns exactly zero whenever a selection rule fails (triangle, `m`-sum,
/// `|m| ≤ j`, or integrality of `j ± m` and of `j1 + j2 + j3`).
pub fn wigner3j(j1: HalfInt, j2: HalfInt, j3: HalfInt, m1: HalfInt, m2: HalfInt, m3: HalfInt) -> f64 {
    let key = [j1.twice(), j2.twice(), j3.twice(), m1.twice(), m2.twice(), m3.twice()];
    if let Some(v) = CACHE.with(|c| c.borrow().get(&key).copied()) {
        return v;
    }
    let v = wigner3j_uncached(key);
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= CACHE_LIMIT {
            c.clear();
        }
        c.insert(key, v);
    });
    v
}

/// Wigner 3j symbol from floating-point arguments, rejecting anything that is
/// not a half-integer.
pub fn wigner3j_f64(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64> {
    Ok(wigner3j(
        HalfInt::try_from(j1)?,
        HalfInt::try_from(j2)?,
        HalfInt::try_from(j3)?,
        HalfInt::try_from(m1)?,
        HalfInt::try_from(m2)?,
        HalfInt::try_from(m3)?,
    ))
}

fn wigner3j_uncached(t: [i32; 6]) -> f64 {
    let [tj1, tj2, tj3, tm1, tm2, tm3] = t;
    if tj1 < 0 || tj2 < 0 || tj3 < 0 {
        return 0.0;
    }
    if tm1 + tm2 + tm3 != 0 {
        return 0.0;
    }
    if tm1.abs() > tj1 || tm2.abs() > tj2 || tm3.abs() > tj3 {
        return 0.0;
    }
    if (tj1 - tm1) % 2 != 0 || (tj2 - tm2) % 2 != 0 || (tj3 - tm3) % 2 != 0 {
        return 0.0;
    }
    if (tj1 + tj2 + tj3) % 2 != 0 {
        return 0.0;
    }
    if tj3 > tj1 + tj2 || tj3 < (tj1 - tj2).abs() {
        return 0.0;
    }

    // Everything below is an integer.
    let h = |x: i32| x / 2;
    let a = h(tj1 + tj2 - tj3);
    let b = h(tj1 - tj2 + tj3);
    let c = h(-tj1 + tj2 + tj3);
    let d = h(tj1 + tj2 + tj3) + 1;
    let jm = [
        h(tj1 + tm1),
        h(tj1 - tm1),
        h(tj2 + tm2),
        h(tj2 - tm2),
        h(tj3 + tm3),
        h(tj3 - tm3),
    ];

    let kmin = 0.max(h(tj2 - tj3 - tm1)).max(h(tj1 - tj3 + tm2));
    let kmax = a.min(h(tj1 - tm1)).min(h(tj2 + tm2));
    if kmin > kmax {
        return 0.0;
    }

    let primes = ensure_primes(d as u32 + 1);
    let primes: Vec<u32> = primes.into_iter().take_while(|&p| p <= d as u32 + 1).collect();
    let n = primes.len();
    let fact = |k: i32| Factored::factorial(k as u32, &primes);

    // Square of the prefactor: Δ(j1 j2 j3) · Π (j ± m)!
    let mut radicand = fact(a);
    radicand.mul(&fact(b));
    radicand.mul(&fact(c));
    radicand.div(&fact(d));
    for &x in &jm {
        radicand.mul(&fact(x));
    }

    let denominators: Vec<Factored> = (kmin..=kmax)
        .map(|k| {
            let mut den = Factored::one(n);
            for x in [
                k,
                h(tj3 - tj2 + tm1) + k,
                h(tj3 - tj1 - tm2) + k,
                a - k,
                h(tj1 - tm1) - k,
                h(tj2 + tm2) - k,
            ] {
                debug_assert!(x >= 0);
                den.mul(&fact(x));
            }
            den
        })
        .collect();
    let mut common = Factored::one(n);
    for den in &denominators {
        common.max_with(den);
    }
    let mut sum = BigInt::zero();
    for (k, den) in (kmin..=kmax).zip(&denominators) {
        let mut q = common.clone();
        q.div(den);
        let term = q.to_integer(&primes);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }

    // value² = radicand · sum² / common²
    radicand.div(&common);
    radicand.div(&common);
    let sq = radicand.to_rational(&primes) * BigRational::from_integer(&sum * &sum);
    let magnitude = sq.to_f64().unwrap_or(0.0).sqrt();

    let phase_exp = h(tj1 - tj2 - tm3);
    let mut sign = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    if sum.is_negative() {
        sign = -sign;
    }
    sign * magnitude
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(j: [f64; 6]) -> f64 {
        wigner3j_f64(j[0], j[1], j[2], j[3], j[4], j[5]).unwrap()
    }

    #[test]
    fn closed_form_values() {
        // (1 1 0; 0 0 0) = -1/sqrt(3)
        assert!((w([1.0, 1.0, 0.0, 0.0, 0.0, 0.0]) + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        // parity: j1+j2+j3 odd with all m = 0
        assert_eq!(w([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]), 0.0);
        // (1/2 1/2 1; 1/2 -1/2 0) = 1/sqrt(6)
        assert!((w([0.5, 0.5, 1.0, 0.5, -0.5, 0.0]) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        // (j j 0; m -m 0) = (-1)^(j-m)/sqrt(2j+1)
        for tj in 0..12 {
            let j = HalfInt::from_twice(tj);
            for m in j.projections() {
                let v = wigner3j(j, j, HalfInt::ZERO, m, -m, HalfInt::ZERO);
                let expect = (j - m).sign_power() / ((tj + 1) as f64).sqrt();
                assert!((v - expect).abs() < 1e-14, "j={j} m={m}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn selection_rules_give_zero() {
        assert_eq!(w([1.0, 1.0, 3.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(w([1.0, 1.0, 1.0, 1.0, 1.0, 0.0]), 0.0);
        assert_eq!(w([1.0, 1.0, 1.0, 2.0, -2.0, 0.0]), 0.0);
        assert_eq!(w([0.5, 1.0, 1.0, 0.5, 0.0, -0.5]), 0.0);
    }

    #[test]
    fn rejects_non_half_integers() {
        assert!(wigner3j_f64(0.3, 1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    /// Orthogonality: Σ_{m1,m2} (2j3+1) (j1 j2 j3; m1 m2 m3)² = 1, by brute force.
    #[test]
    fn orthogonality_brute_force() {
        for (tj1, tj2) in [(2, 2), (3, 1), (4, 3), (7, 5), (20, 9)] {
            let j1 = HalfInt::from_twice(tj1);
            let j2 = HalfInt::from_twice(tj2);
            let mut tj3 = (tj1 - tj2).abs();
            while tj3 <= tj1 + tj2 {
                let j3 = HalfInt::from_twice(tj3);
                for m3 in j3.projections() {
                    let mut s = 0.0;
                    for m1 in j1.projections() {
                        for m2 in j2.projections() {
                            let v = wigner3j(j1, j2, j3, m1, m2, m3);
                            s += v * v;
                        }
                    }
                    assert!(((tj3 + 1) as f64 * s - 1.0).abs() < 1e-12);
                }
                tj3 += 2;
            }
        }
    }

    #[test]
    fn large_angular_momenta_stay_finite() {
        // (100 100 0; 0 0 0) = 1/sqrt(201)
        let v = w([100.0, 100.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((v - 1.0 / 201f64.sqrt()).abs() < 1e-14);
        let v = w([90.0, 85.0, 10.0, 3.0, -1.0, -2.0]);
        assert!(v.is_finite() && v.abs() < 1.0);
    }
}
