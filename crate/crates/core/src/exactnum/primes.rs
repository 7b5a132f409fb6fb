use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::Rational;
use crate::error::KstError;

/// Bases that make Miller-Rabin deterministic for every n < 3.3 * 10^24.
const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Knobs for the prime search.
#[derive(Clone, Copy, Debug)]
pub struct PrimeSearch {
    /// Extra pseudo-random Miller-Rabin rounds for n >= 2^64. A composite
    /// survives all of them with probability at most 4^-extra_rounds (on top
    /// of the twelve fixed bases).
    pub extra_rounds: u32,
    /// Maximum number of candidates tested by one `gen_distinct_primes` call.
    pub max_candidates: u64,
}

impl Default for PrimeSearch {
    fn default() -> Self {
        PrimeSearch {
            extra_rounds: 16,
            max_candidates: 50_000_000,
        }
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'bases: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

fn strong_probable_prime(n: &BigUint, a: &BigUint, d: &BigUint, s: u64) -> bool {
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let mut x = a.modpow(d, n);
    if x == one || x == n_minus_1 {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if x == n_minus_1 {
            return true;
        }
    }
    false
}

/// Primality with the default number of extra rounds.
pub fn is_prime(n: &BigUint) -> bool {
    is_prime_with(n, PrimeSearch::default().extra_rounds)
}

/// Deterministic below 2^64; above that, the twelve fixed bases plus
/// `extra_rounds` bases derived from `n` by a splitmix sequence.
pub fn is_prime_with(n: &BigUint, extra_rounds: u32) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    for &p in &WITNESSES {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s as usize;
    for &a in &WITNESSES {
        if !strong_probable_prime(n, &BigUint::from(a), &d, s) {
            return false;
        }
    }
    let mut state = (n % u64::MAX).to_u64().unwrap_or(0x9e37_79b9_7f4a_7c15);
    let span = &n_minus_1 - 2u32;
    for _ in 0..extra_rounds {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        let a = BigUint::from(z) % &span + 2u32;
        if !strong_probable_prime(n, &a, &d, s) {
            return false;
        }
    }
    true
}

/// The `count` smallest primes strictly greater than `strict_lower_bound`,
/// in increasing order.
pub fn gen_distinct_primes(
    count: usize,
    strict_lower_bound: &Rational,
    search: &PrimeSearch,
) -> Result<Vec<BigUint>, KstError> {
    if count == 0 {
        return Err(KstError::Parameter("prime count must be positive".into()));
    }
    if strict_lower_bound < &Rational::from_integer(2) {
        return Err(KstError::Parameter(format!(
            "prime lower bound must be >= 2, got {strict_lower_bound}"
        )));
    }
    let floor = strict_lower_bound.floor();
    let mut candidate: BigUint = floor
        .to_biguint()
        .expect("bound checked non-negative")
        + 1u32;
    let mut out = Vec::with_capacity(count);
    let mut tested = 0u64;
    while out.len() < count {
        if tested >= search.max_candidates {
            return Err(KstError::ResourceLimit(format!(
                "prime search above {strict_lower_bound} exceeded {} candidates",
                search.max_candidates
            )));
        }
        tested += 1;
        if (candidate.is_odd() || candidate == BigUint::from(2u32))
            && is_prime_with(&candidate, search.extra_rounds)
        {
            out.push(candidate.clone());
        }
        candidate += 1u32;
    }
    Ok(out)
}

/// The primes `P_k^{pq}` of one construction level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeSet {
    pub level: usize,
    pub m: usize,
    /// Indexed by `(q - 1) * m + (p - 1)`.
    #[serde(with = "crate::exactnum::biguint_vec_string")]
    pub primes: Vec<BigUint>,
}

impl PrimeSet {
    /// `p` in `1..=m`, `q` in `1..=2m+1`.
    pub fn get(&self, p: usize, q: usize) -> &BigUint {
        &self.primes[(q - 1) * self.m + (p - 1)]
    }

    pub fn product_over_p(&self, q: usize) -> BigUint {
        (1..=self.m).map(|p| self.get(p, q).clone()).product()
    }

    pub fn all_distinct(&self) -> bool {
        let mut sorted = self.primes.clone();
        sorted.sort();
        sorted.windows(2).all(|w| w[0] != w[1])
    }
}
