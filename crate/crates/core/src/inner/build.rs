use std::collections::HashSet;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};
use rayon::prelude::*;

use super::{BuildConfig, InnerFamily, Level, Mode, PlateauFunction};
use crate::error::{KstError, Result};
use crate::exactnum::{gen_distinct_primes, PrimeSet, Rational};
use crate::grids::{build_grid_level, plan_grid_level, GridLevel, IntervalFamily};

fn to_nonneg(v: BigInt) -> BigUint {
    v.to_biguint().unwrap_or_default()
}

fn as_rational(v: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, v.clone()))
}

/// Smallest `e >= 0` with `2^e > x`.
fn pow2_exponent_above(x: &Rational) -> u32 {
    let f = x.floor();
    if f.sign() == Sign::Minus {
        0
    } else {
        f.bits() as u32
    }
}

/// Smallest unused-residue numerator in `[lo, hi]`, recorded as used.
fn pick(lo: BigUint, hi: &BigUint, prime: &BigUint, used: &mut HashSet<BigUint>) -> Option<BigUint> {
    let mut a = lo;
    while &a <= hi {
        let r = &a % prime;
        if !used.contains(&r) {
            used.insert(r);
            return Some(a);
        }
        a += 1u32;
    }
    None
}

/// Indices of the intervals containing `-k`, `0`, `k`.
fn anchors(fam: &IntervalFamily, k: usize) -> Result<(usize, usize, usize)> {
    let kk = Rational::from_integer(k as i64);
    let find = |x: &Rational| {
        fam.interval_containing(x).ok_or_else(|| {
            KstError::Infeasible(format!("level {k} family {}: {x} not covered", fam.q))
        })
    };
    let lo = find(&-&kk)?;
    let zero = find(&Rational::zero())?;
    let hi = find(&kk)?;
    if lo != 0 || hi + 1 != fam.len() || !(lo < zero && zero < hi) {
        return Err(KstError::Infeasible(format!(
            "level {k} family {}: anchors at {lo}, {zero}, {hi} of {}",
            fam.q,
            fam.len()
        )));
    }
    Ok((lo, zero, hi))
}

fn level_primes(k: usize, m: usize, bound: &Rational, config: &BuildConfig) -> Result<PrimeSet> {
    let primes = gen_distinct_primes(m * (2 * m + 1), bound, &config.prime_search)?;
    Ok(PrimeSet { level: k, m, primes })
}

/// `1 / prod_p P^{pq}`, minimized over `q`.
pub(crate) fn residue_separation(primes: &PrimeSet) -> Rational {
    (1..=2 * primes.m + 1)
        .map(|q| Rational::from_biguint_ratio(&BigUint::one(), &primes.product_over_p(q)))
        .min()
        .expect("at least one family")
}

/// Largest power of 1/2 with `m * eps < bound`.
fn epsilon_below(m: usize, bound: &Rational) -> Rational {
    let x = Rational::from_integer(m as i64) / bound;
    Rational::pow2_neg(pow2_exponent_above(&x))
}

fn check_budget(k: usize, gamma: &Rational, config: &BuildConfig) -> Result<()> {
    let plan = plan_grid_level(k, gamma, config.m)?;
    if plan.intervals_per_family > config.max_intervals_per_family {
        return Err(KstError::ResourceLimit(format!(
            "level {k} with gamma = {} needs about {} intervals per family (limit {})",
            gamma.to_f64(),
            plan.intervals_per_family,
            config.max_intervals_per_family
        )));
    }
    Ok(())
}

fn n_k(grid: &GridLevel, m: usize) -> usize {
    m * grid.total_intervals()
}

pub fn build_base_level(config: &BuildConfig) -> Result<Level> {
    let m = config.m;
    if m == 0 {
        return Err(KstError::Parameter("m must be positive".into()));
    }
    let gamma = Rational::new(1, 10);
    check_budget(1, &gamma, config)?;
    let grid = build_grid_level(1, &gamma, m)?;
    let n1 = n_k(&grid, m);
    let bound = Rational::from_integer(n1.max(m + 10) as i64);
    let primes = level_primes(1, m, &bound, config)?;

    let mut functions = Vec::with_capacity(m * (2 * m + 1));
    for q in 1..=2 * m + 1 {
        let fam = grid.family(q);
        let (lo, z, hi) = anchors(fam, 1)?;
        for p in 1..=m {
            let prime = primes.get(p, q).clone();
            functions.push(base_function(fam, p, q, &prime, lo, z, hi)?);
        }
    }

    let epsilon = epsilon_below(m, &residue_separation(&primes));
    Ok(Level {
        k: 1,
        gamma: grid.gamma.clone(),
        epsilon,
        n_k: n1,
        grid,
        primes,
        functions,
    })
}

fn base_function(
    fam: &IntervalFamily,
    p: usize,
    q: usize,
    prime: &BigUint,
    lo: usize,
    z: usize,
    hi: usize,
) -> Result<PlateauFunction> {
    let n = fam.len();
    let pm1 = prime - 1u32;
    let pm2 = prime - 2u32;
    let mut a = vec![BigUint::zero(); n];
    let mut used: HashSet<BigUint> = [BigUint::zero(), pm1.clone(), pm2.clone()].into_iter().collect();
    a[hi] = pm1.clone();
    a[lo] = pm2.clone();

    let fail = |i: usize| KstError::Infeasible(format!("base level family {q} p {p}: no value for interval {i}"));

    let c_pos = (hi - z) as u64;
    let mut prev = BigUint::zero();
    for i in z + 1..hi {
        let target = BigUint::from((i - z) as u64) * &pm1 / c_pos;
        let start = target.max(&prev + 1u32);
        prev = pick(start, &(prime - 3u32), prime, &mut used).ok_or_else(|| fail(i))?;
        a[i] = prev.clone();
    }
    let c_neg = (z - lo) as u64;
    let mut prev = BigUint::zero();
    for i in (lo + 1..z).rev() {
        let target = BigUint::from((z - i) as u64) * &pm2 / c_neg;
        let start = target.max(&prev + 1u32);
        prev = pick(start, &(prime - 3u32), prime, &mut used).ok_or_else(|| fail(i))?;
        a[i] = prev.clone();
    }
    Ok(PlateauFunction {
        p,
        q,
        level: 1,
        prime: prime.clone(),
        numerators: a,
    })
}

/// `gamma_k`: start at `min(1/k, 1/10, gamma_{k-1}/4)` and halve until the
/// previous level varies by at most `eps_{k-1}/6` over any distance below
/// `gamma_k`, and the neighbors of every new 0-interval start inside the
/// previous 0-plateau.
fn choose_gamma(prev: &Level, k: usize, m: usize) -> Result<Rational> {
    let mut gamma = Rational::new(1, k as i64)
        .min(Rational::new(1, 10))
        .min(&prev.gamma * Rational::new(1, 4));
    let slope = prev.max_slope();
    let sixth = &prev.epsilon * Rational::new(1, 6);
    // The previous level vanishes on the closure of its 0-intervals.
    let zero_reach = prev
        .grid
        .families
        .iter()
        .map(|f| {
            let iv = &f.intervals[f.interval_containing(&Rational::zero()).expect("0 is covered")];
            (-&iv.left).min(iv.right.clone())
        })
        .min()
        .expect("at least one family");
    for _ in 0..200 {
        let plan = plan_grid_level(k, &gamma, m)?;
        if &slope * &gamma <= sixth && plan.period <= zero_reach {
            return Ok(gamma);
        }
        gamma = gamma * Rational::new(1, 2);
    }
    Err(KstError::Infeasible(format!("no admissible gamma for level {k}")))
}

/// Minimum gap between distinct sorted cell sums over every family, or
/// `None` if two cells of one family share a sum.
pub(crate) fn measured_separation(grid: &GridLevel, functions: &[PlateauFunction], m: usize, max_cells: u128) -> Result<Option<Rational>> {
    let mut best: Option<Rational> = None;
    for q in 1..=2 * m + 1 {
        let fam = grid.family(q);
        let cells = (fam.len() as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
        if cells > max_cells {
            return Err(KstError::ResourceLimit(format!(
                "level {} family {q} has {cells} cells (limit {max_cells})",
                grid.k
            )));
        }
        let fs: Vec<&PlateauFunction> = (1..=m).map(|p| &functions[(q - 1) * m + (p - 1)]).collect();
        let denom: BigUint = fs.iter().map(|f| f.prime.clone()).product();
        // Cell sums as integers over the common denominator.
        let scaled: Vec<Vec<BigUint>> = fs
            .iter()
            .map(|f| {
                let cofactor = &denom / &f.prime;
                f.numerators.iter().map(|a| a * &cofactor).collect()
            })
            .collect();
        let mut sums = vec![BigUint::zero()];
        for col in &scaled {
            sums = sums.iter().flat_map(|s| col.iter().map(move |v| s + v)).collect();
        }
        sums.par_sort_unstable();
        let min_gap = sums.windows(2).map(|w| &w[1] - &w[0]).min();
        if let Some(g) = min_gap {
            if g.is_zero() {
                return Ok(None);
            }
            let r = Rational::from_biguint_ratio(&g, &denom);
            best = Some(match best {
                Some(b) if b <= r => b,
                _ => r,
            });
        }
    }
    Ok(best)
}

pub fn build_next_level(family: &InnerFamily, k: usize, config: &BuildConfig) -> Result<Level> {
    let m = config.m;
    if k < 2 || family.depth() != k - 1 {
        return Err(KstError::Parameter(format!(
            "level {k} needs levels 1..{} present, family has {}",
            k - 1,
            family.depth()
        )));
    }
    let prev = family.level(k - 1);
    let gamma = choose_gamma(prev, k, m)?;
    check_budget(k, &gamma, config)?;
    let grid = build_grid_level(k, &gamma, m)?;
    let nk = n_k(&grid, m);
    let eps_prev = &prev.epsilon;

    let bound = match config.mode {
        Mode::Faithful => Rational::from_integer(12 * nk as i64) / eps_prev,
        Mode::Relaxed => {
            let count = grid.families.iter().map(IntervalFamily::len).max().unwrap_or(0);
            Rational::from_integer((2 * count + 2) as i64 * 18) / (eps_prev * Rational::from_integer(5))
        }
    }
    .max(Rational::from_integer((m + 10) as i64));
    let primes = level_primes(k, m, &bound, config)?;

    let jobs: Vec<(usize, usize)> = (1..=2 * m + 1).flat_map(|q| (1..=m).map(move |p| (p, q))).collect();
    let functions = jobs
        .par_iter()
        .map(|&(p, q)| {
            next_function(
                grid.family(q),
                prev.function(p, q),
                prev.grid.family(q),
                eps_prev,
                primes.get(p, q),
                k,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let sep = match config.mode {
        Mode::Faithful => residue_separation(&primes),
        Mode::Relaxed => measured_separation(&grid, &functions, m, config.max_cells)?.ok_or_else(|| {
            KstError::Infeasible(format!("level {k}: two cells of one family share an image"))
        })?,
    };
    let epsilon = epsilon_below(m, &sep.min(eps_prev * Rational::new(1, 6)));
    Ok(Level {
        k,
        gamma,
        epsilon,
        n_k: nk,
        grid,
        primes,
        functions,
    })
}

/// Plateau numerators for `f_k^{pq}` inside the sandwich windows of the
/// previous level `prev` (on family `prev_grid`).
fn next_function(
    fam: &IntervalFamily,
    prev: &PlateauFunction,
    prev_grid: &IntervalFamily,
    eps_prev: &Rational,
    prime: &BigUint,
    k: usize,
) -> Result<PlateauFunction> {
    let (p, q) = (prev.p, prev.q);
    let (lo_idx, z, hi_idx) = anchors(fam, k)?;
    let iv = &fam.intervals;
    let f = |x: &Rational| prev.eval(prev_grid, x);
    let big_p = as_rational(prime);
    let half = eps_prev * Rational::new(1, 2);
    let inner = Rational::from_integer(k as i64 - 1);
    let kp = BigUint::from(k as u64) * prime;

    for x in [&iv[z + 1].left, &iv[z - 1].right] {
        if !f(x).is_zero() {
            return Err(KstError::Infeasible(format!(
                "level {k} family {q} p {p}: previous level is {} at {x}, next to the 0-interval",
                f(x)
            )));
        }
    }

    let mut a = vec![BigUint::zero(); fam.len()];
    let mut used: HashSet<BigUint> = [BigUint::zero(), prime - 1u32, prime - 2u32].into_iter().collect();
    a[hi_idx] = &kp - 1u32;
    a[lo_idx] = &kp - 2u32;
    let fail = |i: usize, lo: &BigUint, hi: &BigUint| {
        KstError::Infeasible(format!(
            "level {k} family {q} p {p}: window [{lo}, {hi}] over {prime} exhausted at interval {i}"
        ))
    };

    let mut prev_a = BigUint::zero();
    for i in z + 1..hi_idx {
        let mut lo = &prev_a + 1u32;
        let mut hi = &kp - 3u32;
        if iv[i].left <= inner {
            let x = iv[i + 1].left.clone().min(inner.clone());
            lo = lo.max(to_nonneg((&f(&x) * &big_p).ceil()));
        }
        if iv[i - 1].right <= inner {
            let cap = to_nonneg(((f(&iv[i - 1].right) + &half) * &big_p).floor());
            hi = hi.min(cap);
        }
        prev_a = pick(lo.clone(), &hi, prime, &mut used).ok_or_else(|| fail(i, &lo, &hi))?;
        a[i] = prev_a.clone();
    }
    let neg_inner = -&inner;
    let mut prev_a = BigUint::zero();
    for i in (lo_idx + 1..z).rev() {
        let mut lo = &prev_a + 1u32;
        let mut hi = &kp - 3u32;
        if iv[i].right >= neg_inner {
            let x = iv[i - 1].right.clone().max(neg_inner.clone());
            lo = lo.max(to_nonneg((&f(&x) * &big_p).ceil()));
        }
        if iv[i + 1].left >= neg_inner {
            let cap = to_nonneg(((f(&iv[i + 1].left) + &half) * &big_p).floor());
            hi = hi.min(cap);
        }
        prev_a = pick(lo.clone(), &hi, prime, &mut used).ok_or_else(|| fail(i, &lo, &hi))?;
        a[i] = prev_a.clone();
    }

    Ok(PlateauFunction {
        p,
        q,
        level: k,
        prime: prime.clone(),
        numerators: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_exponent() {
        assert_eq!(pow2_exponent_above(&Rational::new(1, 2)), 0);
        assert_eq!(pow2_exponent_above(&Rational::from_integer(1)), 1);
        assert_eq!(pow2_exponent_above(&Rational::from_integer(7)), 3);
        assert_eq!(pow2_exponent_above(&Rational::from_integer(8)), 4);
    }

    #[test]
    fn epsilon_is_largest_admissible_power() {
        let bound = Rational::new(1, 1000);
        let eps = epsilon_below(2, &bound);
        assert!(Rational::from_integer(2) * &eps < bound);
        assert!(Rational::from_integer(4) * &eps >= bound);
    }

    #[test]
    fn pick_skips_used_residues() {
        let p = BigUint::from(7u32);
        let mut used: HashSet<BigUint> = [0u32, 1, 2].into_iter().map(BigUint::from).collect();
        // 8 = 1 mod 7, 9 = 2 mod 7.
        let got = pick(BigUint::from(8u32), &BigUint::from(20u32), &p, &mut used).unwrap();
        assert_eq!(got, BigUint::from(10u32));
        assert!(pick(BigUint::from(8u32), &BigUint::from(9u32), &p, &mut used).is_none());
    }
}
