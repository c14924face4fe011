//! Exact integer machinery: primes, factorizations, σ(n) and abundancy.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::realball::RealBall;

/// Hard ceiling on dense tables; keeps σ(n) far below 2^64.
pub const SIEVE_LIMIT_MAX: u64 = 1_000_000_000;

const SEGMENT: u64 = 1 << 16;

/// Deterministic Miller–Rabin; the first twelve prime bases are exact
/// below 3.3·10^24, which covers all of `u64`.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
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
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for &a in &BASES {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// All primes `<= limit`, increasing.
pub fn primes_up_to(limit: u64) -> Result<Vec<u64>> {
    if limit < 2 {
        return Err(Error::Input(format!("primes_up_to needs limit >= 2, got {limit}")));
    }
    if limit > SIEVE_LIMIT_MAX {
        return Err(Error::Resource(format!(
            "prime sieve limit {limit} exceeds {SIEVE_LIMIT_MAX}"
        )));
    }
    // odd[i] represents 2i+1.
    let half = (limit as usize).div_ceil(2);
    let mut composite = vec![false; half];
    let mut i = 1;
    while (2 * i + 1) * (2 * i + 1) <= limit as usize {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = p * p / 2;
            while j < half {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    let mut out = vec![2];
    out.extend(
        (1..half)
            .filter(|&i| !composite[i])
            .map(|i| 2 * i as u64 + 1),
    );
    Ok(out)
}

/// A positive integer as increasing `(prime, exponent)` pairs; empty is 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Factorization {
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn new(factors: Vec<(u64, u32)>) -> Result<Self> {
        for w in factors.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Input(format!(
                    "primes not strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(p, e) in &factors {
            if e == 0 {
                return Err(Error::Input(format!("zero exponent for prime {p}")));
            }
            if !is_prime(p) {
                return Err(Error::Input(format!("{p} is not prime")));
            }
        }
        Ok(Factorization { factors })
    }

    pub fn one() -> Self {
        Factorization::default()
    }

    /// Factors `n` by trial division. Intended for `n` up to ~10^12.
    pub fn of(mut n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("cannot factor 0".into()));
        }
        let mut factors = Vec::new();
        let mut p = 2u64;
        while p * p <= n {
            if n.is_multiple_of(p) {
                let mut e = 0;
                while n.is_multiple_of(p) {
                    n /= p;
                    e += 1;
                }
                factors.push((p, e));
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if n > 1 {
            factors.push((n, 1));
        }
        Ok(Factorization { factors })
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent(&self, p: u64) -> u32 {
        self.factors
            .binary_search_by_key(&p, |f| f.0)
            .map(|i| self.factors[i].1)
            .unwrap_or(0)
    }

    pub fn largest_prime(&self) -> Option<u64> {
        self.factors.last().map(|f| f.0)
    }

    /// Multiplies in one more factor of the prime `p`.
    pub fn mul_prime(&mut self, p: u64) {
        debug_assert!(is_prime(p));
        match self.factors.binary_search_by_key(&p, |f| f.0) {
            Ok(i) => self.factors[i].1 += 1,
            Err(i) => self.factors.insert(i, (p, 1)),
        }
    }

    pub fn mul(&self, other: &Factorization) -> Factorization {
        let mut out = self.clone();
        for &(p, e) in &other.factors {
            match out.factors.binary_search_by_key(&p, |f| f.0) {
                Ok(i) => out.factors[i].1 += e,
                Err(i) => out.factors.insert(i, (p, e)),
            }
        }
        out
    }

    /// The product itself.
    pub fn value(&self) -> Integer {
        let mut acc = Integer::from(1);
        for &(p, e) in &self.factors {
            acc *= Integer::from(p).pow(e);
        }
        acc
    }

    /// `Some(n)` when the product fits in 64 bits.
    pub fn value_u64(&self) -> Option<u64> {
        self.factors.iter().try_fold(1u64, |acc, &(p, e)| {
            acc.checked_mul(p.checked_pow(e)?)
        })
    }

    pub fn sigma(&self) -> Integer {
        sigma_of_factorization(self)
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, &(p, e)) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if e == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}^{e}")?;
            }
        }
        Ok(())
    }
}

/// σ(p^e) = 1 + p + … + p^e.
pub fn sigma_prime_power(p: u64, e: u32) -> Integer {
    (Integer::from(p).pow(e + 1) - 1u32) / (p - 1)
}

/// σ(n) as `∏ (p^{a+1} − 1)/(p − 1)`.
pub fn sigma_of_factorization(f: &Factorization) -> Integer {
    f.factors
        .iter()
        .fold(Integer::from(1), |acc, &(p, e)| acc * sigma_prime_power(p, e))
}

/// Exact reduced ratio σ(n)/n.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Abundancy(Rational);

impl Abundancy {
    pub fn from_parts(sigma: Integer, n: Integer) -> Result<Self> {
        if n <= 0 {
            return Err(Error::Domain(format!("abundancy of non-positive {n}")));
        }
        Ok(Abundancy(Rational::from((sigma, n))))
    }

    pub fn numerator(&self) -> &Integer {
        self.0.numer()
    }

    pub fn denominator(&self) -> &Integer {
        self.0.denom()
    }

    pub fn as_rational(&self) -> &Rational {
        &self.0
    }

    pub fn to_ball(&self, prec: u32) -> RealBall {
        RealBall::from_rational(&self.0, prec)
    }
}

impl fmt::Display for Abundancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator(), self.denominator())
    }
}

pub fn abundancy(f: &Factorization) -> Abundancy {
    Abundancy::from_parts(f.sigma(), f.value()).expect("value of a factorization is >= 1")
}

/// The product (unless `with_value` is false) and a ball containing `ln n`.
pub fn value_and_log(f: &Factorization, prec: u32, with_value: bool) -> (Option<Integer>, RealBall) {
    let log = f.factors.iter().fold(RealBall::zero(prec), |acc, &(p, e)| {
        let lp = RealBall::from_u64(p, prec).ln().expect("primes are positive");
        acc.add(&lp.mul_u64(e as u64))
    });
    (with_value.then(|| f.value()), log)
}

/// Dense σ table for `1..=limit`.
#[derive(Clone, Debug)]
pub struct SigmaTable {
    limit: u64,
    // sigma[0] is unused.
    sigma: Vec<u64>,
}

impl SigmaTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn get(&self, n: u64) -> u64 {
        assert!(n >= 1 && n <= self.limit, "{n} outside sigma table 1..={}", self.limit);
        self.sigma[n as usize]
    }

    /// `σ(1), …, σ(limit)`.
    pub fn values(&self) -> &[u64] {
        &self.sigma[1..]
    }
}

/// σ(n) for every `n <= limit` by a segmented multiplicative sieve.
pub fn sigma_sieve(limit: u64) -> Result<SigmaTable> {
    if limit < 2 {
        return Err(Error::Input(format!("sigma_sieve needs limit >= 2, got {limit}")));
    }
    if limit > SIEVE_LIMIT_MAX {
        return Err(Error::Resource(format!(
            "sigma table limit {limit} exceeds {SIEVE_LIMIT_MAX}"
        )));
    }
    let primes = sieving_primes(limit);
    let mut sigma = vec![0u64; limit as usize + 1];
    sigma[1..]
        .par_chunks_mut(SEGMENT as usize)
        .enumerate()
        .for_each(|(i, chunk)| {
            let lo = 1 + i as u64 * SEGMENT;
            sigma_segment(lo, &primes, chunk);
        });
    Ok(SigmaTable { limit, sigma })
}

/// Primes up to `⌊√hi⌋`, enough to sieve σ on any range ending at `hi`.
pub fn sieving_primes(hi: u64) -> Vec<u64> {
    let r = hi.isqrt().max(2);
    primes_up_to(r).expect("sqrt of a budgeted limit is within range")
}

/// σ(n) for `n = lo .. lo + out.len()`, written into `out`.
///
/// `primes` must contain every prime up to the square root of the last `n`.
pub fn sigma_segment(lo: u64, primes: &[u64], out: &mut [u64]) {
    assert!(lo >= 1);
    let hi = lo + out.len() as u64 - 1;
    let mut rem: Vec<u64> = (lo..=hi).collect();
    out.fill(1);
    for &p in primes {
        if p * p > hi {
            break;
        }
        let first = lo.div_ceil(p) * p;
        let mut m = first;
        while m <= hi {
            let idx = (m - lo) as usize;
            let mut r = rem[idx] / p;
            let mut pk = p;
            let mut term = 1 + p;
            while r.is_multiple_of(p) {
                r /= p;
                pk *= p;
                term += pk;
            }
            rem[idx] = r;
            out[idx] *= term;
            m += p;
        }
    }
    for (s, r) in out.iter_mut().zip(rem) {
        if r > 1 {
            *s *= r + 1;
        }
    }
}

/// σ(n) for one `n` via trial division.
pub fn sigma_u64(n: u64) -> u64 {
    Factorization::of(n)
        .expect("n >= 1")
        .sigma()
        .to_u64()
        .expect("sigma of a u64 below 2^58 fits")
}

/// Compares σ(a)/a with σ(b)/b exactly.
pub fn cmp_abundancy(sigma_a: u64, a: u64, sigma_b: u64, b: u64) -> Ordering {
    (sigma_a as u128 * b as u128).cmp(&(sigma_b as u128 * a as u128))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn divisor_sum(n: u64) -> u64 {
        (1..=n).filter(|d| n.is_multiple_of(*d)).sum()
    }

    fn trial_division_prime(n: u64) -> bool {
        n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn primes_examples() {
        assert_eq!(primes_up_to(2).unwrap(), vec![2]);
        assert_eq!(primes_up_to(10).unwrap(), vec![2, 3, 5, 7]);
        let p30 = primes_up_to(30).unwrap();
        assert_eq!(p30.len(), 10);
        assert_eq!(*p30.last().unwrap(), 29);
        assert!(primes_up_to(1).is_err());
        assert!(matches!(primes_up_to(SIEVE_LIMIT_MAX + 1), Err(Error::Resource(_))));
    }

    #[test]
    fn primes_match_trial_division() {
        let sieve = primes_up_to(20_000).unwrap();
        let oracle: Vec<u64> = (2..=20_000).filter(|&n| trial_division_prime(n)).collect();
        assert_eq!(sieve, oracle);
        for n in 0..20_000 {
            assert_eq!(is_prime(n), trial_division_prime(n), "{n}");
        }
    }

    #[test]
    fn miller_rabin_large() {
        assert!(is_prime(18_446_744_073_709_551_557)); // largest prime below 2^64
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
        assert!(!is_prime(341_550_071_728_321)); // spsp to bases up to 17
        assert_eq!(next_prime(13), 17);
        assert_eq!(next_prime(1), 2);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_of_factorization(&Factorization::new(vec![(2, 1)]).unwrap()), 3);
        assert_eq!(
            sigma_of_factorization(&Factorization::new(vec![(2, 2), (3, 1)]).unwrap()),
            28
        );
        let f5040 = Factorization::new(vec![(2, 4), (3, 2), (5, 1), (7, 1)]).unwrap();
        assert_eq!(f5040.value(), 5040);
        assert_eq!(sigma_of_factorization(&f5040), divisor_sum(5040));
        assert_eq!(sigma_of_factorization(&Factorization::one()), 1);
    }

    #[test]
    fn sieve_small_table() {
        let t = sigma_sieve(10).unwrap();
        assert_eq!(t.values(), &[1, 3, 4, 7, 6, 12, 8, 15, 13, 18]);
        let oracle: Vec<u64> = (1..=10).map(divisor_sum).collect();
        assert_eq!(t.values(), oracle.as_slice());
        assert_eq!(t.get(1), 1);
        assert!(sigma_sieve(1).is_err());
        assert!(matches!(sigma_sieve(SIEVE_LIMIT_MAX + 1), Err(Error::Resource(_))));
    }

    #[test]
    fn sieve_full_sweep_to_1e5() {
        let n = 100_000u64;
        let t = sigma_sieve(n).unwrap();
        // Additive divisor sieve as the oracle.
        let mut oracle = vec![0u64; n as usize + 1];
        for d in 1..=n as usize {
            for m in (d..=n as usize).step_by(d) {
                oracle[m] += d as u64;
            }
        }
        assert_eq!(t.values(), &oracle[1..]);
        for p in primes_up_to(n).unwrap() {
            assert_eq!(t.get(p), p + 1);
        }
    }

    #[test]
    fn sieve_agrees_with_factorization_formula() {
        use rand::{Rng, SeedableRng};
        let limit = 2_000_000u64;
        let t = sigma_sieve(limit).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=limit);
            let f = Factorization::of(n).unwrap();
            assert_eq!(f.value(), n);
            assert_eq!(Integer::from(t.get(n)), f.sigma(), "n = {n}");
        }
    }

    #[test]
    fn abundancy_examples() {
        let a6 = abundancy(&Factorization::of(6).unwrap());
        assert_eq!(a6.as_rational(), &Rational::from(2));
        let a2 = abundancy(&Factorization::of(2).unwrap());
        assert_eq!((a2.numerator().clone(), a2.denominator().clone()), (3.into(), 2.into()));
        let a12 = abundancy(&Factorization::of(12).unwrap());
        assert_eq!(a12.to_string(), "7/3");
    }

    #[test]
    fn perfect_numbers_below_1e4() {
        let t = sigma_sieve(10_000).unwrap();
        let perfect: Vec<u64> = (2..10_000u64).filter(|&n| t.get(n) == 2 * n).collect();
        assert_eq!(perfect, vec![6, 28, 496, 8128]);
        for n in 2..10_000u64 {
            let a = abundancy(&Factorization::of(n).unwrap());
            assert!(a.as_rational() > &Rational::from(1));
        }
    }

    #[test]
    fn value_and_log_examples() {
        let (v, l) = value_and_log(&Factorization::of(2).unwrap(), 128, true);
        assert_eq!(v.unwrap(), 2);
        assert!(l.contains_f64(std::f64::consts::LN_2) || (l.mid_f64() - std::f64::consts::LN_2).abs() < 1e-16);
        let (v, l) = value_and_log(&Factorization::one(), 128, true);
        assert_eq!(v.unwrap(), 1);
        assert!(l.contains_f64(0.0));
        let f = Factorization::of(5040).unwrap();
        let (_, l) = value_and_log(&f, 128, false);
        let direct = RealBall::from_u64(5040, 256).ln().unwrap();
        assert!(l.contains(&direct.midpoint()));
        assert!((l.mid_f64() - 8.5252).abs() < 1e-4);
    }

    #[test]
    fn factorization_validation_and_display() {
        assert!(Factorization::new(vec![(3, 1), (2, 1)]).is_err());
        assert!(Factorization::new(vec![(2, 0)]).is_err());
        assert!(Factorization::new(vec![(4, 1)]).is_err());
        let f = Factorization::of(720720).unwrap();
        assert_eq!(f.to_string(), "2^4*3^2*5*7*11*13");
        assert_eq!(Factorization::one().to_string(), "1");
        let mut g = Factorization::of(6).unwrap();
        g.mul_prime(5);
        g.mul_prime(2);
        assert_eq!(g.value(), 60);
        assert_eq!(g.exponent(2), 2);
        assert_eq!(g.largest_prime(), Some(5));
    }

    proptest! {
        #[test]
        fn sigma_is_multiplicative(a in 1u64..200_000, b in 1u64..200_000) {
            let ga = Integer::from(a).gcd(&Integer::from(b));
            prop_assume!(ga == 1);
            let fa = Factorization::of(a).unwrap();
            let fb = Factorization::of(b).unwrap();
            prop_assert_eq!(fa.mul(&fb).sigma(), fa.sigma() * fb.sigma());
        }

        #[test]
        fn log_ball_contains_high_precision_log(n in 2u64..1_000_000_000) {
            let f = Factorization::of(n).unwrap();
            let (_, l) = value_and_log(&f, 128, false);
            let precise = RealBall::from_u64(n, 256).ln().unwrap();
            prop_assert!(l.contains(&precise.midpoint()));
        }

        #[test]
        fn segment_matches_formula(lo in 1u64..5_000_000, len in 1usize..3000) {
            let hi = lo + len as u64 - 1;
            let mut out = vec![0; len];
            sigma_segment(lo, &sieving_primes(hi), &mut out);
            for (i, s) in out.iter().enumerate() {
                prop_assert_eq!(*s, sigma_u64(lo + i as u64));
            }
        }
    }
}
