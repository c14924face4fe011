//! Critical epsilons `F(p,k)`, their merged decreasing stream, the closed
//! form maximizer `n_ε`, and enumeration of colossally abundant (CA) and
//! superabundant (SA) numbers.
//!
//! `F(p,k) = ln(1 + 1/(p + … + p^k)) / ln p`. The maximizer of
//! `σ(k)/k^{1+ε}` changes exactly when ε crosses one of these values, and
//! crossing `F(p,a+1)` raises the exponent of `p` from `a` to `a+1`.

use std::cmp::Ordering;

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::arithmetic::{is_prime, next_prime, sigma_sieve, cmp_abundancy, Factorization};
use crate::error::{Error, Result};
use crate::realball::{PrecisionPolicy, RealBall, SignDecision};

/// Default ceiling for [`sa_enumerate`].
pub const DEFAULT_SA_BUDGET: u64 = 100_000_000;

/// One element `F(p,k)` of the critical set, with provenance.
#[derive(Clone, Debug)]
pub struct CriticalEpsilon {
    pub p: u64,
    pub k: u32,
    pub value: RealBall,
}

impl CriticalEpsilon {
    pub fn provenance(&self) -> (u64, u32) {
        (self.p, self.k)
    }

    /// The same element evaluated at another precision.
    pub fn at_precision(&self, prec: u32) -> CriticalEpsilon {
        CriticalEpsilon {
            p: self.p,
            k: self.k,
            value: epsilon_ball(self.p, self.k, prec),
        }
    }
}

fn epsilon_ball(p: u64, k: u32, prec: u32) -> RealBall {
    // p + p^2 + … + p^k = (p^{k+1} - p)/(p - 1), exactly.
    let geometric: Integer = (Integer::from(p).pow(k + 1) - p) / (p - 1);
    let inv = RealBall::from_rational(&Rational::from((Integer::from(1), geometric)), prec);
    let num = inv.ln_1p().expect("1/S > 0");
    let den = RealBall::from_u64(p, prec).ln().expect("p >= 2");
    num.div(&den).expect("ln p > 0")
}

/// Certified ball for `F(p,k)`.
pub fn critical_epsilon(p: u64, k: u32, prec: u32) -> Result<CriticalEpsilon> {
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    Ok(CriticalEpsilon {
        p,
        k,
        value: epsilon_ball(p, k, prec),
    })
}

/// Certified order of two critical epsilons, refining both up the ladder.
pub fn compare_epsilons(
    a: &CriticalEpsilon,
    b: &CriticalEpsilon,
    policy: &PrecisionPolicy,
) -> Result<Ordering> {
    if let Some(o) = a.value.cmp_certified(&b.value) {
        return Ok(o);
    }
    if a.provenance() == b.provenance() {
        return Ok(Ordering::Equal);
    }
    let start = a.value.prec().max(b.value.prec());
    for prec in policy.ladder().into_iter().filter(|&p| p > start) {
        let (ra, rb) = (a.at_precision(prec), b.at_precision(prec));
        if let Some(o) = ra.value.cmp_certified(&rb.value) {
            return Ok(o);
        }
    }
    Err(Error::TieDetected {
        first: a.provenance(),
        second: b.provenance(),
        precision: policy.max,
    })
}

/// Generator of the critical set in strictly decreasing order.
///
/// Each active prime `p` contributes its next element `F(p, a_p + 1)`; the
/// smallest prime not yet seen contributes `F(q, 1)`. Because `F(p,1)`
/// decreases in `p`, no larger prime can exceed that frontier candidate.
#[derive(Debug)]
pub struct EpsilonStream {
    policy: PrecisionPolicy,
    candidates: Vec<CriticalEpsilon>,
    frontier: u64,
}

impl EpsilonStream {
    pub fn new(policy: PrecisionPolicy) -> Self {
        EpsilonStream {
            policy,
            candidates: vec![epsilon_ball_elem(2, 1, policy.start)],
            frontier: 2,
        }
    }

    /// The next largest element, or a group of elements that could not be
    /// separated at maximum precision (only when `allow_ties`).
    pub fn next_group(&mut self, allow_ties: bool) -> Result<Vec<CriticalEpsilon>> {
        let mut best = self.argmax_midpoint();
        let mut tied: Vec<usize> = Vec::new();
        let mut i = 0;
        while i < self.candidates.len() {
            if i == best || tied.contains(&i) {
                i += 1;
                continue;
            }
            let (c, b) = (&self.candidates[i], &self.candidates[best]);
            if c.value.upper() < b.value.lower() {
                i += 1;
                continue;
            }
            match compare_epsilons(c, b, &self.policy) {
                Ok(Ordering::Less) => i += 1,
                Ok(Ordering::Greater) => {
                    best = i;
                    tied.clear();
                    i = 0;
                }
                Ok(Ordering::Equal) => unreachable!("distinct provenance never compares equal"),
                Err(e @ Error::TieDetected { .. }) => {
                    if !allow_ties {
                        return Err(e);
                    }
                    tied.push(i);
                    i += 1;
                }
                Err(e) => return Err(e),
            }
        }
        tied.push(best);
        tied.sort_unstable_by(|a, b| b.cmp(a));
        let group: Vec<CriticalEpsilon> = tied
            .into_iter()
            .map(|idx| self.candidates.swap_remove(idx))
            .collect();
        for e in &group {
            self.candidates.push(epsilon_ball_elem(e.p, e.k + 1, self.policy.start));
            if e.k == 1 && e.p == self.frontier {
                self.frontier = next_prime(self.frontier);
                self.candidates
                    .push(epsilon_ball_elem(self.frontier, 1, self.policy.start));
            }
        }
        let mut group = group;
        group.sort_by_key(|e| e.p);
        Ok(group)
    }

    fn argmax_midpoint(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.candidates.iter().enumerate().skip(1) {
            if c.value.upper() > self.candidates[best].value.upper() {
                best = i;
            }
        }
        best
    }
}

fn epsilon_ball_elem(p: u64, k: u32, prec: u32) -> CriticalEpsilon {
    CriticalEpsilon {
        p,
        k,
        value: epsilon_ball(p, k, prec),
    }
}

/// The `count` largest critical epsilons, strictly decreasing.
pub fn epsilon_stream(count: usize, policy: &PrecisionPolicy) -> Result<Vec<CriticalEpsilon>> {
    if count == 0 {
        return Err(Error::Input("count must be >= 1".into()));
    }
    let mut s = EpsilonStream::new(*policy);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        out.extend(s.next_group(false)?);
    }
    Ok(out)
}

/// `a_ε(p)` at one precision.
fn exponent_at(p: u64, eps: &RealBall, prec: u32) -> Result<u32> {
    let prec = prec.max(eps.prec());
    let lnp = RealBall::from_u64(p, prec).ln()?;
    let p_eps_m1 = eps.mul(&lnp).exp_m1(); // p^ε - 1
    // p^{1+ε} - 1 = p (p^ε - 1) + (p - 1)
    let num = p_eps_m1.mul_u64(p).add(&RealBall::from_u64(p - 1, prec));
    let ratio = num.ln()?.sub(&p_eps_m1.ln()?).div(&lnp)?;
    let fl = ratio.certified_floor()?;
    let a = fl - 1u32;
    a.to_u32()
        .ok_or_else(|| Error::Domain(format!("exponent {a} out of range for p = {p}")))
}

/// The unique maximizer `n_ε` of `σ(k)/k^{1+ε}` for a non-critical ε.
pub fn n_for_epsilon(eps: &RealBall, policy: &PrecisionPolicy) -> Result<Factorization> {
    match eps.sign() {
        SignDecision::Positive => {}
        SignDecision::Ambiguous => return Err(eps.precision_error("epsilon not certified > 0")),
        _ => return Err(Error::Domain(format!("epsilon {eps} must lie in (0,1)"))),
    }
    match RealBall::one(eps.prec()).sub(eps).sign() {
        SignDecision::Positive => {}
        SignDecision::Ambiguous => return Err(eps.precision_error("epsilon not certified < 1")),
        _ => return Err(Error::Domain(format!("epsilon {eps} must lie in (0,1)"))),
    }
    let mut factors = Vec::new();
    let mut p = 2;
    loop {
        let a = policy.run(|prec| exponent_at(p, eps, prec))?;
        if a == 0 {
            break;
        }
        factors.push((p, a));
        p = next_prime(p);
    }
    Factorization::new(factors)
}

/// One colossally abundant number `n_i`.
#[derive(Clone, Debug)]
pub struct CaRecord {
    pub index: usize,
    pub n: Factorization,
    /// `(ε_{i+1}, ε_i)`: `n_ε = n_i` for every ε strictly inside.
    pub epsilon_interval: (CriticalEpsilon, CriticalEpsilon),
    pub quotient_from_previous: Factorization,
    /// Set when the step applied a group of inseparable epsilons.
    pub tie: bool,
    pub log_n: RealBall,
}

impl CaRecord {
    /// Midpoint of the epsilon interval, as a ball.
    pub fn interval_midpoint(&self) -> RealBall {
        let (lo, hi) = &self.epsilon_interval;
        lo.value
            .add(&hi.value)
            .div(&RealBall::from_u64(2, lo.value.prec()))
            .expect("2 != 0")
    }
}

/// Incremental CA generator: each step crosses the next critical epsilon.
///
/// For ε above the largest critical value the maximizer is 1, so `n_1`
/// is the value on `(ε_2, ε_1)`.
#[derive(Debug)]
pub struct CaEnumerator {
    stream: EpsilonStream,
    allow_ties: bool,
    n: Factorization,
    log_n: RealBall,
    pending: Option<Vec<CriticalEpsilon>>,
    index: usize,
    prec: u32,
}

impl CaEnumerator {
    pub fn new(policy: PrecisionPolicy, allow_ties: bool) -> Self {
        CaEnumerator {
            stream: EpsilonStream::new(policy),
            allow_ties,
            n: Factorization::one(),
            log_n: RealBall::zero(policy.start),
            pending: None,
            index: 0,
            prec: policy.start,
        }
    }

    pub fn next_record(&mut self) -> Result<CaRecord> {
        let group = match self.pending.take() {
            Some(g) => g,
            None => self.stream.next_group(self.allow_ties)?,
        };
        let mut quotient = Factorization::one();
        for e in &group {
            debug_assert_eq!(self.n.exponent(e.p) + 1, e.k, "crossing out of order at p = {}", e.p);
            self.n.mul_prime(e.p);
            quotient.mul_prime(e.p);
            self.log_n = self
                .log_n
                .add(&RealBall::from_u64(e.p, self.prec).ln().expect("p >= 2"));
        }
        let next = self.stream.next_group(self.allow_ties)?;
        self.index += 1;
        let record = CaRecord {
            index: self.index,
            n: self.n.clone(),
            epsilon_interval: (next[0].clone(), group[0].clone()),
            quotient_from_previous: quotient,
            tie: group.len() > 1,
            log_n: self.log_n.clone(),
        };
        self.pending = Some(next);
        Ok(record)
    }
}

/// The first `count` CA numbers.
pub fn ca_enumerate(count: usize, allow_ties: bool, policy: &PrecisionPolicy) -> Result<Vec<CaRecord>> {
    if count == 0 {
        return Err(Error::Input("count must be >= 1".into()));
    }
    let mut e = CaEnumerator::new(*policy, allow_ties);
    (0..count).map(|_| e.next_record()).collect()
}

/// All superabundant `n <= limit`, by a σ-table record scan.
pub fn sa_enumerate(limit: u64, budget: u64) -> Result<Vec<u64>> {
    if limit == 0 {
        return Err(Error::Input("limit must be >= 1".into()));
    }
    if limit > budget {
        return Err(Error::Resource(format!("SA limit {limit} exceeds sieve budget {budget}")));
    }
    let table = sigma_sieve(limit.max(2))?;
    let mut out = vec![1];
    let (mut best_sigma, mut best_n) = (1u64, 1u64);
    for n in 2..=limit {
        let s = table.get(n);
        if cmp_abundancy(s, n, best_sigma, best_n) == Ordering::Greater {
            out.push(n);
            best_sigma = s;
            best_n = n;
        }
    }
    Ok(out)
}

/// Convergence diagnostics along consecutive CA numbers.
#[derive(Clone, Debug)]
pub struct CaDiagnostic {
    pub index: usize,
    /// `ln n_{i-1} / ln n_i`.
    pub log_ratio: RealBall,
    /// Largest prime factor of `n_i`.
    pub largest_prime: u64,
}

pub fn ca_diagnostics(records: &[CaRecord]) -> Vec<CaDiagnostic> {
    records
        .windows(2)
        .map(|w| CaDiagnostic {
            index: w[1].index,
            log_ratio: w[0].log_n.div(&w[1].log_n).expect("ln n_i > 0 for i >= 1"),
            largest_prime: w[1].n.largest_prime().expect("n_i > 1"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{abundancy, sigma_u64};

    fn policy() -> PrecisionPolicy {
        PrecisionPolicy::default()
    }

    #[test]
    fn critical_examples() {
        let cases = [(2, 1, 1.5f64.ln() / 2f64.ln()), (3, 1, (4.0f64 / 3.0).ln() / 3f64.ln()), (2, 2, (7.0f64 / 6.0).ln() / 2f64.ln())];
        for (p, k, expect) in cases {
            let e = critical_epsilon(p, k, 128).unwrap();
            assert!((e.value.mid_f64() - expect).abs() < 1e-15, "F({p},{k}) = {}", e.value);
            assert!(e.value.radius_f64() < 1e-35);
        }
        assert!((critical_epsilon(2, 1, 128).unwrap().value.mid_f64() - 0.58496).abs() < 1e-5);
        assert!((critical_epsilon(3, 1, 128).unwrap().value.mid_f64() - 0.26186).abs() < 1e-5);
        assert!((critical_epsilon(2, 2, 128).unwrap().value.mid_f64() - 0.22239).abs() < 1e-5);
        assert!(critical_epsilon(4, 1, 128).is_err());
        assert!(critical_epsilon(2, 0, 128).is_err());
    }

    #[test]
    fn critical_monotonicity() {
        for p in [2u64, 3, 5, 7, 101] {
            for k in 1..20 {
                let a = critical_epsilon(p, k, 128).unwrap();
                let b = critical_epsilon(p, k + 1, 128).unwrap();
                assert_eq!(a.value.cmp_certified(&b.value), Some(Ordering::Greater));
            }
        }
        let mut p = 2;
        for _ in 0..200 {
            let q = next_prime(p);
            let a = critical_epsilon(p, 1, 128).unwrap();
            let b = critical_epsilon(q, 1, 128).unwrap();
            assert_eq!(a.value.cmp_certified(&b.value), Some(Ordering::Greater));
            p = q;
        }
    }

    #[test]
    fn stream_head() {
        let s = epsilon_stream(3, &policy()).unwrap();
        let prov: Vec<_> = s.iter().map(|e| e.provenance()).collect();
        assert_eq!(prov, vec![(2, 1), (3, 1), (2, 2)]);
        let one = epsilon_stream(1, &policy()).unwrap();
        assert_eq!(one[0].provenance(), (2, 1));
    }

    #[test]
    fn stream_strictly_decreasing_at_double_precision() {
        let s = epsilon_stream(400, &policy()).unwrap();
        for w in s.windows(2) {
            let a = w[0].at_precision(256);
            let b = w[1].at_precision(256);
            assert_eq!(a.value.cmp_certified(&b.value), Some(Ordering::Greater));
        }
    }

    #[test]
    fn stream_matches_brute_force_on_small_primes() {
        let s = epsilon_stream(500, &policy()).unwrap();
        let from_stream: Vec<_> = s
            .iter()
            .filter(|e| e.p <= 3)
            .map(|e| e.provenance())
            .collect();
        let mut brute: Vec<CriticalEpsilon> = [2u64, 3]
            .iter()
            .flat_map(|&p| (1..=64).map(move |j| critical_epsilon(p, j, 256).unwrap()))
            .collect();
        brute.sort_by(|a, b| b.value.midpoint().partial_cmp(&a.value.midpoint()).unwrap());
        let brute: Vec<_> = brute.iter().take(from_stream.len()).map(|e| e.provenance()).collect();
        assert_eq!(from_stream, brute);
    }

    fn brute_maximizer(eps: f64, limit: u64) -> u64 {
        (1..=limit)
            .max_by(|&a, &b| {
                let fa = sigma_u64(a) as f64 / (a as f64).powf(1.0 + eps);
                let fb = sigma_u64(b) as f64 / (b as f64).powf(1.0 + eps);
                fa.partial_cmp(&fb).unwrap()
            })
            .unwrap()
    }

    #[test]
    fn n_for_epsilon_examples() {
        assert_eq!(brute_maximizer(0.5, 100), 2);
        assert_eq!(brute_maximizer(0.2, 10_000), 12);
        let half = RealBall::from_f64(0.5, 128);
        assert_eq!(n_for_epsilon(&half, &policy()).unwrap().value(), 2);
        let fifth = RealBall::from_rational(&Rational::from((1, 5)), 128);
        assert_eq!(n_for_epsilon(&fifth, &policy()).unwrap().value(), 12);
        let s = epsilon_stream(2, &policy()).unwrap();
        let mid = s[0].value.add(&s[1].value).div(&RealBall::from_u64(2, 128)).unwrap();
        assert_eq!(n_for_epsilon(&mid, &policy()).unwrap().factors(), &[(2, 1)]);
    }

    #[test]
    fn n_for_epsilon_errors() {
        assert!(matches!(
            n_for_epsilon(&RealBall::from_f64(1.5, 128), &policy()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            n_for_epsilon(&RealBall::from_f64(-0.1, 128), &policy()),
            Err(Error::Domain(_))
        ));
        // A critical value itself: the floor can never be certified.
        let crit = critical_epsilon(3, 1, 128).unwrap().value;
        let tight = PrecisionPolicy::new(128, 512).unwrap();
        assert!(n_for_epsilon(&crit, &tight).unwrap_err().is_precision());
    }

    #[test]
    fn first_fourteen_ca() {
        let recs = ca_enumerate(14, false, &policy()).unwrap();
        let ns: Vec<Integer> = recs.iter().map(|r| r.n.value()).collect();
        let expect = [
            2u64, 6, 12, 60, 120, 360, 2520, 5040, 55440, 720720, 1441440, 4324320, 21621600,
            367567200,
        ];
        assert_eq!(ns, expect.iter().map(|&v| Integer::from(v)).collect::<Vec<_>>());
        assert_eq!(recs[0].index, 1);
        assert_eq!(recs[0].epsilon_interval.1.provenance(), (2, 1));
        assert_eq!(recs[0].epsilon_interval.0.provenance(), (3, 1));
    }

    #[test]
    fn ca_structural_properties() {
        let recs = ca_enumerate(300, false, &policy()).unwrap();
        let mut prev = abundancy(&Factorization::one());
        for r in &recs {
            let a = abundancy(&r.n);
            assert!(a > prev, "abundancy not increasing at i = {}", r.index);
            prev = a;
            assert!(!r.tie);
            let q = r.quotient_from_previous.factors();
            assert_eq!(q.len(), 1);
            assert_eq!(q[0].1, 1);
            let exps: Vec<u32> = r.n.factors().iter().map(|f| f.1).collect();
            assert!(exps.windows(2).all(|w| w[0] >= w[1]), "{}", r.n);
            let (lo, hi) = &r.epsilon_interval;
            assert_eq!(lo.value.cmp_certified(&hi.value), Some(Ordering::Less));
            let (_, direct) = crate::arithmetic::value_and_log(&r.n, 128, false);
            assert!(direct.overlaps(&r.log_n));
        }
    }

    #[test]
    fn ca_cross_route_small() {
        let recs = ca_enumerate(60, false, &policy()).unwrap();
        for r in &recs {
            let n = n_for_epsilon(&r.interval_midpoint(), &policy()).unwrap();
            assert_eq!(n, r.n, "i = {}", r.index);
        }
    }

    #[test]
    fn sa_examples() {
        let oracle = |limit: u64| {
            let mut out = vec![];
            let mut best = 0.0f64;
            for n in 1..=limit {
                let s: u64 = (1..=n).filter(|d| n % d == 0).sum();
                let a = s as f64 / n as f64;
                if a > best {
                    out.push(n);
                    best = a;
                }
            }
            out
        };
        assert_eq!(sa_enumerate(60, DEFAULT_SA_BUDGET).unwrap(), vec![1, 2, 4, 6, 12, 24, 36, 48, 60]);
        assert_eq!(sa_enumerate(60, DEFAULT_SA_BUDGET).unwrap(), oracle(60));
        assert_eq!(sa_enumerate(3000, DEFAULT_SA_BUDGET).unwrap(), oracle(3000));
        assert_eq!(sa_enumerate(1, DEFAULT_SA_BUDGET).unwrap(), vec![1]);
        assert!(matches!(sa_enumerate(1000, 999), Err(Error::Resource(_))));
    }

    #[test]
    fn ca_subset_of_sa() {
        let sa = sa_enumerate(1_000_000, DEFAULT_SA_BUDGET).unwrap();
        for r in ca_enumerate(10, false, &policy()).unwrap() {
            let n = r.n.value_u64().unwrap();
            assert!(sa.binary_search(&n).is_ok(), "{n} not SA");
        }
    }

    #[test]
    fn diagnostics() {
        let recs = ca_enumerate(20, false, &policy()).unwrap();
        let d = ca_diagnostics(&recs);
        assert_eq!(d.len(), 19);
        assert_eq!(d[0].index, 2);
        let expect = 2f64.ln() / 6f64.ln();
        assert!((d[0].log_ratio.mid_f64() - expect).abs() < 1e-15);
        assert!((d[0].log_ratio.mid_f64() - 0.3869).abs() < 1e-4);
        assert_eq!(d[0].largest_prime, 3);
        for x in &d {
            assert_eq!(x.log_ratio.sign(), SignDecision::Positive);
            assert_eq!(x.log_ratio.cmp_certified(&RealBall::one(128)), Some(Ordering::Less));
        }
    }
}
