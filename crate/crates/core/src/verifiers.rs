//! Certified audits of Robin-type inequalities over integer ranges.
//!
//! * Robin: `R₀(n) = e^γ n ln ln n − σ(n) > 0`.
//! * Robin's lower bound: `R₀(n) + 0.6482 n / ln ln n > 0`.
//! * Lagarias: `L₀(n) = h_n + e^{h_n} ln h_n − σ(n) > 0`.
//! * Sandwich: `R₀(n) + h_n ≤ L₀(n) ≤ R₀(n) + 7n / ln n` for `n > 20`.
//!
//! Range scans decide each `n` with a double-precision test first and
//! certify with balls whenever the float margin is below
//! [`FLOAT_FILTER_MARGIN`] of the magnitudes involved.

use std::fmt;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::arithmetic::{sieving_primes, sigma_segment, sigma_u64};
use crate::envelope::FLOAT_FILTER_MARGIN;
use crate::error::{Error, Result};
use crate::ha::{robin_deficit, Parts, ScanOptions, SCAN_CHUNK};
use crate::realball::{PrecisionPolicy, RealBall, SignDecision};

/// `h_n` is summed exactly as a rational up to this `n`.
pub const HARMONIC_EXACT_LIMIT: u64 = 10_000;

/// Constant of Robin's unconditional lower bound.
pub const ROBIN_LOWER_CONSTANT: (u64, u64) = (6482, 10_000);

/// Constant of the upper side of the Lagarias sandwich.
pub const SANDWICH_CONSTANT: u64 = 7;

const EXP_GAMMA_F64: f64 = 1.781_072_417_990_198;
const EULER_GAMMA_F64: f64 = 0.577_215_664_901_532_9;

fn need(n: u64, floor: u64, what: &str) -> Result<()> {
    if n < floor {
        Err(Error::Domain(format!("{what} needs n >= {floor}, got {n}")))
    } else {
        Ok(())
    }
}

fn parts(n: u64, sigma: u64, prec: u32) -> Parts {
    Parts {
        n: Integer::from(n),
        sigma: Integer::from(sigma),
        ln_n: RealBall::from_u64(n, prec).ln().expect("n >= 1"),
    }
}

/// Grönwall's ratio `G(n) = σ(n) / (n ln ln n)`.
pub fn gronwall(n: u64, prec: u32) -> Result<RealBall> {
    need(n, 3, "G(n)")?;
    gronwall_from_sigma(n, sigma_u64(n), prec)
}

fn gronwall_from_sigma(n: u64, sigma: u64, prec: u32) -> Result<RealBall> {
    let lnln = RealBall::from_u64(n, prec).ln()?.ln()?;
    RealBall::from_u64(sigma, prec).div(&RealBall::from_u64(n, prec).mul(&lnln))
}

/// Robin deficit `R₀(n) = e^γ n ln ln n − σ(n)`.
pub fn robin_deficit_ball(n: u64, prec: u32) -> Result<RealBall> {
    need(n, 2, "R₀(n)")?;
    robin_deficit(&parts(n, sigma_u64(n), prec), prec)
}

fn binary_split_harmonic(a: u64, b: u64) -> (Integer, Integer) {
    // Σ_{i=a}^{b-1} 1/i = p/q
    if b - a == 1 {
        return (Integer::from(1), Integer::from(a));
    }
    let m = a + (b - a) / 2;
    let (p1, q1) = binary_split_harmonic(a, m);
    let (p2, q2) = binary_split_harmonic(m, b);
    (p1 * &q2 + p2 * &q1, q1 * q2)
}

/// `h_n` as an exact fraction.
pub fn harmonic_exact(n: u64) -> Rational {
    if n == 0 {
        return Rational::new();
    }
    let (p, q) = binary_split_harmonic(1, n + 1);
    Rational::from((p, q))
}

/// `h_n = Σ_{i ≤ n} 1/i`: exact up to [`HARMONIC_EXACT_LIMIT`], then
/// ball summation of the tail (pairwise within parallel blocks).
pub fn harmonic(n: u64, prec: u32) -> Result<RealBall> {
    need(n, 1, "h_n")?;
    let head = harmonic_exact(n.min(HARMONIC_EXACT_LIMIT));
    let head = RealBall::from_rational(&head, prec);
    if n <= HARMONIC_EXACT_LIMIT {
        return Ok(head);
    }
    let blocks: Vec<u64> = (HARMONIC_EXACT_LIMIT + 1..=n).step_by(1 << 14).collect();
    let tail = blocks
        .par_iter()
        .map(|&a| {
            let b = (a + (1 << 14) - 1).min(n);
            let terms: Vec<RealBall> = (a..=b)
                .map(|i| RealBall::from_u64(i, prec).recip().expect("i >= 1"))
                .collect();
            pairwise_sum(terms, prec)
        })
        .collect::<Vec<_>>();
    Ok(head.add(&pairwise_sum(tail, prec)))
}

fn pairwise_sum(mut v: Vec<RealBall>, prec: u32) -> RealBall {
    if v.is_empty() {
        return RealBall::zero(prec);
    }
    while v.len() > 1 {
        v = v
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0].add(&c[1]) } else { c[0].clone() })
            .collect();
    }
    v.pop().unwrap()
}

/// Enclosure of `h_n` from its asymptotic expansion:
/// `h_n = ln n + γ + 1/(2n) − 1/(12n²) + 1/(120n⁴) − θ/(252n⁶)`, `0 < θ < 1`.
pub fn harmonic_asymptotic(n: u64, prec: u32) -> Result<RealBall> {
    need(n, 1, "h_n")?;
    let q = |num: i64, k: u64, e: u32| {
        let den = Integer::from(k) * Integer::from(n).pow(e);
        RealBall::from_rational(&Rational::from((Integer::from(num), den)), prec)
    };
    let base = RealBall::from_u64(n, prec)
        .ln()?
        .add(&crate::realball::const_euler_gamma(prec))
        .add(&q(1, 2, 1))
        .sub(&q(1, 12, 2))
        .add(&q(1, 120, 4));
    Ok(RealBall::hull(&base, &base.sub(&q(1, 252, 6))))
}

fn harmonic_f64(n: u64) -> f64 {
    if n <= 64 {
        return (1..=n).rev().map(|i| 1.0 / i as f64).sum();
    }
    let x = n as f64;
    x.ln() + EULER_GAMMA_F64 + 0.5 / x - 1.0 / (12.0 * x * x) + 1.0 / (120.0 * x.powi(4))
}

/// Lagarias quantity `L₀(n) = h_n + e^{h_n} ln h_n − σ(n)`.
pub fn lagarias_value(n: u64, prec: u32) -> Result<RealBall> {
    need(n, 1, "L₀(n)")?;
    lagarias_from_sigma(n, sigma_u64(n), prec)
}

fn lagarias_from_sigma(n: u64, sigma: u64, prec: u32) -> Result<RealBall> {
    let h = harmonic(n, prec)?;
    Ok(h.add(&h.exp().mul(&h.ln()?)).sub(&RealBall::from_u64(sigma, prec)))
}

fn certified_sign(policy: &PrecisionPolicy, what: &str, f: impl Fn(u32) -> Result<RealBall>) -> Result<SignDecision> {
    policy.run(|prec| {
        let b = f(prec)?;
        match b.sign() {
            SignDecision::Ambiguous => Err(b.precision_error(what)),
            s => Ok(s),
        }
    })
}

fn robin_lower_from_sigma(n: u64, sigma: u64, prec: u32) -> Result<RealBall> {
    let p = parts(n, sigma, prec);
    let lnln = p.ln_n.ln()?;
    let (a, b) = ROBIN_LOWER_CONSTANT;
    let slack = RealBall::from_rational(&Rational::from((a * n, b)), prec).div(&lnln)?;
    Ok(robin_deficit(&p, prec)?.add(&slack))
}

/// Sign of `R₀(n) + 0.6482 n / ln ln n`.
pub fn robin_lower_bound_check(n: u64, policy: &PrecisionPolicy) -> Result<SignDecision> {
    need(n, 3, "Robin's lower bound")?;
    let sigma = sigma_u64(n);
    certified_sign(policy, "Robin lower bound", |prec| robin_lower_from_sigma(n, sigma, prec))
}

/// Sign of `L₀(n)`.
pub fn lagarias_check(n: u64, policy: &PrecisionPolicy) -> Result<SignDecision> {
    need(n, 2, "the Lagarias criterion")?;
    let sigma = sigma_u64(n);
    certified_sign(policy, "Lagarias", |prec| lagarias_from_sigma(n, sigma, prec))
}

/// `(L₀ − R₀ − h_n, R₀ + 7n/ln n − L₀)`.
fn sandwich_sides(n: u64, sigma: u64, prec: u32) -> Result<(RealBall, RealBall)> {
    let p = parts(n, sigma, prec);
    let r0 = robin_deficit(&p, prec)?;
    let h = harmonic(n, prec)?;
    let l0 = h.add(&h.exp().mul(&h.ln()?)).sub(&RealBall::from_u64(sigma, prec));
    let left = l0.sub(&r0).sub(&h);
    let right = r0
        .add(&RealBall::from_u64(SANDWICH_CONSTANT * n, prec).div(&p.ln_n)?)
        .sub(&l0);
    Ok((left, right))
}

/// Signs of both sides of the sandwich; `n > 20`.
pub fn lagarias_sandwich(n: u64, policy: &PrecisionPolicy) -> Result<(SignDecision, SignDecision)> {
    need(n, 21, "the sandwich")?;
    let sigma = sigma_u64(n);
    let left = certified_sign(policy, "sandwich left", |prec| Ok(sandwich_sides(n, sigma, prec)?.0))?;
    let right = certified_sign(policy, "sandwich right", |prec| Ok(sandwich_sides(n, sigma, prec)?.1))?;
    Ok((left, right))
}

/// Inequality audited by a range scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    Robin,
    RobinLower,
    Lagarias,
    Sandwich,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Robin => "robin",
            Criterion::RobinLower => "robin-lower",
            Criterion::Lagarias => "lagarias",
            Criterion::Sandwich => "sandwich",
        }
    }

    /// Smallest `n` the inequality is stated for.
    pub fn min_n(self) -> u64 {
        match self {
            Criterion::Robin | Criterion::RobinLower => 3,
            Criterion::Lagarias => 2,
            Criterion::Sandwich => 21,
        }
    }

    fn verdict_names(self) -> &'static [&'static str] {
        match self {
            Criterion::Robin => &["robin"],
            Criterion::RobinLower => &["robin_lower"],
            Criterion::Lagarias => &["lagarias"],
            Criterion::Sandwich => &["sandwich_left", "sandwich_right"],
        }
    }

    /// Whether a certified sign satisfies the inequality.
    fn holds(self, s: SignDecision) -> bool {
        match self {
            Criterion::Sandwich => matches!(s, SignDecision::Positive | SignDecision::Zero),
            _ => s == SignDecision::Positive,
        }
    }

    /// Float values of the tested quantities with their magnitude scales.
    fn float_test(self, n: u64, sigma: u64) -> Vec<(f64, f64)> {
        let x = n as f64;
        let s = sigma as f64;
        let ln_n = x.ln();
        let lnln = ln_n.ln();
        let main = EXP_GAMMA_F64 * x * lnln;
        let lagarias = |h: f64| {
            let e = h.exp() * h.ln();
            (h + e - s, h + e.abs() + s)
        };
        match self {
            Criterion::Robin => vec![(main - s, main.abs() + s)],
            Criterion::RobinLower => {
                let slack = 0.6482 * x / lnln;
                vec![(main - s + slack, main.abs() + s + slack.abs())]
            }
            Criterion::Lagarias => vec![lagarias(harmonic_f64(n))],
            Criterion::Sandwich => {
                let h = harmonic_f64(n);
                let (l0, l0s) = lagarias(h);
                let r0 = main - s;
                let r0s = main.abs() + s;
                let up = 7.0 * x / ln_n;
                vec![(l0 - r0 - h, l0s + r0s + h), (r0 + up - l0, r0s + up + l0s)]
            }
        }
    }

    fn balls(self, n: u64, sigma: u64, prec: u32) -> Result<Vec<RealBall>> {
        Ok(match self {
            Criterion::Robin => vec![robin_deficit(&parts(n, sigma, prec), prec)?],
            Criterion::RobinLower => vec![robin_lower_from_sigma(n, sigma, prec)?],
            Criterion::Lagarias => vec![lagarias_from_sigma(n, sigma, prec)?],
            Criterion::Sandwich => {
                let (l, r) = sandwich_sides(n, sigma, prec)?;
                vec![l, r]
            }
        })
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Certified evaluation of one `n`.
#[derive(Clone, Debug)]
pub struct VerificationRecord {
    pub n: u64,
    pub sigma: u64,
    pub robin_deficit: RealBall,
    pub gronwall: RealBall,
    pub lagarias: Option<RealBall>,
    /// Named inequality → certified sign of its tested quantity.
    pub verdicts: Vec<(&'static str, SignDecision)>,
}

impl VerificationRecord {
    /// Whether every verdict satisfies its inequality.
    pub fn passes(&self, criterion: Criterion) -> bool {
        self.verdicts.iter().all(|&(_, s)| criterion.holds(s))
    }
}

fn with_n(n: u64, e: Error) -> Error {
    match e {
        Error::Precision { precision, detail } => Error::Precision {
            precision,
            detail: format!("n = {n}: {detail}"),
        },
        e => e,
    }
}

/// Evaluates `n` with balls and certifies every verdict.
pub fn verify_one(criterion: Criterion, n: u64, sigma: u64, policy: &PrecisionPolicy) -> Result<VerificationRecord> {
    need(n, criterion.min_n(), criterion.name())?;
    let signs = policy
        .run(|prec| {
            let balls = criterion.balls(n, sigma, prec)?;
            balls
                .iter()
                .map(|b| match b.sign() {
                    SignDecision::Ambiguous => Err(b.precision_error(criterion.name())),
                    s => Ok(s),
                })
                .collect::<Result<Vec<_>>>()
        })
        .map_err(|e| with_n(n, e))?;
    let prec = policy.start;
    let lagarias = match criterion {
        Criterion::Lagarias | Criterion::Sandwich => Some(lagarias_from_sigma(n, sigma, prec)?),
        _ => None,
    };
    Ok(VerificationRecord {
        n,
        sigma,
        robin_deficit: robin_deficit(&parts(n, sigma, prec), prec)?,
        gronwall: gronwall_from_sigma(n, sigma, prec)?,
        lagarias,
        verdicts: criterion.verdict_names().iter().copied().zip(signs).collect(),
    })
}

/// Which records a scan hands back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordMode {
    /// Only `n` where the inequality fails.
    Violations,
    /// Every `n` in the range.
    All,
}

/// A gap-free stretch `first..=frontier` of certified results.
#[derive(Clone, Debug)]
pub struct ScanBlock {
    pub first: u64,
    pub frontier: u64,
    pub records: Vec<VerificationRecord>,
}

/// Totals of a finished scan.
#[derive(Clone, Debug)]
pub struct ScanSummary {
    pub criterion: Criterion,
    pub lo: u64,
    pub hi: u64,
    pub checked: u64,
    /// Numbers that needed ball certification.
    pub certified_with_balls: u64,
    pub violations: Vec<u64>,
}

struct ChunkOutcome {
    records: Vec<VerificationRecord>,
    violations: Vec<u64>,
    certified: u64,
}

fn scan_chunk(
    criterion: Criterion,
    a: u64,
    b: u64,
    primes: &[u64],
    mode: RecordMode,
    policy: &PrecisionPolicy,
) -> Result<ChunkOutcome> {
    let mut sigma = vec![0u64; (b - a + 1) as usize];
    sigma_segment(a, primes, &mut sigma);
    let mut out = ChunkOutcome {
        records: Vec::new(),
        violations: Vec::new(),
        certified: 0,
    };
    for (i, &s) in sigma.iter().enumerate() {
        let n = a + i as u64;
        let decided = criterion
            .float_test(n, s)
            .iter()
            .all(|&(v, scale)| v.is_finite() && v > FLOAT_FILTER_MARGIN * scale);
        if decided && mode == RecordMode::Violations {
            continue;
        }
        if !decided {
            out.certified += 1;
        }
        let rec = verify_one(criterion, n, s, policy)?;
        let ok = rec.passes(criterion);
        if !ok {
            out.violations.push(n);
        }
        if mode == RecordMode::All || !ok {
            out.records.push(rec);
        }
    }
    Ok(out)
}

/// Audits `criterion` on `lo..=hi`.
///
/// Work is split into chunks evaluated in parallel; `on_block` receives
/// results in increasing `n` once every chunk up to the block frontier is
/// done, so a frontier can be persisted and the scan resumed from
/// `frontier + 1`.
pub fn verify_range(
    criterion: Criterion,
    lo: u64,
    hi: u64,
    opts: &ScanOptions,
    mode: RecordMode,
    on_block: impl FnMut(ScanBlock) -> Result<()>,
) -> Result<ScanSummary> {
    let block_len = SCAN_CHUNK * rayon::current_num_threads().max(1) as u64;
    verify_range_blocks(criterion, lo, hi, opts, mode, block_len, on_block)
}

fn verify_range_blocks(
    criterion: Criterion,
    lo: u64,
    hi: u64,
    opts: &ScanOptions,
    mode: RecordMode,
    block_len: u64,
    mut on_block: impl FnMut(ScanBlock) -> Result<()>,
) -> Result<ScanSummary> {
    opts.check_range(lo, hi, criterion.min_n())?;
    let primes = sieving_primes(hi);
    let mut summary = ScanSummary {
        criterion,
        lo,
        hi,
        checked: 0,
        certified_with_balls: 0,
        violations: Vec::new(),
    };
    let mut first = lo;
    while first <= hi {
        let last = first.saturating_add(block_len - 1).min(hi);
        let starts: Vec<u64> = (first..=last).step_by(SCAN_CHUNK as usize).collect();
        let outcomes = starts
            .par_iter()
            .map(|&a| scan_chunk(criterion, a, (a + SCAN_CHUNK - 1).min(last), &primes, mode, &opts.policy))
            .collect::<Result<Vec<_>>>()?;
        let mut records = Vec::new();
        for o in outcomes {
            summary.certified_with_balls += o.certified;
            summary.violations.extend(o.violations);
            records.extend(o.records);
        }
        summary.checked += last - first + 1;
        on_block(ScanBlock {
            first,
            frontier: last,
            records,
        })?;
        first = last + 1;
    }
    Ok(summary)
}

/// All `n` in `lo..=hi` with `σ(n) ≥ e^γ n ln ln n`, with their records.
pub fn robin_scan(lo: u64, hi: u64, opts: &ScanOptions) -> Result<(Vec<u64>, Vec<VerificationRecord>)> {
    let mut records = Vec::new();
    let summary = verify_range(Criterion::Robin, lo, hi, opts, RecordMode::Violations, |b| {
        records.extend(b.records);
        Ok(())
    })?;
    Ok((summary.violations, records))
}
