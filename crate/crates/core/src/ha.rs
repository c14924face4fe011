//! Weighted Robin deficits, the Ramanujan statistic and highest abundant
//! (HA) numbers.
//!
//! `R_s(n) = (e^γ n ln ln n − σ(n)) (ln n)^s` and
//! `T(n) = (e^γ ln ln n − σ(n)/n) √(ln n)`. HA numbers over `lo..=hi` are
//! the vertices of the lower convex envelope of `(n, R_s(n))`.

use rayon::prelude::*;
use rug::{Integer, Rational};

use crate::arithmetic::{
    abundancy, sieving_primes, sigma_segment, sigma_u64, value_and_log, Factorization, SIEVE_LIMIT_MAX,
};
use crate::envelope::{Approx, CollinearNote, Hull, Refine, StreamingHull};
use crate::error::{Error, Result};
use crate::realball::{const_euler_gamma, const_pi, exp_euler_gamma, PrecisionPolicy, RealBall, SignDecision};

/// Default cap on the length of a scanned range.
pub const DEFAULT_SIEVE_BUDGET: u64 = 100_000_000;

/// Numbers per parallel work unit in range scans.
pub const SCAN_CHUNK: u64 = 1 << 18;

/// Largest range accepted by [`figure_data`].
pub const FIGURE_MAX_POINTS: u64 = 1_000_000;

/// Precision ladder and range budget shared by the scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanOptions {
    pub policy: PrecisionPolicy,
    pub budget: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            policy: PrecisionPolicy::default(),
            budget: DEFAULT_SIEVE_BUDGET,
        }
    }
}

impl ScanOptions {
    pub(crate) fn check_range(&self, lo: u64, hi: u64, floor: u64) -> Result<()> {
        if lo < floor {
            return Err(Error::Domain(format!("range must start at n >= {floor}, got {lo}")));
        }
        if lo > hi {
            return Err(Error::Input(format!("empty range {lo}..={hi}")));
        }
        if hi > self.budget || hi > SIEVE_LIMIT_MAX {
            return Err(Error::Resource(format!(
                "range end {hi} exceeds sieve budget {}",
                self.budget.min(SIEVE_LIMIT_MAX)
            )));
        }
        Ok(())
    }
}

/// The weight `τ(n) = (ln n)^s` with exact rational `s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weight {
    s: Rational,
}

impl Weight {
    pub fn power_of_log(s: impl Into<Rational>) -> Self {
        Weight { s: s.into() }
    }

    pub fn exponent(&self) -> &Rational {
        &self.s
    }

    fn integer_exponent(&self) -> Option<i32> {
        if *self.s.denom() == 1 {
            self.s.numer().to_i32()
        } else {
            None
        }
    }

    /// Smallest admissible `n`: integer powers allow `n = 2`.
    pub fn min_n(&self) -> u64 {
        if self.integer_exponent().is_some() {
            2
        } else {
            3
        }
    }

    /// `(ln n)^s` given a ball for `ln n`.
    pub fn eval(&self, ln_n: &RealBall) -> Result<RealBall> {
        match self.integer_exponent() {
            Some(0) => Ok(RealBall::one(ln_n.prec())),
            Some(k) => ln_n.pow_i32(k),
            None => ln_n.pow_real(&RealBall::from_rational(&self.s, ln_n.prec())),
        }
    }

    fn eval_f64(&self, ln_n: f64) -> f64 {
        match self.integer_exponent() {
            Some(k) => ln_n.powi(k),
            None => ln_n.powf(self.s.to_f64()),
        }
    }
}

impl std::fmt::Display for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(log n)^{}", self.s)
    }
}

/// An argument given either as a machine integer or factored.
#[derive(Clone, Copy, Debug)]
pub enum Subject<'a> {
    Int(u64),
    Factored(&'a Factorization),
}

impl From<u64> for Subject<'_> {
    fn from(n: u64) -> Self {
        Subject::Int(n)
    }
}

impl<'a> From<&'a Factorization> for Subject<'a> {
    fn from(f: &'a Factorization) -> Self {
        Subject::Factored(f)
    }
}

/// `n`, `σ(n)` and a ball for `ln n`.
pub(crate) struct Parts {
    pub n: Integer,
    pub sigma: Integer,
    pub ln_n: RealBall,
}

impl Subject<'_> {
    fn at_least(&self, floor: u64) -> bool {
        match self {
            Subject::Int(n) => *n >= floor,
            Subject::Factored(f) => f.value() >= floor,
        }
    }

    fn parts(&self, prec: u32) -> Parts {
        match self {
            Subject::Int(n) => Parts {
                n: Integer::from(*n),
                sigma: Integer::from(sigma_u64(*n)),
                ln_n: RealBall::from_u64(*n, prec).ln().expect("n >= 1"),
            },
            Subject::Factored(f) => {
                let (v, ln_n) = value_and_log(f, prec, true);
                Parts {
                    n: v.unwrap(),
                    sigma: f.sigma(),
                    ln_n,
                }
            }
        }
    }
}

/// `e^γ n ln ln n − σ(n)` from its parts.
pub(crate) fn robin_deficit(p: &Parts, prec: u32) -> Result<RealBall> {
    let lnln = p.ln_n.ln()?;
    Ok(exp_euler_gamma(prec)
        .mul(&RealBall::from_integer(&p.n, prec))
        .mul(&lnln)
        .sub(&RealBall::from_integer(&p.sigma, prec)))
}

/// `R_s(n)` for a sieved pair `(n, σ(n))`.
pub fn r_from_sigma(n: u64, sigma: u64, w: &Weight, prec: u32) -> Result<RealBall> {
    let parts = Parts {
        n: Integer::from(n),
        sigma: Integer::from(sigma),
        ln_n: RealBall::from_u64(n, prec).ln()?,
    };
    Ok(robin_deficit(&parts, prec)?.mul(&w.eval(&parts.ln_n)?))
}

/// `R_s(n)` as a double, with a bound on the magnitudes it came from.
pub fn r_from_sigma_f64(n: u64, sigma: u64, w: &Weight) -> (f64, f64) {
    const EXP_GAMMA: f64 = 1.781_072_417_990_198;
    let nf = n as f64;
    let ln_n = nf.ln();
    let main = EXP_GAMMA * nf * ln_n.ln();
    let tau = w.eval_f64(ln_n);
    let y = (main - sigma as f64) * tau;
    let scale = (main.abs() + sigma as f64) * tau.abs();
    (y, scale)
}

/// Weighted Robin deficit `R_s(n)`.
pub fn r_weighted<'a>(n: impl Into<Subject<'a>>, w: &Weight, prec: u32) -> Result<RealBall> {
    let n = n.into();
    if !n.at_least(w.min_n()) {
        return Err(Error::Domain(format!("R_s needs n >= {} for weight {w}", w.min_n())));
    }
    let parts = n.parts(prec);
    Ok(robin_deficit(&parts, prec)?.mul(&w.eval(&parts.ln_n)?))
}

/// Ramanujan statistic `T(n)`; σ(n)/n is exact for factored input.
pub fn t_statistic<'a>(n: impl Into<Subject<'a>>, prec: u32) -> Result<RealBall> {
    let n = n.into();
    if !n.at_least(3) {
        return Err(Error::Domain("T(n) needs n >= 3".into()));
    }
    let (ratio, ln_n) = match n {
        Subject::Factored(f) => (abundancy(f).to_ball(prec), value_and_log(f, prec, false).1),
        Subject::Int(v) => (
            RealBall::from_rational(&Rational::from((sigma_u64(v), v)), prec),
            RealBall::from_u64(v, prec).ln()?,
        ),
    };
    Ok(exp_euler_gamma(prec)
        .mul(&ln_n.ln()?)
        .sub(&ratio)
        .mul(&ln_n.sqrt()?))
}

/// `(c₁, c₂)`: the limits bounding `T(n_i)` along CA numbers.
pub fn ramanujan_constants(prec: u32) -> (RealBall, RealBall) {
    let eg = exp_euler_gamma(prec);
    let gamma = const_euler_gamma(prec);
    let two_sqrt2 = RealBall::from_u64(8, prec).sqrt().expect("8 > 0");
    let log_4pi = const_pi(prec).mul_u64(4).ln().expect("4π > 0");
    let c1 = eg.mul(
        &two_sqrt2
            .sub(&RealBall::from_u64(4, prec))
            .sub(&gamma)
            .add(&log_4pi),
    );
    let c2 = eg.mul(&two_sqrt2.add(&gamma).sub(&log_4pi));
    (c1, c2)
}

#[derive(Clone)]
struct RPoint {
    w: Weight,
}

impl Refine<(u64, u64)> for RPoint {
    fn coords(&self, key: &(u64, u64), prec: u32) -> Result<(RealBall, RealBall)> {
        Ok((RealBall::from_u64(key.0, prec), r_from_sigma(key.0, key.1, &self.w, prec)?))
    }
}

/// Coordinates of the points `(ln n, ln n − ln σ(n))`.
#[derive(Clone)]
struct LogAbundancyPoint;

impl Refine<(u64, u64)> for LogAbundancyPoint {
    fn coords(&self, key: &(u64, u64), prec: u32) -> Result<(RealBall, RealBall)> {
        let x = RealBall::from_u64(key.0, prec).ln()?;
        let y = x.sub(&RealBall::from_u64(key.1, prec).ln()?);
        Ok((x, y))
    }
}

/// Lower hull of `(n, σ(n))`-keyed points over `lo..=hi`, built in
/// parallel chunks and merged in order.
fn hull_scan<R, A>(lo: u64, hi: u64, refine: R, approx: A, policy: &PrecisionPolicy) -> Result<Hull<(u64, u64)>>
where
    R: Refine<(u64, u64)> + Clone + Send + Sync,
    A: Fn(u64, u64) -> Option<Approx> + Sync,
{
    let primes = sieving_primes(hi);
    let starts: Vec<u64> = (lo..=hi).step_by(SCAN_CHUNK as usize).collect();
    let parts: Vec<Result<StreamingHull<(u64, u64), R>>> = starts
        .par_iter()
        .map(|&a| {
            let b = (a + SCAN_CHUNK - 1).min(hi);
            let mut sigma = vec![0u64; (b - a + 1) as usize];
            sigma_segment(a, &primes, &mut sigma);
            let mut h = StreamingHull::new(refine.clone(), *policy);
            for (i, &s) in sigma.iter().enumerate() {
                let n = a + i as u64;
                h.push((n, s), approx(n, s))?;
            }
            Ok(h)
        })
        .collect();
    let mut parts = parts.into_iter();
    let mut acc = parts.next().expect("range is non-empty")?;
    for p in parts {
        acc.absorb(p?)?;
    }
    acc.finish()
}

/// HA numbers of `R_s` over `lo..=hi` with their chord slopes.
#[derive(Clone, Debug)]
pub struct HaReport {
    pub lo: u64,
    pub hi: u64,
    pub s: Rational,
    pub ha_numbers: Vec<u64>,
    /// `R_s` at each HA number.
    pub values: Vec<RealBall>,
    /// `slopes[i]` joins `ha_numbers[i]` and `ha_numbers[i + 1]`.
    pub slopes: Vec<RealBall>,
    pub slope_signs: Vec<SignDecision>,
    /// Number of negative slopes; slopes from this index on are `>= 0`.
    pub sign_split: usize,
    pub ties: Vec<CollinearNote<u64>>,
}

impl HaReport {
    /// Where the envelope of `R_s` attains its minimum.
    pub fn envelope_minimizer(&self) -> u64 {
        self.ha_numbers[self.sign_split]
    }
}

fn certified_slope_sign(
    a: (u64, u64),
    b: (u64, u64),
    slope: &RealBall,
    refine: &impl Refine<(u64, u64)>,
    policy: &PrecisionPolicy,
) -> Result<SignDecision> {
    let s = slope.sign();
    if s.is_certified() {
        return Ok(s);
    }
    policy.run(|prec| {
        let (xa, ya) = refine.coords(&a, prec)?;
        let (xb, yb) = refine.coords(&b, prec)?;
        let m = yb.sub(&ya).div(&xb.sub(&xa))?;
        match m.sign() {
            SignDecision::Ambiguous => Err(m.precision_error("slope sign")),
            s => Ok(s),
        }
    })
}

/// HA numbers of `R_s` over `lo..=hi`.
pub fn ha_numbers(lo: u64, hi: u64, s: &Rational, opts: &ScanOptions) -> Result<HaReport> {
    let w = Weight::power_of_log(s.clone());
    opts.check_range(lo, hi, w.min_n())?;
    if lo == hi {
        return Err(Error::Input("HA range needs at least two points".into()));
    }
    let refine = RPoint { w: w.clone() };
    let approx = |n: u64, sigma: u64| {
        let (y, y_scale) = r_from_sigma_f64(n, sigma, &w);
        Some(Approx {
            x: n as f64,
            y,
            x_scale: 0.0,
            y_scale,
        })
    };
    let hull = hull_scan(lo, hi, refine.clone(), approx, &opts.policy)?;
    let keys = hull.vertex_keys();
    let slope_signs = keys
        .windows(2)
        .zip(&hull.slopes)
        .map(|(k, m)| certified_slope_sign(k[0], k[1], m, &refine, &opts.policy))
        .collect::<Result<Vec<_>>>()?;
    let prec = opts.policy.start;
    let values = keys
        .iter()
        .map(|&(n, sigma)| r_from_sigma(n, sigma, &w, prec))
        .collect::<Result<Vec<_>>>()?;
    Ok(HaReport {
        lo,
        hi,
        s: s.clone(),
        ha_numbers: keys.iter().map(|k| k.0).collect(),
        values,
        sign_split: slope_signs.iter().filter(|&&s| s == SignDecision::Negative).count(),
        slopes: hull.slopes,
        slope_signs,
        ties: hull
            .ties
            .into_iter()
            .map(|t| CollinearNote {
                key: t.key.0,
                left: t.left.0,
                right: t.right.0,
            })
            .collect(),
    })
}

/// Every sample `(n, R_s(n))` plus the envelope through the HA numbers.
#[derive(Clone, Debug)]
pub struct FigureData {
    pub points: Vec<(u64, RealBall)>,
    pub report: HaReport,
}

impl FigureData {
    pub fn is_vertex(&self, n: u64) -> bool {
        self.report.ha_numbers.binary_search(&n).is_ok()
    }

    /// Chords of the envelope, as pairs of consecutive HA numbers.
    pub fn segments(&self) -> Vec<(u64, u64)> {
        self.report.ha_numbers.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Midpoint of the envelope at `n` (linear along chords).
    pub fn envelope_at(&self, n: u64) -> Option<f64> {
        let h = &self.report.ha_numbers;
        let k = h.partition_point(|&v| v < n);
        if k < h.len() && h[k] == n {
            return Some(self.report.values[k].mid_f64());
        }
        if k == 0 || k == h.len() {
            return None;
        }
        let y0 = self.report.values[k - 1].mid_f64();
        Some(y0 + self.report.slopes[k - 1].mid_f64() * (n - h[k - 1]) as f64)
    }
}

/// Plot data for `R_s` and its lower envelope over `lo..=hi`.
pub fn figure_data(lo: u64, hi: u64, s: &Rational, opts: &ScanOptions) -> Result<FigureData> {
    if hi.saturating_sub(lo) >= FIGURE_MAX_POINTS {
        return Err(Error::Resource(format!(
            "figure data limited to {FIGURE_MAX_POINTS} points"
        )));
    }
    let report = ha_numbers(lo, hi, s, opts)?;
    let w = Weight::power_of_log(s.clone());
    let prec = opts.policy.start;
    let points = (lo..=hi)
        .into_par_iter()
        .map(|n| Ok((n, r_from_sigma(n, sigma_u64(n), &w, prec)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FigureData { points, report })
}

/// Vertices of the envelope of `(ln n, ln n − ln σ(n))` over `2..=hi`.
///
/// On an unbounded domain these are exactly the CA numbers; a finite
/// range adds spurious vertices near `hi`, so callers restrict the result
/// to well below `hi`.
pub fn ca_by_envelope(hi: u64, opts: &ScanOptions) -> Result<Vec<u64>> {
    opts.check_range(2, hi, 2)?;
    let approx = |n: u64, sigma: u64| {
        let x = (n as f64).ln();
        let ls = (sigma as f64).ln();
        Some(Approx {
            x,
            y: x - ls,
            x_scale: x,
            y_scale: x + ls,
        })
    };
    let hull = hull_scan(2, hi, LogAbundancyPoint, approx, &opts.policy)?;
    Ok(hull.vertices.iter().map(|v| v.key.0).collect())
}
