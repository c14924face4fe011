//! Certified real arithmetic on enclosures.
//!
//! A [`RealBall`] is a closed interval `[lo, hi]` of multi-precision floats
//! that is guaranteed to contain the exact real it stands for. Every
//! operation rounds its lower endpoint down and its upper endpoint up, so
//! the output contains the exact image of every point of the inputs.
//! Balls are reported as midpoint and radius.
//!
//! Sign decisions, floors and comparisons are *certified*: they either hold
//! for every real in the ball or they fail with [`Error::Precision`], in
//! which case the caller re-evaluates at a higher precision (see
//! [`PrecisionPolicy::run`]).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use rug::float::{Constant, Round};
use rug::ops::NegAssign;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Working precision used unless a caller asks for something else.
pub const DEFAULT_PRECISION: u32 = 128;
/// Last rung of the retry ladder.
pub const MAX_PRECISION: u32 = 4096;
/// Smallest precision accepted by the public constructors.
pub const MIN_PRECISION: u32 = 53;

/// Start and ceiling of the precision retry ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrecisionPolicy {
    pub start: u32,
    pub max: u32,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy {
            start: DEFAULT_PRECISION,
            max: MAX_PRECISION,
        }
    }
}

impl PrecisionPolicy {
    pub fn new(start: u32, max: u32) -> Result<Self> {
        if start < MIN_PRECISION {
            return Err(Error::Input(format!(
                "precision {start} below minimum {MIN_PRECISION}"
            )));
        }
        if start > max {
            return Err(Error::Input(format!(
                "precision {start} exceeds max precision {max}"
            )));
        }
        Ok(PrecisionPolicy { start, max })
    }

    /// Precisions tried in order: `start`, doubling, capped by `max`.
    pub fn ladder(&self) -> Vec<u32> {
        let mut out = vec![self.start];
        let mut p = self.start;
        while p < self.max {
            p = p.saturating_mul(2).min(self.max);
            out.push(p);
        }
        out
    }

    /// Runs `f` on each rung until it returns something other than a
    /// precision error. The last precision error is surfaced unchanged.
    pub fn run<T>(&self, mut f: impl FnMut(u32) -> Result<T>) -> Result<T> {
        let mut last = None;
        for prec in self.ladder() {
            match f(prec) {
                Err(e) if e.is_precision() => last = Some(e),
                other => return other,
            }
        }
        Err(last.expect("ladder is never empty"))
    }
}

/// Outcome of a certified sign test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignDecision {
    Negative,
    Zero,
    Positive,
    Ambiguous,
}

impl SignDecision {
    pub fn is_certified(self) -> bool {
        self != SignDecision::Ambiguous
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignDecision::Negative => "negative",
            SignDecision::Zero => "zero",
            SignDecision::Positive => "positive",
            SignDecision::Ambiguous => "ambiguous",
        }
    }
}

impl fmt::Display for SignDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn down<T>(prec: u32, val: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, val, Round::Down).0
}

fn up<T>(prec: u32, val: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, val, Round::Up).0
}

/// Applies a monotone increasing in-place MPFR function to both endpoints.
fn monotone(lo: &Float, hi: &Float, prec: u32, f: impl Fn(&mut Float, Round)) -> (Float, Float) {
    let mut l = Float::with_val(prec, lo);
    let mut h = Float::with_val(prec, hi);
    // Widening the precision is exact, so rounding only happens inside `f`.
    if lo.prec() > prec {
        l = down(prec, lo);
    }
    if hi.prec() > prec {
        h = up(prec, hi);
    }
    f(&mut l, Round::Down);
    f(&mut h, Round::Up);
    (l, h)
}

/// A certified enclosure of a real number.
#[derive(Clone, Debug)]
pub struct RealBall {
    lo: Float,
    hi: Float,
}

impl RealBall {
    fn from_endpoints(lo: Float, hi: Float) -> Self {
        debug_assert!(lo.is_nan() || hi.is_nan() || lo <= hi);
        RealBall { lo, hi }
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_u64(0, prec)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_u64(1, prec)
    }

    pub fn from_u64(v: u64, prec: u32) -> Self {
        Self::from_endpoints(down(prec, v), up(prec, v))
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        Self::from_endpoints(down(prec, v), up(prec, v))
    }

    pub fn from_integer(v: &Integer, prec: u32) -> Self {
        Self::from_endpoints(down(prec, v), up(prec, v))
    }

    pub fn from_rational(v: &Rational, prec: u32) -> Self {
        Self::from_endpoints(down(prec, v), up(prec, v))
    }

    /// Exact ball around a double (every double fits in 53 bits).
    pub fn from_f64(v: f64, prec: u32) -> Self {
        assert!(v.is_finite(), "non-finite ball midpoint {v}");
        Self::from_endpoints(down(prec, v), up(prec, v))
    }

    pub fn from_float(v: &Float, prec: u32) -> Self {
        Self::from_endpoints(down(prec, v), up(prec, v))
    }

    /// Ball `[mid - rad, mid + rad]`, rounded outward.
    pub fn from_mid_rad(mid: f64, rad: f64, prec: u32) -> Self {
        assert!(rad >= 0.0, "negative radius {rad}");
        let m = Float::with_val(prec.max(64), mid);
        let r = Float::with_val(prec.max(64), rad);
        Self::from_endpoints(down(prec, &m - &r), up(prec, &m + &r))
    }

    /// Smallest ball containing both `[a]` and `[b]`.
    pub fn hull(a: &RealBall, b: &RealBall) -> Self {
        let prec = a.prec().max(b.prec());
        let lo = if a.lo <= b.lo { &a.lo } else { &b.lo };
        let hi = if a.hi >= b.hi { &a.hi } else { &b.hi };
        Self::from_endpoints(down(prec, lo), up(prec, hi))
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn lower(&self) -> &Float {
        &self.lo
    }

    pub fn upper(&self) -> &Float {
        &self.hi
    }

    pub fn midpoint(&self) -> Float {
        let prec = self.prec();
        Float::with_val(prec + 1, &self.lo + &self.hi) / 2u32
    }

    /// Radius about [`RealBall::midpoint`], rounded up.
    pub fn radius(&self) -> Float {
        let prec = self.prec();
        let mid = self.midpoint();
        let a = up(prec, &self.hi - &mid);
        let b = up(prec, &mid - &self.lo);
        if a >= b {
            a
        } else {
            b
        }
    }

    pub fn mid_f64(&self) -> f64 {
        self.midpoint().to_f64()
    }

    pub fn radius_f64(&self) -> f64 {
        self.radius().to_f64_round(Round::Up)
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Float) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_ball(&self, other: &RealBall) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn overlaps(&self, other: &RealBall) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Re-rounds outward to `prec` bits.
    pub fn with_prec(&self, prec: u32) -> Self {
        Self::from_endpoints(down(prec, &self.lo), up(prec, &self.hi))
    }

    pub fn sign(&self) -> SignDecision {
        if self.lo > 0 {
            SignDecision::Positive
        } else if self.hi < 0 {
            SignDecision::Negative
        } else if self.lo == 0 && self.hi == 0 {
            SignDecision::Zero
        } else {
            SignDecision::Ambiguous
        }
    }

    /// Certified comparison; `None` when the balls overlap and are not the
    /// same exact point.
    pub fn cmp_certified(&self, other: &RealBall) -> Option<Ordering> {
        if self.hi < other.lo {
            Some(Ordering::Less)
        } else if self.lo > other.hi {
            Some(Ordering::Greater)
        } else if self.is_exact() && other.is_exact() && self.lo == other.lo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// `⌊x⌋` for every `x` in the ball, or a precision error if the ball
    /// straddles an integer.
    pub fn certified_floor(&self) -> Result<Integer> {
        let fl = Float::with_val(self.lo.prec(), self.lo.floor_ref());
        let fh = Float::with_val(self.hi.prec(), self.hi.floor_ref());
        match (fl.to_integer(), fh.to_integer()) {
            (Some(a), Some(b)) if a == b => Ok(a),
            (Some(_), Some(_)) => Err(self.precision_error("floor straddles an integer")),
            _ => Err(Error::Domain(format!("floor of non-finite ball {self}"))),
        }
    }

    pub(crate) fn precision_error(&self, what: &str) -> Error {
        Error::Precision {
            precision: self.prec(),
            detail: format!("{what}: {self}"),
        }
    }

    pub fn neg(&self) -> Self {
        let mut lo = self.hi.clone();
        let mut hi = self.lo.clone();
        lo.neg_assign();
        hi.neg_assign();
        Self::from_endpoints(lo, hi)
    }

    pub fn add(&self, o: &RealBall) -> Self {
        let prec = self.prec().max(o.prec());
        Self::from_endpoints(down(prec, &self.lo + &o.lo), up(prec, &self.hi + &o.hi))
    }

    pub fn sub(&self, o: &RealBall) -> Self {
        let prec = self.prec().max(o.prec());
        Self::from_endpoints(down(prec, &self.lo - &o.hi), up(prec, &self.hi - &o.lo))
    }

    pub fn mul(&self, o: &RealBall) -> Self {
        let prec = self.prec().max(o.prec());
        if self.lo >= 0 && o.lo >= 0 {
            return Self::from_endpoints(down(prec, &self.lo * &o.lo), up(prec, &self.hi * &o.hi));
        }
        let pairs = [
            (&self.lo, &o.lo),
            (&self.lo, &o.hi),
            (&self.hi, &o.lo),
            (&self.hi, &o.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let d = down(prec, a * b);
            let u = up(prec, a * b);
            if lo.as_ref().is_none_or(|l| d < *l) {
                lo = Some(d);
            }
            if hi.as_ref().is_none_or(|h| u > *h) {
                hi = Some(u);
            }
        }
        Self::from_endpoints(lo.unwrap(), hi.unwrap())
    }

    pub fn mul_u64(&self, k: u64) -> Self {
        self.mul(&RealBall::from_u64(k, self.prec()))
    }

    pub fn div(&self, o: &RealBall) -> Result<Self> {
        match o.sign() {
            SignDecision::Zero => return Err(Error::Domain("division by zero".into())),
            SignDecision::Ambiguous => return Err(o.precision_error("divisor touches zero")),
            _ => {}
        }
        let prec = self.prec().max(o.prec());
        let pairs = [
            (&self.lo, &o.lo),
            (&self.lo, &o.hi),
            (&self.hi, &o.lo),
            (&self.hi, &o.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let d = down(prec, a / b);
            let u = up(prec, a / b);
            if lo.as_ref().is_none_or(|l| d < *l) {
                lo = Some(d);
            }
            if hi.as_ref().is_none_or(|h| u > *h) {
                hi = Some(u);
            }
        }
        Ok(Self::from_endpoints(lo.unwrap(), hi.unwrap()))
    }

    pub fn recip(&self) -> Result<Self> {
        RealBall::one(self.prec()).div(self)
    }

    pub fn ln(&self) -> Result<Self> {
        if self.hi <= 0 {
            return Err(Error::Domain(format!("log of non-positive {self}")));
        }
        if self.lo <= 0 {
            return Err(self.precision_error("log argument touches zero"));
        }
        let (lo, hi) = monotone(&self.lo, &self.hi, self.prec(), |x, r| {
            x.ln_round(r);
        });
        Ok(Self::from_endpoints(lo, hi))
    }

    /// `ln(1 + x)`, accurate for tiny `x`.
    pub fn ln_1p(&self) -> Result<Self> {
        if self.hi <= -1 {
            return Err(Error::Domain(format!("ln_1p of {self} <= -1")));
        }
        if self.lo <= -1 {
            return Err(self.precision_error("ln_1p argument touches -1"));
        }
        let (lo, hi) = monotone(&self.lo, &self.hi, self.prec(), |x, r| {
            x.ln_1p_round(r);
        });
        Ok(Self::from_endpoints(lo, hi))
    }

    pub fn exp(&self) -> Self {
        let (lo, hi) = monotone(&self.lo, &self.hi, self.prec(), |x, r| {
            x.exp_round(r);
        });
        Self::from_endpoints(lo, hi)
    }

    /// `exp(x) - 1`, accurate for tiny `x`.
    pub fn exp_m1(&self) -> Self {
        let (lo, hi) = monotone(&self.lo, &self.hi, self.prec(), |x, r| {
            x.exp_m1_round(r);
        });
        Self::from_endpoints(lo, hi)
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.hi < 0 {
            return Err(Error::Domain(format!("sqrt of negative {self}")));
        }
        if self.lo < 0 {
            return Err(self.precision_error("sqrt argument straddles zero"));
        }
        let (lo, hi) = monotone(&self.lo, &self.hi, self.prec(), |x, r| {
            x.sqrt_round(r);
        });
        Ok(Self::from_endpoints(lo, hi))
    }

    /// Integer power by repeated squaring.
    pub fn pow_u32(&self, mut k: u32) -> Self {
        let mut acc = RealBall::one(self.prec());
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = if base.lo >= 0 || base.hi <= 0 {
                    base.mul(&base)
                } else {
                    // Squaring a ball that straddles zero: [0, max(lo², hi²)].
                    let sq = base.mul(&base);
                    Self::from_endpoints(Float::with_val(sq.prec(), 0), sq.hi)
                };
            }
        }
        acc
    }

    pub fn pow_i32(&self, k: i32) -> Result<Self> {
        let p = self.pow_u32(k.unsigned_abs());
        if k < 0 {
            p.recip()
        } else {
            Ok(p)
        }
    }

    /// `x^y = exp(y ln x)` for `x > 0`.
    pub fn pow_real(&self, y: &RealBall) -> Result<Self> {
        Ok(self.ln()?.mul(y).exp())
    }

    /// Midpoint with `digits` significant digits, e.g. `1.39321844177339`.
    pub fn fmt_mid(&self, digits: usize) -> String {
        let m = self.midpoint();
        if m.is_zero() {
            return "0".to_string();
        }
        m.to_string_radix(10, Some(digits))
    }

    /// Radius rounded up to two significant digits.
    pub fn fmt_rad(&self) -> String {
        let r = self.radius();
        if r.is_zero() {
            return "0".to_string();
        }
        r.to_string_radix_round(10, Some(2), Round::Up)
    }
}

impl fmt::Display for RealBall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} +/- {}]", self.fmt_mid(15), self.fmt_rad())
    }
}

fn cached(
    cell: &'static OnceLock<Mutex<HashMap<u32, RealBall>>>,
    prec: u32,
    compute: impl FnOnce(u32) -> RealBall,
) -> RealBall {
    let map = cell.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = map.lock().unwrap().get(&prec) {
        return b.clone();
    }
    let b = compute(prec);
    map.lock().unwrap().insert(prec, b.clone());
    b
}

/// Euler's constant γ, certified.
///
/// Brent–McMillan: with `t_k = (n^k / k!)^2`, `A = Σ t_k (H_k - ln n)` and
/// `B = Σ t_k`, the Bessel identity `K0(2n) = A - γ B` (with `B = I0(2n)`)
/// gives `γ = A/B - K0(2n)/I0(2n)` and `0 < K0(2n)/I0(2n) < π e^{-4n}`.
///
/// Truncation after index `k >= 2n`: for `j >= k`,
/// `t_{j+1}/t_j = n²/(j+1)² <= 1/4` and `(H_{j+1}+ln n)/(H_j+ln n) <= 2`, so
/// with `u_j = t_j (H_j + ln n)` we have `u_{j+1} <= u_j / 2`. Hence the
/// tail of `A` is bounded in absolute value by `Σ_{j>k} u_j <= u_k`, and the
/// tail of `B` lies in `[0, t_k/3]`.
pub fn const_euler_gamma(prec: u32) -> RealBall {
    static CACHE: OnceLock<Mutex<HashMap<u32, RealBall>>> = OnceLock::new();
    cached(&CACHE, prec, euler_gamma_uncached)
}

fn euler_gamma_uncached(prec: u32) -> RealBall {
    let wp = prec + 64;
    let n = (((prec + 8) as f64 * std::f64::consts::LN_2 + 1.2) / 4.0).ceil() as u64 + 1;
    let ln_n = RealBall::from_u64(n, wp).ln().expect("n >= 2");
    let n_sq = RealBall::from_u64(n * n, wp);
    let mut t = RealBall::one(wp);
    let mut h = RealBall::zero(wp);
    let mut a = ln_n.neg();
    let mut b = RealBall::one(wp);
    let stop = Float::with_val(wp, Float::i_exp(1, -((prec + 16) as i32)));
    let mut k: u64 = 1;
    let (tail_a, tail_b) = loop {
        t = t.mul(&n_sq).div(&RealBall::from_u64(k * k, wp)).unwrap();
        h = h.add(&RealBall::from_u64(k, wp).recip().unwrap());
        a = a.add(&t.mul(&h.sub(&ln_n)));
        b = b.add(&t);
        if k >= 2 * n {
            let u = up(wp, t.upper() * &up(wp, h.upper() + ln_n.upper()));
            if u < up(wp, b.lower() * &stop) {
                break (u, t.upper().clone());
            }
        }
        k += 1;
    };
    let a = RealBall::from_endpoints(down(wp, a.lower() - &tail_a), up(wp, a.upper() + &tail_a));
    let b = RealBall::from_endpoints(b.lower().clone(), up(wp, b.upper() + &tail_b));
    let ratio = a.div(&b).unwrap();
    let pi_up = Float::with_val_round(wp, Constant::Pi, Round::Up).0;
    let e4n = RealBall::from_u64(4 * n, wp).neg().exp();
    let bessel = up(wp, &pi_up * e4n.upper());
    let lo = down(prec, ratio.lower() - &bessel);
    let hi = up(prec, ratio.upper());
    RealBall::from_endpoints(lo, hi)
}

/// `e^γ`, certified.
pub fn exp_euler_gamma(prec: u32) -> RealBall {
    static CACHE: OnceLock<Mutex<HashMap<u32, RealBall>>> = OnceLock::new();
    cached(&CACHE, prec, |p| const_euler_gamma(p + 16).exp().with_prec(p))
}

/// π, certified (MPFR's correctly rounded constant, rounded both ways).
pub fn const_pi(prec: u32) -> RealBall {
    RealBall::from_endpoints(
        Float::with_val_round(prec, Constant::Pi, Round::Down).0,
        Float::with_val_round(prec, Constant::Pi, Round::Up).0,
    )
}
