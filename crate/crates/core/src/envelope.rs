//! Lower convex envelopes of functions sampled on a strictly increasing
//! grid.
//!
//! The engine is a one-pass monotone chain ([`StreamingHull`]) that keeps
//! only the current hull stack. Orientation tests run first on `f64`
//! approximations; when the float margin is below
//! [`FLOAT_FILTER_MARGIN`] (relative to the magnitudes involved) the
//! coordinates are re-evaluated as balls through a refinement callback and
//! the sign is certified, climbing the precision ladder as needed.
//!
//! Collinear interior points are never vertices; they are reported as
//! [`CollinearNote`]s.

use std::cmp::Ordering;

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::realball::{PrecisionPolicy, RealBall, SignDecision};

/// Relative float margin below which an orientation is re-certified.
pub const FLOAT_FILTER_MARGIN: f64 = 1e-6;

/// Largest instance accepted by [`envelope_bruteforce`].
pub const BRUTEFORCE_MAX_POINTS: usize = 10_000;

/// `f64` view of a point for the orientation filter.
///
/// `x_scale`/`y_scale` bound the magnitude of the intermediate quantities
/// the float coordinates were computed from; the filter trusts the float
/// values to a tiny fraction of those magnitudes. Use `0.0` for a
/// coordinate that is exact in `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Approx {
    pub x: f64,
    pub y: f64,
    pub x_scale: f64,
    pub y_scale: f64,
}

/// Certified coordinates of a key at a given precision.
pub trait Refine<K> {
    fn coords(&self, key: &K, prec: u32) -> Result<(RealBall, RealBall)>;
}

impl<K, F> Refine<K> for F
where
    F: Fn(&K, u32) -> Result<(RealBall, RealBall)>,
{
    fn coords(&self, key: &K, prec: u32) -> Result<(RealBall, RealBall)> {
        self(key, prec)
    }
}

#[derive(Clone, Debug)]
pub struct Node<K> {
    pub key: K,
    pub approx: Option<Approx>,
}

/// A point dropped because it lies exactly on the chord between two
/// envelope vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollinearNote<K> {
    pub key: K,
    pub left: K,
    pub right: K,
}

/// Vertices, slopes and collinearity notes of a finished hull.
#[derive(Clone, Debug)]
pub struct Hull<K> {
    pub vertices: Vec<Node<K>>,
    /// `slopes[i]` is the chord slope between vertices `i` and `i + 1`.
    pub slopes: Vec<RealBall>,
    pub ties: Vec<CollinearNote<K>>,
}

impl<K: Clone> Hull<K> {
    pub fn vertex_keys(&self) -> Vec<K> {
        self.vertices.iter().map(|v| v.key.clone()).collect()
    }
}

/// Float orientation of `(a, b, c)`; `None` when the margin is too thin.
fn float_orientation(a: &Approx, b: &Approx, c: &Approx) -> Option<SignDecision> {
    let (dx1, dy1) = (b.x - a.x, b.y - a.y);
    let (dx2, dy2) = (c.x - a.x, c.y - a.y);
    let cross = dx1 * dy2 - dy1 * dx2;
    let scale = dx1.abs() * (c.y_scale + a.y_scale)
        + dx2.abs() * (b.y_scale + a.y_scale)
        + dy2.abs() * (b.x_scale + a.x_scale)
        + dy1.abs() * (c.x_scale + a.x_scale);
    if !cross.is_finite() || !scale.is_finite() {
        return None;
    }
    if cross > FLOAT_FILTER_MARGIN * scale {
        Some(SignDecision::Positive)
    } else if cross < -FLOAT_FILTER_MARGIN * scale {
        Some(SignDecision::Negative)
    } else {
        None
    }
}

/// `(bx-ax)(cy-ay) - (by-ay)(cx-ax)` as a ball.
fn cross_ball(a: &(RealBall, RealBall), b: &(RealBall, RealBall), c: &(RealBall, RealBall)) -> RealBall {
    let l = b.0.sub(&a.0).mul(&c.1.sub(&a.1));
    let r = b.1.sub(&a.1).mul(&c.0.sub(&a.0));
    l.sub(&r)
}

/// One-pass lower hull over points pushed in increasing `x`.
pub struct StreamingHull<K, R> {
    refine: R,
    policy: PrecisionPolicy,
    stack: Vec<Node<K>>,
    ties: Vec<Node<K>>,
    certified_calls: usize,
}

impl<K: Clone + Ord, R: Refine<K>> StreamingHull<K, R> {
    pub fn new(refine: R, policy: PrecisionPolicy) -> Self {
        StreamingHull {
            refine,
            policy,
            stack: Vec::new(),
            ties: Vec::new(),
            certified_calls: 0,
        }
    }

    /// Number of orientation tests that needed ball arithmetic.
    pub fn certified_calls(&self) -> usize {
        self.certified_calls
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }

    /// Certified sign of the orientation of `(a, b, c)`.
    fn orientation(&mut self, a: &Node<K>, b: &Node<K>, c: &Node<K>) -> Result<SignDecision> {
        if let (Some(fa), Some(fb), Some(fc)) = (&a.approx, &b.approx, &c.approx) {
            if let Some(s) = float_orientation(fa, fb, fc) {
                return Ok(s);
            }
        }
        self.certified_calls += 1;
        let refine = &self.refine;
        self.policy.run(|prec| {
            let pa = refine.coords(&a.key, prec)?;
            let pb = refine.coords(&b.key, prec)?;
            let pc = refine.coords(&c.key, prec)?;
            let cross = cross_ball(&pa, &pb, &pc);
            match cross.sign() {
                SignDecision::Ambiguous => Err(cross.precision_error("hull orientation")),
                s => Ok(s),
            }
        })
    }

    pub fn push(&mut self, key: K, approx: Option<Approx>) -> Result<()> {
        self.push_node(Node { key, approx })
    }

    pub fn push_node(&mut self, c: Node<K>) -> Result<()> {
        while self.stack.len() >= 2 {
            let n = self.stack.len();
            let (a, b) = (self.stack[n - 2].clone(), self.stack[n - 1].clone());
            match self.orientation(&a, &b, &c)? {
                SignDecision::Positive => break,
                SignDecision::Negative => {
                    self.stack.pop();
                }
                SignDecision::Zero => {
                    let b = self.stack.pop().unwrap();
                    self.ties.push(b);
                }
                SignDecision::Ambiguous => unreachable!("orientation returns certified signs"),
            }
        }
        self.stack.push(c);
        Ok(())
    }

    /// Appends a hull built over a later, disjoint stretch of keys.
    pub fn absorb<R2>(&mut self, other: StreamingHull<K, R2>) -> Result<()> {
        self.ties.extend(other.ties);
        for node in other.stack {
            self.push_node(node)?;
        }
        Ok(())
    }

    /// Certified chord slopes between consecutive vertices.
    fn slopes(&self) -> Result<Vec<RealBall>> {
        let refine = &self.refine;
        let stack = &self.stack;
        self.policy.run(|prec| {
            let coords = stack
                .iter()
                .map(|v| refine.coords(&v.key, prec))
                .collect::<Result<Vec<_>>>()?;
            let slopes = coords
                .windows(2)
                .map(|w| w[1].1.sub(&w[0].1).div(&w[1].0.sub(&w[0].0)))
                .collect::<Result<Vec<_>>>()?;
            for w in slopes.windows(2) {
                match w[0].cmp_certified(&w[1]) {
                    Some(Ordering::Less) => {}
                    Some(_) => {
                        return Err(Error::Domain(format!(
                            "hull slopes not increasing: {} then {}",
                            w[0], w[1]
                        )))
                    }
                    None => return Err(w[1].precision_error("slope order")),
                }
            }
            Ok(slopes)
        })
    }

    pub fn finish(mut self) -> Result<Hull<K>> {
        let slopes = self.slopes()?;
        let ties = std::mem::take(&mut self.ties);
        let mut notes = Vec::new();
        for t in ties {
            let idx = self.stack.partition_point(|v| v.key < t.key);
            if idx == 0 || idx >= self.stack.len() || self.stack[idx].key == t.key {
                continue;
            }
            let (l, r) = (self.stack[idx - 1].clone(), self.stack[idx].clone());
            if self.orientation(&l, &t, &r)? == SignDecision::Zero {
                notes.push(CollinearNote {
                    key: t.key,
                    left: l.key,
                    right: r.key,
                });
            }
        }
        notes.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(Hull {
            vertices: self.stack,
            slopes,
            ties: notes,
        })
    }
}

/// A sample `(x, f(x))` with exact abscissa.
#[derive(Clone, Debug)]
pub struct EnvelopePoint {
    pub x: Rational,
    pub y: RealBall,
}

impl EnvelopePoint {
    pub fn new(x: impl Into<Rational>, y: RealBall) -> Self {
        EnvelopePoint { x: x.into(), y }
    }
}

/// Vertex indices, slopes and collinearity notes for a point sequence.
#[derive(Clone, Debug)]
pub struct EnvelopeResult {
    pub vertex_indices: Vec<usize>,
    pub slopes: Vec<RealBall>,
    pub tie_flags: Vec<CollinearNote<usize>>,
}

fn validate(points: &[EnvelopePoint]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::Input(format!(
            "envelope needs at least 2 points, got {}",
            points.len()
        )));
    }
    for (i, w) in points.windows(2).enumerate() {
        if w[0].x >= w[1].x {
            return Err(Error::Input(format!(
                "x not strictly increasing at index {}: {} then {}",
                i + 1,
                w[0].x,
                w[1].x
            )));
        }
    }
    Ok(())
}

/// Lower convex envelope using the stored `y` balls as given.
pub fn lower_envelope(points: &[EnvelopePoint]) -> Result<EnvelopeResult> {
    lower_envelope_with(points, None, &PrecisionPolicy::default())
}

/// Callback that re-evaluates `y` at index `i` at a higher precision.
pub type RefineY<'a> = &'a (dyn Fn(usize, u32) -> Result<RealBall> + Sync);

/// Lower convex envelope; ambiguous orientations call `refine_y`.
pub fn lower_envelope_with(
    points: &[EnvelopePoint],
    refine_y: Option<RefineY<'_>>,
    policy: &PrecisionPolicy,
) -> Result<EnvelopeResult> {
    validate(points)?;
    // Hulling x * lcm(denominators) keeps every abscissa an exact integer,
    // so exactly collinear triples certify as zero.
    let scale = points
        .iter()
        .fold(Integer::from(1), |l, p| l.lcm(p.x.denom()));
    let refine = |i: &usize, prec: u32| -> Result<(RealBall, RealBall)> {
        let p = &points[*i];
        let y = match refine_y {
            Some(f) if prec > p.y.prec() => f(*i, prec)?,
            _ => p.y.clone(),
        };
        let x = p.x.numer() * Integer::from(&scale / p.x.denom());
        Ok((RealBall::from_integer(&x, prec), y))
    };
    let mut hull = StreamingHull::new(refine, *policy);
    for i in 0..points.len() {
        hull.push(i, None)?;
    }
    let h = hull.finish()?;
    let slopes = h
        .slopes
        .iter()
        .map(|a| a.mul(&RealBall::from_integer(&scale, a.prec())))
        .collect();
    Ok(EnvelopeResult {
        vertex_indices: h.vertex_keys(),
        slopes,
        tie_flags: h.ties,
    })
}

/// Index minimizing `f(x) - a x`, and whether the minimum is shared.
pub fn minimizer_for_slope(points: &[EnvelopePoint], a: &RealBall) -> Result<(usize, bool)> {
    if points.is_empty() {
        return Err(Error::Input("no points".into()));
    }
    let value = |p: &EnvelopePoint| {
        let prec = p.y.prec().max(a.prec());
        p.y.sub(&a.mul(&RealBall::from_rational(&p.x, prec)))
    };
    let mut best = 0;
    let mut best_val = value(&points[0]);
    let mut tie = false;
    for (i, p) in points.iter().enumerate().skip(1) {
        let v = value(p);
        match v.cmp_certified(&best_val) {
            Some(Ordering::Less) => {
                best = i;
                best_val = v;
                tie = false;
            }
            Some(Ordering::Greater) => {}
            Some(Ordering::Equal) => tie = true,
            None => {
                return Err(v.precision_error(&format!(
                    "cannot order f(x) - a x at indices {best} and {i}"
                )))
            }
        }
    }
    Ok((best, tie))
}

fn exact_y(points: &[EnvelopePoint]) -> Option<Vec<Rational>> {
    points
        .iter()
        .map(|p| {
            if p.y.is_exact() {
                p.y.lower().to_rational()
            } else {
                None
            }
        })
        .collect()
}

/// Vertex test straight from the definition of H̃_f: `m` is a strict
/// minimizer of `f(x) - a x` for some `a` iff every chord slope into `m`
/// from the left is below every chord slope out of `m` to the right.
/// A point where the two meet exactly is a non-unique minimizer (tie).
///
/// Test oracle: `O(N²)`, exact rational arithmetic when every `y` is exact.
pub fn envelope_bruteforce(points: &[EnvelopePoint]) -> Result<EnvelopeResult> {
    validate(points)?;
    if points.len() > BRUTEFORCE_MAX_POINTS {
        return Err(Error::Resource(format!(
            "brute-force envelope limited to {BRUTEFORCE_MAX_POINTS} points"
        )));
    }
    let n = points.len();
    let mut vertices = Vec::new();
    let mut ties = Vec::new();
    match exact_y(points) {
        Some(ys) => {
            let slope = |i: usize, j: usize| -> Rational {
                Rational::from(&ys[j] - &ys[i]) / Rational::from(&points[j].x - &points[i].x)
            };
            for m in 0..n {
                let left = (0..m).map(|j| slope(j, m)).max();
                let right = (m + 1..n).map(|k| slope(m, k)).min();
                match (left, right) {
                    (Some(l), Some(r)) => match l.cmp(&r) {
                        Ordering::Less => vertices.push(m),
                        Ordering::Equal => ties.push(m),
                        Ordering::Greater => {}
                    },
                    _ => vertices.push(m),
                }
            }
        }
        None => {
            let prec = points.iter().map(|p| p.y.prec()).max().unwrap();
            let slope = |i: usize, j: usize| -> Result<RealBall> {
                let dx = RealBall::from_rational(&Rational::from(&points[j].x - &points[i].x), prec);
                points[j].y.sub(&points[i].y).div(&dx)
            };
            for m in 0..n {
                if m == 0 || m == n - 1 {
                    vertices.push(m);
                    continue;
                }
                let left = (0..m).map(|j| slope(j, m)).collect::<Result<Vec<_>>>()?;
                let right = (m + 1..n).map(|k| slope(m, k)).collect::<Result<Vec<_>>>()?;
                let max_hi = left.iter().map(|b| b.upper()).max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
                let min_lo = right.iter().map(|b| b.lower()).min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
                let max_lo = left.iter().map(|b| b.lower()).max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
                let min_hi = right.iter().map(|b| b.upper()).min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
                if max_hi < min_lo {
                    vertices.push(m);
                } else if max_lo > min_hi {
                    // certified non-vertex
                } else {
                    return Err(Error::Precision {
                        precision: prec,
                        detail: format!("brute-force envelope cannot classify index {m}"),
                    });
                }
            }
        }
    }
    let prec = points.iter().map(|p| p.y.prec()).max().unwrap();
    let slopes = vertices
        .windows(2)
        .map(|w| {
            let dx = RealBall::from_rational(&Rational::from(&points[w[1]].x - &points[w[0]].x), prec);
            points[w[1]].y.sub(&points[w[0]].y).div(&dx)
        })
        .collect::<Result<Vec<_>>>()?;
    let tie_flags = ties
        .into_iter()
        .map(|t| {
            let idx = vertices.partition_point(|&v| v < t);
            CollinearNote {
                key: t,
                left: vertices[idx - 1],
                right: vertices[idx],
            }
        })
        .collect();
    Ok(EnvelopeResult {
        vertex_indices: vertices,
        slopes,
        tie_flags,
    })
}

/// Parses an exact decimal (`-12.5`, `3e-2`), integer or fraction (`7/3`).
pub fn parse_exact(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if s.contains('/') {
        return Rational::parse(s).ok().map(Rational::from);
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut v = Rational::from(Integer::from_str_radix(if all.is_empty() { "0" } else { &all }, 10).ok()?);
    let shift = exp - frac_part.len() as i32;
    let scale = Integer::from(Integer::u_pow_u(10, shift.unsigned_abs()));
    if shift >= 0 {
        v *= scale;
    } else {
        v /= scale;
    }
    if neg {
        v = -v;
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rug::ops::Pow;

    fn pts(xy: &[(i64, i64)]) -> Vec<EnvelopePoint> {
        xy.iter()
            .map(|&(x, y)| EnvelopePoint::new(x, RealBall::from_i64(y, 128)))
            .collect()
    }

    #[test]
    fn parabola_all_vertices() {
        let p = pts(&[(1, 1), (2, 4), (3, 9), (4, 16), (5, 25)]);
        let r = lower_envelope(&p).unwrap();
        assert_eq!(r.vertex_indices, vec![0, 1, 2, 3, 4]);
        assert!(r.tie_flags.is_empty());
        let s: Vec<f64> = r.slopes.iter().map(|b| b.mid_f64()).collect();
        assert_eq!(s, vec![3.0, 5.0, 7.0, 9.0]);
    }

    #[test]
    fn collinear_on_thirds() {
        let p: Vec<EnvelopePoint> = (0i64..6)
            .map(|k| EnvelopePoint::new(Rational::from((k, 3)), RealBall::from_i64((k - 3).abs(), 128)))
            .collect();
        let r = lower_envelope(&p).unwrap();
        assert_eq!(r.vertex_indices, vec![0, 3, 5]);
        assert_eq!(r.tie_flags.len(), 3);
        assert!(r.slopes[0].contains_f64(-3.0) && r.slopes[1].contains_f64(3.0));
        assert_eq!(r.vertex_indices, envelope_bruteforce(&p).unwrap().vertex_indices);
    }

    #[test]
    fn abs_value_drops_collinear_points() {
        let p = pts(&[(1, 2), (2, 1), (3, 0), (4, 1), (5, 2)]);
        let r = lower_envelope(&p).unwrap();
        let xs: Vec<usize> = r.vertex_indices.iter().map(|&i| i + 1).collect();
        assert_eq!(xs, vec![1, 3, 5]);
        assert_eq!(
            r.tie_flags,
            vec![
                CollinearNote { key: 1, left: 0, right: 2 },
                CollinearNote { key: 3, left: 2, right: 4 }
            ]
        );
    }

    #[test]
    fn single_pair_and_validation() {
        let p = pts(&[(0, 5), (1, 7)]);
        assert_eq!(lower_envelope(&p).unwrap().vertex_indices, vec![0, 1]);
        assert_eq!(envelope_bruteforce(&p).unwrap().vertex_indices, vec![0, 1]);
        assert!(matches!(lower_envelope(&p[..1]), Err(Error::Input(_))));
        let bad = pts(&[(0, 1), (0, 2)]);
        assert!(matches!(lower_envelope(&bad), Err(Error::Input(_))));
    }

    #[test]
    fn minimizer_examples() {
        let p = pts(&[(1, 1), (2, 4), (3, 9), (4, 16), (5, 25)]);
        assert_eq!(minimizer_for_slope(&p, &RealBall::zero(128)).unwrap(), (0, false));
        let (i, tie) = minimizer_for_slope(&p, &RealBall::from_u64(7, 128)).unwrap();
        assert_eq!((i, tie), (2, true));
        let (i, tie) = minimizer_for_slope(&p, &RealBall::from_f64(6.5, 128)).unwrap();
        assert_eq!((i, tie), (2, false));
    }

    #[test]
    fn ambiguous_without_refinement_is_precision_error() {
        // Middle point sits exactly on the chord up to the ball radius.
        let p = vec![
            EnvelopePoint::new(0, RealBall::zero(128)),
            EnvelopePoint::new(1, RealBall::from_mid_rad(1.0, 1e-9, 128)),
            EnvelopePoint::new(2, RealBall::from_u64(2, 128)),
        ];
        assert!(lower_envelope(&p).unwrap_err().is_precision());
        let refine = |i: usize, prec: u32| Ok(RealBall::from_u64(i as u64, prec));
        let r = lower_envelope_with(&p, Some(&refine), &PrecisionPolicy::default()).unwrap();
        assert_eq!(r.vertex_indices, vec![0, 2]);
        assert_eq!(r.tie_flags.len(), 1);
    }

    #[test]
    fn refinement_resolves_near_collinear() {
        // y = ln-values whose chords differ by ~1e-45: needs > 128 bits.
        let third = Rational::from((1, 3));
        let eps = Rational::from((1, Integer::from(10).pow(45)));
        let ys = [Rational::from(0), third.clone() + eps, Rational::from((2, 3))];
        let p: Vec<EnvelopePoint> = ys
            .iter()
            .enumerate()
            .map(|(i, y)| EnvelopePoint::new(i as i64, RealBall::from_rational(y, 64)))
            .collect();
        let refine = |i: usize, prec: u32| Ok(RealBall::from_rational(&ys[i], prec));
        let r = lower_envelope_with(&p, Some(&refine), &PrecisionPolicy::new(64, 4096).unwrap()).unwrap();
        assert_eq!(r.vertex_indices, vec![0, 2]);
        assert!(r.tie_flags.is_empty());
    }

    #[test]
    fn parse_exact_forms() {
        assert_eq!(parse_exact("12").unwrap(), 12);
        assert_eq!(parse_exact("-2.5").unwrap(), Rational::from((-5, 2)));
        assert_eq!(parse_exact("7/3").unwrap(), Rational::from((7, 3)));
        assert_eq!(parse_exact("1.5e2").unwrap(), 150);
        assert_eq!(parse_exact("25e-1").unwrap(), Rational::from((5, 2)));
        assert_eq!(parse_exact(".5").unwrap(), Rational::from((1, 2)));
        assert!(parse_exact("abc").is_none());
        assert!(parse_exact("").is_none());
        assert!(parse_exact("1.2.3").is_none());
    }

    fn instance(xs_gaps: &[u8], ys: &[i8]) -> Vec<EnvelopePoint> {
        let mut x = 0i64;
        xs_gaps
            .iter()
            .zip(ys)
            .map(|(&g, &y)| {
                x += 1 + g as i64 % 4;
                EnvelopePoint::new(x, RealBall::from_i64(y as i64 % 12, 128))
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn streaming_matches_definition(
            data in (2usize..60).prop_flat_map(|n| (
                proptest::collection::vec(any::<u8>(), n),
                proptest::collection::vec(any::<i8>(), n),
            ))
        ) {
            let p = instance(&data.0, &data.1);
            let a = lower_envelope(&p).unwrap();
            let b = envelope_bruteforce(&p).unwrap();
            prop_assert_eq!(&a.vertex_indices, &b.vertex_indices);
            prop_assert_eq!(&a.tie_flags, &b.tie_flags);
        }

        #[test]
        fn envelope_dominance_and_slopes(
            data in (2usize..60).prop_flat_map(|n| (
                proptest::collection::vec(any::<u8>(), n),
                proptest::collection::vec(any::<i8>(), n),
            ))
        ) {
            let p = instance(&data.0, &data.1);
            let r = lower_envelope(&p).unwrap();
            prop_assert_eq!(r.vertex_indices[0], 0);
            prop_assert_eq!(*r.vertex_indices.last().unwrap(), p.len() - 1);
            for w in r.slopes.windows(2) {
                prop_assert_eq!(w[0].cmp_certified(&w[1]), Some(Ordering::Less));
            }
            for (i, pt) in p.iter().enumerate() {
                let k = r.vertex_indices.partition_point(|&v| v < i);
                if k < r.vertex_indices.len() && r.vertex_indices[k] == i {
                    continue;
                }
                let (l, rr) = (&p[r.vertex_indices[k - 1]], &p[r.vertex_indices[k]]);
                let chord = l.y.add(&r.slopes[k - 1].mul(&RealBall::from_rational(&Rational::from(&pt.x - &l.x), 128)));
                prop_assert!(pt.y.cmp_certified(&chord) != Some(Ordering::Less));
                let _ = rr;
            }
        }

        #[test]
        fn scale_equivariance(
            data in (2usize..40).prop_flat_map(|n| (
                proptest::collection::vec(any::<u8>(), n),
                proptest::collection::vec(any::<i8>(), n),
            )),
            c in 1i64..50,
        ) {
            let p = instance(&data.0, &data.1);
            let q: Vec<EnvelopePoint> = p
                .iter()
                .map(|pt| EnvelopePoint::new(pt.x.clone(), pt.y.mul(&RealBall::from_i64(c, 128))))
                .collect();
            let a = lower_envelope(&p).unwrap();
            let b = lower_envelope(&q).unwrap();
            prop_assert_eq!(&a.vertex_indices, &b.vertex_indices);
            for (sa, sb) in a.slopes.iter().zip(&b.slopes) {
                let scaled = sa.mul(&RealBall::from_i64(c, 128));
                prop_assert!(scaled.overlaps(sb));
            }
        }

        #[test]
        fn chunked_merge_is_associative(
            data in (4usize..80).prop_flat_map(|n| (
                proptest::collection::vec(any::<u8>(), n),
                proptest::collection::vec(any::<i8>(), n),
                1usize..n,
            ))
        ) {
            let p = instance(&data.0, &data.1);
            let refine = |i: &usize, prec: u32| Ok((RealBall::from_rational(&p[*i].x, prec), p[*i].y.clone()));
            let policy = PrecisionPolicy::default();
            let split = data.2;
            let mut left = StreamingHull::new(&refine, policy);
            for i in 0..split { left.push(i, None).unwrap(); }
            let mut right = StreamingHull::new(&refine, policy);
            for i in split..p.len() { right.push(i, None).unwrap(); }
            left.absorb(right).unwrap();
            let merged = left.finish().unwrap();
            let direct = lower_envelope(&p).unwrap();
            prop_assert_eq!(merged.vertex_keys(), direct.vertex_indices);
            prop_assert_eq!(merged.ties, direct.tie_flags);
        }

        #[test]
        fn float_filter_agrees_with_balls(
            ys in proptest::collection::vec(-1.0e6f64..1.0e6, 3..50)
        ) {
            let p: Vec<EnvelopePoint> = ys
                .iter()
                .enumerate()
                .map(|(i, &y)| EnvelopePoint::new(i as i64, RealBall::from_f64(y, 128)))
                .collect();
            let refine = |i: &usize, prec: u32| Ok((RealBall::from_u64(*i as u64, prec), RealBall::from_f64(ys[*i], prec)));
            let mut h = StreamingHull::new(refine, PrecisionPolicy::default());
            for (i, &y) in ys.iter().enumerate() {
                h.push(i, Some(Approx { x: i as f64, y, x_scale: i as f64, y_scale: y.abs() })).unwrap();
            }
            let fast = h.finish().unwrap();
            let exact = envelope_bruteforce(&p).unwrap();
            prop_assert_eq!(fast.vertex_keys(), exact.vertex_indices);
        }
    }
}
