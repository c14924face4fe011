//! Reader for envelope input: `x,y_midpoint[,y_radius]` per line, with an
//! optional header line.

use std::io::Read;

use rug::Rational;

use abundanza::envelope::{parse_exact, EnvelopePoint};
use abundanza::RealBall;

use crate::output::{CliError, CliResult};

fn field(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> CliResult<Option<Rational>> {
    match rec.get(i) {
        None => Ok(None),
        Some(s) => parse_exact(s)
            .map(Some)
            .ok_or_else(|| CliError::Input(format!("line {line}: cannot parse {name} {s:?}"))),
    }
}

pub fn read_points(input: impl Read, prec: u32) -> CliResult<Vec<EnvelopePoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && rec.get(0).is_some_and(|s| parse_exact(s).is_none()) {
            continue;
        }
        if !(2..=3).contains(&rec.len()) {
            return Err(CliError::Input(format!(
                "line {line}: expected x,y_midpoint[,y_radius], got {} fields",
                rec.len()
            )));
        }
        let x = field(&rec, 0, "x", line)?.unwrap();
        let y = field(&rec, 1, "y_midpoint", line)?.unwrap();
        let r = field(&rec, 2, "y_radius", line)?.unwrap_or_default();
        if r < 0 {
            return Err(CliError::Input(format!("line {line}: negative y_radius")));
        }
        let lo = RealBall::from_rational(&Rational::from(&y - &r), prec);
        let hi = RealBall::from_rational(&Rational::from(&y + &r), prec);
        if let Some(prev) = points.last().map(|p: &EnvelopePoint| p.x.clone()) {
            if x <= prev {
                return Err(CliError::Input(format!(
                    "line {line}: x must be strictly increasing ({x} after {prev})"
                )));
            }
        }
        points.push(EnvelopePoint::new(x, RealBall::hull(&lo, &hi)));
    }
    if points.len() < 2 {
        return Err(CliError::Input("envelope input needs at least 2 points".into()));
    }
    Ok(points)
}
