use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use abundanza::arithmetic::{sigma_u64, Factorization};
use abundanza::criticals::{sa_enumerate, CaEnumerator, CaRecord};
use abundanza::envelope::{lower_envelope, parse_exact};
use abundanza::ha::{figure_data, ha_numbers, t_statistic, HaReport};
use abundanza::verifiers::{verify_range, Criterion, RecordMode, VerificationRecord};
use abundanza::RealBall;

use crate::output::{ball_json, csv_writer, mid, open, rad, write_json, CliError, CliResult, Format};
use crate::points::read_points;
use crate::{RunConfig, VerifyArgs};

/// Largest Robin violation; everything above it must satisfy (R).
const LAST_ROBIN_VIOLATION: u64 = 5040;

fn factors_json(f: &Factorization) -> Value {
    Value::Array(f.factors().iter().map(|&(p, e)| json!([p, e])).collect())
}

fn opt_ball_cells(b: Option<&RealBall>) -> [String; 2] {
    match b {
        Some(b) => [mid(b), rad(b)],
        None => [String::new(), String::new()],
    }
}

fn t_of(rec: &CaRecord, prec: u32) -> CliResult<Option<RealBall>> {
    if rec.index == 1 {
        return Ok(None);
    }
    Ok(Some(t_statistic(&rec.n, prec)?))
}

pub fn ca_list(cfg: &RunConfig, count: usize) -> CliResult<()> {
    if count == 0 {
        return Err(CliError::Input("--count must be >= 1".into()));
    }
    let policy = cfg.policy()?;
    let mut out = open(cfg.output.as_deref(), false)?;
    let mut e = CaEnumerator::new(policy, cfg.allow_ties);
    match cfg.format {
        Format::Csv => {
            let mut w = csv_writer(&mut out);
            w.write_record([
                "index", "n", "factorization", "eps_lower_mid", "eps_lower_rad", "eps_upper_mid",
                "eps_upper_rad", "quotient", "tie", "t_mid", "t_rad",
            ])?;
            for _ in 0..count {
                let r = e.next_record()?;
                let t = t_of(&r, policy.start)?;
                let (lo, hi) = (&r.epsilon_interval.0.value, &r.epsilon_interval.1.value);
                let [t_mid, t_rad] = opt_ball_cells(t.as_ref());
                w.write_record([
                    r.index.to_string(),
                    r.n.value().to_string(),
                    r.n.to_string(),
                    mid(lo),
                    rad(lo),
                    mid(hi),
                    rad(hi),
                    r.quotient_from_previous.to_string(),
                    r.tie.to_string(),
                    t_mid,
                    t_rad,
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut rows = Vec::with_capacity(count);
            for _ in 0..count {
                let r = e.next_record()?;
                let t = t_of(&r, policy.start)?;
                let (lo, hi) = &r.epsilon_interval;
                rows.push(json!({
                    "index": r.index,
                    "n": r.n.value().to_string(),
                    "factorization": factors_json(&r.n),
                    "epsilon_interval": {
                        "lower": ball_json(&lo.value),
                        "lower_critical": [lo.p, lo.k],
                        "upper": ball_json(&hi.value),
                        "upper_critical": [hi.p, hi.k],
                    },
                    "quotient": factors_json(&r.quotient_from_previous),
                    "tie": r.tie,
                    "t": t.as_ref().map(ball_json),
                }));
            }
            write_json(&mut out, &Value::Array(rows))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn sa_list(cfg: &RunConfig, limit: u64) -> CliResult<()> {
    let sa = sa_enumerate(limit, cfg.sieve_budget)?;
    let mut out = open(cfg.output.as_deref(), false)?;
    let rows = sa.iter().enumerate().map(|(i, &n)| {
        let s = sigma_u64(n);
        let q = rug::Rational::from((s, n));
        (i + 1, n, s, q)
    });
    match cfg.format {
        Format::Csv => {
            let mut w = csv_writer(&mut out);
            w.write_record(["index", "n", "sigma", "abundancy"])?;
            for (i, n, s, q) in rows {
                w.write_record([i.to_string(), n.to_string(), s.to_string(), q.to_string()])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let v: Vec<Value> = rows
                .map(|(i, n, s, q)| {
                    json!({ "index": i, "n": n.to_string(), "sigma": s.to_string(), "abundancy": q.to_string() })
                })
                .collect();
            write_json(&mut out, &Value::Array(v))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Row `i` carries `m_i`, `R_s(m_i)` and the slope `a_i` on `[m_{i-1}, m_i]`.
fn ha_rows(r: &HaReport) -> Vec<[String; 7]> {
    r.ha_numbers
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let v = &r.values[i];
            let (sm, sr, ss) = match i {
                0 => (String::new(), String::new(), String::new()),
                _ => (
                    mid(&r.slopes[i - 1]),
                    rad(&r.slopes[i - 1]),
                    r.slope_signs[i - 1].as_str().to_string(),
                ),
            };
            [i.to_string(), n.to_string(), mid(v), rad(v), sm, sr, ss]
        })
        .collect()
}

const HA_HEADER: [&str; 7] = [
    "index",
    "n",
    "R_s_midpoint",
    "R_s_radius",
    "slope_midpoint",
    "slope_radius",
    "slope_sign",
];

fn ha_summary(r: &HaReport) -> String {
    let mut s = format!(
        "{} HA numbers on {}..={} (s = {}); envelope minimum at {}",
        r.ha_numbers.len(),
        r.lo,
        r.hi,
        r.s,
        r.envelope_minimizer()
    );
    if r.sign_split > 0 && r.sign_split < r.slopes.len() {
        s += &format!("; slopes a_1..a_{} < 0 < a_{}..", r.sign_split, r.sign_split + 1);
    }
    s
}

pub fn ha_compute(
    cfg: &RunConfig,
    lo: u64,
    hi: u64,
    s: &str,
    figure: bool,
    figure_output: Option<&Path>,
) -> CliResult<()> {
    let s = parse_exact(s).ok_or_else(|| CliError::Input(format!("cannot parse --s {s:?}")))?;
    let opts = cfg.scan_options()?;
    let (report, fig) = if figure {
        let f = figure_data(lo, hi, &s, &opts)?;
        (f.report.clone(), Some(f))
    } else {
        (ha_numbers(lo, hi, &s, &opts)?, None)
    };
    eprintln!("{}", ha_summary(&report));
    for t in &report.ties {
        eprintln!("note: {} lies on the chord {}..{}", t.key, t.left, t.right);
    }
    let mut out = open(cfg.output.as_deref(), false)?;
    match cfg.format {
        Format::Csv => {
            {
                let mut w = csv_writer(&mut out);
                w.write_record(HA_HEADER)?;
                for row in ha_rows(&report) {
                    w.write_record(row)?;
                }
                w.flush()?;
            }
            if let Some(f) = &fig {
                let mut sep;
                let target: &mut dyn Write = match figure_output {
                    Some(p) => {
                        sep = open(Some(p), false)?;
                        &mut sep
                    }
                    None => {
                        writeln!(out)?;
                        &mut out
                    }
                };
                let mut w = csv_writer(target);
                w.write_record(["n", "R_s_midpoint", "R_s_radius", "is_vertex", "envelope_midpoint"])?;
                for (n, y) in &f.points {
                    let env = f.envelope_at(*n).map(|v| format!("{v:.15e}")).unwrap_or_default();
                    w.write_record([
                        n.to_string(),
                        mid(y),
                        rad(y),
                        (f.is_vertex(*n) as u8).to_string(),
                        env,
                    ])?;
                }
                w.flush()?;
            }
        }
        Format::Json => {
            let rows: Vec<Value> = ha_rows(&report)
                .into_iter()
                .map(|r| Value::Object(HA_HEADER.iter().map(|h| h.to_string()).zip(r.map(Value::String)).collect()))
                .collect();
            let mut v = json!({
                "domain": [report.lo.to_string(), report.hi.to_string()],
                "s": report.s.to_string(),
                "ha_numbers": report.ha_numbers.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
                "sign_split": report.sign_split,
                "envelope_minimizer": report.envelope_minimizer().to_string(),
                "rows": rows,
                "collinear": report.ties.iter().map(|t| json!({
                    "n": t.key.to_string(), "left": t.left.to_string(), "right": t.right.to_string()
                })).collect::<Vec<_>>(),
            });
            if let Some(f) = &fig {
                v["figure"] = json!({
                    "points": f.points.iter().map(|(n, y)| json!({
                        "n": n.to_string(),
                        "R_s": ball_json(y),
                        "is_vertex": f.is_vertex(*n),
                        "envelope_midpoint": f.envelope_at(*n),
                    })).collect::<Vec<_>>(),
                    "segments": f.segments().iter().map(|(a, b)| json!([a.to_string(), b.to_string()])).collect::<Vec<_>>(),
                });
            }
            write_json(&mut out, &v)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_frontier(path: &Path) -> CliResult<Option<u64>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(CliError::Io(format!("{}: {e}", path.display()))),
    };
    let v = text
        .trim()
        .strip_prefix("last_certified=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Input(format!("{}: expected last_certified=<n>", path.display())))?;
    Ok(Some(v))
}

fn write_frontier(path: &Path, n: u64) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        writeln!(f, "last_certified={n}")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

const VERIFY_HEADER: [&str; 9] = [
    "n", "sigma", "r0_mid", "r0_rad", "g_mid", "g_rad", "l0_mid", "l0_rad", "verdicts",
];

fn verdict_flags(r: &VerificationRecord) -> String {
    r.verdicts
        .iter()
        .map(|(k, s)| format!("{k}={}", s.as_str()))
        .collect::<Vec<_>>()
        .join(";")
}

fn record_row(r: &VerificationRecord) -> [String; 9] {
    let [l0m, l0r] = opt_ball_cells(r.lagarias.as_ref());
    [
        r.n.to_string(),
        r.sigma.to_string(),
        mid(&r.robin_deficit),
        rad(&r.robin_deficit),
        mid(&r.gronwall),
        rad(&r.gronwall),
        l0m,
        l0r,
        verdict_flags(r),
    ]
}

fn record_json(r: &VerificationRecord) -> Value {
    json!({
        "n": r.n.to_string(),
        "sigma": r.sigma.to_string(),
        "robin_deficit": ball_json(&r.robin_deficit),
        "gronwall": ball_json(&r.gronwall),
        "lagarias": r.lagarias.as_ref().map(ball_json),
        "verdicts": r.verdicts.iter().map(|(k, s)| (k.to_string(), Value::String(s.as_str().into()))).collect::<serde_json::Map<_, _>>(),
    })
}

fn expected_violation(c: Criterion, n: u64) -> bool {
    c == Criterion::Robin && n <= LAST_ROBIN_VIOLATION
}

pub fn verify(cfg: &RunConfig, args: &VerifyArgs) -> CliResult<()> {
    let criterion: Criterion = args.which.into();
    let opts = cfg.scan_options()?;
    let mut lo = args.lo;
    let mut resumed = false;
    if let Some(p) = &args.frontier {
        if let Some(last) = read_frontier(p)? {
            if last >= args.hi {
                eprintln!("{criterion}: already certified through {last}");
                return Ok(());
            }
            if last >= lo {
                lo = last + 1;
                resumed = true;
            }
        }
    }
    let appending = resumed && cfg.output.is_some() && cfg.format == Format::Csv;
    let mut out = open(cfg.output.as_deref(), appending)?;
    let mode = if args.all_records {
        RecordMode::All
    } else {
        RecordMode::Violations
    };
    let mut json_records = Vec::new();
    let summary = {
        let mut w = csv_writer(&mut out);
        if cfg.format == Format::Csv && !appending {
            w.write_record(VERIFY_HEADER)?;
        }
        let mut sink_err = None;
        let res = verify_range(criterion, lo, args.hi, &opts, mode, |block| {
            let mut step = || -> CliResult<()> {
                match cfg.format {
                    Format::Csv => {
                        for r in &block.records {
                            w.write_record(record_row(r))?;
                        }
                        w.flush()?;
                    }
                    Format::Json => json_records.extend(block.records.iter().map(record_json)),
                }
                if let Some(p) = &args.frontier {
                    write_frontier(p, block.frontier)?;
                }
                Ok(())
            };
            step().map_err(|e| {
                let msg = e.to_string();
                sink_err = Some(e);
                abundanza::Error::Input(msg)
            })
        });
        match (res, sink_err) {
            (_, Some(e)) => return Err(e),
            (r, None) => r?,
        }
    };
    let unexpected: Vec<u64> = summary
        .violations
        .iter()
        .copied()
        .filter(|&n| !expected_violation(criterion, n))
        .collect();
    if cfg.format == Format::Json {
        write_json(
            &mut out,
            &json!({
                "criterion": criterion.name(),
                "lo": lo.to_string(),
                "hi": args.hi.to_string(),
                "checked": summary.checked,
                "certified_with_balls": summary.certified_with_balls,
                "violations": summary.violations.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
                "unexpected_violations": unexpected.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
                "records": json_records,
            }),
        )?;
    }
    out.flush()?;
    eprintln!(
        "{criterion} {lo}..={}: checked {}, ball-certified {}, violations {}",
        args.hi,
        summary.checked,
        summary.certified_with_balls,
        summary.violations.len()
    );
    if unexpected.is_empty() {
        Ok(())
    } else {
        let shown: Vec<String> = unexpected.iter().take(20).map(|n| n.to_string()).collect();
        Err(CliError::Violations(format!(
            "{criterion} fails at {} value(s) of n: {}{}",
            unexpected.len(),
            shown.join(", "),
            if unexpected.len() > 20 { ", ..." } else { "" }
        )))
    }
}

pub fn envelope(cfg: &RunConfig, input: &Path) -> CliResult<()> {
    let f = File::open(input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let policy = cfg.policy()?;
    let points = read_points(f, policy.start)?;
    let r = lower_envelope(&points)?;
    for t in &r.tie_flags {
        eprintln!("note: point {} lies on the chord {}..{}", t.key, t.left, t.right);
    }
    let rows: Vec<[String; 8]> = r
        .vertex_indices
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let p = &points[i];
            let (sm, sr, ss) = match k {
                0 => (String::new(), String::new(), String::new()),
                _ => {
                    let s = &r.slopes[k - 1];
                    (mid(s), rad(s), s.sign().as_str().to_string())
                }
            };
            [k.to_string(), i.to_string(), p.x.to_string(), mid(&p.y), rad(&p.y), sm, sr, ss]
        })
        .collect();
    let header = [
        "vertex", "input_index", "x", "y_midpoint", "y_radius", "slope_midpoint", "slope_radius", "slope_sign",
    ];
    let mut out = open(cfg.output.as_deref(), false)?;
    match cfg.format {
        Format::Csv => {
            let mut w = csv_writer(&mut out);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let v = json!({
                "vertices": rows.into_iter().map(|r| Value::Object(
                    header.iter().map(|h| h.to_string()).zip(r.map(Value::String)).collect()
                )).collect::<Vec<_>>(),
                "collinear": r.tie_flags.iter().map(|t| json!({
                    "index": t.key, "left": t.left, "right": t.right
                })).collect::<Vec<_>>(),
            });
            write_json(&mut out, &v)?;
        }
    }
    out.flush()?;
    Ok(())
}
