//! Sweep CSV: writing, and reading back for contouring.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use ilc_core::sweep::{PointFlags, PointReport, TriState};
use ilc_core::ABPoint;

pub const HEADER: [&str; 13] = [
    "A",
    "B",
    "sup_T",
    "sigma_sq",
    "rho",
    "mc_z",
    "mc_sigma",
    "ac_rho",
    "mc_iter",
    "ac_iter",
    "mc_analytic",
    "ac_analytic",
    "flags",
];

/// Shortest round-trip decimal, or empty.
pub fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

fn record(r: &PointReport) -> [String; 13] {
    let t = |s: TriState| s.token().to_string();
    [
        format!("{}", r.point.a_gain),
        format!("{}", r.point.b_pole),
        num(r.sup_t),
        num(r.sigma_sq),
        num(r.rho),
        t(r.mc_z),
        t(r.mc_sigma),
        t(r.ac_rho),
        t(r.mc_iter),
        t(r.ac_iter),
        t(r.mc_analytic),
        t(r.ac_analytic),
        r.flags.to_string(),
    ]
}

pub fn write_reports<W: Write>(out: W, reports: &[PointReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in reports {
        w.write_record(record(r))?;
    }
    w.flush()?;
    Ok(())
}

fn opt_num(s: &str, col: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .with_context(|| format!("line {line}: bad {col} value `{s}`"))
}

/// Reads a sweep CSV. Grid indices are recovered from the sorted distinct
/// `A` and `B` values.
pub fn read_reports<R: Read>(input: R) -> Result<Vec<PointReport>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER) {
        bail!("unexpected CSV header `{}`", header.iter().collect::<Vec<_>>().join(","));
    }
    let mut reports = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let tri = |i: usize| TriState::from_token(f(i)).with_context(|| format!("line {line}: column {}", HEADER[i]));
        let a = opt_num(f(0), "A", line)?.with_context(|| format!("line {line}: missing A"))?;
        let b = opt_num(f(1), "B", line)?.with_context(|| format!("line {line}: missing B"))?;
        reports.push(PointReport {
            point: ABPoint::new(a, b),
            sup_t: opt_num(f(2), "sup_T", line)?,
            sigma_sq: opt_num(f(3), "sigma_sq", line)?,
            rho: opt_num(f(4), "rho", line)?,
            mc_z: tri(5)?,
            mc_sigma: tri(6)?,
            ac_rho: tri(7)?,
            mc_iter: tri(8)?,
            ac_iter: tri(9)?,
            mc_analytic: tri(10)?,
            ac_analytic: tri(11)?,
            flags: f(12)
                .parse::<PointFlags>()
                .with_context(|| format!("line {line}: flags"))?,
            ..PointReport::default()
        });
    }
    let axis = |get: fn(&PointReport) -> f64| {
        let mut v: Vec<f64> = reports.iter().map(get).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let a_vals = axis(|r| r.point.a_gain);
    let b_vals = axis(|r| r.point.b_pole);
    let locate = |vals: &[f64], x: f64| vals.binary_search_by(|v| v.total_cmp(&x)).expect("value is present");
    for r in &mut reports {
        r.index = (locate(&a_vals, r.point.a_gain), locate(&b_vals, r.point.b_pole));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ilc_core::sweep::Method;

    #[test]
    fn round_trip() {
        let reports = vec![
            PointReport {
                point: ABPoint::new(0.1, -0.30000000000000004),
                index: (0, 0),
                sup_t: Some(0.95),
                rho: Some(1.0000000000000002),
                mc_z: TriState::True,
                ac_rho: TriState::Marginal,
                flags: PointFlags {
                    slow_converging: true,
                    failed: vec![Method::Sigma],
                    ..PointFlags::default()
                },
                ..PointReport::default()
            },
            PointReport {
                point: ABPoint::new(0.1, 0.5),
                index: (0, 1),
                mc_iter: TriState::False,
                ..PointReport::default()
            },
        ];
        let mut buf = Vec::new();
        write_reports(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("A,B,sup_T,sigma_sq,rho,mc_z,mc_sigma,ac_rho,mc_iter,ac_iter,mc_analytic,ac_analytic,flags\n"));
        assert!(text.contains("0.1,-0.30000000000000004,0.95,,1.0000000000000002,1,,m,,,,,slow-converging;failed-sigma\n"));
        assert_eq!(read_reports(buf.as_slice()).unwrap(), reports);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_reports("x,y\n1,2\n".as_bytes()).is_err());
    }
}
