//! Recording CSV files.
//!
//! Raw: header `t_ms,lx,ly,rx,ry,valid`, pixel coordinates, an empty pair of
//! cells for a missing eye, `valid` as `1`/`0` (or `true`/`false`).
//! Canonical: header `x_deg,y_deg`, one row per 60 Hz sample.
//!
//! Every data row is either parsed or reported with its line number; a file
//! with any rejected row is not used.

use std::fmt::Write as _;

use obf_core::RawSample;

pub const RAW_HEADER: [&str; 6] = ["t_ms", "lx", "ly", "rx", "ry", "valid"];
pub const CANONICAL_HEADER: [&str; 2] = ["x_deg", "y_deg"];

#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    /// 1-based line in the file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub rows: Vec<T>,
    /// Data rows in the file (header excluded).
    pub total_rows: usize,
    pub issues: Vec<RowIssue>,
}

impl<T> Parsed<T> {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Reads the header and calls `row` on each data record; header problems
/// are reported as an issue on line 1.
fn parse_records<T>(
    text: &str,
    header: &[&str],
    mut row: impl FnMut(&csv::StringRecord) -> Result<T, String>,
) -> Parsed<T> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Parsed {
        rows: Vec::new(),
        total_rows: 0,
        issues: Vec::new(),
    };
    let mut records = reader.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(header.iter().copied()) => {}
        Some(Ok(h)) => out.issues.push(RowIssue {
            line: 1,
            message: format!(
                "expected header `{}`, got `{}`",
                header.join(","),
                h.iter().collect::<Vec<_>>().join(",")
            ),
        }),
        Some(Err(e)) => out.issues.push(RowIssue {
            line: 1,
            message: e.to_string(),
        }),
        None => out.issues.push(RowIssue {
            line: 1,
            message: "empty file".into(),
        }),
    }
    for rec in records {
        out.total_rows += 1;
        let result = rec.map_err(|e| e.to_string()).and_then(|r| {
            if r.len() != header.len() {
                Err(format!("expected {} fields, got {}", header.len(), r.len()))
            } else {
                row(&r)
            }
        });
        match result {
            Ok(v) => out.rows.push(v),
            // header is line 1, so data row n sits on line n + 1
            Err(message) => out.issues.push(RowIssue {
                line: out.total_rows + 1,
                message,
            }),
        }
    }
    out
}

fn number(field: &str, name: &str) -> Result<f64, String> {
    let v: f64 = field
        .parse()
        .map_err(|_| format!("`{name}` is not a number: `{field}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{name}` is not finite"))
    }
}

fn eye(x: &str, y: &str, side: &str) -> Result<Option<[f64; 2]>, String> {
    match (x.is_empty(), y.is_empty()) {
        (true, true) => Ok(None),
        (false, false) => Ok(Some([
            number(x, &format!("{side}x"))?,
            number(y, &format!("{side}y"))?,
        ])),
        _ => Err(format!("{side} eye has only one coordinate")),
    }
}

pub fn parse_raw(text: &str) -> Parsed<RawSample> {
    let mut last_t = f64::NEG_INFINITY;
    parse_records(text, &RAW_HEADER, |r| {
        let t_ms = number(&r[0], "t_ms")?;
        if t_ms <= last_t {
            return Err(format!(
                "timestamp {t_ms} does not increase (previous {last_t})"
            ));
        }
        let valid = match &r[5] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(format!("`valid` must be 0 or 1, got `{other}`")),
        };
        let s = RawSample {
            t_ms,
            left: eye(&r[1], &r[2], "l")?,
            right: eye(&r[3], &r[4], "r")?,
            valid,
        };
        last_t = t_ms;
        Ok(s)
    })
}

pub fn parse_canonical(text: &str) -> Parsed<[f64; 2]> {
    parse_records(text, &CANONICAL_HEADER, |r| {
        Ok([number(&r[0], "x_deg")?, number(&r[1], "y_deg")?])
    })
}

fn cell(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        write!(out, "{v}").unwrap();
    }
}

pub fn write_raw(samples: &[RawSample]) -> String {
    let mut out = RAW_HEADER.join(",");
    out.push('\n');
    for s in samples {
        write!(out, "{},", s.t_ms).unwrap();
        for e in [s.left, s.right] {
            cell(&mut out, e.map(|p| p[0]));
            out.push(',');
            cell(&mut out, e.map(|p| p[1]));
            out.push(',');
        }
        out.push_str(if s.valid { "1\n" } else { "0\n" });
    }
    out
}

/// Shortest round-trip formatting, so parse(write(x)) == x bitwise.
pub fn write_canonical(points: &[[f64; 2]]) -> String {
    let mut out = CANONICAL_HEADER.join(",");
    out.push('\n');
    for p in points {
        writeln!(out, "{},{}", p[0], p[1]).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_rows_round_trip() {
        let samples = vec![
            RawSample {
                t_ms: 0.0,
                left: Some([10.5, 20.0]),
                right: None,
                valid: true,
            },
            RawSample {
                t_ms: 2.0,
                left: None,
                right: None,
                valid: false,
            },
        ];
        let parsed = parse_raw(&write_raw(&samples));
        assert!(parsed.is_clean(), "{:?}", parsed.issues);
        assert_eq!(parsed.rows, samples);
    }

    #[test]
    fn every_row_is_parsed_or_reported() {
        let text = "t_ms,lx,ly,rx,ry,valid\n0,1,1,,,1\n2,x,1,,,1\n1,1,1,,,1\n4,1,,,,1\n5,1,1\n6,1,1,2,2,2\n8,1,1,2,2,0\n";
        let p = parse_raw(text);
        assert_eq!(p.total_rows, 7);
        assert_eq!(p.rows.len() + p.issues.len(), p.total_rows);
        let lines: Vec<usize> = p.issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![3, 5, 6, 7]);
        // line 4 (t = 1) still increases past the last accepted row
        assert_eq!(p.rows.len(), 3);
    }

    #[test]
    fn non_monotone_timestamp_is_reported() {
        let p = parse_raw("t_ms,lx,ly,rx,ry,valid\n0,1,1,,,1\n0,1,1,,,1\n");
        assert_eq!(p.issues.len(), 1);
        assert_eq!(p.issues[0].line, 3);
        assert!(p.issues[0].message.contains("does not increase"));
    }

    #[test]
    fn wrong_header_is_reported() {
        let p = parse_canonical("x,y\n1,2\n");
        assert_eq!(p.issues[0].line, 1);
        assert_eq!(p.rows.len(), 1);
    }

    #[test]
    fn canonical_round_trips_bitwise() {
        let pts = vec![[0.1 + 0.2, -180.0], [1e-17, std::f64::consts::PI]];
        let p = parse_canonical(&write_canonical(&pts));
        assert!(p.is_clean());
        assert_eq!(p.rows, pts);
    }
}
