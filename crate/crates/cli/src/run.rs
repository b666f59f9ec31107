//! The streaming driver: read ticks, evaluate, write rows.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use execflow::Error;

use crate::config::{RegressionPolicy, RunConfig};
use crate::error::CliError;
use crate::input::{open_input, parse_tick, LineError};
use crate::pipeline::{Pipeline, Row};

/// Individual warnings printed before only the totals are reported.
const WARN_LIMIT: u64 = 20;

/// Counts from a completed run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub rows: u64,
    pub malformed: u64,
    pub regressions: u64,
}

/// Formats a value with 17 significant digits, or `nan`.
pub fn format_value(v: f64, buf: &mut String) {
    if v.is_finite() {
        write!(buf, "{v:.16e}").expect("write to String");
    } else {
        buf.push_str("nan");
    }
}

pub fn format_row(row: &Row, buf: &mut String) {
    buf.clear();
    write!(buf, "{}", row.t).expect("write to String");
    for &v in &row.values {
        buf.push('\t');
        format_value(v, buf);
    }
    buf.push('\n');
}

fn create_output(path: &Path) -> Result<Box<dyn Write>, CliError> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdout().lock()));
    }
    let f = File::create(path).map_err(CliError::io(format!("creating {}", path.display())))?;
    Ok(Box::new(f))
}

/// Runs the configured input to the configured output, warnings to stderr.
pub fn run_stream(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let input = open_input(&cfg.input)?;
    let output = create_output(&cfg.output)?;
    run_with(cfg, input, output, &mut io::stderr().lock())
}

/// [`run_stream`] over explicit streams.
pub fn run_with<R: BufRead, W: Write, D: Write>(
    cfg: &RunConfig,
    mut input: R,
    output: W,
    diag: &mut D,
) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let write_err = CliError::io(format!("writing {}", cfg.output.display()));
    let mut out = BufWriter::new(output);
    let mut pipeline = Pipeline::new(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut summary = RunSummary::default();

    let result = (|| {
        writeln!(out, "{}", pipeline.columns().join("\t"))?;
        let mut raw = Vec::new();
        let mut text = String::new();
        let mut line_no = 0u64;
        loop {
            raw.clear();
            if input.read_until(b'\n', &mut raw)? == 0 {
                break;
            }
            line_no += 1;
            let tick = match std::str::from_utf8(&raw) {
                Ok(s) => {
                    let s = s.trim_end_matches(['\n', '\r']);
                    if s.trim().is_empty() {
                        continue;
                    }
                    parse_tick(s, &cfg.columns)
                }
                Err(_) => Err(LineError::Encoding),
            };
            let tick = match tick {
                Ok(t) => t,
                Err(e) => {
                    summary.malformed += 1;
                    if summary.malformed <= WARN_LIMIT {
                        let _ = writeln!(diag, "warning: line {line_no}: skipped: {e}");
                    }
                    continue;
                }
            };
            match pipeline.push(tick) {
                Ok(row) => {
                    format_row(&row, &mut text);
                    out.write_all(text.as_bytes())?;
                    summary.rows += 1;
                }
                Err(e @ Error::TimeRegression { .. }) if cfg.regression == RegressionPolicy::Skip => {
                    summary.regressions += 1;
                    if summary.regressions <= WARN_LIMIT {
                        let _ = writeln!(diag, "warning: line {line_no}: skipped: {e}");
                    }
                }
                Err(source) => return Ok(Err(CliError::Data { line: line_no, source })),
            }
        }
        Ok::<_, io::Error>(Ok(()))
    })();

    // rows already produced are kept even when the run aborts
    let flushed = out.flush();
    if summary.malformed > 0 {
        let _ = writeln!(diag, "warning: {} malformed line(s) skipped", summary.malformed);
    }
    if summary.regressions > 0 {
        let _ = writeln!(diag, "warning: {} out-of-order tick(s) skipped", summary.regressions);
    }
    result.map_err(write_input_err)??;
    flushed.map_err(write_err)?;
    Ok(summary)
}

// read_until and write_all share the io error type; report both as I/O
fn write_input_err(e: io::Error) -> CliError {
    CliError::Io { context: "streaming ticks".to_string(), source: e }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ColumnSpec;
    use execflow::basis::BasisKind;
    use std::io::Cursor;

    fn cfg() -> RunConfig {
        let cols = ColumnSpec { total: 3, time: 0, price: 1, shares: 2 };
        RunConfig::new("in", cols, "out", 3, 30.0, BasisKind::LaguerreTime).unwrap()
    }

    fn run(cfg: &RunConfig, text: &str) -> (Result<RunSummary, CliError>, String, String) {
        let mut out = Vec::new();
        let mut diag = Vec::new();
        let r = run_with(cfg, Cursor::new(text.as_bytes().to_vec()), &mut out, &mut diag);
        (r, String::from_utf8(out).unwrap(), String::from_utf8(diag).unwrap())
    }

    #[test]
    fn value_format() {
        let mut s = String::new();
        format_value(0.1, &mut s);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        s.clear();
        format_value(f64::NAN, &mut s);
        format_value(f64::INFINITY, &mut s);
        assert_eq!(s, "nannan");
    }

    #[test]
    fn empty_input_gives_header_only() {
        let (r, out, diag) = run(&cfg(), "");
        assert_eq!(r.unwrap().rows, 0);
        assert_eq!(out.lines().count(), 1);
        assert!(out.starts_with("T\tshares\tP_last\tI.sL"));
        assert!(diag.is_empty());
    }

    #[test]
    fn malformed_lines_are_counted_and_skipped() {
        let text = "header\tline\there\n0\t100\t5\n\n1000000000\t100.01\n2000000000\t99.99\t3\n";
        let (r, out, diag) = run(&cfg(), text);
        let s = r.unwrap();
        assert_eq!((s.rows, s.malformed), (2, 2));
        assert_eq!(out.lines().count(), 3);
        assert!(diag.contains("line 1"));
        assert!(diag.contains("line 4"));
        assert!(diag.contains("2 malformed"));
    }

    #[test]
    fn regression_aborts_or_skips() {
        let text = "5\t100\t1\n3\t100\t1\n9\t100\t1\n";
        let (r, out, _) = run(&cfg(), text);
        let err = r.unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(matches!(err, CliError::Data { line: 2, .. }));
        assert_eq!(out.lines().count(), 2);

        let mut c = cfg();
        c.regression = RegressionPolicy::Skip;
        let (r, out, diag) = run(&c, text);
        assert_eq!(r.unwrap(), RunSummary { rows: 2, malformed: 0, regressions: 1 });
        assert_eq!(out.lines().count(), 3);
        assert!(diag.contains("out-of-order"));
    }

    #[test]
    fn rows_match_header_width() {
        let mut text = String::new();
        for k in 0..200 {
            let p = 100.0 + 0.01 * ((k * 7) % 13) as f64;
            text.push_str(&format!("{}\t{p}\t{}\n", k as i64 * 500_000_000, 1 + k % 5));
        }
        let (r, out, _) = run(&cfg(), &text);
        assert_eq!(r.unwrap().rows, 200);
        let width = out.lines().next().unwrap().split('\t').count();
        for line in out.lines() {
            assert_eq!(line.split('\t').count(), width);
        }
    }
}
