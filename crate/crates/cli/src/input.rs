//! Trade-file reading: plain or gzip text, one tab-separated tick per line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Cursor, Read};
use std::path::Path;

use execflow::moments::TradeTick;
use flate2::read::MultiGzDecoder;
use thiserror::Error;

use crate::config::ColumnSpec;
use crate::error::CliError;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Why a line was skipped.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error("expected {expected} tab-separated fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("{field} field `{text}` is not a number")]
    Number { field: &'static str, text: String },
    #[error("{0}")]
    Tick(execflow::Error),
    #[error("not valid UTF-8")]
    Encoding,
}

/// Opens `path` (`-` for stdin), decompressing when the data starts with
/// the gzip magic bytes.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>, CliError> {
    let ctx = || format!("reading {}", path.display());
    let raw: Box<dyn Read> = if path == Path::new("-") {
        Box::new(io::stdin())
    } else {
        Box::new(File::open(path).map_err(CliError::io(ctx()))?)
    };
    detect_gzip(raw).map_err(CliError::io(ctx()))
}

/// Wraps a reader, transparently inflating gzip streams.
pub fn detect_gzip<R: Read + 'static>(mut raw: R) -> io::Result<Box<dyn BufRead>> {
    let mut head = Vec::with_capacity(2);
    while head.len() < 2 {
        let mut b = [0u8; 2];
        let got = match raw.read(&mut b[..2 - head.len()]) {
            Ok(k) => k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        if got == 0 {
            break;
        }
        head.extend_from_slice(&b[..got]);
    }
    let gz = head == GZIP_MAGIC;
    let joined = Cursor::new(head).chain(raw);
    Ok(if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(joined)))
    } else {
        Box::new(BufReader::new(joined))
    })
}

/// Parses one data line. Time is integer nanoseconds; a value with a
/// fractional part is rounded.
pub fn parse_tick(line: &str, cols: &ColumnSpec) -> Result<TradeTick, LineError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != cols.total {
        return Err(LineError::FieldCount { expected: cols.total, found: fields.len() });
    }
    let num = |field: &'static str, idx: usize| {
        let text = fields[idx].trim();
        text.parse::<f64>().map_err(|_| LineError::Number { field, text: text.to_string() })
    };
    let t_text = fields[cols.time].trim();
    let t = match t_text.parse::<i64>() {
        Ok(t) => t,
        Err(_) => {
            let v = num("time", cols.time)?;
            if !(v.is_finite() && v.abs() < 9.0e18) {
                return Err(LineError::Number { field: "time", text: t_text.to_string() });
            }
            v.round() as i64
        }
    };
    let price = num("price", cols.price)?;
    let shares = num("shares", cols.shares)?;
    TradeTick::new(t, price, shares).map_err(LineError::Tick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const COLS: ColumnSpec = ColumnSpec { total: 4, time: 1, price: 2, shares: 3 };

    #[test]
    fn parses_good_lines() {
        let t = parse_tick("x\t34200000000000\t100.25\t300", &COLS).unwrap();
        assert_eq!((t.t, t.price, t.shares), (34_200_000_000_000, 100.25, 300.0));
        let t = parse_tick("x\t1.5e3\t1\t2\r".trim_end(), &COLS).unwrap();
        assert_eq!(t.t, 1500);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(parse_tick("1\t2\t3", &COLS), Err(LineError::FieldCount { found: 3, .. })));
        assert!(matches!(parse_tick("a\tb\t1\t1", &COLS), Err(LineError::Number { field: "time", .. })));
        assert!(matches!(parse_tick("a\t1\tnope\t1", &COLS), Err(LineError::Number { field: "price", .. })));
        assert!(matches!(parse_tick("a\t1\t-1\t1", &COLS), Err(LineError::Tick(_))));
        assert!(matches!(parse_tick("a\t1\t1\t0", &COLS), Err(LineError::Tick(_))));
        assert!(matches!(parse_tick("a\tinf\t1\t1", &COLS), Err(LineError::Number { .. })));
    }

    #[test]
    fn gzip_is_detected_by_content() {
        let text = b"a\t1\t2\t3\nb\t4\t5\t6\n";
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(text).unwrap();
        let gz = enc.finish().unwrap();
        for bytes in [text.to_vec(), gz] {
            let mut out = String::new();
            detect_gzip(Cursor::new(bytes)).unwrap().read_to_string(&mut out).unwrap();
            assert_eq!(out.as_bytes(), text);
        }
        let mut out = String::new();
        detect_gzip(Cursor::new(b"x".to_vec())).unwrap().read_to_string(&mut out).unwrap();
        assert_eq!(out, "x");
    }
}
