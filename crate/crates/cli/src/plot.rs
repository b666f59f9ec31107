//! Column extraction from an output table for plotting tools.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;
use crate::input::detect_gzip;
use crate::run::format_value;

/// `v * scale + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub shift: f64,
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Transform { shift: 0.0, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    /// Selected columns side by side.
    #[default]
    Table,
    /// The first selected column is the abscissa; every other column is
    /// written as an `(x, y)` pair of columns.
    Pairs,
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Layout::Table),
            "pairs" => Ok(Layout::Pairs),
            _ => Err(format!("unknown layout `{s}`; expected table or pairs")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotSpec {
    /// Column names; empty selects every column.
    pub columns: Vec<String>,
    pub transforms: HashMap<String, Transform>,
    pub layout: Layout,
}

impl PlotSpec {
    pub fn select<S: AsRef<str>>(columns: &[S]) -> Self {
        PlotSpec { columns: columns.iter().map(|s| s.as_ref().to_string()).collect(), ..Default::default() }
    }

    pub fn shift(mut self, column: &str, by: f64) -> Self {
        self.transforms.entry(column.to_string()).or_default().shift = by;
        self
    }

    pub fn scale(mut self, column: &str, by: f64) -> Self {
        self.transforms.entry(column.to_string()).or_default().scale = by;
        self
    }
}

/// Parses `NAME=VALUE`.
pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.rsplit_once('=').ok_or_else(|| format!("expected COLUMN=VALUE, got `{s}`"))?;
    let v: f64 = value.trim().parse().map_err(|_| format!("`{value}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{value}` is not finite"));
    }
    Ok((name.trim().to_string(), v))
}

fn lookup(header: &[&str], name: &str) -> Result<usize, CliError> {
    header.iter().position(|h| *h == name).ok_or_else(|| CliError::UnknownColumn {
        name: name.to_string(),
        available: header.iter().map(|s| s.to_string()).collect(),
    })
}

/// Copies the selected columns of a table to `output`; returns the number
/// of data rows. Untransformed cells are copied byte for byte.
pub fn emit_plot_data<R: BufRead, W: Write>(mut input: R, output: W, spec: &PlotSpec) -> Result<u64, CliError> {
    let read_err = |e| CliError::Io { context: "reading table".to_string(), source: e };
    let write_err = |e| CliError::Io { context: "writing plot data".to_string(), source: e };
    let mut line = String::new();
    if input.read_line(&mut line).map_err(read_err)? == 0 {
        return Err(CliError::Format("input table is empty".to_string()));
    }
    let header_line = line.trim_end_matches(['\n', '\r']).to_string();
    let header: Vec<&str> = header_line.split('\t').collect();

    let selected: Vec<usize> = if spec.columns.is_empty() {
        (0..header.len()).collect()
    } else {
        spec.columns.iter().map(|c| lookup(&header, c)).collect::<Result<_, _>>()?
    };
    let mut transforms = vec![None; header.len()];
    for (name, t) in &spec.transforms {
        transforms[lookup(&header, name)?] = Some(*t);
    }
    let order: Vec<usize> = match spec.layout {
        Layout::Table => selected,
        Layout::Pairs => {
            if selected.len() < 2 {
                return Err(CliError::Usage("pairs layout needs an abscissa and at least one series".to_string()));
            }
            selected[1..].iter().flat_map(|&y| [selected[0], y]).collect()
        }
    };

    let mut out = BufWriter::new(output);
    let names: Vec<&str> = order.iter().map(|&i| header[i]).collect();
    writeln!(out, "{}", names.join("\t")).map_err(write_err)?;
    let mut rows = 0u64;
    let mut buf = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(read_err)? == 0 {
            break;
        }
        let text = line.trim_end_matches(['\n', '\r']);
        if text.is_empty() {
            continue;
        }
        rows += 1;
        let cells: Vec<&str> = text.split('\t').collect();
        if cells.len() != header.len() {
            return Err(CliError::Format(format!(
                "table row {rows} has {} cells, header has {}",
                cells.len(),
                header.len()
            )));
        }
        buf.clear();
        for (k, &i) in order.iter().enumerate() {
            if k > 0 {
                buf.push('\t');
            }
            match transforms[i] {
                None => buf.push_str(cells[i]),
                Some(t) => {
                    let v = match cells[i] {
                        "nan" => f64::NAN,
                        c => c.parse::<f64>().map_err(|_| {
                            CliError::Format(format!("table row {rows}, column {}: `{c}` is not a number", header[i]))
                        })?,
                    };
                    format_value(v * t.scale + t.shift, &mut buf);
                }
            }
        }
        buf.push('\n');
        out.write_all(buf.as_bytes()).map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;
    Ok(rows)
}

/// [`emit_plot_data`] between files; `-` is stdout for the output.
pub fn emit_plot_file(input: &Path, output: &Path, spec: &PlotSpec) -> Result<u64, CliError> {
    let file = File::open(input).map_err(CliError::io(format!("reading {}", input.display())))?;
    let reader = detect_gzip(file).map_err(CliError::io(format!("reading {}", input.display())))?;
    if output == Path::new("-") {
        return emit_plot_data(reader, std::io::stdout().lock(), spec);
    }
    let out = File::create(output).map_err(CliError::io(format!("creating {}", output.display())))?;
    emit_plot_data(reader, out, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const TABLE: &str = "T\tP_last\tI.Gamma0\n1\t1.0e2\t-5.0e-1\n2\t1.01e2\tnan\n3\t1.02e2\t2.5e-1\n";

    fn emit(spec: &PlotSpec) -> Result<String, CliError> {
        let mut out = Vec::new();
        emit_plot_data(Cursor::new(TABLE), &mut out, spec)?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn select_two_columns() {
        let s = emit(&PlotSpec::select(&["T", "P_last"])).unwrap();
        assert_eq!(s, "T\tP_last\n1\t1.0e2\n2\t1.01e2\n3\t1.02e2\n");
    }

    #[test]
    fn all_columns_reproduce_the_table() {
        assert_eq!(emit(&PlotSpec::default()).unwrap(), TABLE);
    }

    #[test]
    fn shift_and_scale() {
        let s = emit(&PlotSpec::select(&["T", "I.Gamma0"]).shift("I.Gamma0", 694.0)).unwrap();
        let vals: Vec<&str> = s.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
        assert_eq!(vals[0].parse::<f64>().unwrap(), 693.5);
        assert_eq!(vals[1], "nan");
        assert_eq!(vals[2].parse::<f64>().unwrap(), 694.25);
        let s = emit(&PlotSpec::select(&["P_last"]).scale("P_last", 2.0).shift("P_last", -200.0)).unwrap();
        assert_eq!(s.lines().nth(3).unwrap().parse::<f64>().unwrap(), 4.0);
    }

    #[test]
    fn pairs_layout() {
        let spec = PlotSpec { layout: Layout::Pairs, ..PlotSpec::select(&["T", "P_last", "I.Gamma0"]) };
        let s = emit(&spec).unwrap();
        assert_eq!(s.lines().next().unwrap(), "T\tP_last\tT\tI.Gamma0");
        assert_eq!(s.lines().nth(1).unwrap(), "1\t1.0e2\t1\t-5.0e-1");
        let spec = PlotSpec { layout: Layout::Pairs, ..PlotSpec::select(&["T"]) };
        assert_eq!(emit(&spec).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn unknown_column_lists_the_available_ones() {
        let err = emit(&PlotSpec::select(&["T", "I.Gamma"])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("I.Gamma`"), "{msg}");
        assert!(msg.contains("T, P_last, I.Gamma0"), "{msg}");
        assert!(emit(&PlotSpec::default().shift("nope", 1.0)).is_err());
    }

    #[test]
    fn assignments() {
        assert_eq!(parse_assignment("I.Gamma0=694").unwrap(), ("I.Gamma0".to_string(), 694.0));
        assert!(parse_assignment("I.Gamma0").is_err());
        assert!(parse_assignment("x=abc").is_err());
    }
}
