//! Command-line configuration of a pipeline run.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use execflow::basis::BasisKind;
use execflow::spectral::DEFAULT_DEFLATION;

use crate::error::CliError;

/// Smallest and largest supported basis dimension.
pub const MIN_N: usize = 2;
pub const MAX_N: usize = 15;

/// `C:t:p:s`: total column count and the base-0 indices of time, price and
/// shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSpec {
    pub total: usize,
    pub time: usize,
    pub price: usize,
    pub shares: usize,
}

impl FromStr for ColumnSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("expected C:t:p:s, got `{s}`"));
        }
        let mut v = [0usize; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part.trim().parse().map_err(|_| format!("`{part}` is not a column number"))?;
        }
        let [total, time, price, shares] = v;
        for (name, idx) in [("time", time), ("price", price), ("shares", shares)] {
            if idx >= total {
                return Err(format!("{name} column {idx} is outside 0..{total}"));
            }
        }
        Ok(ColumnSpec { total, time, price, shares })
    }
}

impl fmt::Display for ColumnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.total, self.time, self.price, self.shares)
    }
}

/// Measure names as spelled by the reference program.
pub fn parse_measure(name: &str) -> Result<BasisKind, String> {
    match name {
        "ImpactQVMMuseLaguerre" => Ok(BasisKind::LaguerreTime),
        "ImpactQVMMuseLegendreShifted" => Ok(BasisKind::ShiftedLegendreTime),
        "ImpactQVMMuseMonomials" => Ok(BasisKind::MonomialTime),
        "ImpactQVMMuse_pi" => Ok(BasisKind::PricePoly),
        _ => Err(format!(
            "unknown measure `{name}`; expected one of ImpactQVMMuseLaguerre, ImpactQVMMuseLegendreShifted, \
             ImpactQVMMuseMonomials, ImpactQVMMuse_pi"
        )),
    }
}

pub fn measure_name(kind: BasisKind) -> &'static str {
    match kind {
        BasisKind::LaguerreTime => "ImpactQVMMuseLaguerre",
        BasisKind::ShiftedLegendreTime => "ImpactQVMMuseLegendreShifted",
        BasisKind::MonomialTime => "ImpactQVMMuseMonomials",
        BasisKind::PricePoly => "ImpactQVMMuse_pi",
        BasisKind::MonomialLegendreTime => "MonomialLegendreTime",
    }
}

/// Indicator groups; each contributes a fixed block of output columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Flow,
    Price,
    SkPih,
    Pnlss,
    Naive,
    Future,
    Perturbative,
    Impact,
    Catalog,
    AfterSpike,
    Distance,
    Saddle,
}

impl Group {
    pub const ALL: [Group; 12] = [
        Group::Flow,
        Group::Price,
        Group::SkPih,
        Group::Pnlss,
        Group::Naive,
        Group::Future,
        Group::Perturbative,
        Group::Impact,
        Group::Catalog,
        Group::AfterSpike,
        Group::Distance,
        Group::Saddle,
    ];

    pub const DEFAULT: [Group; 8] = [
        Group::Flow,
        Group::Price,
        Group::SkPih,
        Group::Pnlss,
        Group::Naive,
        Group::Future,
        Group::Perturbative,
        Group::Impact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::Flow => "flow",
            Group::Price => "price",
            Group::SkPih => "sk_p_ih",
            Group::Pnlss => "pnlss",
            Group::Naive => "naive",
            Group::Future => "future",
            Group::Perturbative => "perturbative",
            Group::Impact => "impact",
            Group::Catalog => "catalog",
            Group::AfterSpike => "after_spike",
            Group::Distance => "distance",
            Group::Saddle => "saddle",
        }
    }
}

/// Parses `default`, `all` and group names, comma separated. The result is
/// deduplicated and in canonical column order.
pub fn parse_groups(list: &str) -> Result<Vec<Group>, String> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "default" => out.extend(Group::DEFAULT),
            "all" => out.extend(Group::ALL),
            name => match Group::ALL.iter().find(|g| g.name() == name) {
                Some(g) => out.push(*g),
                None => {
                    let names: Vec<_> = Group::ALL.iter().map(|g| g.name()).collect();
                    return Err(format!("unknown group `{name}`; expected default, all or one of {}", names.join(", ")));
                }
            },
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// What to do with a tick older than the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum RegressionPolicy {
    #[default]
    Abort,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Relative eigenvalue cutoff for the Gram and flow pseudo-inverses.
    pub deflation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { deflation: DEFAULT_DEFLATION }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `-` reads standard input.
    pub input: PathBuf,
    pub columns: ColumnSpec,
    /// `-` writes standard output.
    pub output: PathBuf,
    pub n: usize,
    pub tau: f64,
    pub measure: BasisKind,
    pub groups: Vec<Group>,
    pub regression: RegressionPolicy,
    pub thresholds: Thresholds,
}

impl RunConfig {
    /// A config with the default groups and thresholds.
    pub fn new(
        input: impl Into<PathBuf>,
        columns: ColumnSpec,
        output: impl Into<PathBuf>,
        n: usize,
        tau: f64,
        measure: BasisKind,
    ) -> Result<Self, CliError> {
        let cfg = RunConfig {
            input: input.into(),
            columns,
            output: output.into(),
            n,
            tau,
            measure,
            groups: Group::DEFAULT.to_vec(),
            regression: RegressionPolicy::Abort,
            thresholds: Thresholds::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_groups(mut self, groups: &[Group]) -> Self {
        let mut g = groups.to_vec();
        g.sort();
        g.dedup();
        self.groups = g;
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(MIN_N..=MAX_N).contains(&self.n) {
            return Err(CliError::Usage(format!("--n must be in {MIN_N}..={MAX_N}, got {}", self.n)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(CliError::Usage(format!("--tau must be a positive number of seconds, got {}", self.tau)));
        }
        let d = self.thresholds.deflation;
        if !(d.is_finite() && (0.0..1.0).contains(&d)) {
            return Err(CliError::Usage(format!("--deflation must be in [0, 1), got {d}")));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "execflow", version, about = "Per-tick execution-flow indicators from a trade file")]
struct Args {
    /// Tab-separated trade file, optionally gzip-compressed; `-` for stdin.
    #[arg(long = "musein_file", value_name = "PATH")]
    musein_file: PathBuf,
    /// Column layout C:t:p:s (total, time, price, shares; base 0).
    #[arg(long = "musein_cols", value_name = "C:t:p:s")]
    musein_cols: ColumnSpec,
    /// Output table; `-` for stdout.
    #[arg(long = "museout_file", value_name = "PATH")]
    museout_file: PathBuf,
    /// Basis dimension.
    #[arg(long = "n", default_value_t = 7)]
    n: usize,
    /// Exponential time scale in seconds.
    #[arg(long = "tau", default_value_t = 128.0)]
    tau: f64,
    #[arg(long = "measure", default_value = "ImpactQVMMuseLaguerre", value_parser = parse_measure)]
    measure: BasisKind,
    /// Comma-separated groups; `default`, `all` or names such as `saddle`.
    #[arg(long = "groups", default_value = "default")]
    groups: String,
    #[arg(long = "on_time_regression", value_enum, default_value_t = RegressionPolicy::Abort)]
    on_time_regression: RegressionPolicy,
    #[arg(long = "deflation", default_value_t = DEFAULT_DEFLATION)]
    deflation: f64,
}

/// Parses the full argument vector, program name first.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    })?;
    let cfg = RunConfig {
        input: args.musein_file,
        columns: args.musein_cols,
        output: args.museout_file,
        n: args.n,
        tau: args.tau,
        measure: args.measure,
        groups: parse_groups(&args.groups).map_err(CliError::Usage)?,
        regression: args.on_time_regression,
        thresholds: Thresholds { deflation: args.deflation },
    };
    cfg.validate()?;
    Ok(cfg)
}
