//! CSV outputs. Every file starts with a `#schema=<n>` line, then a header.

use std::io::Write;

use crate::agent::Method;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const SWEEP_LONG_HEADER: [&str; 5] = ["method", "sweep_value", "seed", "episode", "return"];
pub const SWEEP_SUMMARY_HEADER: [&str; 6] = [
    "method",
    "sweep_value",
    "n_seeds",
    "mean_return",
    "std_return",
    "mean_length",
];
pub const TRAINING_CURVE_HEADER: [&str; 7] = [
    "method",
    "seed",
    "episode",
    "env_steps",
    "return",
    "length",
    "disturbance",
];
pub const SWITCH_LOG_HEADER_ESN: [&str; 5] = ["seed", "t", "reward", "error_norm", "dw_norm"];
pub const SWITCH_LOG_HEADER_RAW: [&str; 3] = ["seed", "t", "reward"];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes the schema line, the header and all rows into one buffer.
pub fn render<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "#schema={SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(&mut buf);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    drop(w);
    Ok(buf)
}

/// One row of `sweep_long.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct LongRow {
    pub method: Method,
    pub sweep_value: f64,
    pub seed: u64,
    pub episode: usize,
    pub ret: f64,
}

impl LongRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            fmt_f64(self.sweep_value),
            self.seed.to_string(),
            self.episode.to_string(),
            fmt_f64(self.ret),
        ]
    }
}

fn strip_schema(bytes: &[u8]) -> Result<&[u8]> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(format!("not UTF-8: {e}")))?;
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| Error::Parse("missing schema line".into()))?;
    let version = first
        .trim_end_matches('\r')
        .strip_prefix("#schema=")
        .ok_or_else(|| Error::Parse(format!("expected `#schema=<n>`, got `{first}`")))?;
    let version: u32 = version
        .parse()
        .map_err(|_| Error::Parse(format!("bad schema version `{version}`")))?;
    if version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported schema version {version}"
        )));
    }
    Ok(rest.as_bytes())
}

fn field(rec: &csv::StringRecord, i: usize) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| Error::Parse(format!("missing column {i}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
}

/// Parses `sweep_long.csv`, checking the schema line and header.
pub fn parse_sweep_long(bytes: &[u8]) -> Result<Vec<LongRow>> {
    let body = strip_schema(bytes)?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body);
    let header = r.headers()?.clone();
    if header.iter().ne(SWEEP_LONG_HEADER) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != SWEEP_LONG_HEADER.len() {
            return Err(Error::Parse(format!(
                "expected 5 columns, got {}",
                rec.len()
            )));
        }
        let sweep_value: f64 = parse_num(field(&rec, 1)?, "sweep_value")?;
        let ret: f64 = parse_num(field(&rec, 4)?, "return")?;
        if !sweep_value.is_finite() || !ret.is_finite() {
            return Err(Error::NonFinite("sweep_long row"));
        }
        rows.push(LongRow {
            method: field(&rec, 0)?.parse()?,
            sweep_value,
            seed: parse_num(field(&rec, 2)?, "seed")?,
            episode: parse_num(field(&rec, 3)?, "episode")?,
            ret,
        });
    }
    Ok(rows)
}
