//! Experiment reports and their CSV / JSON serialization.

use std::path::Path;
use std::str::FromStr;

use onplus::estimates::Check;
use serde_json::{Map, Number, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Cell {
    pub fn opt(x: Option<f64>) -> Cell {
        x.map_or(Cell::Missing, Cell::Float)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_float(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Float(x) => float_value(*x),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell::Text(v)
    }
}

/// Rows over a parameter grid. The first `grid` columns are the grid
/// parameters; `invariant` marks tables whose values do not depend on the
/// choice of orthonormal bases, so the two backends must agree on them.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub grid: usize,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub invariant: bool,
}

impl Table {
    pub fn new(name: &str, grid: usize, columns: &[&str], invariant: bool) -> Table {
        Table {
            name: name.to_string(),
            grid,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            invariant,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "table {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub fitted_rate: Option<f64>,
    pub empirical_constant: Option<f64>,
    pub residuals: Vec<f64>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report {
            command: command.to_string(),
            config: Vec::new(),
            tables: Vec::new(),
            fitted_rate: None,
            empirical_constant: None,
            residuals: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn name(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn float_value(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_float(x)).expect("formatted float is a JSON number"))
    } else {
        Value::Null
    }
}

fn opt_float(x: Option<f64>) -> Value {
    x.map_or(Value::Null, float_value)
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn to_json(r: &Report) -> Value {
    let mut doc = Map::new();
    doc.insert("command".into(), Value::from(r.command.clone()));
    let config: Map<String, Value> = r.config.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect();
    doc.insert("config".into(), Value::Object(config));
    let mut grid = Map::new();
    let mut values = Map::new();
    for t in &r.tables {
        grid.insert(t.name.clone(), Value::from(t.columns[..t.grid].to_vec()));
        let rows: Vec<Value> = t.rows.iter().map(|row| Value::Array(row.iter().map(Cell::json).collect())).collect();
        let mut tv = Map::new();
        tv.insert("columns".into(), Value::from(t.columns.clone()));
        tv.insert("rows".into(), Value::Array(rows));
        values.insert(t.name.clone(), Value::Object(tv));
    }
    doc.insert("grid".into(), Value::Object(grid));
    doc.insert("values".into(), Value::Object(values));
    doc.insert("fitted_rate".into(), opt_float(r.fitted_rate));
    doc.insert("empirical_constant".into(), opt_float(r.empirical_constant));
    doc.insert("residuals".into(), Value::Array(r.residuals.iter().map(|x| float_value(*x)).collect()));
    let checks: Vec<Value> = r
        .checks
        .iter()
        .map(|c| {
            let mut m = Map::new();
            m.insert("name".into(), Value::from(c.name.clone()));
            m.insert("pass".into(), Value::from(c.pass));
            m.insert("detail".into(), Value::from(c.detail.clone()));
            Value::Object(m)
        })
        .collect();
    doc.insert("checks".into(), Value::Array(checks));
    doc.insert("pass".into(), Value::from(r.pass()));
    Value::Object(doc)
}

/// `(file name, contents)` pairs. CSV gives one file per table plus
/// `<command>_meta.csv` and `<command>_checks.csv`; JSON gives one document.
pub fn serialize_report(r: &Report, format: Format) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    match format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(&to_json(r)).map_err(|e| CliError::Io(e.to_string()))?;
            bytes.push(b'\n');
            Ok(vec![(format!("{}.json", r.command), bytes)])
        }
        Format::Csv => {
            let mut out = Vec::new();
            for t in &r.tables {
                let rows = t.rows.iter().map(|row| row.iter().map(Cell::csv).collect());
                out.push((format!("{}_{}.csv", r.command, t.name), csv_bytes(&t.columns, rows)?));
            }
            let mut summary = vec![
                vec!["fitted_rate".to_string(), r.fitted_rate.map(fmt_float).unwrap_or_default()],
                vec!["empirical_constant".to_string(), r.empirical_constant.map(fmt_float).unwrap_or_default()],
            ];
            for (i, x) in r.residuals.iter().enumerate() {
                summary.push(vec![format!("residual_{i}"), fmt_float(*x)]);
            }
            summary.push(vec!["pass".to_string(), r.pass().to_string()]);
            for (k, v) in &r.config {
                summary.push(vec![format!("config.{k}"), v.clone()]);
            }
            out.push((
                format!("{}_meta.csv", r.command),
                csv_bytes(&["field".into(), "value".into()], summary.into_iter())?,
            ));
            let checks = r.checks.iter().map(|c| vec![c.name.clone(), c.pass.to_string(), c.detail.clone()]);
            out.push((
                format!("{}_checks.csv", r.command),
                csv_bytes(&["name".into(), "pass".into(), "detail".into()], checks)?,
            ));
            Ok(out)
        }
    }
}

pub fn write_report(r: &Report, format: Format, dir: &Path) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for (name, bytes) in serialize_report(r, format)? {
        let path = dir.join(&name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        names.push(name);
    }
    Ok(names)
}

/// One line per check, then the verdict.
pub fn render_checks(r: &Report) -> String {
    let mut s = String::new();
    for c in &r.checks {
        s.push_str(&format!("[{}] {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("demo");
        r.config.push(("N".into(), "3".into()));
        let mut t = Table::new("grid", 1, &["l", "value_re", "value_im", "note"], true);
        t.push(vec![0usize.into(), 0.1.into(), (-1.0 / 3.0).into(), "x".into()]);
        t.push(vec![1usize.into(), f64::MIN_POSITIVE.into(), Cell::Missing, "y,z".into()]);
        r.tables.push(t);
        r.fitted_rate = Some(-0.9624236501192069);
        r.residuals = vec![1e-300, -2.5];
        r.checks.push(Check::new("ok", true, "fine".into()));
        r
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, f64::MIN_POSITIVE, 2584.0, -0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = sample();
        let bytes = &serialize_report(&r, Format::Json).unwrap()[0].1;
        let v: Value = serde_json::from_slice(bytes).unwrap();
        let row = &v["values"]["grid"]["rows"][0];
        assert_eq!(row[1].as_f64().unwrap().to_bits(), 0.1f64.to_bits());
        assert_eq!(row[2].as_f64().unwrap().to_bits(), (-1.0f64 / 3.0).to_bits());
        assert_eq!(v["fitted_rate"].as_f64().unwrap(), -0.9624236501192069);
        assert_eq!(v["residuals"][0].as_f64().unwrap(), 1e-300);
        assert!(v["values"]["grid"]["rows"][1][2].is_null());
        assert_eq!(v["grid"]["grid"][0], "l");
        assert_eq!(v["pass"], true);
    }

    #[test]
    fn empty_grid_gives_header_only_csv() {
        let mut r = Report::new("empty");
        r.tables.push(Table::new("t", 1, &["n", "d_n"], false));
        let files = serialize_report(&r, Format::Csv).unwrap();
        assert_eq!(files[0].0, "empty_t.csv");
        assert_eq!(String::from_utf8(files[0].1.clone()).unwrap(), "n,d_n\n");
    }

    #[test]
    fn csv_quotes_and_orders() {
        let files = serialize_report(&sample(), Format::Csv).unwrap();
        let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
        assert_eq!(names, ["demo_grid.csv", "demo_meta.csv", "demo_checks.csv"]);
        let grid = String::from_utf8(files[0].1.clone()).unwrap();
        assert!(grid.contains("\"y,z\""));
        assert!(grid.starts_with("l,value_re,value_im,note\n0,1.0000000000000001e-1,"));
    }

    #[test]
    fn serialization_is_deterministic() {
        let a = serialize_report(&sample(), Format::Json).unwrap();
        let b = serialize_report(&sample(), Format::Json).unwrap();
        assert_eq!(a, b);
    }
}
