//! CSV series, JSON reports, run manifests and steady-state snapshots.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Column, ErrorReport, Series, SpinUp};
use crate::model::State;
use crate::scheme::Order;

/// Writes `x,<column names>` and one row per node. `{:.16e}` keeps 17
/// significant digits, which round-trips every f64.
pub fn write_series(series: &Series, path: &Path) -> Result<()> {
    for c in &series.columns {
        if c.values.len() != series.x.len() {
            return Err(Error::Usage(format!(
                "column {} has {} values for {} nodes",
                c.name,
                c.values.len(),
                series.x.len()
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(w, "x")?;
        for c in &series.columns {
            write!(w, ",{}", c.name)?;
        }
        writeln!(w)?;
        for (i, x) in series.x.iter().enumerate() {
            write!(w, "{x:.16e}")?;
            for c in &series.columns {
                write!(w, ",{:.16e}", c.values[i])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    put(&mut w).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`write_series`]. Name and time are not stored
/// in the CSV and come back empty.
pub fn read_series(path: &Path) -> Result<Series> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Serialize(format!("{}: empty file", path.display()))),
    };
    let mut names = header.split(',');
    if names.next() != Some("x") {
        return Err(Error::Serialize(format!(
            "{}: first column must be x",
            path.display()
        )));
    }
    let mut columns: Vec<Column> = names
        .map(|n| Column {
            name: n.to_string(),
            values: Vec::new(),
        })
        .collect();
    let mut x = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() + 1 {
            return Err(Error::Serialize(format!(
                "{} line {}: {} fields, expected {}",
                path.display(),
                k + 2,
                fields.len(),
                columns.len() + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Serialize(format!("{} line {}: {e}", path.display(), k + 2)))
        };
        x.push(parse(fields[0])?);
        for (c, f) in columns.iter_mut().zip(&fields[1..]) {
            c.values.push(parse(f)?);
        }
    }
    Ok(Series {
        name: String::new(),
        time: 0.0,
        x,
        columns,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Serialize(e.to_string()))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Serialize(format!("{}: {e}", path.display())))
}

pub fn write_report(report: &ErrorReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

/// Echo of the configuration that produced a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub package: String,
    pub version: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            config: serde_json::to_value(config).map_err(|e| Error::Serialize(e.to_string()))?,
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: Vec::new(),
        })
    }
}

/// Converged Example 5 state on the full storage (ghosts included), so a
/// perturbation run can restart from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySnapshot {
    pub order: Order,
    pub dx: f64,
    pub gravity: f64,
    pub state: Vec<State<4>>,
    pub spin_up: SpinUp,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> Series {
        Series {
            name: "s".into(),
            time: 0.0,
            x: (0..values.len()).map(|i| i as f64 + 0.5).collect(),
            columns: vec![Column {
                name: "h1".into(),
                values,
            }],
        }
    }

    #[test]
    fn three_cells_give_four_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_series(&series(vec![1.0, 2.0, 3.0]), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("x,h1\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn series_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let v = vec![
            0.1,
            -1.0 / 3.0,
            f64::MIN_POSITIVE,
            1e300,
            2.0f64.sqrt(),
            -0.0,
        ];
        let s = series(v.clone());
        write_series(&s, &path).unwrap();
        let back = read_series(&path).unwrap();
        assert_eq!(back.x, s.x);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.columns[0].values), bits(&v));
    }

    #[test]
    fn ragged_column_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = series(vec![1.0, 2.0]);
        s.x.push(9.0);
        assert!(write_series(&s, &dir.path().join("a.csv")).is_err());
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let err =
            write_series(&series(vec![1.0]), Path::new("/nonexistent/dir/a.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn empty_report_is_valid_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_report(&ErrorReport::default(), &path).unwrap();
        let v: serde_json::Value = read_json(&path).unwrap();
        assert_eq!(v["runge"], serde_json::json!([]));
        assert_eq!(v["checks"], serde_json::json!([]));
    }

    #[test]
    fn snapshot_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let state: Vec<State<4>> = (1..50)
            .map(|k| {
                let x = k as f64;
                [x.sqrt(), 1.0 / x, x.ln_1p(), (0.1 * x).exp()]
            })
            .collect();
        let snap = SteadySnapshot {
            order: Order::Fifth,
            dx: 0.2,
            gravity: 1.0,
            state,
            spin_up: SpinUp {
                order: Order::Fifth,
                t_end: 12.5,
                steps: 10,
                residual: 3e-13,
                inverse_fallbacks: 0,
                projection: 1e-13,
                warm_start: None,
            },
        };
        write_json(&snap, &path).unwrap();
        let back: SteadySnapshot = read_json(&path).unwrap();
        let bits = |s: &SteadySnapshot| {
            s.state
                .iter()
                .flatten()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&snap));
        assert_eq!(back, snap);
    }
}
