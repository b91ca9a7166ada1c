//! Long-format panel CSV ingestion: `unit_id,period,y,x1,...,xk`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{DStat, ForecastRecord};
use crate::panel::PanelDataset;

/// Regressor construction applied after reading.
///
/// The regressors are `y_{t-l}` for each `l` in `y_lags`, followed by every
/// file column `x_j` shifted by `x_lag`. The first `max(y_lags, x_lag)`
/// periods are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub y_lags: Vec<usize>,
    #[serde(default)]
    pub x_lag: usize,
    /// Drop the file's `x` columns, keeping only lagged `y`.
    #[serde(default)]
    pub drop_x: bool,
}

impl CsvSchema {
    pub fn y_lag(l: usize) -> Self {
        Self {
            y_lags: vec![l],
            ..Self::default()
        }
    }

    /// Parses `y=1,2;x=1` style directives; either part may be omitted.
    pub fn parse_directive(s: &str) -> Result<Self> {
        let mut out = Self::default();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("lag directive '{part}' needs key=value")))?;
            let nums = val
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("bad lag list '{val}'")))?;
            match key.trim() {
                "y" => out.y_lags = nums,
                "x" => {
                    if nums.len() != 1 {
                        return Err(Error::Config("x takes a single lag".into()));
                    }
                    out.x_lag = nums[0];
                }
                other => return Err(Error::Config(format!("unknown lag target '{other}'"))),
            }
        }
        Ok(out)
    }

    fn max_lag(&self) -> usize {
        self.y_lags.iter().copied().chain([self.x_lag]).max().unwrap_or(0)
    }
}

/// A balanced panel as read from disk, before regressor construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub units: Vec<String>,
    pub periods: Vec<String>,
    pub x_names: Vec<String>,
    /// `y[i][t]`
    pub y: Vec<Vec<f64>>,
    /// `x[i][t][j]`
    pub x: Vec<Vec<Vec<f64>>>,
}

impl RawPanel {
    /// Applies `schema` and returns a labelled dataset.
    pub fn into_dataset(self, schema: &CsvSchema) -> Result<PanelDataset> {
        let lag = schema.max_lag();
        let t_raw = self.periods.len();
        if t_raw <= lag {
            return Err(Error::InvalidPanel(format!("{t_raw} periods cannot support lag {lag}")));
        }
        let kx = if schema.drop_x { 0 } else { self.x_names.len() };
        let k = schema.y_lags.len() + kx;
        if k == 0 {
            return Err(Error::NoRegressors("panel ingestion"));
        }
        let n = self.units.len();
        let t = t_raw - lag;
        let data = PanelDataset::from_fn(
            n,
            t,
            k,
            |i, s| self.y[i][s + lag],
            |i, s, j| {
                let tt = s + lag;
                if j < schema.y_lags.len() {
                    self.y[i][tt - schema.y_lags[j]]
                } else {
                    self.x[i][tt - schema.x_lag][j - schema.y_lags.len()]
                }
            },
        )?;
        data.with_labels(Some(self.units), Some(self.periods[lag..].to_vec()))
    }
}

fn parse_field(s: &str, line: u64, col: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("column {col}: '{s}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("column {col}: non-finite value"),
        });
    }
    Ok(v)
}

/// Reads a long-format panel. Units and periods are ordered
/// lexicographically, so numeric periods should be zero-padded.
pub fn read_raw_panel<R: Read>(reader: R) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    if header.len() < 3 || header[0] != "unit_id" || header[1] != "period" || header[2] != "y" {
        return Err(Error::Parse {
            line: 1,
            msg: "header must start with unit_id,period,y".into(),
        });
    }
    let x_names = header[3..].to_vec();
    let k = x_names.len();
    let mut cells: BTreeMap<String, BTreeMap<String, (f64, Vec<f64>)>> = BTreeMap::new();
    let mut periods = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let unit = rec[0].to_string();
        let period = rec[1].to_string();
        if unit.is_empty() || period.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty unit_id or period".into(),
            });
        }
        let y = parse_field(&rec[2], line, "y")?;
        let x = (0..k)
            .map(|j| parse_field(&rec[3 + j], line, &x_names[j]))
            .collect::<Result<Vec<_>>>()?;
        periods.insert(period.clone());
        if cells
            .entry(unit.clone())
            .or_default()
            .insert(period.clone(), (y, x))
            .is_some()
        {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate observation for unit {unit} period {period}"),
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    let periods: Vec<String> = periods.into_iter().collect();
    let unbalanced: Vec<String> = cells
        .iter()
        .filter(|(_, obs)| obs.len() != periods.len())
        .map(|(u, _)| u.clone())
        .collect();
    if !unbalanced.is_empty() {
        return Err(Error::Unbalanced(unbalanced));
    }
    let mut units = Vec::with_capacity(cells.len());
    let mut ys = Vec::with_capacity(cells.len());
    let mut xs = Vec::with_capacity(cells.len());
    for (u, obs) in cells {
        units.push(u);
        let (y, x): (Vec<f64>, Vec<Vec<f64>>) = obs.into_values().unzip();
        ys.push(y);
        xs.push(x);
    }
    Ok(RawPanel {
        units,
        periods,
        x_names,
        y: ys,
        x: xs,
    })
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<PanelDataset> {
    let file = std::fs::File::open(path)?;
    read_raw_panel(file)?.into_dataset(schema)
}

pub fn ingest_str(text: &str, schema: &CsvSchema) -> Result<PanelDataset> {
    read_raw_panel(text.as_bytes())?.into_dataset(schema)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        line: 1,
        msg: format!("missing column {name}"),
    })
}

fn parse_usize(s: &str, line: u64, col: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("column {col}: '{s}' is not a nonnegative integer"),
    })
}

/// Reads forecast records by column name; other columns are ignored.
pub fn read_records_from<R: Read>(reader: R) -> Result<Vec<ForecastRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let h = rdr.headers()?.clone();
    let idx: Vec<usize> = ["unit", "origin", "method", "forecast", "actual"]
        .iter()
        .map(|c| column_index(&h, c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push(ForecastRecord {
            unit: parse_usize(&rec[idx[0]], line, "unit")?,
            origin: parse_usize(&rec[idx[1]], line, "origin")?,
            method: rec[idx[2]].to_string(),
            forecast: parse_field(&rec[idx[3]], line, "forecast")?,
            actual: parse_field(&rec[idx[4]], line, "actual")?,
        });
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<ForecastRecord>> {
    read_records_from(std::fs::File::open(path)?)
}

pub fn read_dstats(path: &Path) -> Result<Vec<DStat>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let h = rdr.headers()?.clone();
    let idx: Vec<usize> = ["unit", "origin", "d", "mean", "sd"]
        .iter()
        .map(|c| column_index(&h, c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push(DStat {
            unit: parse_usize(&rec[idx[0]], line, "unit")?,
            origin: parse_usize(&rec[idx[1]], line, "origin")?,
            d: parse_field(&rec[idx[2]], line, "d")?,
            mean: parse_field(&rec[idx[3]], line, "mean")?,
            sd: parse_field(&rec[idx[4]], line, "sd")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BY_THREE: &str =
        "unit_id,period,y,x1\nb,2001,4,0.4\na,2001,1,0.1\na,2002,2,0.2\na,2003,3,0.3\nb,2002,5,0.5\nb,2003,6,0.6\n";

    #[test]
    fn round_trip_shape_and_order() {
        let p = ingest_str(TWO_BY_THREE, &CsvSchema::default()).unwrap();
        assert_eq!((p.n_units(), p.n_periods(), p.k_regressors()), (2, 3, 1));
        assert_eq!(p.unit_labels().unwrap(), ["a", "b"]);
        assert_eq!(p.y_unit(1), [4.0, 5.0, 6.0]);
        assert_eq!(p.x_at(0, 2), [0.3]);
    }

    #[test]
    fn crlf_accepted() {
        let crlf = TWO_BY_THREE.replace('\n', "\r\n");
        let p = ingest_str(&crlf, &CsvSchema::default()).unwrap();
        assert_eq!(p.y_unit(0), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn missing_cell_names_unit() {
        let text = "unit_id,period,y\na,1,1\na,2,2\nb,1,3\n";
        match ingest_str(text, &CsvSchema::y_lag(1)) {
            Err(Error::Unbalanced(u)) => assert_eq!(u, vec!["b".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lag_directive_shifts_y() {
        let p = ingest_str(TWO_BY_THREE, &CsvSchema::parse_directive("y=1").unwrap()).unwrap();
        assert_eq!(p.n_periods(), 2);
        assert_eq!(p.period_labels().unwrap(), ["2002", "2003"]);
        assert_eq!(p.x_at(0, 0), [1.0, 0.2]);
        assert_eq!(p.x_at(1, 1), [5.0, 0.6]);
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "unit_id,period,y\na,1,1\na,2,oops\n";
        match ingest_str(text, &CsvSchema::y_lag(1)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(matches!(
            ingest_str("id,period,y\n", &CsvSchema::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn directive_parsing() {
        let s = CsvSchema::parse_directive("y=1,4; x=1").unwrap();
        assert_eq!(s.y_lags, vec![1, 4]);
        assert_eq!(s.x_lag, 1);
        assert!(CsvSchema::parse_directive("z=1").is_err());
    }
}
