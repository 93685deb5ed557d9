use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;
use crate::{Error, Result};

/// Environment variable naming the directory that holds benchmark CSVs.
pub const DATA_DIR_ENV: &str = "PATCHCAST_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frequency {
    Hourly,
    QuarterHourly,
}

/// How rows are divided into train / validation / test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPolicy {
    /// Fixed 12/4/4-month borders on hourly ETT data.
    Etth,
    /// Fixed 12/4/4-month borders on 15-minute ETT data.
    Ettm,
    /// Leading fractions for train and validation; test takes the rest.
    Ratio { train: f64, val: f64 },
}

impl fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitPolicy::Etth => f.write_str("etth"),
            SplitPolicy::Ettm => f.write_str("ettm"),
            SplitPolicy::Ratio { train, val } => write!(f, "ratio({train},{val})"),
        }
    }
}

impl SplitPolicy {
    pub fn parse(name: &str, train: f64, val: f64) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "etth" => Ok(SplitPolicy::Etth),
            "ettm" => Ok(SplitPolicy::Ettm),
            "ratio" => {
                let p = SplitPolicy::Ratio { train, val };
                p.validate()?;
                Ok(p)
            }
            other => Err(Error::Config(format!(
                "unknown split '{other}' (expected etth, ettm or ratio)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SplitPolicy::Ratio { train, val } = *self {
            if !(train > 0.0 && val >= 0.0 && train + val <= 1.0) {
                return Err(Error::Config(format!(
                    "split fractions train={train}, val={val} must be non-negative and sum to at most 1"
                )));
            }
        }
        Ok(())
    }
}

impl FromStr for Frequency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h" | "hourly" => Ok(Frequency::Hourly),
            "15min" | "t" | "quarter-hourly" => Ok(Frequency::QuarterHourly),
            other => Err(Error::Config(format!("unknown frequency '{other}'"))),
        }
    }
}

/// Where a dataset lives and how to cut it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub freq: Frequency,
    pub split: SplitPolicy,
    /// Columns to read; `None` reads every column after the timestamp.
    pub target_columns: Option<Vec<String>>,
}

impl DatasetSpec {
    /// The usual protocol for one of the four ETT files, located under
    /// `$PATCHCAST_DATA_DIR` (or the current directory).
    pub fn ett(name: &str) -> Result<Self> {
        let (freq, split) = match name.to_ascii_lowercase().as_str() {
            "etth1" | "etth2" => (Frequency::Hourly, SplitPolicy::Etth),
            "ettm1" | "ettm2" => (Frequency::QuarterHourly, SplitPolicy::Ettm),
            _ => return Err(Error::Config(format!("'{name}' is not an ETT dataset"))),
        };
        Ok(Self {
            path: dataset_dir().join(format!("{name}.csv")),
            freq,
            split,
            target_columns: None,
        })
    }
}

pub fn dataset_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Values of a CSV file with the timestamp column split off.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    /// `rows x M`.
    pub values: Matrix<f64>,
    pub columns: Vec<String>,
    pub timestamps: Vec<String>,
}

pub fn load_csv(spec: &DatasetSpec) -> Result<RawSeries> {
    read_csv(&spec.path, spec.target_columns.as_deref())
}

/// Read a header + rows CSV whose first column is a timestamp (or label).
/// Only `columns` are parsed when given; otherwise every remaining column.
pub fn read_csv(path: &Path, columns: Option<&[String]>) -> Result<RawSeries> {
    if !path.exists() {
        return Err(Error::Data(format!("dataset file {} not found", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::Data(format!(
            "{}: expected a timestamp column plus at least one value column",
            path.display()
        )));
    }
    let selected: Vec<usize> = match columns {
        None => (1..header.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .filter(|&i| i > 0)
                    .ok_or_else(|| Error::Data(format!("{}: no value column named '{n}'", path.display())))
            })
            .collect::<Result<_>>()?,
    };

    let mut data = Vec::new();
    let mut timestamps = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: header[0].clone(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        timestamps.push(record[0].to_string());
        for &c in &selected {
            let cell = record[c].trim();
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[c].clone(),
                message: if cell.is_empty() {
                    "empty cell".to_string()
                } else {
                    format!("'{cell}' is not a number")
                },
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[c].clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            data.push(value);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    Ok(RawSeries {
        values: Matrix::from_vec(timestamps.len(), selected.len(), data)?,
        columns: selected.iter().map(|&c| header[c].clone()).collect(),
        timestamps,
    })
}
