//! Dataset and estimate-table files.
//!
//! A dataset file starts with one line `#` followed by a JSON header, then
//! the records. The canonical body is CSV with a `grid_index,x_value` header
//! row; grid geometry is rebuilt from the header instead of being repeated
//! per row. The binary body stores each record as a little-endian `u32`
//! grid index followed by a little-endian `f64` value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::{MeasurementRecord, PhaseSampling, QuadratureDataset};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, GridSpec, QuadratureRule, WeightKind};
use crate::reconstruct::{EntryKey, EstimateTable};

pub const FORMAT_NAME: &str = "tomolab-dataset";
pub const FORMAT_VERSION: u32 = 1;
const BINARY_RECORD_LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Csv,
    /// CSV with explicit `theta_l` and `psi_j` columns.
    CsvExpanded,
    Binary,
}

/// Self-describing dataset header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub modes: usize,
    pub theta_count: usize,
    pub psi_count: usize,
    pub theta_max: f64,
    pub psi_max: f64,
    pub weight_kind: WeightKind,
    #[serde(default)]
    pub rule: QuadratureRule,
    pub eta: f64,
    pub seed: Option<u64>,
    #[serde(default)]
    pub phases: PhaseSampling,
    pub records: u64,
    pub encoding: Encoding,
}

impl DatasetHeader {
    pub fn describe(dataset: &QuadratureDataset, encoding: Encoding) -> Self {
        let spec = &dataset.grid.spec;
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            modes: spec.modes,
            theta_count: spec.theta_count,
            psi_count: spec.psi_count,
            theta_max: spec.theta_max(),
            psi_max: spec.psi_max(),
            weight_kind: spec.weight_kind,
            rule: spec.rule,
            eta: dataset.eta,
            seed: dataset.seed,
            phases: dataset.phases,
            records: dataset.records.len() as u64,
            encoding,
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.modes, self.theta_count, self.psi_count, self.weight_kind).with_rule(self.rule)
    }

    fn check(&self) -> Result<()> {
        if self.format != FORMAT_NAME {
            return Err(Error::Format(format!("not a dataset file: format is {:?}", self.format)));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {}", self.version)));
        }
        let spec = self.grid_spec();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        if !close(self.theta_max, spec.theta_max()) || !close(self.psi_max, spec.psi_max()) {
            return Err(Error::Format(format!(
                "header ranges theta_max = {}, psi_max = {} do not match a {} grid",
                self.theta_max,
                self.psi_max,
                self.weight_kind.name()
            )));
        }
        Ok(())
    }
}

/// Writes `dataset` with the chosen body encoding.
pub fn write_dataset<W: Write>(mut w: W, dataset: &QuadratureDataset, encoding: Encoding) -> Result<()> {
    let header = DatasetHeader::describe(dataset, encoding);
    writeln!(w, "#{}", serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?)?;
    match encoding {
        Encoding::Binary => {
            let mut buf = Vec::with_capacity(BINARY_RECORD_LEN * 4096);
            for chunk in dataset.records.chunks(4096) {
                buf.clear();
                for r in chunk {
                    buf.extend_from_slice(&r.grid_index.to_le_bytes());
                    buf.extend_from_slice(&r.x_value.to_le_bytes());
                }
                w.write_all(&buf)?;
            }
        }
        Encoding::Csv | Encoding::CsvExpanded => {
            let expanded = encoding == Encoding::CsvExpanded;
            let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut w);
            let n = dataset.modes();
            let mut row: Vec<String> = vec!["grid_index".into()];
            if expanded {
                row.extend((1..n).map(|l| format!("theta_{l}")));
                row.extend((1..=n).map(|j| format!("psi_{j}")));
            }
            row.push("x_value".into());
            out.write_record(&row).map_err(csv_error)?;
            for r in &dataset.records {
                row.clear();
                row.push(r.grid_index.to_string());
                if expanded {
                    let cfg = &dataset.grid.points[r.grid_index as usize].config;
                    row.extend(cfg.theta.iter().chain(&cfg.psi).map(|v| v.to_string()));
                }
                row.push(r.x_value.to_string());
                out.write_record(&row).map_err(csv_error)?;
            }
            out.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads any encoding; the record count must match the header.
pub fn read_dataset<R: BufRead>(mut r: R) -> Result<QuadratureDataset> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let json = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("dataset must start with a '#'-prefixed JSON header line".into()))?;
    let header: DatasetHeader =
        serde_json::from_str(json.trim_end()).map_err(|e| Error::Format(format!("bad dataset header: {e}")))?;
    header.check()?;
    let grid = build_grid(&header.grid_spec())?;
    let records = match header.encoding {
        Encoding::Binary => read_binary_body(r, &header)?,
        Encoding::Csv | Encoding::CsvExpanded => read_csv_body(r, &header)?,
    };
    if records.len() as u64 != header.records {
        return Err(Error::Format(format!(
            "header declares {} records but the body holds {}",
            header.records,
            records.len()
        )));
    }
    QuadratureDataset::new(grid, header.eta, header.seed, header.phases, records)
}

fn read_binary_body<R: Read>(mut r: R, header: &DatasetHeader) -> Result<Vec<MeasurementRecord>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % BINARY_RECORD_LEN != 0 {
        return Err(Error::Format(format!(
            "binary body of {} bytes is not a whole number of {BINARY_RECORD_LEN}-byte records (header declares {})",
            bytes.len(),
            header.records
        )));
    }
    Ok(bytes
        .chunks_exact(BINARY_RECORD_LEN)
        .map(|c| MeasurementRecord {
            grid_index: u32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
            x_value: f64::from_le_bytes(c[4..].try_into().expect("8 bytes")),
        })
        .collect())
}

fn read_csv_body<R: Read>(r: R, header: &DatasetHeader) -> Result<Vec<MeasurementRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let columns = reader.headers().map_err(csv_error)?.clone();
    let width = match header.encoding {
        Encoding::CsvExpanded => 2 * header.modes + 1,
        _ => 2,
    };
    if columns.len() != width || &columns[0] != "grid_index" || &columns[width - 1] != "x_value" {
        return Err(Error::Format(format!("unexpected CSV columns {:?}", columns.iter().collect::<Vec<_>>())));
    }
    let mut records = Vec::with_capacity(header.records.min(1 << 28) as usize);
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let parse_err = |what: &str| Error::Format(format!("record {i}: cannot parse {what}"));
        let grid_index = row[0].parse().map_err(|_| parse_err("grid_index"))?;
        let x_value = row[width - 1].parse().map_err(|_| parse_err("x_value"))?;
        records.push(MeasurementRecord { grid_index, x_value });
    }
    Ok(records)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Format(format!("{other:?}")),
    }
}

pub fn save_dataset(path: &Path, dataset: &QuadratureDataset, encoding: Encoding) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), dataset, encoding)
}

pub fn load_dataset(path: &Path) -> Result<QuadratureDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Writes a table as CSV: key columns, the estimate and its errors, and,
/// when `reference` is given, `exact_re, exact_im, delta_re, delta_im` with
/// `delta = exact − estimate`.
pub fn write_table_csv<W: Write>(w: W, table: &EstimateTable, reference: Option<&[Complex64]>) -> Result<()> {
    if let Some(r) = reference {
        if r.len() != table.len() {
            return Err(Error::Dimension(format!("{} reference values for {} rows", r.len(), table.len())));
        }
    }
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let n = table.modes;
    let mut head: Vec<String> = Vec::new();
    match table.entries.first().map(|e| &e.key) {
        Some(EntryKey::Point { .. }) => {
            for j in 1..=n {
                head.push(format!("alpha_{j}_re"));
                head.push(format!("alpha_{j}_im"));
            }
        }
        _ => {
            head.extend((1..=n).map(|j| format!("m_{j}")));
            head.extend((1..=n).map(|j| format!("n_{j}")));
        }
    }
    head.extend(["value_re", "value_im", "std_error_re", "std_error_im"].map(String::from));
    if reference.is_some() {
        head.extend(["exact_re", "exact_im", "delta_re", "delta_im"].map(String::from));
    }
    out.write_record(&head).map_err(csv_error)?;
    for (i, e) in table.entries.iter().enumerate() {
        let mut row: Vec<String> = match &e.key {
            EntryKey::Point { alpha } => alpha.iter().flat_map(|a| [a.re.to_string(), a.im.to_string()]).collect(),
            EntryKey::Fock { m, n } | EntryKey::Moment { m, n } => m.iter().chain(n).map(|k| k.to_string()).collect(),
        };
        let est = &e.estimate;
        row.extend([est.value.re, est.value.im, est.std_error_re, est.std_error_im].map(|v| v.to_string()));
        if let Some(r) = reference {
            let d = r[i] - est.value;
            row.extend([r[i].re, r[i].im, d.re, d.im].map(|v| v.to_string()));
        }
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table_json<W: Write>(w: W, table: &EstimateTable) -> Result<()> {
    serde_json::to_writer_pretty(w, table).map_err(|e| Error::Format(e.to_string()))
}
