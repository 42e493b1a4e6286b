//! Chunked CSV ingestion (RFC 4180, header row required, complete cases only).

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use streamstat_core::Matrix;

use crate::config::ModelConfig;
use crate::error::CliError;

pub struct Chunk {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub rows: u64,
}

pub struct ChunkReader {
    reader: csv::Reader<Box<dyn Read + Send>>,
    response_idx: usize,
    covariate_idx: Vec<usize>,
    intercept: bool,
    chunk_size: usize,
}

impl ChunkReader {
    /// Open `path` (or stdin for `-`) and resolve the configured columns
    /// against the header.
    pub fn open(path: &str, config: &ModelConfig) -> Result<ChunkReader, CliError> {
        let raw: Box<dyn Read + Send> = if path == "-" {
            Box::new(io::stdin())
        } else {
            Box::new(File::open(Path::new(path)).map_err(|e| {
                CliError::other(format!("cannot open input {path}: {e}"))
            })?)
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(raw);
        let headers = reader
            .headers()
            .map_err(|e| CliError::other(format!("cannot read header: {e}")))?
            .clone();
        let find = |name: &str| -> Result<usize, CliError> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CliError::Schema(format!("column `{name}` not found in header")))
        };
        let response_idx = find(&config.formula.response)?;
        let covariate_idx = config
            .formula
            .covariates
            .iter()
            .map(|c| find(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChunkReader {
            reader,
            response_idx,
            covariate_idx,
            intercept: config.formula.intercept,
            chunk_size: config.chunk_size,
        })
    }

    pub fn set_chunk_size(&mut self, size: usize) {
        self.chunk_size = size;
    }

    fn record_line(record: &csv::StringRecord) -> u64 {
        record.position().map(|p| p.line()).unwrap_or(0)
    }

    fn parse_cell(record: &csv::StringRecord, idx: usize) -> Result<f64, CliError> {
        let raw = record.get(idx).ok_or_else(|| CliError::Parse {
            line: Self::record_line(record),
            message: format!("missing column {idx}"),
        })?;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("na") {
            return Err(CliError::Parse {
                line: Self::record_line(record),
                message: "missing value (complete cases required)".into(),
            });
        }
        trimmed.parse::<f64>().map_err(|_| CliError::Parse {
            line: Self::record_line(record),
            message: format!("`{trimmed}` is not a number"),
        })
    }

    /// Skip `n` data rows (used when resuming from a snapshot).
    pub fn skip_rows(&mut self, n: u64) -> Result<(), CliError> {
        let mut record = csv::StringRecord::new();
        for i in 0..n {
            let more = self
                .reader
                .read_record(&mut record)
                .map_err(|e| CliError::other(format!("while skipping consumed rows: {e}")))?;
            if !more {
                return Err(CliError::other(format!(
                    "input ended after {i} rows while skipping {n} already-consumed rows"
                )));
            }
        }
        Ok(())
    }

    /// Read the next chunk; `None` at end of input. The final chunk may be
    /// short.
    pub fn next_chunk(&mut self) -> Result<Option<Chunk>, CliError> {
        let p = self.covariate_idx.len() + usize::from(self.intercept);
        let mut rows: Vec<f64> = Vec::with_capacity(self.chunk_size * p);
        let mut y = Vec::with_capacity(self.chunk_size);
        let mut record = csv::StringRecord::new();
        while y.len() < self.chunk_size {
            let more = self.reader.read_record(&mut record).map_err(|e| {
                let line = e
                    .position()
                    .map(|p| p.line())
                    .unwrap_or(0);
                CliError::Parse {
                    line,
                    message: e.to_string(),
                }
            })?;
            if !more {
                break;
            }
            y.push(Self::parse_cell(&record, self.response_idx)?);
            if self.intercept {
                rows.push(1.0);
            }
            for &idx in &self.covariate_idx {
                rows.push(Self::parse_cell(&record, idx)?);
            }
        }
        if y.is_empty() {
            return Ok(None);
        }
        let n = y.len();
        let x = Matrix::from_vec(n, p, rows)
            .map_err(|e| CliError::other(format!("chunk assembly failed: {e}")))?;
        Ok(Some(Chunk {
            x,
            y,
            rows: n as u64,
        }))
    }
}

/// Merge two chunks into one accumulation point (separation handling).
pub fn merge_chunks(a: Chunk, b: Chunk) -> Chunk {
    let x = a.x.vstack(&b.x);
    let mut y = a.y;
    y.extend(b.y);
    Chunk {
        x,
        y,
        rows: a.rows + b.rows,
    }
}
