//! On-disk formats: the content-addressed field/encoder cache and CSV output.
//!
//! Binary blobs are little-endian `f64` pairs `(re, im)` in the in-memory
//! order of the matrix they hold, with a JSON sidecar describing shape and
//! provenance. Cache keys are SHA-256 digests of the JSON encoding of the
//! inputs that determine the blob.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ambiguity::AmbiguitySurface;
use crate::compression::{Encoder, Projection};
use crate::error::{Error, Result};
use crate::linalg::{ColumnMatrix, RowMatrix, C64};
use crate::sensing::Observation;
use crate::waveguide::{GreensField, SearchGrid};

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_complex(path: &Path, data: &[C64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 16);
    for z in data {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_complex(path: &Path, expected_len: usize) -> Result<Vec<C64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != expected_len * 16 {
        return Err(Error::Cache(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            expected_len * 16,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(bytes)?;
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Sidecar describing a cached blob.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobHeader {
    pub kind: BlobKind,
    pub key: String,
    pub frequency_hz: f64,
    pub elements: usize,
    pub locations: usize,
    /// Compressed dimension, encoders only.
    pub m: Option<usize>,
    pub seed: Option<u64>,
    /// Whatever produced the key, for humans.
    pub inputs: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlobKind {
    Field,
    Encoder,
}

/// A directory of `<key>.bin` / `<key>.json` pairs.
#[derive(Clone, Debug)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.root.join(format!("{key}.bin")), self.root.join(format!("{key}.json")))
    }

    pub fn contains(&self, key: &str) -> bool {
        let (bin, json) = self.paths(key);
        bin.is_file() && json.is_file()
    }

    fn header(&self, key: &str, kind: BlobKind) -> Result<Option<BlobHeader>> {
        if !self.contains(key) {
            return Ok(None);
        }
        let header: BlobHeader = read_json(&self.paths(key).1)?;
        if header.kind != kind || header.key != key {
            return Err(Error::Cache(format!("sidecar for {key} does not describe a {kind:?}")));
        }
        Ok(Some(header))
    }

    pub fn store_field(&self, key: &str, field: &GreensField, inputs: serde_json::Value) -> Result<()> {
        let (bin, json) = self.paths(key);
        write_complex(&bin, field.matrix().as_slice())?;
        write_json(
            &json,
            &BlobHeader {
                kind: BlobKind::Field,
                key: key.to_string(),
                frequency_hz: field.frequency_hz(),
                elements: field.elements(),
                locations: field.len(),
                m: None,
                seed: None,
                inputs,
            },
        )
    }

    pub fn load_field(&self, key: &str, grid: &Arc<SearchGrid>) -> Result<Option<GreensField>> {
        let Some(h) = self.header(key, BlobKind::Field)? else {
            return Ok(None);
        };
        if h.locations != grid.len() {
            return Err(Error::Cache(format!("{key}: grid size {} != {}", h.locations, grid.len())));
        }
        let data = read_complex(&self.paths(key).0, h.elements * h.locations)?;
        let matrix = ColumnMatrix::from_column_major(h.elements, h.locations, data);
        GreensField::from_matrix(h.frequency_hz, matrix, Arc::clone(grid)).map(Some)
    }

    /// Stores `Φ` followed by `Φ G`.
    pub fn store_encoder(&self, key: &str, encoder: &Encoder, inputs: serde_json::Value) -> Result<()> {
        let (bin, json) = self.paths(key);
        let phi = encoder.projection().matrix().as_slice();
        let compressed = encoder.compressed_field().as_slice();
        let mut data = Vec::with_capacity(phi.len() + compressed.len());
        data.extend_from_slice(phi);
        data.extend_from_slice(compressed);
        write_complex(&bin, &data)?;
        write_json(
            &json,
            &BlobHeader {
                kind: BlobKind::Encoder,
                key: key.to_string(),
                frequency_hz: encoder.frequency_hz(),
                elements: encoder.projection().cols(),
                locations: encoder.len(),
                m: Some(encoder.rows()),
                seed: Some(encoder.projection().seed()),
                inputs,
            },
        )
    }

    pub fn load_encoder(&self, key: &str, grid: &Arc<SearchGrid>) -> Result<Option<Encoder>> {
        let Some(h) = self.header(key, BlobKind::Encoder)? else {
            return Ok(None);
        };
        let (m, seed) = match (h.m, h.seed) {
            (Some(m), Some(seed)) => (m, seed),
            _ => return Err(Error::Cache(format!("{key}: encoder sidecar lacks m or seed"))),
        };
        if h.locations != grid.len() {
            return Err(Error::Cache(format!("{key}: grid size {} != {}", h.locations, grid.len())));
        }
        let n_phi = m * h.elements;
        let mut data = read_complex(&self.paths(key).0, n_phi + m * h.locations)?;
        let compressed = data.split_off(n_phi);
        let projection = Projection::from_matrix(RowMatrix::from_row_major(m, h.elements, data), seed)?;
        let compressed = ColumnMatrix::from_column_major(m, h.locations, compressed);
        Encoder::from_parts(h.frequency_hz, projection, compressed, Arc::clone(grid)).map(Some)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRow {
    freq_hz: f64,
    element: usize,
    re: f64,
    im: f64,
}

/// One row per frequency and element: `freq_hz,element,re,im`.
pub fn write_observations_csv(path: &Path, observations: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for obs in observations {
        for (element, z) in obs.data.iter().enumerate() {
            w.serialize(ObservationRow {
                freq_hz: obs.frequency_hz,
                element,
                re: z.re,
                im: z.im,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `(frequency, data)` pairs in file order. Each frequency's rows
/// must be contiguous and list elements `0, 1, …` in order.
pub fn read_observations_csv(path: &Path) -> Result<Vec<(f64, Vec<C64>)>> {
    let mut out: Vec<(f64, Vec<C64>)> = Vec::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let row: ObservationRow = row?;
        match out.last_mut() {
            Some((f, data)) if *f == row.freq_hz => {
                if row.element != data.len() {
                    return Err(Error::InvalidParameter(format!(
                        "observation at {} Hz: expected element {}, found {}",
                        row.freq_hz,
                        data.len(),
                        row.element
                    )));
                }
                data.push(C64::new(row.re, row.im));
            }
            _ => {
                if row.element != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "observation at {} Hz must start at element 0",
                        row.freq_hz
                    )));
                }
                if out.iter().any(|(f, _)| *f == row.freq_hz) {
                    return Err(Error::InvalidParameter(format!(
                        "rows for {} Hz are not contiguous",
                        row.freq_hz
                    )));
                }
                out.push((row.freq_hz, vec![C64::new(row.re, row.im)]));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter(format!("{} holds no observations", path.display())));
    }
    let n = out[0].1.len();
    if let Some((_, d)) = out.iter().find(|(_, d)| d.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: d.len(),
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct SurfaceRow {
    range: f64,
    depth: f64,
    value: f64,
    value_db: f64,
}

/// `range,depth,value,value_db` in grid order.
pub fn write_surface_csv(path: &Path, surface: &AmbiguitySurface, grid: &SearchGrid) -> Result<()> {
    if surface.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: surface.len(),
        });
    }
    let db = surface.to_db();
    let mut w = csv::Writer::from_path(path)?;
    for (j, (&value, &value_db)) in surface.values().iter().zip(&db).enumerate() {
        let loc = grid.location(j);
        w.serialize(SurfaceRow {
            range: loc.range,
            depth: loc.depth,
            value,
            value_db,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Dense matrix of dB values: one line per depth, one column per range.
pub fn write_surface_matrix(path: &Path, surface: &AmbiguitySurface, grid: &SearchGrid) -> Result<()> {
    let db = surface.to_db();
    let n_ranges = grid.ranges().len();
    let mut w = BufWriter::new(File::create(path)?);
    for row in db.chunks(n_ranges) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Any serializable flat records as CSV with a header row.
pub fn write_records_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
