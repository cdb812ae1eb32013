//! The `CIPTBL1` table file: magic, little-endian header length, canonical JSON
//! header, then one byte per cell in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierTable, GridSpec, LearningError, Provenance, TABLE_FORMAT_VERSION};
use crate::control::{ImpulseParams, MeasurementMode};
use crate::dynamics::SimSettings;
use crate::params::{canonical_json, CipParams};

pub const TABLE_MAGIC: &[u8; 8] = b"CIPTBL1\n";

/// Headers larger than this are rejected before allocation.
const MAX_HEADER_LEN: u64 = 1 << 20;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    grid: GridSpec,
    mode: MeasurementMode,
    param_digest: String,
    impulse: ImpulseParams,
    settings: SimSettings,
}

pub fn save_table<W: Write>(t: &ClassifierTable, mut sink: W) -> Result<(), LearningError> {
    let p = t.provenance();
    let header = canonical_json(&Header {
        version: p.version,
        grid: t.grid().clone(),
        mode: t.mode(),
        param_digest: p.param_digest.clone(),
        impulse: p.impulse,
        settings: p.settings,
    });
    sink.write_all(TABLE_MAGIC)?;
    sink.write_all(&(header.len() as u64).to_le_bytes())?;
    sink.write_all(header.as_bytes())?;
    sink.write_all(t.labels())?;
    sink.flush()?;
    Ok(())
}

/// Reads a table without checking which parameters it was learned with.
pub fn read_table<R: Read>(mut source: R) -> Result<ClassifierTable, LearningError> {
    let mut magic = [0u8; 8];
    read_exact_or_truncated(&mut source, &mut magic, "magic")?;
    if &magic != TABLE_MAGIC {
        return Err(LearningError::BadMagic { found: magic });
    }
    let mut len = [0u8; 8];
    read_exact_or_truncated(&mut source, &mut len, "header length")?;
    let len = u64::from_le_bytes(len);
    if len > MAX_HEADER_LEN {
        return Err(LearningError::Header(format!("header length {len} exceeds {MAX_HEADER_LEN}")));
    }
    let mut header = vec![0u8; len as usize];
    read_exact_or_truncated(&mut source, &mut header, "header")?;

    let raw: serde_json::Value = serde_json::from_slice(&header).map_err(|e| LearningError::Header(e.to_string()))?;
    let version = raw.get("version").and_then(|v| v.as_u64());
    if version != Some(TABLE_FORMAT_VERSION as u64) {
        return Err(LearningError::UnknownVersion(raw.get("version").map_or("missing".into(), |v| v.to_string())));
    }
    let h: Header = serde_json::from_value(raw).map_err(|e| LearningError::Header(e.to_string()))?;

    let cells = h.grid.cell_count();
    let mut labels = Vec::with_capacity(cells);
    (&mut source).take(cells as u64).read_to_end(&mut labels)?;
    if labels.len() < cells {
        return Err(LearningError::Truncated { what: "labels", expected: cells, got: labels.len() });
    }
    let mut extra = [0u8; 1];
    if source.read(&mut extra)? != 0 {
        return Err(LearningError::TrailingBytes);
    }
    let provenance = Provenance { param_digest: h.param_digest, impulse: h.impulse, settings: h.settings, version: h.version };
    ClassifierTable::new(h.grid, h.mode, labels, provenance)
}

/// Reads a table and checks that it was learned with `params`.
pub fn load_table<R: Read>(source: R, params: &CipParams) -> Result<ClassifierTable, LearningError> {
    let t = read_table(source)?;
    let expected = params.digest();
    if t.provenance().param_digest != expected {
        return Err(LearningError::DigestMismatch { expected, found: t.provenance().param_digest.clone() });
    }
    Ok(t)
}

pub fn save_table_file(t: &ClassifierTable, path: impl AsRef<Path>) -> Result<(), LearningError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| LearningError::file(path, e))?;
    save_table(t, BufWriter::new(f))
}

pub fn load_table_file(path: impl AsRef<Path>, params: &CipParams) -> Result<ClassifierTable, LearningError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| LearningError::file(path, e))?;
    load_table(BufReader::new(f), params)
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &'static str) -> Result<(), LearningError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..])? {
            0 => return Err(LearningError::Truncated { what, expected: buf.len(), got }),
            n => got += n,
        }
    }
    Ok(())
}
