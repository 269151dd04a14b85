//! Readers and writers for the on-disk formats.
//!
//! * gaze CSV: `image_id,subject_id,t_ms,x_px,y_px,valid`
//! * ratings JSONL: one `{image_id, subject_id, wealthy, safe, boring}` object per line
//! * label map: ASCII header `P5-like: <width> <height> 19\n`, then one byte per pixel
//! * embeddings: `GPEMB1`, little-endian u32 rows, cols, dim, then little-endian f64 values
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! writer/reader pair reproduces its input exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::display::DisplayConfig;
use crate::error::{CoreError, Result};
use crate::events::EventSet;
use crate::types::*;

pub const GAZE_HEADER: [&str; 6] = ["image_id", "subject_id", "t_ms", "x_px", "y_px", "valid"];
pub const LABEL_MAP_MAGIC: &str = "P5-like:";
pub const EMBEDDINGS_MAGIC: &[u8; 6] = b"GPEMB1";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        CoreError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| {
        CoreError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(BufWriter::new(f))
}

/// File stem used as the image id of per-image scene files.
pub fn image_id_from_path(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| CoreError::Validation(format!("cannot derive image id from {}", path.display())))
}

// ---------------------------------------------------------------------------
// Gaze CSV
// ---------------------------------------------------------------------------

pub fn read_gaze_csv(path: &Path, display: &DisplayConfig) -> Result<Vec<Trial>> {
    read_gaze_csv_from(open(path)?, display)
}

/// Parses gaze rows and groups them into trials in order of first appearance.
pub fn read_gaze_csv_from<R: Read>(reader: R, display: &DisplayConfig) -> Result<Vec<Trial>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(GAZE_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CoreError::format(Some(1), format!("missing column '{name}'")))?;
    }

    let mut trials: Vec<Trial> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line());
        let field = |i: usize| record.get(cols[i]).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .trim()
                .parse::<f64>()
                .map_err(|_| CoreError::format(line, format!("bad {} value '{}'", GAZE_HEADER[i], field(i))))
        };
        let image_id = field(0).to_owned();
        let subject_id = field(1).to_owned();
        let t_ms = num(2)?;
        let x_px = num(3)?;
        let y_px = num(4)?;
        let valid = match field(5).trim() {
            "1" => true,
            "0" => false,
            other => return Err(CoreError::format(line, format!("valid must be 0 or 1, got '{other}'"))),
        };
        if !t_ms.is_finite() || t_ms < 0.0 {
            return Err(CoreError::data(line, format!("t_ms {t_ms} must be finite and non-negative")));
        }
        if valid && !(x_px.is_finite() && y_px.is_finite()) {
            return Err(CoreError::data(line, "valid sample with non-finite coordinates"));
        }
        let key = (image_id, subject_id);
        let idx = match index.get(&key) {
            Some(&i) => i,
            None => {
                trials.push(Trial {
                    image_id: key.0.clone(),
                    subject_id: key.1.clone(),
                    ratings: None,
                    samples: Vec::new(),
                    display_w_px: display.width_px,
                    display_h_px: display.height_px,
                });
                index.insert(key, trials.len() - 1);
                trials.len() - 1
            }
        };
        let trial = &mut trials[idx];
        if let Some(prev) = trial.samples.last() {
            if t_ms <= prev.t_ms {
                return Err(CoreError::data(
                    line,
                    format!(
                        "trial ({}, {}) has non-increasing timestamp {} after {}",
                        trial.image_id, trial.subject_id, t_ms, prev.t_ms
                    ),
                ));
            }
        }
        trial.samples.push(GazeSample { t_ms, x_px, y_px, valid });
    }
    Ok(trials)
}

pub fn write_gaze_csv(path: &Path, trials: &[Trial]) -> Result<()> {
    let mut w = create(path)?;
    write_gaze_csv_to(&mut w, trials)?;
    w.flush()?;
    Ok(())
}

pub fn write_gaze_csv_to<W: Write>(writer: W, trials: &[Trial]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(GAZE_HEADER)?;
    for t in trials {
        for s in &t.samples {
            wtr.write_record([
                t.image_id.as_str(),
                t.subject_id.as_str(),
                &s.t_ms.to_string(),
                &s.x_px.to_string(),
                &s.y_px.to_string(),
                if s.valid { "1" } else { "0" },
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Ratings JSONL
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub image_id: String,
    pub subject_id: String,
    pub wealthy: u8,
    pub safe: u8,
    pub boring: u8,
}

impl RatingRecord {
    pub fn ratings(&self) -> Result<Ratings> {
        Ratings::new(self.wealthy, self.safe, self.boring)
    }
}

pub fn read_ratings_jsonl(path: &Path) -> Result<Vec<RatingRecord>> {
    read_ratings_jsonl_from(BufReader::new(open(path)?))
}

pub fn read_ratings_jsonl_from<R: BufRead>(reader: R) -> Result<Vec<RatingRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = Some(i as u64 + 1);
        let rec: RatingRecord =
            serde_json::from_str(&line).map_err(|e| CoreError::format(lineno, e.to_string()))?;
        rec.ratings().map_err(|e| CoreError::data(lineno, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_ratings_jsonl(path: &Path, records: &[RatingRecord]) -> Result<()> {
    let mut w = create(path)?;
    write_ratings_jsonl_to(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn write_ratings_jsonl_to<W: Write>(mut writer: W, records: &[RatingRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Joins ratings onto trials by `(image_id, subject_id)`.
///
/// Returns the number of trials left without ratings.
pub fn attach_ratings(trials: &mut [Trial], records: &[RatingRecord]) -> Result<usize> {
    let mut by_key: HashMap<(&str, &str), Ratings> = HashMap::new();
    for r in records {
        by_key.insert((&r.image_id, &r.subject_id), r.ratings()?);
    }
    let mut missing = 0;
    for t in trials.iter_mut() {
        t.ratings = by_key.get(&(t.image_id.as_str(), t.subject_id.as_str())).copied();
        if t.ratings.is_none() {
            missing += 1;
        }
    }
    Ok(missing)
}

// ---------------------------------------------------------------------------
// Label maps
// ---------------------------------------------------------------------------

pub fn read_label_map(path: &Path) -> Result<SemanticLabelMap> {
    let id = image_id_from_path(path)?;
    read_label_map_from(BufReader::new(open(path)?), id)
}

pub fn read_label_map_from<R: BufRead>(mut reader: R, image_id: impl Into<String>) -> Result<SemanticLabelMap> {
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| CoreError::format(Some(1), "label map header is not ASCII"))?;
    let header = header
        .strip_suffix('\n')
        .ok_or_else(|| CoreError::format(Some(1), "label map header is not newline terminated"))?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 4 || parts[0] != LABEL_MAP_MAGIC {
        return Err(CoreError::format(Some(1), format!("bad label map header '{header}'")));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| CoreError::format(Some(1), format!("bad label map dimension '{s}'")))
    };
    let (width, height) = (dim(parts[1])?, dim(parts[2])?);
    if parts[3] != "19" {
        return Err(CoreError::format(Some(1), format!("expected 19 categories, got {}", parts[3])));
    }
    let mut labels = vec![0u8; width * height];
    reader
        .read_exact(&mut labels)
        .map_err(|_| CoreError::format(None, "label map body shorter than width*height"))?;
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(CoreError::format(None, "trailing bytes after label map body"));
    }
    SemanticLabelMap::new(image_id, width, height, labels)
}

pub fn write_label_map(path: &Path, map: &SemanticLabelMap) -> Result<()> {
    let mut w = create(path)?;
    write_label_map_to(&mut w, map)?;
    w.flush()?;
    Ok(())
}

pub fn write_label_map_to<W: Write>(mut writer: W, map: &SemanticLabelMap) -> Result<()> {
    write!(writer, "{LABEL_MAP_MAGIC} {} {} {}\n", map.width, map.height, N_CATEGORIES)?;
    writer.write_all(&map.labels)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Patch embeddings
// ---------------------------------------------------------------------------

pub fn read_embeddings(path: &Path) -> Result<PatchEmbeddingSet> {
    let id = image_id_from_path(path)?;
    read_embeddings_from(BufReader::new(open(path)?), id)
}

pub fn read_embeddings_from<R: Read>(mut reader: R, image_id: impl Into<String>) -> Result<PatchEmbeddingSet> {
    let mut magic = [0u8; 6];
    reader
        .read_exact(&mut magic)
        .map_err(|_| CoreError::format(None, "embeddings file too short"))?;
    if &magic != EMBEDDINGS_MAGIC {
        return Err(CoreError::format(None, "bad embeddings magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        reader
            .read_exact(&mut u32buf)
            .map_err(|_| CoreError::format(None, "truncated embeddings header"))?;
        *d = u32::from_le_bytes(u32buf) as usize;
    }
    let [rows, cols, dim] = dims;
    let n = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| CoreError::format(None, "embeddings dimensions overflow"))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(CoreError::format(
            None,
            format!("embeddings body has {} bytes, expected {}", bytes.len(), n * 8),
        ));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    PatchEmbeddingSet::new(image_id, rows, cols, dim, data)
}

pub fn write_embeddings(path: &Path, set: &PatchEmbeddingSet) -> Result<()> {
    let mut w = create(path)?;
    write_embeddings_to(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn write_embeddings_to<W: Write>(mut writer: W, set: &PatchEmbeddingSet) -> Result<()> {
    writer.write_all(EMBEDDINGS_MAGIC)?;
    for d in [set.grid_rows, set.grid_cols, set.embed_dim] {
        let d = u32::try_from(d).map_err(|_| CoreError::Validation("dimension exceeds u32".into()))?;
        writer.write_all(&d.to_le_bytes())?;
    }
    for v in &set.data {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Events CSV
// ---------------------------------------------------------------------------

pub const EVENTS_HEADER: [&str; 9] = [
    "image_id",
    "subject_id",
    "kind",
    "onset_ms",
    "offset_ms",
    "cx",
    "cy",
    "duration_ms",
    "next_saccade_len_px",
];

/// Writes fixations and saccades, one row per event in time order.
///
/// Saccade rows leave `cx`/`cy` empty and carry their amplitude in the last column.
pub fn write_events_csv_to<'a, W: Write>(
    writer: W,
    rows: impl IntoIterator<Item = (&'a str, &'a str, &'a EventSet)>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(EVENTS_HEADER)?;
    for (image_id, subject_id, events) in rows {
        let mut sacc = events.saccades.iter().peekable();
        for f in &events.fixations {
            while let Some(s) = sacc.next_if(|s| s.onset_ms < f.onset_ms) {
                write_saccade(&mut wtr, image_id, subject_id, s)?;
            }
            wtr.write_record([
                image_id,
                subject_id,
                "fixation",
                &f.onset_ms.to_string(),
                &f.offset_ms.to_string(),
                &f.cx_px.to_string(),
                &f.cy_px.to_string(),
                &f.duration_ms.to_string(),
                &f.next_saccade_len_px.to_string(),
            ])?;
        }
        for s in sacc {
            write_saccade(&mut wtr, image_id, subject_id, s)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn write_saccade<W: Write>(wtr: &mut csv::Writer<W>, image_id: &str, subject_id: &str, s: &SaccadeEvent) -> Result<()> {
    wtr.write_record([
        image_id,
        subject_id,
        "saccade",
        &s.onset_ms.to_string(),
        &s.offset_ms.to_string(),
        "",
        "",
        &s.duration_ms.to_string(),
        &s.amplitude_px.to_string(),
    ])?;
    Ok(())
}
