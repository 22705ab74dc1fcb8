//! Line-delimited JSON persistence, one experience per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::buffer::{Experience, ExperienceBuffer};
use crate::error::Result;

/// Writes the whole buffer, replacing any existing file.
pub fn save(buffer: &ExperienceBuffer, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in buffer.items() {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Appends one record.
pub fn append(e: &Experience, path: &Path) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(e)?;
    line.push(b'\n');
    f.write_all(&line)?;
    Ok(())
}

/// Loads a buffer. Malformed lines and records that fail the positive-only filter or
/// the buffer's dimension check are skipped with a warning; the count of skipped lines
/// is returned alongside the buffer.
pub fn load(path: &Path, r_min: f64) -> Result<(ExperienceBuffer, usize)> {
    let reader = BufReader::new(File::open(path)?);
    let mut buffer = ExperienceBuffer::new(r_min);
    let mut skipped = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: Experience = match serde_json::from_str(&line) {
            Ok(e) => e,
            Err(err) => {
                log::warn!("{}:{}: skipping malformed record: {err}", path.display(), lineno + 1);
                skipped += 1;
                continue;
            }
        };
        match buffer.store(e) {
            Ok(true) => {}
            Ok(false) => {
                log::warn!("{}:{}: skipping record with reward <= r_min", path.display(), lineno + 1);
                skipped += 1;
            }
            Err(err) => {
                log::warn!("{}:{}: skipping record: {err}", path.display(), lineno + 1);
                skipped += 1;
            }
        }
    }
    Ok((buffer, skipped))
}
