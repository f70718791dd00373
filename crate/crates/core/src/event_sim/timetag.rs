//! Tag stream container and its on-disk formats.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! offset 0   8 bytes  magic   b"HGPTTAG\0"
//! offset 8   u32      format version (1)
//! offset 12  u32      reserved, zero
//! offset 16  records of 9 bytes: channel u8, timestamp i64 (ps)
//! ```
//!
//! Run metadata (durations) travels in a JSON sidecar next to the file.

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;

pub const MAGIC: [u8; 8] = *b"HGPTTAG\0";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 9;

pub const SIGNAL: u8 = 0;
pub const IDLER: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    pub channel: u8,
    /// Strictly increasing, in `[0, duration]`.
    pub tags_ps: Vec<i64>,
    pub duration_s: f64,
    /// Time the detection gate was open within the duration.
    pub live_time_s: f64,
}

impl TimeTagStream {
    pub fn len(&self) -> usize {
        self.tags_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags_ps.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.tags_ps.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.tags_ps.windows(2).all(|w| w[0] < w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamMetadata {
    pub duration_s: f64,
    pub live_time_s: f64,
}

pub fn write_header<W: Write>(out: &mut W) -> io::Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())
}

pub fn write_records<W: Write>(out: &mut W, records: impl Iterator<Item = (u8, i64)>) -> io::Result<()> {
    for (channel, t) in records {
        out.write_all(&[channel])?;
        out.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

/// Time-ordered merge of several streams; equal timestamps keep channel order.
pub fn merged_records(streams: &[&TimeTagStream]) -> Vec<(u8, i64)> {
    let mut all: Vec<(u8, i64)> = streams.iter().flat_map(|s| s.tags_ps.iter().map(move |&t| (s.channel, t))).collect();
    all.sort_by_key(|&(c, t)| (t, c));
    all
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<(u8, i64)>, SimError> {
    let mut input = BufReader::new(input);
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header).map_err(|_| SimError::Truncated)?;
    if header[..8] != MAGIC {
        return Err(SimError::BadMagic);
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(SimError::UnsupportedVersion(version));
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() % RECORD_LEN != 0 {
        return Err(SimError::Truncated);
    }
    Ok(body
        .chunks_exact(RECORD_LEN)
        .map(|r| (r[0], i64::from_le_bytes(r[1..].try_into().unwrap())))
        .collect())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes the streams (merged when more than one) plus the metadata sidecar.
pub fn write_file(path: &Path, streams: &[&TimeTagStream]) -> Result<(), SimError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_header(&mut out)?;
    write_records(&mut out, merged_records(streams).into_iter())?;
    out.flush()?;
    if let Some(first) = streams.first() {
        let meta = StreamMetadata { duration_s: first.duration_s, live_time_s: first.live_time_s };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    }
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<Option<StreamMetadata>, SimError> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(side)?)?))
}

/// Splits a record list into one stream per requested channel.
pub fn streams_from_records(records: &[(u8, i64)], channels: &[u8], meta: StreamMetadata) -> Vec<TimeTagStream> {
    channels
        .iter()
        .map(|&channel| TimeTagStream {
            channel,
            tags_ps: records.iter().filter(|r| r.0 == channel).map(|r| r.1).collect(),
            duration_s: meta.duration_s,
            live_time_s: meta.live_time_s,
        })
        .collect()
}

pub fn write_csv<W: Write>(mut out: W, streams: &[&TimeTagStream]) -> io::Result<()> {
    writeln!(out, "channel,timestamp_ps")?;
    for (c, t) in merged_records(streams) {
        writeln!(out, "{c},{t}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(channel: u8, tags: Vec<i64>) -> TimeTagStream {
        TimeTagStream { channel, tags_ps: tags, duration_s: 1.0, live_time_s: 0.5 }
    }

    #[test]
    fn header_layout_is_exact() {
        let mut buf = Vec::new();
        write_header(&mut buf).unwrap();
        write_records(&mut buf, [(1u8, 0x0102_0304_0506_0708i64)].into_iter()).unwrap();
        assert_eq!(&buf[..8], b"HGPTTAG\0");
        assert_eq!(&buf[8..16], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&buf[16..], &[1, 8, 7, 6, 5, 4, 3, 2, 1]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(read_records(&b"short"[..]), Err(SimError::Truncated)));
        let mut buf = b"NOTMAGIC".to_vec();
        buf.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(matches!(read_records(&buf[..]), Err(SimError::BadMagic)));
        let mut buf = MAGIC.to_vec();
        buf.extend_from_slice(&[9, 0, 0, 0, 0, 0, 0, 0]);
        assert!(matches!(read_records(&buf[..]), Err(SimError::UnsupportedVersion(9))));
        let mut buf = Vec::new();
        write_header(&mut buf).unwrap();
        buf.extend_from_slice(&[0, 1, 2]);
        assert!(matches!(read_records(&buf[..]), Err(SimError::Truncated)));
    }

    #[test]
    fn merge_orders_by_time_then_channel() {
        let s = stream(SIGNAL, vec![5, 10]);
        let i = stream(IDLER, vec![1, 10]);
        assert_eq!(merged_records(&[&i, &s]), vec![(1, 1), (0, 5), (0, 10), (1, 10)]);
    }

    #[test]
    fn file_roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tags.bin");
        let s = stream(SIGNAL, vec![3, 7, 1_000_000_000_000]);
        let i = stream(IDLER, vec![-0, 8]);
        write_file(&path, &[&s, &i]).unwrap();
        let recs = read_records(fs::File::open(&path).unwrap()).unwrap();
        let meta = read_metadata(&path).unwrap().unwrap();
        let back = streams_from_records(&recs, &[SIGNAL, IDLER], meta);
        assert_eq!(back, vec![s, i]);
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[&stream(IDLER, vec![4]), &stream(SIGNAL, vec![2])]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "channel,timestamp_ps\n0,2\n1,4\n");
    }
}
