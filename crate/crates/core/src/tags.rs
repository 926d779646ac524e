//! Time-tag streams and the FTAG binary file format.
//!
//! FTAG layout, one file per channel:
//!
//! ```text
//! bytes 0..4   magic "FTAG"
//! byte  4      format version (1)
//! byte  5      channel id
//! bytes 6..14  tag count, little-endian u64
//! then         count × little-endian u64 picosecond timestamps
//! ```

use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const FTAG_MAGIC: [u8; 4] = *b"FTAG";
pub const FTAG_VERSION: u8 = 1;

/// Ordered detector click record for one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    pub channel: u8,
    /// Sorted ascending, all within `[0, duration_ps]`.
    pub tags: Vec<i64>,
    pub duration_ps: i64,
    /// Seed the stream was generated from (0 when read from a file).
    pub seed: u64,
}

impl TimeTagStream {
    pub fn new(channel: u8, tags: Vec<i64>, duration_ps: i64, seed: u64) -> Result<Self> {
        let stream = TimeTagStream {
            channel,
            tags,
            duration_ps,
            seed,
        };
        stream.validate(None)?;
        Ok(stream)
    }

    /// Check ordering, bounds, and (when given) the dead-time spacing.
    pub fn validate(&self, dead_time_ps: Option<i64>) -> Result<()> {
        let mut prev: Option<i64> = None;
        for &t in &self.tags {
            if t < 0 || t > self.duration_ps {
                return Err(Error::invalid_input(format!(
                    "tag {t} outside [0, {}]",
                    self.duration_ps
                )));
            }
            if let Some(p) = prev {
                if t < p {
                    return Err(Error::invalid_input("tags not sorted ascending"));
                }
                if let Some(dead) = dead_time_ps {
                    if t - p < dead {
                        return Err(Error::invalid_input(format!(
                            "tags {p} and {t} violate dead time {dead}"
                        )));
                    }
                }
            }
            prev = Some(t);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Write a stream as an FTAG file.
pub fn write_ftag(path: &Path, stream: &TimeTagStream) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&FTAG_MAGIC)?;
    w.write_all(&[FTAG_VERSION, stream.channel])?;
    w.write_all(&(stream.tags.len() as u64).to_le_bytes())?;
    for &t in &stream.tags {
        if t < 0 {
            return Err(Error::TagFile(format!(
                "negative timestamp {t} cannot be encoded"
            )));
        }
        w.write_all(&(t as u64).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read an FTAG file back into `(channel, tags)`.
pub fn read_ftag(path: &Path) -> Result<(u8, Vec<i64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 14];
    r.read_exact(&mut header)
        .map_err(|_| Error::TagFile(format!("{}: truncated header", path.display())))?;
    if header[0..4] != FTAG_MAGIC {
        return Err(Error::TagFile(format!("{}: bad magic", path.display())));
    }
    if header[4] != FTAG_VERSION {
        return Err(Error::TagFile(format!(
            "{}: unsupported version {}",
            path.display(),
            header[4]
        )));
    }
    let channel = header[5];
    let count = u64::from_le_bytes(header[6..14].try_into().unwrap());
    let mut tags = Vec::with_capacity(count as usize);
    let mut buf = [0u8; 8];
    for i in 0..count {
        r.read_exact(&mut buf).map_err(|_| {
            Error::TagFile(format!(
                "{}: truncated at tag {i} of {count}",
                path.display()
            ))
        })?;
        let v = u64::from_le_bytes(buf);
        if v > i64::MAX as u64 {
            return Err(Error::TagFile(format!(
                "{}: timestamp {v} exceeds i64 range",
                path.display()
            )));
        }
        tags.push(v as i64);
    }
    Ok((channel, tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(TimeTagStream::new(0, vec![5, 3], 10, 1).is_err());
        assert!(TimeTagStream::new(0, vec![-1], 10, 1).is_err());
        assert!(TimeTagStream::new(0, vec![11], 10, 1).is_err());
        assert!(TimeTagStream::new(0, vec![1, 3, 3, 9], 10, 1).is_ok());
    }

    #[test]
    fn dead_time_validation() {
        let s = TimeTagStream::new(0, vec![100, 150, 400], 1000, 1).unwrap();
        assert!(s.validate(Some(50)).is_ok());
        assert!(s.validate(Some(60)).is_err());
    }

    #[test]
    fn read_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let bad_magic = dir.path().join("bad_magic.ftag");
        std::fs::write(&bad_magic, b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(read_ftag(&bad_magic).is_err());

        let truncated = dir.path().join("truncated.ftag");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FTAG");
        bytes.push(FTAG_VERSION);
        bytes.push(0);
        bytes.extend_from_slice(&5u64.to_le_bytes());
        bytes.extend_from_slice(&42u64.to_le_bytes()); // only 1 of 5 tags
        std::fs::write(&truncated, bytes).unwrap();
        assert!(read_ftag(&truncated).is_err());
    }

    #[test]
    fn header_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c7.ftag");
        let s = TimeTagStream::new(7, vec![3500], 10_000, 9).unwrap();
        write_ftag(&path, &s).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"FTAG");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 7);
        assert_eq!(u64::from_le_bytes(bytes[6..14].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[14..22].try_into().unwrap()), 3500);
        assert_eq!(bytes.len(), 22);
    }

    proptest! {
        #[test]
        fn ftag_round_trip(mut raw in proptest::collection::vec(0i64..1_000_000, 0..200), channel in 0u8..4) {
            raw.sort_unstable();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.ftag");
            let stream = TimeTagStream::new(channel, raw.clone(), 1_000_000, 0).unwrap();
            write_ftag(&path, &stream).unwrap();
            let (ch, tags) = read_ftag(&path).unwrap();
            prop_assert_eq!(ch, channel);
            prop_assert_eq!(tags, raw);
        }
    }
}
