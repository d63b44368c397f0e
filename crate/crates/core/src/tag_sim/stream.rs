//! Time-tag streams and their on-disk forms.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "QTAG"
//! 4       4     version (u32, currently 1)
//! 8       8     record count (u64)
//! 16      8     duration_ps (u64)
//! 24      8     seed (u64)
//! 32      16·n  records: channel u32, reserved u32 = 0, timestamp_ps u64
//! ```
//!
//! The CSV mirror is `channel,timestamp_ps` with a header line.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::PS_PER_S;

pub const MAGIC: &[u8; 4] = b"QTAG";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;
pub const RECORD_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagRecord {
    pub channel: u32,
    pub timestamp_ps: u64,
}

/// Channel-stamped detection events ordered by time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    records: Vec<TagRecord>,
    duration_ps: u64,
    seed: u64,
}

impl TimeTagStream {
    /// Sorts `records` by time (ties broken by channel) and checks that all
    /// timestamps lie in `[0, duration_ps]`.
    pub fn new(mut records: Vec<TagRecord>, duration_ps: u64, seed: u64) -> Result<Self> {
        records.sort_unstable_by_key(|r| (r.timestamp_ps, r.channel));
        if let Some(last) = records.last() {
            if last.timestamp_ps > duration_ps {
                return Err(Error::Domain(format!(
                    "timestamp {} ps beyond stream duration {} ps",
                    last.timestamp_ps, duration_ps
                )));
            }
        }
        Ok(Self {
            records,
            duration_ps,
            seed,
        })
    }

    /// Builds a stream from per-channel sorted timestamp lists.
    pub fn from_channels(channels: BTreeMap<u32, Vec<u64>>, duration_ps: u64, seed: u64) -> Result<Self> {
        let records = channels
            .into_iter()
            .flat_map(|(channel, ts)| ts.into_iter().map(move |timestamp_ps| TagRecord { channel, timestamp_ps }))
            .collect();
        Self::new(records, duration_ps, seed)
    }

    pub fn records(&self) -> &[TagRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sorted timestamps of one channel.
    pub fn channel(&self, channel: u32) -> Vec<u64> {
        self.records.iter().filter(|r| r.channel == channel).map(|r| r.timestamp_ps).collect()
    }

    pub fn count(&self, channel: u32) -> u64 {
        self.records.iter().filter(|r| r.channel == channel).count() as u64
    }

    pub fn channel_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.channel).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn rate(&self, channel: u32) -> f64 {
        if self.duration_ps == 0 {
            return 0.0;
        }
        self.count(channel) as f64 / self.duration()
    }

    pub fn write_binary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        w.write_all(&self.duration_ps.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for r in &self.records {
            w.write_all(&r.channel.to_le_bytes())?;
            w.write_all(&0u32.to_le_bytes())?;
            w.write_all(&r.timestamp_ps.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(reader: R) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut header = [0u8; HEADER_LEN];
        read_exact_at(&mut r, &mut header, 0, "header")?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format {
                offset: 0,
                reason: format!("bad magic {:?}, expected \"QTAG\"", String::from_utf8_lossy(&header[0..4])),
            });
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                offset: 4,
                reason: format!("unsupported version {version}"),
            });
        }
        let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let duration_ps = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let seed = u64::from_le_bytes(header[24..32].try_into().unwrap());

        let mut records = Vec::with_capacity(count.min(1 << 24) as usize);
        let mut last_per_channel: BTreeMap<u32, u64> = BTreeMap::new();
        let mut buf = [0u8; RECORD_LEN];
        for i in 0..count {
            let offset = HEADER_LEN as u64 + i * RECORD_LEN as u64;
            read_exact_at(&mut r, &mut buf, offset, "record")?;
            let channel = u32::from_le_bytes(buf[0..4].try_into().unwrap());
            let reserved = u32::from_le_bytes(buf[4..8].try_into().unwrap());
            let timestamp_ps = u64::from_le_bytes(buf[8..16].try_into().unwrap());
            if reserved != 0 {
                return Err(Error::Format {
                    offset: offset + 4,
                    reason: format!("reserved field is {reserved}, expected 0"),
                });
            }
            if timestamp_ps > duration_ps {
                return Err(Error::Format {
                    offset: offset + 8,
                    reason: format!("timestamp {timestamp_ps} ps beyond duration {duration_ps} ps"),
                });
            }
            let last = last_per_channel.entry(channel).or_insert(0);
            if timestamp_ps < *last {
                return Err(Error::Format {
                    offset: offset + 8,
                    reason: format!("timestamp decreases on channel {channel}"),
                });
            }
            *last = timestamp_ps;
            records.push(TagRecord { channel, timestamp_ps });
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format {
                offset: HEADER_LEN as u64 + count * RECORD_LEN as u64,
                reason: "trailing bytes after the declared record count".into(),
            });
        }
        Self::new(records, duration_ps, seed)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["channel", "timestamp_ps"])?;
        for r in &self.records {
            wtr.write_record([r.channel.to_string(), r.timestamp_ps.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the CSV mirror. The CSV carries no header metadata, so the
    /// duration defaults to the last timestamp when not given.
    pub fn read_csv<R: Read>(reader: R, duration_ps: Option<u64>, seed: u64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "channel" || &headers[1] != "timestamp_ps" {
            return Err(Error::Format {
                offset: 0,
                reason: "CSV header must be 'channel,timestamp_ps'".into(),
            });
        }
        let mut records = Vec::new();
        for row in rdr.deserialize::<TagRecord>() {
            records.push(row?);
        }
        let duration_ps = duration_ps.unwrap_or_else(|| records.iter().map(|r| r.timestamp_ps).max().unwrap_or(0));
        Self::new(records, duration_ps, seed)
    }
}

fn read_exact_at<R: BufRead>(r: &mut R, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Format {
            offset,
            reason: format!("truncated {what}"),
        },
        _ => Error::Io(e),
    })
}
