//! Append-only event log and snapshots.
//!
//! The log is a sequence of `[u32 length][u32 CRC32][JSON]` records, both
//! integers little-endian and the CRC taken over the JSON bytes. A record
//! that is cut short at the end of the file is a torn write and is dropped;
//! a complete record that fails its checksum or does not parse is
//! corruption and stops recovery.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

const HEADER_LEN: usize = 8;
const LOG_FILE: &str = "events.log";
const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt log record {index} at byte {offset}: {detail}")]
    CorruptLog { index: usize, offset: u64, detail: String },
    #[error("unreadable snapshot: {0}")]
    Snapshot(serde_json::Error),
}

pub fn encode_record<T: Serialize>(record: &T) -> Vec<u8> {
    let payload = serde_json::to_vec(record).expect("log records serialize");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decoded records and the length of the intact prefix of `bytes`.
pub fn decode_records<T: DeserializeOwned>(bytes: &[u8]) -> Result<(Vec<T>, usize), StoreError> {
    let mut records = Vec::new();
    let mut pos = 0usize;
    while bytes.len() - pos >= HEADER_LEN {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap());
        let start = pos + HEADER_LEN;
        let Some(payload) = bytes.get(start..start + len) else { break };
        let corrupt = |detail: String| StoreError::CorruptLog {
            index: records.len(),
            offset: pos as u64,
            detail,
        };
        if crc32fast::hash(payload) != crc {
            return Err(corrupt("checksum mismatch".into()));
        }
        let record = serde_json::from_slice(payload).map_err(|e| corrupt(e.to_string()))?;
        records.push(record);
        pos = start + len;
    }
    Ok((records, pos))
}

/// What was on disk at open time.
#[derive(Debug)]
pub struct Recovered<S, R> {
    pub snapshot: Option<S>,
    pub records: Vec<R>,
    /// Bytes of torn tail that were discarded.
    pub truncated_bytes: u64,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    log: File,
    records_in_log: usize,
}

impl Store {
    /// Opens (creating if needed) the store in `dir`, discarding any torn
    /// tail so later appends follow the last intact record.
    pub fn open<S: DeserializeOwned, R: DeserializeOwned>(
        dir: &Path,
    ) -> Result<(Store, Recovered<S, R>), StoreError> {
        fs::create_dir_all(dir)?;
        let snapshot = match fs::read(dir.join(SNAPSHOT_FILE)) {
            Ok(bytes) => Some(serde_json::from_slice(&bytes).map_err(StoreError::Snapshot)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let path = dir.join(LOG_FILE);
        let mut log = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut bytes = Vec::new();
        log.read_to_end(&mut bytes)?;
        let (records, intact) = decode_records::<R>(&bytes)?;
        let truncated_bytes = (bytes.len() - intact) as u64;
        if truncated_bytes > 0 {
            log.set_len(intact as u64)?;
            log.sync_all()?;
        }
        let store = Store {
            dir: dir.to_path_buf(),
            log,
            records_in_log: records.len(),
        };
        Ok((
            store,
            Recovered {
                snapshot,
                records,
                truncated_bytes,
            },
        ))
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    pub fn records_in_log(&self) -> usize {
        self.records_in_log
    }

    /// Appends one record and syncs it to disk.
    pub fn append<R: Serialize>(&mut self, record: &R) -> io::Result<()> {
        self.log.write_all(&encode_record(record))?;
        self.log.sync_data()?;
        self.records_in_log += 1;
        Ok(())
    }

    /// Atomically replaces the snapshot, then empties the log. Records
    /// already covered by the snapshot are skipped on replay, so a crash
    /// between the two steps is harmless.
    pub fn write_snapshot<S: Serialize>(&mut self, snapshot: &S) -> io::Result<()> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&serde_json::to_vec(snapshot).expect("snapshot serializes"))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        self.log.set_len(0)?;
        self.log.sync_all()?;
        self.records_in_log = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_torn_tail() {
        let mut bytes = Vec::new();
        for i in 0..3u32 {
            bytes.extend(encode_record(&i));
        }
        let full = bytes.len();
        let (recs, intact) = decode_records::<u32>(&bytes).unwrap();
        assert_eq!((recs, intact), (vec![0, 1, 2], full));
        for cut in 1..full {
            let (recs, intact) = decode_records::<u32>(&bytes[..cut]).unwrap();
            assert!(intact <= cut);
            assert_eq!(recs, (0..recs.len() as u32).collect::<Vec<_>>());
        }
    }

    #[test]
    fn flipped_byte_is_corruption_with_index() {
        let mut bytes = Vec::new();
        for i in 0..3u32 {
            bytes.extend(encode_record(&i));
        }
        let second = encode_record(&0u32).len();
        bytes[second + HEADER_LEN] ^= 0x40;
        match decode_records::<u32>(&bytes) {
            Err(StoreError::CorruptLog { index, offset, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(offset, second as u64);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn open_discards_torn_tail_and_appends_after_it() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut store, rec) = Store::open::<(), u32>(dir.path()).unwrap();
            assert!(rec.records.is_empty() && rec.snapshot.is_none());
            store.append(&1u32).unwrap();
            store.append(&2u32).unwrap();
        }
        let path = dir.path().join(LOG_FILE);
        let len = fs::metadata(&path).unwrap().len();
        OpenOptions::new().write(true).open(&path).unwrap().set_len(len - 3).unwrap();
        {
            let (mut store, rec) = Store::open::<(), u32>(dir.path()).unwrap();
            assert_eq!(rec.records, vec![1]);
            assert!(rec.truncated_bytes > 0);
            store.append(&3u32).unwrap();
        }
        let (_, rec) = Store::open::<(), u32>(dir.path()).unwrap();
        assert_eq!(rec.records, vec![1, 3]);
    }

    #[test]
    fn snapshot_resets_log() {
        let dir = tempfile::tempdir().unwrap();
        let (mut store, _) = Store::open::<Vec<u32>, u32>(dir.path()).unwrap();
        store.append(&1u32).unwrap();
        store.write_snapshot(&vec![1u32]).unwrap();
        store.append(&2u32).unwrap();
        drop(store);
        let (_, rec) = Store::open::<Vec<u32>, u32>(dir.path()).unwrap();
        assert_eq!(rec.snapshot, Some(vec![1]));
        assert_eq!(rec.records, vec![2]);
    }
}
