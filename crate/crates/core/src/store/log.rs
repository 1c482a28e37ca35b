use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{storage, EntryVersion, StoreError};
use crate::canonical;
use crate::model::Kind;
use crate::schema::SpecVersion;

pub const LOG_FILE: &str = "events.log";
pub const ENTRIES_DIR: &str = "entries";

/// When writes reach stable storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyncMode {
    /// Every payload and log record is fsynced before the call returns.
    #[default]
    Always,
    /// Nothing is fsynced until [`super::Store::sync`]. Survives a killed
    /// process but not a power loss; meant for bulk imports.
    Deferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub(super) enum Operation {
    Publish,
    Archive,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct LogRecord {
    pub seq: u64,
    pub op: Operation,
    pub id: String,
    pub kind: Kind,
    pub version: EntryVersion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_version: Option<SpecVersion>,
    pub published_at: String,
}

pub(super) fn payload_path(root: &Path, kind: Kind, id: &str, version: EntryVersion) -> PathBuf {
    root.join(ENTRIES_DIR)
        .join(kind.as_str())
        .join(id)
        .join(format!("{version}.json"))
}

struct Disk {
    root: PathBuf,
    log: File,
    len: u64,
    sync: SyncMode,
}

pub(super) struct LogWriter {
    disk: Option<Disk>,
    next_seq: u64,
}

impl LogWriter {
    pub fn memory() -> Self {
        LogWriter {
            disk: None,
            next_seq: 1,
        }
    }

    /// Opens the log under `root`, returning the writer and every complete
    /// record. A partial last line (a write cut short by a crash) is
    /// truncated away.
    pub fn open(root: &Path, sync: SyncMode) -> Result<(Self, Vec<LogRecord>), StoreError> {
        fs::create_dir_all(root.join(ENTRIES_DIR)).map_err(|e| storage(root.display(), e))?;
        let path = root.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(|e| storage(path.display(), e))?;
        // One process per registry directory; released when the file closes.
        file.try_lock().map_err(|e| match e {
            fs::TryLockError::WouldBlock => storage(path.display(), "in use by another process"),
            fs::TryLockError::Error(e) => storage(path.display(), e),
        })?;

        let mut records = Vec::new();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&file);
        let mut line = Vec::new();
        let mut line_no = 0usize;
        loop {
            line.clear();
            let n = reader.read_until(b'\n', &mut line).map_err(|e| storage(path.display(), e))?;
            if n == 0 {
                break;
            }
            if line.last() != Some(&b'\n') {
                tracing::warn!(bytes = n, "truncating incomplete event log tail");
                break;
            }
            line_no += 1;
            let record: LogRecord = serde_json::from_slice(&line[..n - 1])
                .map_err(|e| storage(format!("{} line {line_no}", path.display()), e))?;
            if let Some(prev) = records.last().map(|r: &LogRecord| r.seq) {
                if record.seq <= prev {
                    return Err(storage(
                        format!("{} line {line_no}", path.display()),
                        "sequence numbers out of order",
                    ));
                }
            }
            records.push(record);
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata().map_err(|e| storage(path.display(), e))?.len() != good_len {
            file.set_len(good_len).map_err(|e| storage(path.display(), e))?;
            file.sync_all().map_err(|e| storage(path.display(), e))?;
        }
        file.seek(SeekFrom::End(0)).map_err(|e| storage(path.display(), e))?;
        let next_seq = records.last().map_or(1, |r| r.seq + 1);
        let writer = LogWriter {
            disk: Some(Disk {
                root: root.to_path_buf(),
                log: file,
                len: good_len,
                sync,
            }),
            next_seq,
        };
        Ok((writer, records))
    }

    /// Writes a payload file atomically (temp file, then rename).
    pub fn write_payload(
        &mut self,
        kind: Kind,
        id: &str,
        version: EntryVersion,
        bytes: &[u8],
    ) -> Result<(), StoreError> {
        let Some(disk) = &self.disk else {
            return Ok(());
        };
        let path = payload_path(&disk.root, kind, id, version);
        let dir = path.parent().expect("payload paths have a parent");
        fs::create_dir_all(dir).map_err(|e| storage(dir.display(), e))?;
        let tmp = dir.join(format!(".{version}.json.tmp"));
        let io = |e| storage(path.display(), e);
        let mut f = File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        if disk.sync == SyncMode::Always {
            f.sync_all().map_err(io)?;
        }
        drop(f);
        fs::rename(&tmp, &path).map_err(io)?;
        if disk.sync == SyncMode::Always {
            File::open(dir).and_then(|d| d.sync_all()).map_err(io)?;
        }
        Ok(())
    }

    /// Appends `record` with the next sequence number.
    pub fn append(&mut self, mut record: LogRecord) -> Result<u64, StoreError> {
        record.seq = self.next_seq;
        if let Some(disk) = &mut self.disk {
            let mut line = canonical::encode(&record);
            line.push(b'\n');
            let io = |e| storage(LOG_FILE, e);
            if let Err(e) = disk.log.write_all(&line) {
                // Never leave a partial line for later records to follow.
                let _ = disk.log.set_len(disk.len);
                return Err(io(e));
            }
            disk.len += line.len() as u64;
            if disk.sync == SyncMode::Always {
                disk.log.sync_data().map_err(io)?;
            }
        }
        self.next_seq += 1;
        Ok(record.seq)
    }

    pub fn sync(&mut self) -> Result<(), StoreError> {
        if let Some(disk) = &mut self.disk {
            disk.log.sync_all().map_err(|e| storage(LOG_FILE, e))?;
        }
        Ok(())
    }
}
