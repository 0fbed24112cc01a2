//! One-writer, many-reader versioned parameter pool.
//!
//! The learner publishes immutable snapshots; workers fetch whichever is
//! current. Publishing swaps a pointer, so neither side ever blocks the
//! other and a reader can never observe half of a snapshot.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use thiserror::Error;

use crate::nets::checkpoint::Checkpoint;
use crate::nets::{Layout, NetError};

/// Attempts made by [`ParamReader::fetch`] before giving up on a snapshot
/// whose checksum does not validate.
pub const FETCH_ATTEMPTS: usize = 3;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter vector has length {got}, layout needs {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("a writer is already registered")]
    SecondWriter,
    #[error("snapshot {version} failed checksum validation {attempts} times")]
    ChecksumFailure { version: u64, attempts: usize },
    #[error("unknown reader {0}")]
    UnknownReader(usize),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot {
    pub version: u64,
    pub data: Vec<f64>,
    /// CRC-32 of `data` as little-endian bytes.
    pub checksum: u32,
}

pub fn checksum(data: &[f64]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for x in data {
        h.update(&x.to_le_bytes());
    }
    h.finalize()
}

impl ParamSnapshot {
    pub fn new(version: u64, data: Vec<f64>) -> Self {
        let checksum = checksum(&data);
        Self { version, data, checksum }
    }

    pub fn is_valid(&self) -> bool {
        checksum(&self.data) == self.checksum
    }

    pub fn to_checkpoint(&self, layout: Layout) -> Checkpoint {
        Checkpoint { layout, version: self.version, params: self.data.clone() }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Self {
        Self::new(ck.version, ck.params.clone())
    }
}

#[derive(Debug)]
pub struct SharedParamPool {
    layout: Layout,
    current: ArcSwap<ParamSnapshot>,
    writer_taken: AtomicBool,
    readers: Mutex<Vec<Arc<AtomicU64>>>,
}

impl SharedParamPool {
    /// Pool holding `initial` as version 0.
    pub fn new(layout: Layout, initial: Vec<f64>) -> Result<Arc<Self>, ParamError> {
        check_len(&layout, &initial)?;
        Ok(Arc::new(Self {
            layout,
            current: ArcSwap::from_pointee(ParamSnapshot::new(0, initial)),
            writer_taken: AtomicBool::new(false),
            readers: Mutex::new(Vec::new()),
        }))
    }

    /// Restores a pool from a checkpoint, keeping its version.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Arc<Self>, ParamError> {
        let pool = Self::new(ck.layout, ck.params.clone())?;
        pool.current.store(Arc::new(ParamSnapshot::from_checkpoint(ck)));
        Ok(pool)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn latest_version(&self) -> u64 {
        self.current.load().version
    }

    /// Current snapshot without reader bookkeeping.
    pub fn peek(&self) -> Arc<ParamSnapshot> {
        self.current.load_full()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.peek().to_checkpoint(self.layout)
    }

    pub fn writer(self: &Arc<Self>) -> Result<ParamWriter, ParamError> {
        if self.writer_taken.swap(true, Ordering::AcqRel) {
            return Err(ParamError::SecondWriter);
        }
        Ok(ParamWriter { pool: self.clone() })
    }

    pub fn reader(self: &Arc<Self>) -> ParamReader {
        let seen = Arc::new(AtomicU64::new(0));
        let mut readers = self.readers.lock().unwrap();
        readers.push(seen.clone());
        ParamReader { id: readers.len() - 1, pool: self.clone(), seen, last: None }
    }

    pub fn reader_count(&self) -> usize {
        self.readers.lock().unwrap().len()
    }

    /// Versions published since `reader_id` last fetched.
    pub fn staleness(&self, reader_id: usize) -> Result<u64, ParamError> {
        let seen = {
            let readers = self.readers.lock().unwrap();
            readers.get(reader_id).ok_or(ParamError::UnknownReader(reader_id))?.load(Ordering::Acquire)
        };
        Ok(self.latest_version().saturating_sub(seen))
    }

    #[cfg(test)]
    fn install_unchecked(&self, snap: ParamSnapshot) {
        self.current.store(Arc::new(snap));
    }
}

fn check_len(layout: &Layout, data: &[f64]) -> Result<(), ParamError> {
    let expected = layout.param_count();
    if data.len() != expected {
        return Err(ParamError::LengthMismatch { expected, got: data.len() });
    }
    Ok(())
}

/// The single publishing handle. Dropping it lets another writer register.
#[derive(Debug)]
pub struct ParamWriter {
    pool: Arc<SharedParamPool>,
}

impl ParamWriter {
    pub fn publish(&mut self, flat: &[f64]) -> Result<u64, ParamError> {
        check_len(&self.pool.layout, flat)?;
        let version = self.pool.current.load().version + 1;
        self.pool.current.store(Arc::new(ParamSnapshot::new(version, flat.to_vec())));
        Ok(version)
    }

    pub fn pool(&self) -> &Arc<SharedParamPool> {
        &self.pool
    }
}

impl Drop for ParamWriter {
    fn drop(&mut self) {
        self.pool.writer_taken.store(false, Ordering::Release);
    }
}

#[derive(Debug)]
pub struct ParamReader {
    id: usize,
    pool: Arc<SharedParamPool>,
    seen: Arc<AtomicU64>,
    last: Option<Arc<ParamSnapshot>>,
}

impl ParamReader {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Latest validated snapshot. Versions returned to one reader never go
    /// backwards.
    pub fn fetch(&mut self) -> Result<Arc<ParamSnapshot>, ParamError> {
        let mut version = 0;
        for _ in 0..FETCH_ATTEMPTS {
            let snap = self.pool.current.load_full();
            version = snap.version;
            if !snap.is_valid() {
                continue;
            }
            if let Some(last) = &self.last {
                if snap.version < last.version {
                    return Ok(last.clone());
                }
            }
            self.seen.store(snap.version, Ordering::Release);
            self.last = Some(snap.clone());
            return Ok(snap);
        }
        Err(ParamError::ChecksumFailure { version, attempts: FETCH_ATTEMPTS })
    }

    /// Version of the last successful fetch, 0 before any.
    pub fn last_version(&self) -> u64 {
        self.last.as_ref().map_or(0, |s| s.version)
    }

    pub fn staleness(&self) -> u64 {
        self.pool.latest_version().saturating_sub(self.last_version())
    }
}
