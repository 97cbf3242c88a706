//! Record-aligned chunking of byte streams.
//!
//! A chunk owns every record whose first byte falls inside one
//! `target_bytes`-aligned window of the stream: the chunk starting at
//! absolute offset `s` owns the records that start in
//! `[s, (s / target + 1) * target)`. The record straddling the window end is
//! finished in the same chunk, so a chunk may run past its window. Windows
//! that contain no record start produce no chunk.
//!
//! Because ownership depends only on absolute offsets, a reader that starts
//! at any record boundary yields the same chunks as one that started at
//! offset 0. The workers-read mode of [`crate::chunk_apply`] relies on this.

use std::io::{self, Read, Seek, SeekFrom};

use memchr::{memchr, memrchr};

use crate::error::{Error, Result};

pub const DEFAULT_TARGET_BYTES: usize = 32 << 20;

/// Bytes read at a time while finishing a record that straddles the window.
const EXTEND_BYTES: usize = 64 << 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkerConfig {
    /// Soft chunk size.
    pub target_bytes: usize,
    /// Longest record accepted before giving up with [`Error::RecordTooLarge`].
    pub hard_cap_bytes: usize,
    pub record_sep: u8,
}

impl Default for ChunkerConfig {
    fn default() -> Self {
        Self::with_target(DEFAULT_TARGET_BYTES)
    }
}

impl ChunkerConfig {
    /// Newline-separated records, hard cap at eight times the target.
    pub fn with_target(target_bytes: usize) -> Self {
        Self {
            target_bytes,
            hard_cap_bytes: target_bytes.saturating_mul(8),
            record_sep: b'\n',
        }
    }

    pub fn with_hard_cap(mut self, hard_cap_bytes: usize) -> Self {
        self.hard_cap_bytes = hard_cap_bytes;
        self
    }

    pub fn with_record_sep(mut self, sep: u8) -> Self {
        self.record_sep = sep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_bytes == 0 {
            return Err(Error::Config("target_bytes must be positive".into()));
        }
        if self.hard_cap_bytes < self.target_bytes {
            return Err(Error::Config(format!(
                "hard_cap_bytes ({}) is below target_bytes ({})",
                self.hard_cap_bytes, self.target_bytes
            )));
        }
        Ok(())
    }
}

/// A run of whole records.
///
/// `data` ends with the record separator unless this is the last chunk of a
/// stream that lacks a trailing separator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub data: Vec<u8>,
    pub seq: u64,
    pub is_last: bool,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Pulls record-aligned [`Chunk`]s out of any reader.
pub struct Chunker<R> {
    source: R,
    cfg: ChunkerConfig,
    /// Bytes already read that belong to the next chunk.
    carry: Vec<u8>,
    /// Absolute stream offset of `carry[0]`.
    offset: u64,
    seq: u64,
    eof: bool,
    done: bool,
}

impl<R: Read> Chunker<R> {
    pub fn new(source: R, cfg: ChunkerConfig) -> Result<Self> {
        Self::starting_at(source, cfg, 0)
    }

    /// Chunker for a reader positioned at absolute offset `offset`, which must
    /// be a record boundary. Window alignment is computed from `offset`.
    pub fn starting_at(source: R, cfg: ChunkerConfig, offset: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            source,
            cfg,
            carry: Vec::new(),
            offset,
            seq: 0,
            eof: false,
            done: false,
        })
    }

    pub fn config(&self) -> &ChunkerConfig {
        &self.cfg
    }

    /// Absolute offset where the next chunk starts.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn read_more(&mut self, buf: &mut Vec<u8>, n: usize) -> io::Result<usize> {
        if self.eof || n == 0 {
            return Ok(0);
        }
        buf.reserve(n);
        let got = (&mut self.source).take(n as u64).read_to_end(buf)?;
        if got < n {
            self.eof = true;
        }
        Ok(got)
    }

    /// Returns the next chunk, or `None` once the stream is exhausted.
    pub fn next_chunk(&mut self) -> Result<Option<Chunk>> {
        if self.done {
            return Ok(None);
        }
        let target = self.cfg.target_bytes as u64;
        let sep = self.cfg.record_sep;
        let start = self.offset;
        let window = ((start / target + 1) * target - start) as usize;

        let mut buf = std::mem::take(&mut self.carry);
        if buf.len() < window {
            let missing = window - buf.len();
            self.read_more(&mut buf, missing)?;
        }
        if buf.is_empty() {
            self.done = true;
            return Ok(None);
        }

        let cut = if buf.len() < window {
            // EOF inside the window: everything left belongs to this chunk.
            let record_start = memrchr(sep, &buf[..buf.len() - 1]).map_or(0, |p| p + 1);
            self.check_record(record_start, buf.len())?;
            buf.len()
        } else {
            // The last owned record is the one holding byte `window - 1`.
            let record_start = memrchr(sep, &buf[..window - 1]).map_or(0, |p| p + 1);
            let mut from = window - 1;
            loop {
                if let Some(p) = memchr(sep, &buf[from..]) {
                    let cut = from + p + 1;
                    self.check_record(record_start, cut)?;
                    break cut;
                }
                self.check_record(record_start, buf.len())?;
                if self.eof {
                    break buf.len();
                }
                from = buf.len();
                let step = self.cfg.target_bytes.clamp(1, EXTEND_BYTES);
                self.read_more(&mut buf, step)?;
            }
        };

        self.carry = buf.split_off(cut);
        self.offset += cut as u64;
        if self.carry.is_empty() && !self.eof {
            // Probe so the final chunk can be flagged.
            let mut carry = std::mem::take(&mut self.carry);
            let step = self.cfg.target_bytes.clamp(1, EXTEND_BYTES);
            self.read_more(&mut carry, step)?;
            self.carry = carry;
        }
        let is_last = self.eof && self.carry.is_empty();
        self.done = is_last;

        let chunk = Chunk {
            data: buf,
            seq: self.seq,
            is_last,
        };
        self.seq += 1;
        Ok(Some(chunk))
    }

    fn check_record(&self, record_start: usize, record_end: usize) -> Result<()> {
        if record_end - record_start > self.cfg.hard_cap_bytes {
            return Err(Error::RecordTooLarge {
                offset: self.offset + record_start as u64,
                limit: self.cfg.hard_cap_bytes,
            });
        }
        Ok(())
    }
}

impl<R: Read> Iterator for Chunker<R> {
    type Item = Result<Chunk>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_chunk() {
            Ok(Some(chunk)) => Some(Ok(chunk)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Splits `[0, file_size)` into `n_splits` contiguous ranges of near-equal
/// length, returned as `(offset, length)`. The first `file_size % n_splits`
/// ranges are one byte longer.
pub fn byte_range_splits(file_size: u64, n_splits: usize) -> Vec<(u64, u64)> {
    let n = n_splits.max(1) as u64;
    let base = file_size / n;
    let extra = file_size % n;
    let mut offset = 0;
    (0..n)
        .map(|i| {
            let len = base + u64::from(i < extra);
            let range = (offset, len);
            offset += len;
            range
        })
        .collect()
}

/// Offset of the first record that starts at or after `pos`.
///
/// A record starts at `pos` when `pos` is 0 or the byte before it is the
/// separator. Returns `file_size` when no record starts at or after `pos`.
pub fn record_start_at_or_after<R: Read + Seek>(
    file: &mut R,
    pos: u64,
    file_size: u64,
    sep: u8,
) -> io::Result<u64> {
    if pos == 0 {
        return Ok(0);
    }
    if pos >= file_size {
        return Ok(file_size);
    }
    file.seek(SeekFrom::Start(pos - 1))?;
    let mut scan = pos - 1;
    let mut block = vec![0u8; 8 << 10];
    loop {
        let n = file.read(&mut block)?;
        if n == 0 {
            return Ok(file_size);
        }
        if let Some(p) = memchr(sep, &block[..n]) {
            return Ok(scan + p as u64 + 1);
        }
        scan += n as u64;
    }
}
