//! Memory traces: the request record, a line-oriented text format with
//! transparent gzip support, and synthetic workload generators.
//!
//! One request per line:
//!
//! ```text
//! <issue cycle> <R|W> <hex byte address> [<hex payload tag>]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

mod bundled;
mod synthetic;

pub use bundled::{bundled_traces, BundledTrace};
pub use synthetic::{generate_synthetic, SyntheticKind, SyntheticParams};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::bufread::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::dram::Op;
use crate::{Error, Result};

/// One memory request. The payload tag stands in for the data written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryRequest {
    pub issue_cycle: u64,
    pub op: Op,
    pub address: u64,
    pub tag: u64,
}

impl MemoryRequest {
    pub fn new(issue_cycle: u64, op: Op, address: u64, tag: u64) -> Self {
        Self {
            issue_cycle,
            op,
            address,
            tag,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Tag assigned to a line that carries none.
pub fn default_tag(address: u64, line: usize) -> u64 {
    splitmix64(address ^ splitmix64(line as u64))
}

fn parse_hex(s: &str) -> Option<u64> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(digits, 16).ok()
}

/// Parses one trace line. Returns `None` for blank and comment lines.
pub fn parse_line(line: &str, lineno: usize) -> Result<Option<MemoryRequest>> {
    let t = line.trim();
    if t.is_empty() || t.starts_with('#') {
        return Ok(None);
    }
    let err = |msg: String| Error::Parse { line: lineno, msg };
    let f: Vec<&str> = t.split_whitespace().collect();
    if !(3..=4).contains(&f.len()) {
        return Err(err(format!("expected 3 or 4 fields, found {}", f.len())));
    }
    let issue_cycle = f[0]
        .parse::<u64>()
        .map_err(|_| err(format!("bad cycle '{}'", f[0])))?;
    let op = match f[1] {
        "R" | "r" => Op::Read,
        "W" | "w" => Op::Write,
        o => return Err(err(format!("bad operation '{o}', expected R or W"))),
    };
    let address = parse_hex(f[2]).ok_or_else(|| err(format!("bad address '{}'", f[2])))?;
    let tag = match f.get(3) {
        Some(s) => parse_hex(s).ok_or_else(|| err(format!("bad payload tag '{s}'")))?,
        None => default_tag(address, lineno),
    };
    Ok(Some(MemoryRequest::new(issue_cycle, op, address, tag)))
}

/// Streaming parser that also enforces non-decreasing issue cycles.
pub struct TraceReader<R> {
    inner: R,
    line: usize,
    prev: Option<u64>,
    buf: String,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            prev: None,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<MemoryRequest>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            match parse_line(&self.buf, self.line) {
                Ok(None) => continue,
                Ok(Some(r)) => {
                    if let Some(prev) = self.prev {
                        if r.issue_cycle < prev {
                            return Some(Err(Error::Order {
                                line: self.line,
                                cycle: r.issue_cycle,
                                prev,
                            }));
                        }
                    }
                    self.prev = Some(r.issue_cycle);
                    return Some(Ok(r));
                }
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

pub fn parse_trace<R: BufRead>(r: R) -> Result<Vec<MemoryRequest>> {
    TraceReader::new(r).collect()
}

/// Opens a trace file, decompressing it if it starts with the gzip magic.
pub fn open_trace(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut f = BufReader::new(File::open(path)?);
    let gz = f.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    Ok(if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(f)))
    } else {
        Box::new(f)
    })
}

pub fn read_trace_file(path: &Path) -> Result<Vec<MemoryRequest>> {
    parse_trace(open_trace(path)?)
}

pub fn format_request(r: &MemoryRequest) -> String {
    let op = match r.op {
        Op::Read => 'R',
        Op::Write => 'W',
    };
    format!("{} {} {:#x} {:#x}", r.issue_cycle, op, r.address, r.tag)
}

pub fn emit_trace<W: Write>(mut w: W, requests: &[MemoryRequest]) -> Result<()> {
    for r in requests {
        writeln!(w, "{}", format_request(r))?;
    }
    Ok(())
}

/// Writes a trace; a `.gz` extension selects gzip compression.
pub fn write_trace_file(path: &Path, requests: &[MemoryRequest]) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        let mut gz = GzEncoder::new(f, Compression::best());
        emit_trace(&mut gz, requests)?;
        gz.finish()?.flush()?;
    } else {
        let mut f = f;
        emit_trace(&mut f, requests)?;
        f.flush()?;
    }
    Ok(())
}

/// FNV-1a fingerprint of a trace's records, used to check that two
/// reports describe the same workload.
pub fn fingerprint(requests: &[MemoryRequest]) -> u64 {
    let mut h = Fnv::new();
    for r in requests {
        h.write(&r.issue_cycle.to_le_bytes());
        h.write(&[matches!(r.op, Op::Write) as u8]);
        h.write(&r.address.to_le_bytes());
        h.write(&r.tag.to_le_bytes());
    }
    h.finish()
}

/// 64-bit FNV-1a.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
