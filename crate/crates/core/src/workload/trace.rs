//! Plain-text traces: one `OP ADDRESS_HEX FUNCTION_ID` record per line, where
//! OP is `L`, `S` or `C`. Blank lines and anything after `#` are ignored.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::host::{AccessRecord, MemOp};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: address {address:#x} is not 64-byte aligned")]
    Alignment { line: usize, address: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_line(line: usize, text: &str) -> Result<Option<AccessRecord>, TraceError> {
    let body = text.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let bad = |reason: String| TraceError::Parse { line, reason };
    let fields: Vec<&str> = body.split_whitespace().collect();
    let [op, addr, func] = fields[..] else {
        return Err(bad(format!("expected 3 fields, found {}", fields.len())));
    };
    let op = match op {
        "L" => MemOp::Load,
        "S" => MemOp::Store,
        "C" => MemOp::Compute,
        other => return Err(bad(format!("unknown op `{other}`"))),
    };
    let hex = addr
        .strip_prefix("0x")
        .or_else(|| addr.strip_prefix("0X"))
        .ok_or_else(|| bad(format!("address `{addr}` lacks a 0x prefix")))?;
    let address = u64::from_str_radix(hex, 16).map_err(|e| bad(format!("address `{addr}`: {e}")))?;
    let function_id = func
        .parse::<u32>()
        .map_err(|e| bad(format!("function id `{func}`: {e}")))?;
    if op != MemOp::Compute && address % 64 != 0 {
        return Err(TraceError::Alignment { line, address });
    }
    Ok(Some(AccessRecord {
        op,
        address,
        function_id,
        core: 0,
    }))
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<AccessRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        if let Some(rec) = parse_line(i + 1, &line?)? {
            out.push(rec);
        }
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut w: W, records: &[AccessRecord]) -> io::Result<()> {
    for r in records {
        let op = match r.op {
            MemOp::Load => 'L',
            MemOp::Store => 'S',
            MemOp::Compute => 'C',
        };
        writeln!(w, "{op} {:#x} {}", r.address, r.function_id)?;
    }
    w.flush()
}

pub fn load_trace(path: &Path) -> Result<Vec<AccessRecord>, TraceError> {
    read_trace(BufReader::new(File::open(path)?))
}

pub fn write_trace(path: &Path, records: &[AccessRecord]) -> io::Result<()> {
    write_records(BufWriter::new(File::create(path)?), records)
}
