//! Trace files.
//!
//! Text (canonical, one record per line):
//!
//! ```text
//! #tierlab-trace v1 page_size=4096
//! A <id> <size> <frame,frame,...>
//! F <id>
//! X <id> <offset>
//! ```
//!
//! Frames are decimal integers, innermost first; an empty frame list is
//! written as `-`. Blank lines and further `#` lines are ignored.
//!
//! Binary: magic `TLT1`, page size as u64, then records, all little-endian.
//! Each record starts with a tag byte: `0` alloc (id u64, size u64,
//! frame count u32, frames u64...), `1` free (id u64), `2` access
//! (id u64, offset u64).

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EventKind, Trace, TraceBuilder};
use crate::allocator::{AllocationContext, ObjectId};
use crate::error::TraceError;

const HEADER_PREFIX: &str = "#tierlab-trace v1 page_size=";
const MAGIC: &[u8; 4] = b"TLT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Text,
    Binary,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TraceError + '_ {
    move |source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_trace(trace: &Trace, path: &Path, format: TraceFormat) -> Result<(), TraceError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    match format {
        TraceFormat::Text => write_trace_text(trace, &mut w),
        TraceFormat::Binary => write_trace_binary(trace, &mut w),
    }
    .and_then(|()| w.flush())
    .map_err(io_err(path))
}

/// Reads a trace, detecting the format from the first bytes.
pub fn read_trace(path: &Path) -> Result<Trace, TraceError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let head = r.fill_buf().map_err(io_err(path))?;
    if head.starts_with(MAGIC) {
        read_trace_binary(&mut r)
    } else {
        read_trace_text(r)
    }
}

pub fn write_trace_text<W: Write>(trace: &Trace, w: &mut W) -> io::Result<()> {
    writeln!(w, "{HEADER_PREFIX}{}", trace.page_size())?;
    for e in trace.events() {
        match e.kind {
            EventKind::Alloc { id, size, context } => {
                write!(w, "A {} {} ", id.0, size)?;
                let frames = &trace.context(context).frames;
                if frames.is_empty() {
                    w.write_all(b"-")?;
                }
                for (i, f) in frames.iter().enumerate() {
                    if i > 0 {
                        w.write_all(b",")?;
                    }
                    write!(w, "{f}")?;
                }
                w.write_all(b"\n")?;
            }
            EventKind::Free { id } => writeln!(w, "F {}", id.0)?,
            EventKind::Access { id, offset } => writeln!(w, "X {} {}", id.0, offset)?,
        }
    }
    Ok(())
}

fn parse_u64(field: Option<&str>, what: &str, line: usize) -> Result<u64, TraceError> {
    let s = field.ok_or_else(|| TraceError::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    s.parse().map_err(|_| TraceError::Parse {
        line,
        msg: format!("bad {what} {s:?}"),
    })
}

/// Parses the text format. Line numbers in errors are 1-based.
pub fn read_trace_text<R: BufRead>(r: R) -> Result<Trace, TraceError> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| TraceError::Parse {
            line: 1,
            msg: e.to_string(),
        })?,
        None => {
            return Err(TraceError::Parse {
                line: 1,
                msg: "empty file: missing header".into(),
            })
        }
    };
    let page_size = header
        .trim_end()
        .strip_prefix(HEADER_PREFIX)
        .and_then(|s| s.parse::<u64>().ok())
        .filter(|&p| p > 0)
        .ok_or_else(|| TraceError::Parse {
            line: 1,
            msg: format!("bad header {header:?}, expected \"{HEADER_PREFIX}<bytes>\""),
        })?;

    let mut b = TraceBuilder::new(page_size);
    let mut frames = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let l = l.map_err(|e| TraceError::Parse {
            line,
            msg: e.to_string(),
        })?;
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut f = l.split_ascii_whitespace();
        let kind = f.next().expect("non-empty line");
        match kind {
            "A" => {
                let id = parse_u64(f.next(), "object id", line)?;
                let size = parse_u64(f.next(), "size", line)?;
                let list = f.next().ok_or_else(|| TraceError::Parse {
                    line,
                    msg: "missing frame list".into(),
                })?;
                frames.clear();
                if list != "-" {
                    for fr in list.split(',') {
                        frames.push(parse_u64(Some(fr), "frame", line)?);
                    }
                }
                b.alloc(ObjectId(id), size, &AllocationContext::new(frames.clone()));
            }
            "F" => b.free(ObjectId(parse_u64(f.next(), "object id", line)?)),
            "X" => {
                let id = parse_u64(f.next(), "object id", line)?;
                let offset = parse_u64(f.next(), "offset", line)?;
                b.access(ObjectId(id), offset);
            }
            other => {
                return Err(TraceError::Parse {
                    line,
                    msg: format!("unknown record kind {other:?}"),
                })
            }
        }
        if let Some(extra) = f.next() {
            return Err(TraceError::Parse {
                line,
                msg: format!("trailing field {extra:?}"),
            });
        }
    }
    Ok(b.finish())
}

pub fn write_trace_binary<W: Write>(trace: &Trace, w: &mut W) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&trace.page_size().to_le_bytes())?;
    for e in trace.events() {
        match e.kind {
            EventKind::Alloc { id, size, context } => {
                let frames = &trace.context(context).frames;
                w.write_all(&[0])?;
                w.write_all(&id.0.to_le_bytes())?;
                w.write_all(&size.to_le_bytes())?;
                w.write_all(&(frames.len() as u32).to_le_bytes())?;
                for f in frames {
                    w.write_all(&f.to_le_bytes())?;
                }
            }
            EventKind::Free { id } => {
                w.write_all(&[1])?;
                w.write_all(&id.0.to_le_bytes())?;
            }
            EventKind::Access { id, offset } => {
                w.write_all(&[2])?;
                w.write_all(&id.0.to_le_bytes())?;
                w.write_all(&offset.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

struct BinReader<R> {
    r: R,
    record: u64,
}

impl<R: Read> BinReader<R> {
    fn u64(&mut self) -> Result<u64, TraceError> {
        let mut buf = [0u8; 8];
        self.r.read_exact(&mut buf).map_err(|e| self.err(e))?;
        Ok(u64::from_le_bytes(buf))
    }

    fn u32(&mut self) -> Result<u32, TraceError> {
        let mut buf = [0u8; 4];
        self.r.read_exact(&mut buf).map_err(|e| self.err(e))?;
        Ok(u32::from_le_bytes(buf))
    }

    fn err(&self, e: io::Error) -> TraceError {
        TraceError::Binary(format!("record {}: {e}", self.record))
    }
}

pub fn read_trace_binary<R: Read>(r: &mut R) -> Result<Trace, TraceError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| TraceError::Binary(format!("missing magic: {e}")))?;
    if &magic != MAGIC {
        return Err(TraceError::Binary(format!("bad magic {magic:?}")));
    }
    let mut br = BinReader { r, record: 0 };
    let page_size = br.u64()?;
    if page_size == 0 {
        return Err(TraceError::Binary("page size 0".into()));
    }
    let mut b = TraceBuilder::new(page_size);
    loop {
        let mut tag = [0u8; 1];
        match br.r.read(&mut tag) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(br.err(e)),
        }
        match tag[0] {
            0 => {
                let id = br.u64()?;
                let size = br.u64()?;
                let n = br.u32()?;
                let frames = (0..n).map(|_| br.u64()).collect::<Result<Vec<_>, _>>()?;
                b.alloc(ObjectId(id), size, &AllocationContext::new(frames));
            }
            1 => b.free(ObjectId(br.u64()?)),
            2 => {
                let id = br.u64()?;
                let offset = br.u64()?;
                b.access(ObjectId(id), offset);
            }
            t => return Err(TraceError::Binary(format!("record {}: unknown tag {t}", br.record))),
        }
        br.record += 1;
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate, WorkloadSpec};

    fn text_round_trip(t: &Trace) -> Trace {
        let mut buf = Vec::new();
        write_trace_text(t, &mut buf).unwrap();
        read_trace_text(&buf[..]).unwrap()
    }

    #[test]
    fn round_trips() {
        let t = generate(&WorkloadSpec::small_object_skew(200, 500).with_seed(1)).unwrap();
        assert_eq!(text_round_trip(&t), t);
        let mut buf = Vec::new();
        write_trace_binary(&t, &mut buf).unwrap();
        assert_eq!(read_trace_binary(&mut &buf[..]).unwrap(), t);
    }

    #[test]
    fn empty_trace_is_just_a_header() {
        let t = TraceBuilder::new(4096).finish();
        let mut buf = Vec::new();
        write_trace_text(&t, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "#tierlab-trace v1 page_size=4096\n");
        assert_eq!(text_round_trip(&t), t);
    }

    #[test]
    fn corrupt_kind_reports_its_line() {
        let src = "#tierlab-trace v1 page_size=4096\nA 0 64 1,2\nX 0 8\nQ 0 8\n";
        match read_trace_text(src.as_bytes()) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let bad_header = "#not-a-trace\n";
        assert!(matches!(
            read_trace_text(bad_header.as_bytes()),
            Err(TraceError::Parse { line: 1, .. })
        ));
        let missing = "#tierlab-trace v1 page_size=4096\nX 0\n";
        assert!(matches!(
            read_trace_text(missing.as_bytes()),
            Err(TraceError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let t = generate(&WorkloadSpec::stable_zipf(10, 10, 1.0)).unwrap();
        let mut buf = Vec::new();
        write_trace_binary(&t, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_trace_binary(&mut &buf[..]), Err(TraceError::Binary(_))));
    }
}
