//! JSONL trace files: a header record followed by one kernel per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KernelDescriptor, Trace};
use crate::error::{CopaError, Result};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub name: String,
    pub batch_size: u64,
    pub line_size: u32,
    pub schema_version: u32,
}

pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> Result<()> {
    let header = TraceHeader {
        name: trace.name.clone(),
        batch_size: trace.batch_size,
        line_size: trace.line_size,
        schema_version: TRACE_SCHEMA_VERSION,
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for k in &trace.kernels {
        serde_json::to_writer(&mut out, k).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Trace> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let parse_err = |line: usize, message: String| CopaError::Parse { path: format!("line {}", line + 1), message };
    let header: TraceHeader = loop {
        match lines.next() {
            Some((n, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| parse_err(n, format!("bad trace header: {e}")))?;
            }
            None => return Err(parse_err(0, "empty trace file".into())),
        }
    };
    if header.schema_version != TRACE_SCHEMA_VERSION {
        return Err(parse_err(
            0,
            format!("unsupported trace schema version {} (expected {TRACE_SCHEMA_VERSION})", header.schema_version),
        ));
    }
    let mut kernels = Vec::new();
    for (n, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let kernel: KernelDescriptor = serde_json::from_str(&line).map_err(|e| parse_err(n, e.to_string()))?;
        kernels.push(kernel);
    }
    let trace = Trace::new(header.name, header.batch_size, header.line_size, kernels);
    trace.check()?;
    Ok(trace)
}

pub fn write_trace_file(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Trace> {
    read_trace(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::gen_hpc_trace;

    #[test]
    fn round_trip() {
        let t = gen_hpc_trace(1 << 20, 0.5, 2.0, 3, 9).unwrap();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"schema_version\":1"));
        assert_eq!(read_trace(&buf[..]).unwrap(), t);
    }

    #[test]
    fn rejects_future_schema() {
        let text = "{\"name\":\"x\",\"batch_size\":1,\"line_size\":128,\"schema_version\":99}\n";
        assert!(read_trace(text.as_bytes()).is_err());
    }

    #[test]
    fn bad_kernel_line_names_its_line() {
        let text = "{\"name\":\"x\",\"batch_size\":1,\"line_size\":128,\"schema_version\":1}\n{\"kernel_id\":\"zero\"}\n";
        let err = read_trace(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
