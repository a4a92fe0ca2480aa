//! NPY v1.0 container for dense little-endian f64 arrays, in C order.
//!
//! The writer reproduces the reference file layout byte for byte: magic
//! `\x93NUMPY`, version 1.0, a little-endian u16 header length, a Python
//! dict literal `{'descr': '<f8', 'fortran_order': False, 'shape': (…), }`
//! space-padded so the payload starts on a 64-byte boundary, a final
//! newline, then the raw C-order float payload. [`NpyWriter`] streams arrays
//! too large to hold in memory; [`read_npy`] parses exactly this dialect.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        dims => {
            let inner: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            format!("({})", inner.join(", "))
        }
    }
}

/// Full header bytes (magic through terminating newline) for a shape.
pub fn header_bytes(shape: &[usize]) -> Vec<u8> {
    let dict = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': {}, }}",
        shape_literal(shape)
    );
    // magic(6) + version(2) + len(2) + dict + padding + '\n', padded so the
    // total is a multiple of 64
    let prefix = MAGIC.len() + 2 + 2;
    let unpadded = prefix + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;
    assert!(header_len <= u16::MAX as usize, "npy header too long");

    let mut out = Vec::with_capacity(prefix + header_len);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[0x01, 0x00]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', padding));
    out.push(b'\n');
    out
}

/// Incremental writer: header first, then C-order chunks in storage order.
pub struct NpyWriter<W: Write> {
    sink: W,
    expected: u64,
    written: u64,
}

impl<W: Write> NpyWriter<W> {
    pub fn new(mut sink: W, shape: &[usize]) -> std::io::Result<Self> {
        let expected = shape.iter().map(|&d| d as u64).product();
        sink.write_all(&header_bytes(shape))?;
        Ok(NpyWriter { sink, expected, written: 0 })
    }

    /// Appends values in C order. Callers own the ordering; this type only
    /// enforces the total count.
    pub fn append(&mut self, values: &[f64]) -> std::io::Result<()> {
        self.written += values.len() as u64;
        assert!(
            self.written <= self.expected,
            "npy writer overflow: {} values into a {}-value array",
            self.written,
            self.expected
        );
        let mut buf = Vec::with_capacity(values.len() * 8);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.sink.write_all(&buf)
    }

    /// Flushes and verifies the array was fully written.
    pub fn finish(mut self) -> std::io::Result<()> {
        assert_eq!(
            self.written, self.expected,
            "npy writer finished early: {} of {} values",
            self.written, self.expected
        );
        self.sink.flush()
    }
}

/// Writes a complete array to `path` atomically (temp file + rename).
pub fn write_npy(path: &Path, shape: &[usize], values: &[f64]) -> Result<()> {
    let count: usize = shape.iter().product();
    if count != values.len() {
        return Err(Error::InvalidArgument(format!(
            "npy shape {shape:?} wants {count} values, got {}",
            values.len()
        )));
    }
    let tmp = path.with_extension("npy.tmp");
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut writer =
        NpyWriter::new(BufWriter::new(file), shape).map_err(|e| Error::io(&tmp, e))?;
    writer.append(values).map_err(|e| Error::io(&tmp, e))?;
    writer.finish().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a v1.0 `<f8` C-order file written by this module (or the reference
/// implementation). Anything else — other dtypes, Fortran order, format
/// v2/v3 — is a format error.
pub fn read_npy(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut reader = NpyReader::open(path)?;
    let count = reader.element_count();
    let values = reader.read_block(0, count)?;
    Ok((reader.shape, values))
}

/// Random-access reader: parses and validates the header once, then serves
/// element ranges on demand so multi-gigabyte tensors never need to fit in
/// memory.
pub struct NpyReader {
    file: File,
    path: std::path::PathBuf,
    shape: Vec<usize>,
    payload_start: u64,
}

impl NpyReader {
    pub fn open(path: &Path) -> Result<NpyReader> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::format(path, msg);

        let mut magic = [0u8; 8];
        file.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic[..6] != MAGIC {
            return Err(bad("not an NPY file (magic mismatch)"));
        }
        if magic[6] != 1 || magic[7] != 0 {
            return Err(bad("unsupported NPY version (only 1.0 is accepted)"));
        }
        let mut len_bytes = [0u8; 2];
        file.read_exact(&mut len_bytes).map_err(|e| Error::io(path, e))?;
        let header_len = u16::from_le_bytes(len_bytes) as usize;
        let mut header = vec![0u8; header_len];
        file.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
        let header = std::str::from_utf8(&header).map_err(|_| bad("header is not UTF-8"))?;

        let descr = dict_value(header, "descr").ok_or_else(|| bad("header missing 'descr'"))?;
        if descr != "'<f8'" {
            return Err(bad(&format!("unsupported dtype {descr}, want '<f8'")));
        }
        let order = dict_value(header, "fortran_order")
            .ok_or_else(|| bad("header missing 'fortran_order'"))?;
        if order != "False" {
            return Err(bad("fortran_order must be False"));
        }
        let shape_str = dict_value(header, "shape").ok_or_else(|| bad("header missing 'shape'"))?;
        let shape = parse_shape(&shape_str).ok_or_else(|| bad("unparseable shape tuple"))?;

        let payload_start = (8 + 2 + header_len) as u64;
        let count: u64 = shape.iter().map(|&d| d as u64).product();
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        if file_len != payload_start + count * 8 {
            return Err(bad(&format!(
                "payload is {} bytes, shape {shape:?} wants {}",
                file_len.saturating_sub(payload_start),
                count * 8
            )));
        }
        Ok(NpyReader { file, path: path.to_path_buf(), shape, payload_start })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }

    /// Reads `count` consecutive elements starting at flat C-order index
    /// `offset`.
    pub fn read_block(&mut self, offset: usize, count: usize) -> Result<Vec<f64>> {
        use std::io::{Seek, SeekFrom};
        if offset.checked_add(count).is_none_or(|end| end > self.element_count()) {
            return Err(Error::InvalidArgument(format!(
                "npy block [{offset}, {offset}+{count}) out of range for {} elements",
                self.element_count()
            )));
        }
        self.file
            .seek(SeekFrom::Start(self.payload_start + offset as u64 * 8))
            .map_err(|e| Error::io(&self.path, e))?;
        let mut payload = vec![0u8; count * 8];
        let mut reader = BufReader::new(&mut self.file);
        reader.read_exact(&mut payload).map_err(|e| Error::io(&self.path, e))?;
        Ok(payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Pulls the raw value text for `key` out of the header dict literal.
fn dict_value(header: &str, key: &str) -> Option<String> {
    let pat = format!("'{key}':");
    let start = header.find(&pat)? + pat.len();
    let rest = header[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}'])?
    };
    Some(rest[..end].trim().to_string())
}

fn parse_shape(text: &str) -> Option<Vec<usize>> {
    let inner = text.strip_prefix('(')?.strip_suffix(')')?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().ok())
        .collect()
}
