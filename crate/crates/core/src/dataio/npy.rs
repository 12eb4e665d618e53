//! Minimal NPY v1.0 reader/writer for 2-D little-endian float arrays.
//!
//! Only the subset this crate needs is supported: magic `\x93NUMPY`,
//! version (1, 0), C-order, descr `<f4` or `<f8`, rank-2 shape.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const MAGIC: [u8; 6] = *b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NpyDtype {
    F32,
    F64,
}

impl NpyDtype {
    fn descr(self) -> &'static str {
        match self {
            NpyDtype::F32 => "<f4",
            NpyDtype::F64 => "<f8",
        }
    }

    fn item_size(self) -> usize {
        match self {
            NpyDtype::F32 => 4,
            NpyDtype::F64 => 8,
        }
    }
}

#[derive(Debug)]
pub(crate) struct NpyArray {
    pub rows: usize,
    pub cols: usize,
    pub dtype: NpyDtype,
    /// Values widened to f64; f32 inputs are exactly representable.
    pub data: Vec<f64>,
}

pub(crate) fn read_npy_2d(path: &Path) -> Result<NpyArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 10 {
        return Err(Error::format(path, "file shorter than NPY preamble"));
    }
    if bytes[..6] != MAGIC {
        return Err(Error::format(path, "bad magic, not an NPY file"));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::format(
            path,
            format!("unsupported NPY version ({}, {})", bytes[6], bytes[7]),
        ));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = 10 + header_len;
    if bytes.len() < data_start {
        return Err(Error::format(path, "header length exceeds file size"));
    }
    let header = std::str::from_utf8(&bytes[10..data_start])
        .map_err(|_| Error::format(path, "header is not valid ASCII"))?;

    let descr = extract_quoted(header, "descr")
        .ok_or_else(|| Error::format(path, "header missing 'descr'"))?;
    let dtype = match descr.as_str() {
        "<f4" => NpyDtype::F32,
        "<f8" => NpyDtype::F64,
        other => {
            return Err(Error::schema(
                path,
                format!("unsupported dtype {other:?}, expected '<f4' or '<f8'"),
            ))
        }
    };

    let fortran = extract_literal(header, "fortran_order")
        .ok_or_else(|| Error::format(path, "header missing 'fortran_order'"))?;
    match fortran.as_str() {
        "False" => {}
        "True" => {
            return Err(Error::schema(
                path,
                "Fortran-order arrays are not supported",
            ))
        }
        other => {
            return Err(Error::format(
                path,
                format!("invalid fortran_order value {other:?}"),
            ))
        }
    }

    let shape = extract_shape(header)
        .ok_or_else(|| Error::format(path, "header missing or malformed 'shape'"))?;
    if shape.len() != 2 {
        return Err(Error::schema(
            path,
            format!("expected a 2-D array, found rank {}", shape.len()),
        ));
    }
    let (rows, cols) = (shape[0], shape[1]);
    if rows == 0 || cols == 0 {
        return Err(Error::schema(
            path,
            format!("array shape ({rows}, {cols}) has an empty dimension"),
        ));
    }

    let expected = rows * cols * dtype.item_size();
    let payload = &bytes[data_start..];
    if payload.len() < expected {
        return Err(Error::format(
            path,
            format!(
                "truncated data: expected {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            format!(
                "trailing bytes: expected {expected} data bytes, found {}",
                payload.len()
            ),
        ));
    }

    let mut data = Vec::with_capacity(rows * cols);
    match dtype {
        NpyDtype::F32 => {
            for chunk in payload.chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
        NpyDtype::F64 => {
            for chunk in payload.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }

    Ok(NpyArray {
        rows,
        cols,
        dtype,
        data,
    })
}

/// Serializes a 2-D array to NPY v1.0 bytes. Values are narrowed to f32
/// when `dtype` is [`NpyDtype::F32`].
pub(crate) fn to_npy_bytes(rows: usize, cols: usize, dtype: NpyDtype, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), rows * cols);
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({}, {}), }}",
        dtype.descr(),
        rows,
        cols
    );
    // Pad so the full preamble (magic + version + len + dict + newline) is a
    // multiple of 64 bytes, mirroring numpy's own writer.
    let unpadded = 10 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;

    let mut out = Vec::with_capacity(10 + header_len + values.len() * dtype.item_size());
    out.extend_from_slice(&MAGIC);
    out.push(1);
    out.push(0);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(out.len() + padding, b' ');
    out.push(b'\n');

    match dtype {
        NpyDtype::F32 => {
            for &v in values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        NpyDtype::F64 => {
            for &v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Pulls the quoted string value of `key` out of the header dict.
fn extract_quoted(header: &str, key: &str) -> Option<String> {
    let value = value_after_key(header, key)?;
    let rest = value.strip_prefix('\'')?;
    let end = rest.find('\'')?;
    Some(rest[..end].to_string())
}

/// Pulls a bare literal (True/False) value of `key` out of the header dict.
fn extract_literal(header: &str, key: &str) -> Option<String> {
    let value = value_after_key(header, key)?;
    let end = value.find([',', '}']).unwrap_or(value.len());
    Some(value[..end].trim().to_string())
}

fn extract_shape(header: &str) -> Option<Vec<usize>> {
    let value = value_after_key(header, "shape")?;
    let open = value.find('(')?;
    let close = value.find(')')?;
    let inner = &value[open + 1..close];
    let mut dims = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        dims.push(part.parse().ok()?);
    }
    Some(dims)
}

fn value_after_key<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let needle = format!("'{key}':");
    let at = header.find(&needle)?;
    Some(header[at + needle.len()..].trim_start())
}
