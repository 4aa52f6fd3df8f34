//! Minimal NPY v1.0 reader/writer for little-endian `f4`/`f8` arrays of rank 1 or 2.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }
}

#[derive(Debug)]
struct Header {
    dtype: Dtype,
    shape: Vec<usize>,
}

/// Decodes an NPY byte buffer into a row-major matrix. Rank-1 arrays become a single row.
pub fn decode(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic string".into()));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::Format(format!(
            "unsupported NPY version {}.{} (only 1.0 is accepted)",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = 10 + header_len;
    if bytes.len() < data_start {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let header_text = std::str::from_utf8(&bytes[10..data_start])
        .map_err(|_| Error::Format("NPY header is not ASCII".into()))?;
    let header = parse_header(header_text)?;

    let (rows, cols) = match header.shape.as_slice() {
        [d] => (1, *d),
        [t, d] => (*t, *d),
        other => {
            return Err(Error::Format(format!(
                "unsupported array rank {} (expected 1 or 2)",
                other.len()
            )))
        }
    };
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("NPY shape overflows".into()))?;
    let payload = &bytes[data_start..];
    if payload.len() != count * header.dtype.size() {
        return Err(Error::Format(format!(
            "NPY payload holds {} bytes, shape {:?} needs {}",
            payload.len(),
            header.shape,
            count * header.dtype.size()
        )));
    }

    let values: Vec<f64> = match header.dtype {
        Dtype::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    Ok(Array2::from_shape_vec((rows, cols), values).expect("shape checked above"))
}

/// Encodes a matrix as NPY v1.0, `<f8`, C order.
pub fn encode(data: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = data.dim();
    let mut header = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': ({}, {}), }}",
        rows, cols
    );
    let unpadded = 10 + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + rows * cols * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    // iter() walks logical (row-major) order regardless of memory layout
    for v in data.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write(data: &Array2<f64>, path: &Path) -> Result<()> {
    fs::write(path, encode(data)).map_err(|e| Error::io(path, e))
}

fn parse_header(text: &str) -> Result<Header> {
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| Error::Format(format!("malformed NPY header: {text:?}")))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest)?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| Error::Format(format!("expected ':' after key '{key}'")))?
            .trim_start();
        let after = match key {
            "descr" => {
                let (v, a) = take_quoted(after)?;
                descr = Some(v.to_string());
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else {
                    return Err(Error::Format("fortran_order must be True or False".into()));
                }
            }
            "shape" => {
                let (v, a) = take_tuple(after)?;
                shape = Some(v);
                a
            }
            other => return Err(Error::Format(format!("unexpected NPY header key '{other}'"))),
        };
        rest = after.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }

    let descr = descr.ok_or_else(|| Error::Format("NPY header lacks 'descr'".into()))?;
    let fortran = fortran.ok_or_else(|| Error::Format("NPY header lacks 'fortran_order'".into()))?;
    let shape = shape.ok_or_else(|| Error::Format("NPY header lacks 'shape'".into()))?;
    if fortran {
        return Err(Error::Format("Fortran-ordered arrays are not supported".into()));
    }
    let dtype = match descr.as_str() {
        "<f8" => Dtype::F8,
        "<f4" => Dtype::F4,
        other => return Err(Error::Format(format!("unsupported dtype '{other}'"))),
    };
    Ok(Header { dtype, shape })
}

fn take_quoted(s: &str) -> Result<(&str, &str)> {
    let quote = s
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::Format(format!("expected quoted string at {s:?}")))?;
    let inner = &s[1..];
    let end = inner
        .find(quote)
        .ok_or_else(|| Error::Format("unterminated string in NPY header".into()))?;
    Ok((&inner[..end], &inner[end + 1..]))
}

fn take_tuple(s: &str) -> Result<(Vec<usize>, &str)> {
    let inner = s
        .strip_prefix('(')
        .ok_or_else(|| Error::Format("shape must be a tuple".into()))?;
    let end = inner
        .find(')')
        .ok_or_else(|| Error::Format("unterminated shape tuple".into()))?;
    let dims = inner[..end]
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad shape entry '{p}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dims, &inner[end + 1..]))
}
