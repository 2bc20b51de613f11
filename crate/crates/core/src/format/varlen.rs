//! Variable-length unsigned integers: a width byte (1, 4 or 8) followed by
//! that many little-endian value bytes.

use super::error::{FormatError, Result};

/// Decodes a varlen at the start of `bytes`, returning `(value, consumed)`.
pub fn read_varlen(bytes: &[u8]) -> Result<(u64, usize)> {
    let width = *bytes.first().ok_or(FormatError::Truncated {
        offset: 0,
        needed: 1,
        available: 0,
    })?;
    let width = match width {
        1 | 4 | 8 => width as usize,
        other => {
            return Err(FormatError::Width {
                offset: 0,
                width: other,
            })
        }
    };
    let body = bytes.get(1..1 + width).ok_or(FormatError::Truncated {
        offset: 1,
        needed: width as u64,
        available: (bytes.len() - 1) as u64,
    })?;
    let mut le = [0u8; 8];
    le[..width].copy_from_slice(body);
    Ok((u64::from_le_bytes(le), 1 + width))
}

/// Encodes `value` using the smallest width in {1, 4, 8} that holds it.
pub fn write_varlen(value: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(9);
    push_varlen(&mut out, value);
    out
}

pub(crate) fn push_varlen(out: &mut Vec<u8>, value: u64) {
    if value <= u8::MAX as u64 {
        out.push(1);
        out.push(value as u8);
    } else if value <= u32::MAX as u64 {
        out.push(4);
        out.extend_from_slice(&(value as u32).to_le_bytes());
    } else {
        out.push(8);
        out.extend_from_slice(&value.to_le_bytes());
    }
}
