//! 16-bit binary PGM with the map's peak stored in a header comment.
//!
//! ```text
//! P5
//! # vmax=<shortest round-trip f64>
//! <width> <height>
//! 65535
//! <big-endian u16 payload, row-major>
//! ```
//!
//! Each sample is `round(65535 * v / vmax)`, so decoding recovers every value
//! to within `vmax / 65535`.

use std::path::Path;

use crate::grid::Grid;

use super::IoError;

pub const PGM16_MAXVAL: u16 = 65535;

/// A decoded PGM. `values` are in map units when the file carried a
/// `vmax` comment, otherwise `raw / maxval`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub raw: Grid<u16>,
    pub maxval: u16,
    pub vmax: Option<f64>,
}

impl Pgm {
    pub fn values(&self) -> Grid<f64> {
        let maxval = f64::from(self.maxval);
        match self.vmax {
            Some(vmax) => self.raw.map(|&q| f64::from(q) / maxval * vmax),
            None => self.raw.map(|&q| f64::from(q) / maxval),
        }
    }
}

pub(crate) fn check_heatmap(map: &Grid<f64>) -> Result<f64, IoError> {
    let mut vmax = 0.0f64;
    for (row, col, &v) in map.cells() {
        if !v.is_finite() || v < 0.0 {
            return Err(IoError::InvalidValue { row, col, value: v });
        }
        vmax = vmax.max(v);
    }
    Ok(vmax)
}

pub fn encode_pgm16(map: &Grid<f64>) -> Result<Vec<u8>, IoError> {
    let vmax = check_heatmap(map)?;
    let mut out = format!(
        "P5\n# vmax={vmax}\n{} {}\n{PGM16_MAXVAL}\n",
        map.cols(),
        map.rows()
    )
    .into_bytes();
    out.reserve(map.len() * 2);
    for &v in map.as_slice() {
        let q = if vmax > 0.0 {
            (f64::from(PGM16_MAXVAL) * v / vmax).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm16(map: &Grid<f64>, path: &Path) -> Result<(), IoError> {
    let bytes = encode_pgm16(map)?;
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Parses any binary (P5) PGM, 8- or 16-bit.
pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm, IoError> {
    let mut cursor = 0usize;
    let mut vmax = None;
    let mut fields: Vec<String> = Vec::with_capacity(4);

    while fields.len() < 4 {
        // Skip whitespace and comments between header tokens.
        while cursor < bytes.len() {
            match bytes[cursor] {
                b if b.is_ascii_whitespace() => cursor += 1,
                b'#' => {
                    let end = bytes[cursor..]
                        .iter()
                        .position(|&b| b == b'\n')
                        .map_or(bytes.len(), |p| cursor + p);
                    let comment = String::from_utf8_lossy(&bytes[cursor + 1..end]);
                    if let Some(v) = comment.trim().strip_prefix("vmax=") {
                        let v: f64 = v
                            .trim()
                            .parse()
                            .map_err(|_| IoError::Format(format!("bad vmax comment {v:?}")))?;
                        if !v.is_finite() || v < 0.0 {
                            return Err(IoError::Format(format!("bad vmax {v}")));
                        }
                        vmax = Some(v);
                    }
                    cursor = end;
                }
                _ => break,
            }
        }
        let start = cursor;
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() && bytes[cursor] != b'#'
        {
            cursor += 1;
        }
        if start == cursor {
            return Err(IoError::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..cursor]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(IoError::Format(format!(
            "expected binary PGM magic P5, found {:?}",
            fields[0]
        )));
    }
    let parse = |s: &str, what: &str| -> Result<usize, IoError> {
        s.parse()
            .map_err(|_| IoError::Format(format!("bad {what} {s:?}")))
    };
    let cols = parse(&fields[1], "width")?;
    let rows = parse(&fields[2], "height")?;
    let maxval = parse(&fields[3], "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::Format(format!("maxval {maxval} out of range")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    cursor += 1;
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let payload = bytes.get(cursor..).unwrap_or(&[]);
    let expected = rows * cols * bytes_per;
    if payload.len() != expected {
        return Err(IoError::Format(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let data: Vec<u16> = if bytes_per == 2 {
        payload
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    } else {
        payload.iter().map(|&b| u16::from(b)).collect()
    };
    Ok(Pgm {
        raw: Grid::from_vec(rows, cols, data).expect("length checked"),
        maxval: maxval as u16,
        vmax,
    })
}

pub fn read_pgm(path: &Path) -> Result<Pgm, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| e.in_file(path))
}
