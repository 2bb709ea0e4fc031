//! Direction maps as 3-channel little-endian PFM.
//!
//! Channels per cell are `(du, dv, valid)`; absent cells are `(0, 0, 0)`.
//! Rows are stored bottom-to-top as the PFM convention requires.

use std::path::Path;

use crate::grid::Grid;

use super::IoError;

pub fn encode_direction_pfm(map: &Grid<Option<[f64; 2]>>) -> Vec<u8> {
    let mut out = format!("PF\n{} {}\n-1.0\n", map.cols(), map.rows()).into_bytes();
    out.reserve(map.len() * 12);
    for r in (0..map.rows()).rev() {
        for c in 0..map.cols() {
            let [du, dv, valid] = match map[(r, c)] {
                Some([du, dv]) => [du as f32, dv as f32, 1.0f32],
                None => [0.0; 3],
            };
            for v in [du, dv, valid] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_direction_pfm(bytes: &[u8]) -> Result<Grid<Option<[f32; 2]>>, IoError> {
    let mut lines = 0;
    let mut header_end = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            lines += 1;
            if lines == 3 {
                header_end = i + 1;
                break;
            }
        }
    }
    if lines < 3 {
        return Err(IoError::Format("truncated PFM header".into()));
    }
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| IoError::Format("PFM header is not ASCII".into()))?;
    let mut tokens = header.split_ascii_whitespace();
    if tokens.next() != Some("PF") {
        return Err(IoError::Format("expected 3-channel PFM magic PF".into()));
    }
    let mut dim = || -> Result<usize, IoError> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| IoError::Format("bad PFM dimensions".into()))
    };
    let (cols, rows) = (dim()?, dim()?);
    let payload = &bytes[header_end..];
    if payload.len() != rows * cols * 12 {
        return Err(IoError::Format(format!(
            "PFM payload has {} bytes, expected {}",
            payload.len(),
            rows * cols * 12
        )));
    }
    let mut grid = Grid::filled(rows, cols, None);
    for (i, px) in payload.chunks_exact(12).enumerate() {
        let f = |k: usize| f32::from_le_bytes([px[k], px[k + 1], px[k + 2], px[k + 3]]);
        let (r, c) = (rows - 1 - i / cols, i % cols);
        if f(8) != 0.0 {
            grid[(r, c)] = Some([f(0), f(4)]);
        }
    }
    Ok(grid)
}

pub fn write_direction_pfm(map: &Grid<Option<[f64; 2]>>, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, encode_direction_pfm(map)).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_flipped_rows() {
        let mut g = Grid::filled(2, 3, None);
        g[(0, 2)] = Some([1.0, 0.0]);
        g[(1, 0)] = Some([0.6, -0.8]);
        let bytes = encode_direction_pfm(&g);
        assert!(bytes.starts_with(b"PF\n3 2\n-1.0\n"));
        // First stored pixel is the bottom-left cell.
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 0.6);
        let back = decode_direction_pfm(&bytes).unwrap();
        assert_eq!(back[(0, 2)], Some([1.0, 0.0]));
        assert_eq!(back[(1, 0)], Some([0.6, -0.8]));
        assert_eq!(back[(0, 0)], None);
    }
}
