//! Image files: 8-bit binary PGM for viewing and a lossless raw `f64` format.
//!
//! The raw format is a little-endian header of two `u32` (width, height)
//! followed by `width * height` little-endian `f64` values in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Writes `image` linearly rescaled from `[lo, hi]` to `0..=255`. With no
/// range given the image's own min and max are used.
pub fn write_pgm<W: Write>(image: &ImageGrid, range: Option<(f64, f64)>, mut out: W) -> Result<()> {
    let (lo, hi) = range.unwrap_or_else(|| {
        let v = image.values();
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height())?;
    let bytes: Vec<u8> = image
        .values()
        .iter()
        .map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

fn pgm_token(data: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad PGM header".into()))
}

/// Reads a binary 8-bit PGM; pixel values become reals in `0..=255`.
pub fn read_pgm<R: Read>(mut input: R) -> Result<ImageGrid> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if !data.starts_with(b"P5") {
        return Err(Error::Format("not a binary PGM (P5)".into()));
    }
    let mut pos = 2;
    let width = pgm_token(&data, &mut pos)?;
    let height = pgm_token(&data, &mut pos)?;
    let maxval = pgm_token(&data, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM max value {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if data.len() < pos + need {
        return Err(Error::Format("truncated PGM raster".into()));
    }
    let values = data[pos..pos + need].iter().map(|&b| b as f64).collect();
    ImageGrid::new(width, height, values)
}

pub fn write_raw<W: Write>(image: &ImageGrid, mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 8 * image.len());
    buf.extend_from_slice(&(image.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(image.height() as u32).to_le_bytes());
    for v in image.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_raw<R: Read>(mut input: R) -> Result<ImageGrid> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if data.len() < 8 {
        return Err(Error::Format("raw image header is truncated".into()));
    }
    let width = u32::from_le_bytes(data[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    let body = &data[8..];
    if body.len() != 8 * width * height {
        return Err(Error::Format(format!(
            "raw image body has {} bytes, expected {}",
            body.len(),
            8 * width * height
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageGrid::new(width, height, values)
}

/// Loads by extension: `.pgm` or anything else as raw.
pub fn load_image(path: &Path) -> Result<ImageGrid> {
    let file = fs::File::open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(std::io::BufReader::new(file)),
        _ => read_raw(std::io::BufReader::new(file)),
    }
}

/// Saves by extension: `.pgm` (auto-scaled) or anything else as raw.
pub fn save_image(image: &ImageGrid, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => write_pgm(image, None, file),
        _ => write_raw(image, file),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_exact() {
        let img = ImageGrid::from_fn(3, 2, |r, c| (r as f64 + 0.1) * (c as f64 - 1.0 / 3.0));
        let mut buf = Vec::new();
        write_raw(&img, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 48);
        assert_eq!(&buf[..4], &3u32.to_le_bytes());
        assert_eq!(read_raw(&buf[..]).unwrap(), img);
    }

    #[test]
    fn pgm_round_trip_of_integers() {
        let img = ImageGrid::from_fn(4, 3, |r, c| (r * 60 + c * 15) as f64);
        let mut buf = Vec::new();
        write_pgm(&img, Some((0.0, 255.0)), &mut buf).unwrap();
        assert_eq!(read_pgm(&buf[..]).unwrap(), img);
    }

    #[test]
    fn pgm_header_comments() {
        let data = b"P5\n# made by hand\n2 1\n255\n\x07\xff";
        let img = read_pgm(&data[..]).unwrap();
        assert_eq!(img.values(), &[7.0, 255.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(read_raw(&[1u8, 0, 0, 0, 1, 0, 0, 0, 0][..]).is_err());
    }
}
