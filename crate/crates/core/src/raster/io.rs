use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Raster;
use crate::error::{Error, Result};

/// JSON sidecar describing a `.bsq` payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsqHeader {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub dtype: String,
    pub order: String,
}

impl BsqHeader {
    fn for_raster(r: &Raster) -> Self {
        Self {
            height: r.height(),
            width: r.width(),
            channels: r.channels(),
            dtype: "f64".into(),
            order: "bsq".into(),
        }
    }
}

fn bsq_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("bsq"), path.with_extension("json"))
}

/// Loads a BSQ container (`.bsq` + `.json` sidecar) or a binary P6 PPM.
pub fn load_raster(path: &Path) -> Result<Raster> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("ppm") => read_ppm(path),
        Some("bsq") | Some("json") => load_bsq(path),
        _ => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.starts_with(b"P6") {
                parse_ppm(&bytes)
            } else {
                load_bsq(path)
            }
        }
    }
}

fn load_bsq(path: &Path) -> Result<Raster> {
    let (bsq, json) = bsq_paths(path);
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let header: BsqHeader = serde_json::from_str(&text)?;
    if header.dtype != "f64" || header.order != "bsq" {
        return Err(Error::Format(format!(
            "{}: unsupported dtype/order {}/{}",
            json.display(),
            header.dtype,
            header.order
        )));
    }
    let bytes = fs::read(&bsq).map_err(|e| Error::io(&bsq, e))?;
    let expected = header.height * header.width * header.channels;
    if bytes.len() != expected * 8 {
        return Err(Error::Format(format!(
            "{}: header says {}x{}x{} ({} values) but payload holds {} bytes",
            bsq.display(),
            header.height,
            header.width,
            header.channels,
            expected,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Raster::new(header.height, header.width, header.channels, data)
}

/// Writes `<stem>.bsq` (little-endian f64) and `<stem>.json`.
pub fn save_raster(raster: &Raster, path: &Path) -> Result<()> {
    let (bsq, json) = bsq_paths(path);
    let mut payload = Vec::with_capacity(raster.data().len() * 8);
    for v in raster.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bsq, payload).map_err(|e| Error::io(&bsq, e))?;
    let header = serde_json::to_string(&BsqHeader::for_raster(raster))?;
    fs::write(&json, header).map_err(|e| Error::io(&json, e))?;
    Ok(())
}

struct Netpbm<'a> {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    pixels: &'a [u8],
}

fn parse_netpbm(bytes: &[u8]) -> Result<Netpbm<'_>> {
    if bytes.len() < 2 {
        return Err(Error::Format("truncated netpbm header".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("bad netpbm header field".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Format("netpbm header value out of range".into()))?;
    }
    // exactly one whitespace byte before the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after netpbm header".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!(
            "unsupported netpbm geometry {width}x{height} maxval {maxval}"
        )));
    }
    Ok(Netpbm {
        magic,
        width: width as usize,
        height: height as usize,
        maxval,
        pixels: &bytes[pos..],
    })
}

fn decode_samples(img: &Netpbm<'_>, per_pixel: usize) -> Result<Vec<u16>> {
    let n = img.width * img.height * per_pixel;
    let wide = img.maxval > 255;
    let need = if wide { 2 * n } else { n };
    if img.pixels.len() < need {
        return Err(Error::Format(format!(
            "netpbm payload holds {} bytes, expected {need}",
            img.pixels.len()
        )));
    }
    Ok(if wide {
        img.pixels[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        img.pixels[..n].iter().map(|&b| b as u16).collect()
    })
}

fn parse_ppm(bytes: &[u8]) -> Result<Raster> {
    let img = parse_netpbm(bytes)?;
    if &img.magic != b"P6" {
        return Err(Error::Format("expected binary PPM (P6)".into()));
    }
    let samples = decode_samples(&img, 3)?;
    let pixels: Vec<f64> = samples.into_iter().map(f64::from).collect();
    Raster::from_pixels(img.height, img.width, 3, &pixels)
}

/// Reads a binary P6 PPM as a 3-band raster with raw sample values.
pub fn read_ppm(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ppm(&bytes)
}

/// Reads a binary P5 PGM; returns `(height, width, samples)` in row-major order.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = parse_netpbm(&bytes)?;
    if &img.magic != b"P5" {
        return Err(Error::Format(format!(
            "{}: expected binary PGM (P5)",
            path.display()
        )));
    }
    let samples = decode_samples(&img, 1)?;
    Ok((img.height, img.width, samples))
}

/// Writes an 8-bit binary PGM.
pub fn write_pgm(path: &Path, height: usize, width: usize, gray: &[u8]) -> Result<()> {
    if gray.len() != height * width {
        return Err(Error::Shape(format!(
            "PGM {height}x{width} needs {} bytes, got {}",
            height * width,
            gray.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a 3-band raster as an 8-bit P6 PPM, clamping samples to `[0, 255]`.
pub fn write_ppm(path: &Path, raster: &Raster) -> Result<()> {
    if raster.channels() != 3 {
        return Err(Error::Shape(format!(
            "PPM export needs 3 bands, raster has {}",
            raster.channels()
        )));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = format!("P6\n{} {}\n255\n", raster.width(), raster.height()).into_bytes();
    for px in 0..raster.pixels() {
        for b in 0..3 {
            let v = raster.band(b)[px].round().clamp(0.0, 255.0);
            out.push(v as u8);
        }
    }
    file.write_all(&out).map_err(|e| Error::io(path, e))
}
