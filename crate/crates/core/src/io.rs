//! File I/O: PNG/PPM/PGM images, Middlebury `.flo` flow fields, and PGM
//! debug export of weight maps.
//!
//! Images are scaled to `[0,1]` on read and quantized with round-half-up on
//! write. `.flo` round-trips are bit-exact on finite `f32` fields.

use std::fs;
use std::io::Read;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::raster::{FlowDirection, FlowField, RasterImage, WeightMap};

const FLO_MAGIC: &[u8; 4] = b"PIEH";

/// Read an 8- or 16-bit PNG/PPM/PGM into a `[0,1]`-scaled image.
///
/// Gray inputs become single-channel, RGB inputs three-channel. Other pixel
/// layouts (alpha, palettes decoded to other depths) are rejected.
pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader
        .decode()
        .map_err(|e| Error::format(path, e.to_string()))?;

    let (h, w) = (img.height() as usize, img.width() as usize);
    let from_u8 = |v: u8| v as f64 / 255.0;
    let from_u16 = |v: u16| v as f64 / 65535.0;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let data = buf.into_raw().into_iter().map(from_u8).collect();
            RasterImage::from_data(h, w, 1, data)
        }
        DynamicImage::ImageLuma16(buf) => {
            let data = buf.into_raw().into_iter().map(from_u16).collect();
            RasterImage::from_data(h, w, 1, data)
        }
        DynamicImage::ImageRgb8(buf) => {
            let data = buf.into_raw().into_iter().map(from_u8).collect();
            RasterImage::from_data(h, w, 3, data)
        }
        DynamicImage::ImageRgb16(buf) => {
            let data = buf.into_raw().into_iter().map(from_u16).collect();
            RasterImage::from_data(h, w, 3, data)
        }
        other => Err(Error::format(
            path,
            format!(
                "unsupported pixel layout {:?}: expected 8/16-bit gray or RGB",
                other.color()
            ),
        )),
    }
}

/// Quantize a `[0,1]` value to a byte, rounding half up.
#[inline]
fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write an image as 8-bit PNG (or PGM/PPM when the extension says so).
/// Values are clamped to `[0,1]` and quantized; a read-back reproduces the
/// original within 1/255.
pub fn write_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "pgm" | "ppm" => write_pnm(img, path),
        _ => write_png(img, path),
    }
}

fn write_png(img: &RasterImage, path: &Path) -> Result<()> {
    let (h, w) = (img.height as u32, img.width as u32);
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize_u8(v)).collect();
    let res = match img.channels {
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer size")
            .save(path),
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer size")
            .save(path),
        c => return Err(Error::Config(format!("cannot write {c}-channel image"))),
    };
    res.map_err(|e| Error::format(path, e.to_string()))
}

fn write_pnm(img: &RasterImage, path: &Path) -> Result<()> {
    let magic = match img.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Config(format!("cannot write {c}-channel PNM"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| quantize_u8(v)));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a Middlebury `.flo` file. The direction is supplied by the caller
/// since the container does not record it.
pub fn read_flo(path: impl AsRef<Path>, direction: FlowDirection) -> Result<FlowField> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 12];
    file.read_exact(&mut header)
        .map_err(|_| Error::format(path, "truncated header"))?;
    if &header[0..4] != FLO_MAGIC {
        return Err(Error::format(path, "bad magic, expected PIEH"));
    }
    let width = i32::from_le_bytes(header[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(header[8..12].try_into().unwrap());
    if width <= 0 || height <= 0 {
        return Err(Error::format(path, format!("bad dims {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height * 2 * 4;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!("payload length {} != expected {expected}", payload.len()),
        ));
    }
    let vectors: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    FlowField::from_vectors(height, width, vectors, direction)
}

/// Write a flow field as Middlebury `.flo` (little-endian f32).
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(12 + flow.vectors.len() * 4);
    out.extend_from_slice(FLO_MAGIC);
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for &v in &flow.vectors {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Export a weight map as 8-bit PGM, scaling `[0,1]` to `[0,255]`.
pub fn write_weights_pgm(map: &WeightMap, path: impl AsRef<Path>) -> Result<()> {
    let img = RasterImage::from_data(map.height, map.width, 1, map.weights.clone())?;
    write_pnm(&img, path.as_ref())
}

/// Export the flag channel of a weight map as a raw-valued 8-bit PGM.
pub fn write_flags_pgm(map: &WeightMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.extend(map.flags.iter().copied());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read an 8-bit PGM as a binary mask: nonzero bytes are `true`.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    let img = read_image(path.as_ref())?;
    if img.channels != 1 {
        return Err(Error::format(path.as_ref(), "mask must be single channel"));
    }
    let mask = img.data.iter().map(|&v| v > 0.0).collect();
    Ok((img.height, img.width, mask))
}
