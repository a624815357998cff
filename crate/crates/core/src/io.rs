//! Reading and writing images and environment maps.
//!
//! HDR formats (Radiance `.hdr`, `.pfm`, OpenEXR `.exr`) hold linear radiance.
//! 8-bit PNG color images are sRGB encoded; scalar data maps in PNG (depth, masks,
//! material parameters, normals) are stored linearly.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::buffer::{ImageRgb, ImageScalar, Rgb, Vec3};
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Hdr,
    Pfm,
    Exr,
    Png,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Format> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "hdr" | "pic" => Ok(Format::Hdr),
            "pfm" => Ok(Format::Pfm),
            "exr" => Ok(Format::Exr),
            "png" => Ok(Format::Png),
            _ => Err(Error::UnsupportedFormat(path.display().to_string())),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn open_dynamic(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    image::load_from_memory(&bytes).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))
}

/// Loads an environment map and checks its 2:1 aspect ratio.
pub fn load_env_map(path: impl AsRef<Path>) -> Result<EnvironmentMap> {
    let img = read_rgb_image(path)?;
    let (w, h) = img.dims();
    EnvironmentMap::new(w, h, img.into_pixels())
}

pub fn save_env_map(path: impl AsRef<Path>, env: &EnvironmentMap) -> Result<()> {
    let img = ImageRgb::from_vec(env.width(), env.height(), env.texels().to_vec())?;
    write_rgb_image(path, &img)
}

/// Reads a color image into linear RGB, sRGB-decoding LDR PNGs.
pub fn read_rgb_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    match Format::from_path(path)? {
        Format::Pfm => read_pfm(path),
        Format::Hdr | Format::Exr => {
            let img = open_dynamic(path)?.to_rgb32f();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let px = img
                .pixels()
                .map(|p| Rgb::new(p[0] as f64, p[1] as f64, p[2] as f64))
                .collect();
            ImageRgb::from_vec(w, h, px)
        }
        Format::Png => {
            let img = open_dynamic(path)?.to_rgb32f();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let px = img
                .pixels()
                .map(|p| Rgb::new(p[0] as f64, p[1] as f64, p[2] as f64).map(srgb_to_linear))
                .collect();
            ImageRgb::from_vec(w, h, px)
        }
    }
}

/// Writes linear RGB. PNG output clamps to `[0, 1]` and applies the sRGB curve.
pub fn write_rgb_image(path: impl AsRef<Path>, img: &ImageRgb) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    match Format::from_path(path)? {
        Format::Pfm => write_pfm(path, img),
        Format::Hdr | Format::Exr => {
            let data: Vec<f32> = img
                .pixels()
                .iter()
                .flat_map(|p| p.0.map(|c| c as f32))
                .collect();
            let buf = ImageBuffer::<image::Rgb<f32>, _>::from_raw(w, h, data)
                .expect("buffer length matches dimensions");
            DynamicImage::ImageRgb32F(buf)
                .save(path)
                .map_err(|e| Error::Encode(format!("{}: {e}", path.display())))
        }
        Format::Png => {
            let data: Vec<u8> = img
                .pixels()
                .iter()
                .flat_map(|p| p.0.map(|c| quantize_u8(linear_to_srgb(c.clamp(0.0, 1.0)))))
                .collect();
            let buf = ImageBuffer::<image::Rgb<u8>, _>::from_raw(w, h, data)
                .expect("buffer length matches dimensions");
            buf.save(path)
                .map_err(|e| Error::Encode(format!("{}: {e}", path.display())))
        }
    }
}

fn quantize_u8(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

fn quantize_u16(c: f64) -> u16 {
    (c * 65535.0).round().clamp(0.0, 65535.0) as u16
}

/// Reads a linear scalar map. Grayscale PNGs map to `value / max`, color PNGs use the
/// red channel, HDR formats use the first channel as-is.
pub fn read_scalar_image(path: impl AsRef<Path>) -> Result<ImageScalar> {
    let path = path.as_ref();
    match Format::from_path(path)? {
        Format::Png => {
            let img = open_dynamic(path)?;
            let (w, h) = (img.width() as usize, img.height() as usize);
            match img {
                DynamicImage::ImageLuma8(_)
                | DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA8(_)
                | DynamicImage::ImageLumaA16(_) => {
                    let luma = img.to_luma16();
                    ImageScalar::from_vec(
                        w,
                        h,
                        luma.pixels().map(|p| p[0] as f64 / 65535.0).collect(),
                    )
                }
                other => {
                    let rgb = other.to_rgb16();
                    ImageScalar::from_vec(
                        w,
                        h,
                        rgb.pixels().map(|p| p[0] as f64 / 65535.0).collect(),
                    )
                }
            }
        }
        _ => {
            let rgb = read_linear_rgb(path)?;
            Ok(rgb.channel(0))
        }
    }
}

/// 16-bit grayscale PNG, `value / 65535` in `[0, 1]`.
pub fn write_scalar_png16(path: impl AsRef<Path>, img: &ImageScalar) -> Result<()> {
    let path = path.as_ref();
    let data: Vec<u16> = img.pixels().iter().map(|&v| quantize_u16(v)).collect();
    let buf =
        ImageBuffer::<Luma<u16>, _>::from_raw(img.width() as u32, img.height() as u32, data)
            .expect("buffer length matches dimensions");
    buf.save(path)
        .map_err(|e| Error::Encode(format!("{}: {e}", path.display())))
}

/// Writes a scalar map in whichever format the extension names (PNG as 16-bit gray).
pub fn write_scalar_image(path: impl AsRef<Path>, img: &ImageScalar) -> Result<()> {
    let path = path.as_ref();
    match Format::from_path(path)? {
        Format::Png => write_scalar_png16(path, img),
        _ => write_rgb_image(path, &img.to_rgb()),
    }
}

/// Reads RGB without any transfer curve (data maps stored as color PNG).
fn read_linear_rgb(path: &Path) -> Result<ImageRgb> {
    match Format::from_path(path)? {
        Format::Png => {
            let img = open_dynamic(path)?.to_rgb32f();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let px = img
                .pixels()
                .map(|p| Rgb::new(p[0] as f64, p[1] as f64, p[2] as f64))
                .collect();
            ImageRgb::from_vec(w, h, px)
        }
        _ => read_rgb_image(path),
    }
}

/// Normal map encoded as `n = 2 * rgb - 1` (PNG or EXR).
pub fn read_normal_map(path: impl AsRef<Path>) -> Result<crate::buffer::Image<Vec3>> {
    let rgb = read_linear_rgb(path.as_ref())?;
    Ok(rgb.map(|p| Vec3::new(2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0, 2.0 * p[2] - 1.0)))
}

pub fn write_normal_map(
    path: impl AsRef<Path>,
    normals: &crate::buffer::Image<Vec3>,
) -> Result<()> {
    let path = path.as_ref();
    let enc = normals.map(|n| Rgb::new(0.5 * (n.x + 1.0), 0.5 * (n.y + 1.0), 0.5 * (n.z + 1.0)));
    match Format::from_path(path)? {
        Format::Png => {
            let data: Vec<u16> = enc
                .pixels()
                .iter()
                .flat_map(|p| p.0.map(quantize_u16))
                .collect();
            let buf = ImageBuffer::<image::Rgb<u16>, _>::from_raw(
                enc.width() as u32,
                enc.height() as u32,
                data,
            )
            .expect("buffer length matches dimensions");
            buf.save(path)
                .map_err(|e| Error::Encode(format!("{}: {e}", path.display())))
        }
        _ => write_rgb_image(path, &enc),
    }
}

fn read_pfm(path: &Path) -> Result<ImageRgb> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let bad = |m: &str| Error::Decode(format!("{}: {m}", path.display()));

    let mut tokens: Vec<String> = Vec::new();
    while tokens.len() < 4 {
        let mut line = String::new();
        if reader.read_line(&mut line).map_err(io_err(path))? == 0 {
            return Err(bad("truncated PFM header"));
        }
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let channels = match tokens[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(bad("missing PF/Pf magic")),
    };
    let width: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
    let little = scale < 0.0;

    let mut raw = vec![0u8; width * height * channels * 4];
    reader.read_exact(&mut raw).map_err(io_err(path))?;
    let mut px = vec![Rgb::ZERO; width * height];
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        } as f64;
        let pixel = i / channels;
        let (x, row_from_bottom) = (pixel % width, pixel / width);
        let y = height - 1 - row_from_bottom;
        let dst = &mut px[y * width + x];
        if channels == 1 {
            *dst = Rgb::splat(v);
        } else {
            dst.0[i % 3] = v;
        }
    }
    ImageRgb::from_vec(width, height, px)
}

fn write_pfm(path: &Path, img: &ImageRgb) -> Result<()> {
    let mut out = Vec::with_capacity(img.len() * 12 + 32);
    write!(out, "PF\n{} {}\n-1.0\n", img.width(), img.height()).expect("write to Vec");
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            for c in img.get(x, y).0 {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, out).map_err(io_err(path))
}
