//! Separable convolution with clamp-to-edge borders, Gaussian kernels and their
//! sigma-derivatives, and a Laplacian-of-Gaussian.

use crate::buffer::ImageScalar;
use crate::error::{Error, Result};

/// `2 ceil(3 sigma) + 1`.
pub fn kernel_size(sigma: f64) -> usize {
    2 * kernel_radius(sigma) + 1
}

pub fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// Normalized Gaussian taps over `[-radius, radius]`.
pub fn gaussian(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    let mut w: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}

/// Normalized Gaussian taps and their derivative in `sigma` with the window held fixed:
/// `dw_i/dsigma = w_i (i^2 - sum_j w_j j^2) / sigma^3`.
pub fn gaussian_with_derivative(sigma: f64, radius: usize) -> (Vec<f64>, Vec<f64>) {
    let w = gaussian(sigma, radius);
    let r = radius as i64;
    let second: f64 = w
        .iter()
        .zip(-r..=r)
        .map(|(wi, i)| wi * (i * i) as f64)
        .sum();
    let s3 = sigma * sigma * sigma;
    let dw = w
        .iter()
        .zip(-r..=r)
        .map(|(wi, i)| wi * ((i * i) as f64 - second) / s3)
        .collect();
    (w, dw)
}

#[inline]
fn clamp_index(i: i64, n: usize) -> usize {
    i.clamp(0, n as i64 - 1) as usize
}

/// `out[i] = sum_k taps[k] src[clamp(i + k - r)]` over a strided line.
pub fn convolve_line(src: &[f64], taps: &[f64], out: &mut [f64]) {
    let n = src.len();
    let r = (taps.len() / 2) as i64;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, t) in taps.iter().enumerate() {
            acc += t * src[clamp_index(i as i64 + k as i64 - r, n)];
        }
        *o = acc;
    }
}

/// Transpose of [`convolve_line`]: scatters `g[i] * taps[k]` back onto the clamped source.
pub fn convolve_line_adjoint(g: &[f64], taps: &[f64], out: &mut [f64]) {
    let n = g.len();
    let r = (taps.len() / 2) as i64;
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, gi) in g.iter().enumerate() {
        for (k, t) in taps.iter().enumerate() {
            out[clamp_index(i as i64 + k as i64 - r, n)] += t * gi;
        }
    }
}

fn rows(img: &ImageScalar, taps: &[f64], adjoint: bool) -> ImageScalar {
    let (w, h) = img.dims();
    let mut out = ImageScalar::filled(w, h, 0.0);
    for y in 0..h {
        let src = &img.pixels()[y * w..(y + 1) * w];
        let dst = &mut out.pixels_mut()[y * w..(y + 1) * w];
        if adjoint {
            convolve_line_adjoint(src, taps, dst);
        } else {
            convolve_line(src, taps, dst);
        }
    }
    out
}

fn cols(img: &ImageScalar, taps: &[f64], adjoint: bool) -> ImageScalar {
    let (w, h) = img.dims();
    let mut out = ImageScalar::filled(w, h, 0.0);
    let mut line = vec![0.0; h];
    let mut res = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            line[y] = *img.get(x, y);
        }
        if adjoint {
            convolve_line_adjoint(&line, taps, &mut res);
        } else {
            convolve_line(&line, taps, &mut res);
        }
        for y in 0..h {
            *out.get_mut(x, y) = res[y];
        }
    }
    out
}

/// Separable convolution: `horizontal` along rows, then `vertical` along columns.
pub fn separable(img: &ImageScalar, horizontal: &[f64], vertical: &[f64]) -> ImageScalar {
    cols(&rows(img, horizontal, false), vertical, false)
}

/// Adjoint of [`separable`] under the standard inner product.
pub fn separable_adjoint(img: &ImageScalar, horizontal: &[f64], vertical: &[f64]) -> ImageScalar {
    rows(&cols(img, vertical, true), horizontal, true)
}

/// Laplacian-of-Gaussian filter for an odd window `k`, with `sigma = (k - 1) / 6`.
#[derive(Debug, Clone)]
pub struct LogKernel {
    pub size: usize,
    pub smooth: Vec<f64>,
    pub second: Vec<f64>,
}

impl LogKernel {
    pub fn new(size: usize) -> Result<Self> {
        if size.is_multiple_of(2) || size < 3 {
            return Err(Error::EvenKernel(size));
        }
        let sigma = (size - 1) as f64 / 6.0;
        let r = (size / 2) as i64;
        let smooth = gaussian(sigma, size / 2);
        // second derivative of the Gaussian, made exactly zero-sum and scaled so that
        // the response to x^2 / 2 is 1
        let mut second: Vec<f64> = smooth
            .iter()
            .zip(-r..=r)
            .map(|(g, i)| g * ((i * i) as f64 - sigma * sigma) / sigma.powi(4))
            .collect();
        let mean = second.iter().sum::<f64>() / size as f64;
        second.iter_mut().for_each(|v| *v -= mean);
        let moment: f64 = second
            .iter()
            .zip(-r..=r)
            .map(|(v, i)| v * (i * i) as f64)
            .sum();
        second.iter_mut().for_each(|v| *v *= 2.0 / moment);
        Ok(LogKernel {
            size,
            smooth,
            second,
        })
    }

    /// `d2/dx2 (G * img) + d2/dy2 (G * img)`.
    pub fn apply(&self, img: &ImageScalar) -> ImageScalar {
        let a = separable(img, &self.second, &self.smooth);
        let b = separable(img, &self.smooth, &self.second);
        add(&a, &b)
    }

    pub fn apply_adjoint(&self, img: &ImageScalar) -> ImageScalar {
        let a = separable_adjoint(img, &self.second, &self.smooth);
        let b = separable_adjoint(img, &self.smooth, &self.second);
        add(&a, &b)
    }
}

fn add(a: &ImageScalar, b: &ImageScalar) -> ImageScalar {
    let mut out = a.clone();
    for (o, v) in out.pixels_mut().iter_mut().zip(b.pixels()) {
        *o += v;
    }
    out
}
