//! Image metrics, the frame-difference consistency metric and depth losses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{Image, ImageRgb, ImageScalar};
use crate::error::{Error, Result};

pub const LAMBDA_SLOPE: f64 = 0.01;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Frame steps averaged by [`partial_rmse`].
pub const PARTIAL_STEPS: [usize; 3] = [1, 2, 4];

pub type FrameSequence = [ImageRgb];

/// `sqrt(mean (a - b)^2)` over pixels and channels.
pub fn rmse(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    a.ensure_dims(b)?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>())
        .sum();
    Ok((sum / (3 * a.len()) as f64).sqrt())
}

fn valid_blur(img: &[f64], w: usize, h: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = taps.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..k).map(|i| taps[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| taps[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

fn ssim_channel(a: &[f64], b: &[f64], w: usize, h: usize, taps: &[f64]) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..a.len()).map(f).collect() };
    let (ma, ow, oh) = valid_blur(a, w, h, taps);
    let (mb, ..) = valid_blur(b, w, h, taps);
    let (saa, ..) = valid_blur(&prod(&|i| a[i] * a[i]), w, h, taps);
    let (sbb, ..) = valid_blur(&prod(&|i| b[i] * b[i]), w, h, taps);
    let (sab, ..) = valid_blur(&prod(&|i| a[i] * b[i]), w, h, taps);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (mx, my) = (ma[i], mb[i]);
        let vx = saa[i] - mx * mx;
        let vy = sbb[i] - my * my;
        let cov = sab[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    total / (ow * oh) as f64
}

/// Mean local SSIM over the windows that fit inside the image (11x11 Gaussian,
/// sigma 1.5, dynamic range 1), averaged over channels. Inputs are clamped to `[0, 1]`.
pub fn ssim(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    a.ensure_dims(b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidValue(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let taps = crate::filter::gaussian(SSIM_SIGMA, SSIM_WINDOW / 2);
    let chan = |img: &ImageRgb, c: usize| -> Vec<f64> { img.pixels().iter().map(|p| p[c].clamp(0.0, 1.0)).collect() };
    let s: f64 = (0..3)
        .map(|c| ssim_channel(&chan(a, c), &chan(b, c), w, h, &taps))
        .sum();
    Ok(s / 3.0)
}

fn difference(a: &ImageRgb, b: &ImageRgb) -> ImageRgb {
    Image::from_vec(
        a.width(),
        a.height(),
        a.pixels().iter().zip(b.pixels()).map(|(p, q)| *p - *q).collect(),
    )
    .expect("dims")
}

fn check_sequences(gt: &FrameSequence, pred: &FrameSequence) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    let needed = PARTIAL_STEPS[PARTIAL_STEPS.len() - 1] + 1;
    if gt.len() < needed {
        return Err(Error::TooFewFrames {
            needed,
            actual: gt.len(),
        });
    }
    for f in gt.iter().chain(pred) {
        gt[0].ensure_dims(f)?;
    }
    Ok(())
}

/// `mean_i RMSE(F_{i+t} - F_i, P_{i+t} - P_i)` over the `N - t` frame pairs.
pub fn partial_rmse_step(gt: &FrameSequence, pred: &FrameSequence, t: usize) -> Result<f64> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if t == 0 || gt.len() <= t {
        return Err(Error::TooFewFrames {
            needed: t + 1,
            actual: gt.len(),
        });
    }
    let terms: Vec<f64> = (0..gt.len() - t)
        .into_par_iter()
        .map(|i| rmse(&difference(&gt[i + t], &gt[i]), &difference(&pred[i + t], &pred[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Consistency report over steps 1, 2 and 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialRmse {
    pub t1: f64,
    pub t2: f64,
    pub t4: f64,
    pub mean: f64,
}

pub fn partial_rmse_report(gt: &FrameSequence, pred: &FrameSequence) -> Result<PartialRmse> {
    check_sequences(gt, pred)?;
    let t1 = partial_rmse_step(gt, pred, 1)?;
    let t2 = partial_rmse_step(gt, pred, 2)?;
    let t4 = partial_rmse_step(gt, pred, 4)?;
    Ok(PartialRmse {
        t1,
        t2,
        t4,
        mean: (t1 + t2 + t4) / 3.0,
    })
}

pub fn partial_rmse(gt: &FrameSequence, pred: &FrameSequence) -> Result<f64> {
    Ok(partial_rmse_report(gt, pred)?.mean)
}

/// `mean |D - (P + mu M)|` with `mu` the masked mean of `D - P`.
pub fn scale_invariant_l1(gt: &ImageScalar, pred: &ImageScalar, mask: &Image<bool>) -> Result<f64> {
    gt.ensure_dims(pred)?;
    gt.ensure_dims(mask)?;
    let mut count = 0usize;
    let mut sum = 0.0;
    for i in 0..gt.len() {
        if mask[i] {
            count += 1;
            sum += gt[i] - pred[i];
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mu = sum / count as f64;
    let total: f64 = (0..gt.len())
        .map(|i| {
            let shift = if mask[i] { mu } else { 0.0 };
            (gt[i] - (pred[i] + shift)).abs()
        })
        .sum();
    Ok(total / gt.len() as f64)
}

/// Mean L1 between forward-difference gradients along x and along y.
pub fn slope_loss(gt: &ImageScalar, pred: &ImageScalar) -> Result<f64> {
    gt.ensure_dims(pred)?;
    let (w, h) = gt.dims();
    if w < 2 || h < 2 {
        return Err(Error::InvalidValue("slope loss needs at least 2x2 pixels".into()));
    }
    let mut sx = 0.0;
    for y in 0..h {
        for x in 0..w - 1 {
            let a = gt.get(x + 1, y) - gt.get(x, y);
            let b = pred.get(x + 1, y) - pred.get(x, y);
            sx += (a - b).abs();
        }
    }
    let mut sy = 0.0;
    for y in 0..h - 1 {
        for x in 0..w {
            let a = gt.get(x, y + 1) - gt.get(x, y);
            let b = pred.get(x, y + 1) - pred.get(x, y);
            sy += (a - b).abs();
        }
    }
    Ok(sx / ((w - 1) * h) as f64 + sy / (w * (h - 1)) as f64)
}

pub fn depth_loss(gt: &ImageScalar, pred: &ImageScalar, mask: &Image<bool>) -> Result<f64> {
    Ok(scale_invariant_l1(gt, pred, mask)? + LAMBDA_SLOPE * slope_loss(gt, pred)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::Rgb;
    use proptest::prelude::*;

    fn noise(w: usize, h: usize, seed: u64) -> ImageRgb {
        let mut s = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        ImageRgb::from_fn(w, h, |_, _| {
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            };
            Rgb::new(next(), next(), next())
        })
    }

    #[test]
    fn rmse_examples() {
        let a = noise(9, 7, 1);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = a.map(|p| *p + Rgb::splat(0.1));
        assert!((rmse(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        let c = noise(9, 7, 2);
        let mut s = 0.0;
        for i in 0..a.len() {
            for k in 0..3 {
                s += (a[i][k] - c[i][k]) * (a[i][k] - c[i][k]);
            }
        }
        assert!((rmse(&a, &c).unwrap() - (s / (3.0 * 63.0)).sqrt()).abs() < 1e-7);
        assert!(rmse(&a, &noise(8, 7, 1)).is_err());
    }

    #[test]
    fn ssim_examples() {
        let a = noise(32, 24, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let board = ImageRgb::from_fn(32, 32, |x, y| Rgb::splat(((x + y) % 2) as f64));
        let inv = board.map(|p| Rgb::ONE - *p);
        assert!(ssim(&board, &inv).unwrap() < 0.0);
        let c1 = SSIM_K1 * SSIM_K1;
        let (x, y) = (0.2, 0.7);
        let expect = (2.0 * x * y + c1) / (x * x + y * y + c1);
        let got = ssim(&ImageRgb::filled(16, 16, Rgb::splat(x)), &ImageRgb::filled(16, 16, Rgb::splat(y))).unwrap();
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn alternating_sequence_hand_value() {
        // gt alternates 0,1,0,1,0; pred is constant 0
        let gt: Vec<ImageRgb> = (0..5).map(|i| ImageRgb::filled(2, 2, Rgb::splat((i % 2) as f64))).collect();
        let pred: Vec<ImageRgb> = (0..5).map(|_| ImageRgb::filled(2, 2, Rgb::ZERO)).collect();
        let r = partial_rmse_report(&gt, &pred).unwrap();
        assert_eq!(r.t1, 1.0);
        assert_eq!(r.t2, 0.0);
        assert_eq!(r.t4, 0.0);
        assert!((r.mean - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn partial_rmse_errors_and_offsets() {
        let gt: Vec<ImageRgb> = (0..6).map(|i| noise(5, 5, i)).collect();
        assert_eq!(partial_rmse(&gt, &gt).unwrap(), 0.0);
        let c = noise(5, 5, 99);
        let shifted: Vec<ImageRgb> = gt.iter().map(|f| Image::from_vec(5, 5, f.pixels().iter().zip(c.pixels()).map(|(a, b)| *a + *b).collect()).unwrap()).collect();
        assert!(partial_rmse(&gt, &shifted).unwrap() < 1e-15);
        assert!(matches!(partial_rmse(&gt[..4], &gt[..4]), Err(Error::TooFewFrames { needed: 5, actual: 4 })));
        assert!(matches!(partial_rmse(&gt, &gt[..5]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn depth_losses() {
        let (w, h) = (8, 6);
        let gt = ImageScalar::from_fn(w, h, |x, y| 0.1 + 0.05 * x as f64 + 0.02 * y as f64);
        let mask = Image::from_fn(w, h, |x, _| x > 1);
        for c in [-0.3, 0.2] {
            let p = ImageScalar::from_fn(w, h, |x, y| gt.get(x, y) + if *mask.get(x, y) { c } else { 0.0 });
            assert!(scale_invariant_l1(&gt, &p, &mask).unwrap() < 1e-15);
        }
        assert_eq!(depth_loss(&gt, &gt, &mask).unwrap(), 0.0);
        let tilted = ImageScalar::from_fn(w, h, |x, y| 0.3 + 0.01 * x as f64 + 0.04 * y as f64);
        assert!((slope_loss(&gt, &tilted).unwrap() - (0.04 + 0.02)).abs() < 1e-6);
        assert!(matches!(
            scale_invariant_l1(&gt, &gt, &Image::filled(w, h, false)),
            Err(Error::EmptyMask)
        ));
    }

    proptest! {
        #[test]
        fn rmse_is_a_metric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
            let (a, b, c) = (noise(6, 5, s1), noise(6, 5, s2), noise(6, 5, s3));
            let ab = rmse(&a, &b).unwrap();
            prop_assert_eq!(ab, rmse(&b, &a).unwrap());
            prop_assert!(ab <= rmse(&a, &c).unwrap() + rmse(&c, &b).unwrap() + 1e-12);
            prop_assert_eq!(ab == 0.0, s1 == s2);
        }
    }
}
