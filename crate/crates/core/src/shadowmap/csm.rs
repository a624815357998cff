use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{gaussian, gaussian_with_derivative, kernel_radius};
use crate::lighting::{SIGMA_MAX, SIGMA_MIN};

use super::raster::LightDepthMap;

pub const K_TERMS: usize = 8;
pub const BASIS_LEN: usize = 2 * K_TERMS;
/// Shadow-map resolution at which `sigma` is measured in texels.
pub const REFERENCE_RESOLUTION: usize = 256;

pub type Basis = [f64; BASIS_LEN];

/// Odd-harmonic frequencies `(2k - 1) pi / 2`, k = 1..K.
pub fn frequencies() -> [f64; K_TERMS] {
    std::array::from_fn(|k| (2 * k + 1) as f64 * std::f64::consts::FRAC_PI_2)
}

/// `[cos(c_1 z), sin(c_1 z), cos(c_2 z), sin(c_2 z), ...]`.
pub fn basis(z: f64) -> Basis {
    let t = std::f64::consts::FRAC_PI_2 * z;
    let (s1, c1) = t.sin_cos();
    // step by 2t between consecutive odd harmonics
    let (s2, c2) = (2.0 * s1 * c1, c1 * c1 - s1 * s1);
    let mut out = [0.0; BASIS_LEN];
    let (mut c, mut s) = (c1, s1);
    for k in 0..K_TERMS {
        out[2 * k] = c;
        out[2 * k + 1] = s;
        let nc = c * c2 - s * s2;
        let ns = s * c2 + c * s2;
        c = nc;
        s = ns;
    }
    out
}

/// Unclamped reconstruction `1/2 + sum_k [cos(c_k d) S_k - sin(c_k d) C_k] / c_k` from a
/// (possibly convolved) basis sample. Pass `constant = false` to drop the `1/2`, which
/// gives the reconstruction of a derivative image.
pub fn series(d: f64, b: &Basis, constant: bool) -> f64 {
    let rd = basis(d);
    let c = frequencies();
    let mut acc = 0.0;
    for k in 0..K_TERMS {
        acc += (rd[2 * k] * b[2 * k + 1] - rd[2 * k + 1] * b[2 * k]) / c[k];
    }
    if constant {
        0.5 + acc
    } else {
        acc
    }
}

/// Clamped truncated-series approximation of the step `H(z - d)`.
pub fn csm_step(d: f64, z: f64) -> f64 {
    series(d, &basis(z), true).clamp(0.0, 1.0)
}

/// `sigma` measured at [`REFERENCE_RESOLUTION`], rescaled to `resolution` texels.
pub fn effective_sigma(sigma: f64, resolution: usize) -> f64 {
    sigma * resolution as f64 / REFERENCE_RESOLUTION as f64
}

pub fn check_sigma(sigma: f64) -> Result<()> {
    if !(SIGMA_MIN..=SIGMA_MAX).contains(&sigma) {
        return Err(Error::SigmaOutOfBounds {
            sigma,
            min: SIGMA_MIN,
            max: SIGMA_MAX,
        });
    }
    Ok(())
}

/// Basis images of a light depth map on a square grid, optionally Gaussian-convolved.
#[derive(Debug, Clone)]
pub struct CsmStack {
    resolution: usize,
    sigma: Option<f64>,
    data: Vec<Basis>,
}

impl CsmStack {
    pub fn from_depth(ldm: &LightDepthMap) -> Self {
        CsmStack {
            resolution: ldm.resolution(),
            sigma: None,
            data: ldm.depth.pixels().iter().map(|&z| basis(z)).collect(),
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Effective (texel-unit) sigma of the convolution applied, if any.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn texel(&self, index: usize) -> &Basis {
        &self.data[index]
    }

    /// Full separable convolution with a normalized Gaussian of texel-unit `sigma_eff`
    /// over `2 radius + 1` taps, clamp-to-edge.
    pub fn convolved(&self, sigma_eff: f64, radius: usize) -> CsmStack {
        let n = self.resolution;
        let taps = gaussian(sigma_eff, radius);
        let r = radius as i64;
        let clamp = |i: i64| i.clamp(0, n as i64 - 1) as usize;
        let horizontal: Vec<Basis> = (0..n * n)
            .into_par_iter()
            .map(|i| {
                let (x, y) = ((i % n) as i64, i / n);
                let mut acc = [0.0; BASIS_LEN];
                for (k, w) in taps.iter().enumerate() {
                    let b = &self.data[y * n + clamp(x + k as i64 - r)];
                    for j in 0..BASIS_LEN {
                        acc[j] += w * b[j];
                    }
                }
                acc
            })
            .collect();
        let data = (0..n * n)
            .into_par_iter()
            .map(|i| {
                let (x, y) = (i % n, (i / n) as i64);
                let mut acc = [0.0; BASIS_LEN];
                for (k, w) in taps.iter().enumerate() {
                    let b = &horizontal[clamp(y + k as i64 - r) * n + x];
                    for j in 0..BASIS_LEN {
                        acc[j] += w * b[j];
                    }
                }
                acc
            })
            .collect();
        CsmStack {
            resolution: n,
            sigma: Some(sigma_eff),
            data,
        }
    }

    /// Clamped visibility of a receiver at normalized depth `d` looking up `texel`.
    pub fn visibility(&self, texel: usize, d: f64) -> f64 {
        series(d, &self.data[texel], true).clamp(0.0, 1.0)
    }
}

/// Per-light CSM evaluator at a fixed set of receivers. Only the texels the receivers
/// look up are convolved, and the basis is rebuilt from the stored depth map per call.
#[derive(Debug, Clone)]
pub struct CsmEvaluator {
    resolution: usize,
    depth: Vec<f64>,
    receivers: Vec<Option<(usize, f64)>>,
    bias: f64,
    /// Needed texels grouped by column: `(column, sorted rows)`.
    columns: Vec<(usize, Vec<usize>)>,
}

/// Visibility per receiver slot (1 where there is no receiver) and, if requested,
/// `dV/dsigma` in the nominal sigma units.
#[derive(Debug, Clone, PartialEq)]
pub struct CsmResult {
    pub visibility: Vec<f64>,
    pub gradient: Option<Vec<f64>>,
}

impl CsmEvaluator {
    pub fn new(ldm: &LightDepthMap, receivers: Vec<Option<(usize, f64)>>, bias: f64) -> Self {
        let n = ldm.resolution();
        let mut by_column: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(t, _) in receivers.iter().flatten() {
            by_column[t % n].push(t / n);
        }
        let columns = by_column
            .into_iter()
            .enumerate()
            .filter(|(_, rows)| !rows.is_empty())
            .map(|(x, mut rows)| {
                rows.sort_unstable();
                rows.dedup();
                (x, rows)
            })
            .collect();
        CsmEvaluator {
            resolution: n,
            depth: ldm.depth.pixels().to_vec(),
            receivers,
            bias,
            columns,
        }
    }

    pub fn receivers(&self) -> &[Option<(usize, f64)>] {
        &self.receivers
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Window radius used for nominal `sigma` at this resolution.
    pub fn radius_for(&self, sigma: f64) -> usize {
        kernel_radius(effective_sigma(sigma, self.resolution))
    }

    pub fn evaluate(&self, sigma: f64, want_grad: bool) -> Result<CsmResult> {
        check_sigma(sigma)?;
        Ok(self.evaluate_with_radius(sigma, self.radius_for(sigma), want_grad))
    }

    /// As [`evaluate`](Self::evaluate) with the window radius fixed by the caller, so
    /// nearby sigmas share one window.
    pub fn evaluate_with_radius(&self, sigma: f64, radius: usize, want_grad: bool) -> CsmResult {
        let n = self.resolution;
        let scale = n as f64 / REFERENCE_RESOLUTION as f64;
        let sigma_eff = sigma * scale;
        let (w, dw) = gaussian_with_derivative(sigma_eff, radius);
        let r = radius as i64;
        let clamp = |i: i64| i.clamp(0, n as i64 - 1) as usize;
        let basis_map: Vec<Basis> = self.depth.iter().map(|&z| basis(z)).collect();

        // per column: convolved texels keyed by row
        let convolved: Vec<(usize, Vec<(usize, Basis, Basis)>)> = self
            .columns
            .par_iter()
            .map(|(x, rows)| {
                let x = *x as i64;
                let lo = rows[0].saturating_sub(radius);
                let hi = (rows[rows.len() - 1] + radius).min(n - 1);
                let span = hi - lo + 1;
                let mut h0 = vec![[0.0; BASIS_LEN]; span];
                let mut h1 = vec![[0.0; BASIS_LEN]; if want_grad { span } else { 0 }];
                // only rows inside some needed window
                let mut needed = vec![false; span];
                for &y in rows {
                    let a = y.saturating_sub(radius).max(lo) - lo;
                    let b = (y + radius).min(hi) - lo;
                    needed[a..=b].iter_mut().for_each(|v| *v = true);
                }
                for (yy, slot) in needed.iter().enumerate() {
                    if !*slot {
                        continue;
                    }
                    let y = lo + yy;
                    let row = &basis_map[y * n..(y + 1) * n];
                    let mut a0 = [0.0; BASIS_LEN];
                    if want_grad {
                        let mut a1 = [0.0; BASIS_LEN];
                        for k in 0..w.len() {
                            let b = &row[clamp(x + k as i64 - r)];
                            let (wk, dk) = (w[k], dw[k]);
                            for j in 0..BASIS_LEN {
                                a0[j] += wk * b[j];
                                a1[j] += dk * b[j];
                            }
                        }
                        h1[yy] = a1;
                    } else {
                        for k in 0..w.len() {
                            let b = &row[clamp(x + k as i64 - r)];
                            let wk = w[k];
                            for j in 0..BASIS_LEN {
                                a0[j] += wk * b[j];
                            }
                        }
                    }
                    h0[yy] = a0;
                }
                let out = rows
                    .iter()
                    .map(|&y| {
                        let mut v = [0.0; BASIS_LEN];
                        let mut dv = [0.0; BASIS_LEN];
                        for k in 0..w.len() {
                            let yy = clamp(y as i64 + k as i64 - r) - lo;
                            let (wk, dk) = (w[k], dw[k]);
                            let b0 = &h0[yy];
                            for j in 0..BASIS_LEN {
                                v[j] += wk * b0[j];
                            }
                            if want_grad {
                                let b1 = &h1[yy];
                                for j in 0..BASIS_LEN {
                                    dv[j] += wk * b1[j] + dk * b0[j];
                                }
                            }
                        }
                        (y, v, dv)
                    })
                    .collect();
                (x as usize, out)
            })
            .collect();

        let mut lookup: Vec<u32> = vec![u32::MAX; n * n];
        let mut flat: Vec<(Basis, Basis)> = Vec::new();
        for (x, texels) in convolved {
            for (y, v, dv) in texels {
                lookup[y * n + x] = flat.len() as u32;
                flat.push((v, dv));
            }
        }

        let mut visibility = vec![1.0; self.receivers.len()];
        let mut gradient = want_grad.then(|| vec![0.0; self.receivers.len()]);
        for (i, rec) in self.receivers.iter().enumerate() {
            let Some((t, d)) = rec else { continue };
            let (v, dv) = &flat[lookup[*t] as usize];
            let dd = d - self.bias;
            let raw = series(dd, v, true);
            visibility[i] = raw.clamp(0.0, 1.0);
            if let Some(g) = gradient.as_mut() {
                if raw > 0.0 && raw < 1.0 {
                    g[i] = series(dd, dv, false) * scale;
                }
            }
        }
        CsmResult {
            visibility,
            gradient,
        }
    }
}
