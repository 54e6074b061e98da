//! Morlet band-pass and Gaussian low-pass filters, built directly on the DFT
//! frequency grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ScatteringConfig;
use crate::error::Result;

/// Spatial width of the mother wavelet envelope, in pixels.
const SIGMA0: f64 = 0.8;
/// Center frequency of the finest band-pass, in radians per pixel.
const XI0: f64 = 3.0 * PI / 4.0;
/// Spectral replicas summed on each axis when periodizing a filter.
const PERIODS: i32 = 2;

/// Describes one band-pass filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPassInfo {
    pub scale: usize,
    pub orientation: usize,
    /// Orientation angle in radians, in `[0, π)`.
    pub angle: f64,
    /// Radial center frequency in radians per pixel.
    pub center_frequency: f64,
    /// Spatial standard deviation of the envelope along the wave direction.
    pub sigma: f64,
    /// Envelope aspect ratio (width across / width along is `1 / slant`).
    pub slant: f64,
}

/// Frequency-domain filter bank for a fixed image size.
///
/// All spectra are real-valued: the Gabor envelope is centered at the
/// origin, so its transform is a real Gaussian bump.
#[derive(Clone, Debug)]
pub struct FilterBank {
    config: ScatteringConfig,
    psi: Vec<Vec<f64>>,
    psi_info: Vec<BandPassInfo>,
    phi: Vec<f64>,
    phi_sigma: f64,
}

/// Signed angular frequency of DFT bin `k` on an axis of length `n`.
pub(crate) fn bin_frequency(k: usize, n: usize) -> f64 {
    let signed = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * signed / n as f64
}

/// Evaluates `f(ωy, ωx)` summed over the spectral replicas of every DFT bin.
fn periodized(height: usize, width: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(height * width);
    for ky in 0..height {
        let wy = bin_frequency(ky, height);
        for kx in 0..width {
            let wx = bin_frequency(kx, width);
            let mut acc = 0.0;
            for p in -PERIODS..=PERIODS {
                for q in -PERIODS..=PERIODS {
                    acc += f(wy + 2.0 * PI * p as f64, wx + 2.0 * PI * q as f64);
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Index of the bin holding frequency `-ω` for bin `k`.
pub(crate) fn mirror(k: usize, n: usize) -> usize {
    (n - k) % n
}

impl FilterBank {
    pub fn new(config: &ScatteringConfig) -> Result<Self> {
        config.validate()?;
        let (h, w) = (config.height, config.width);
        let l = config.orientations;
        let slant = 4.0 / l as f64;

        let mut psi = Vec::with_capacity(config.scales * l);
        let mut psi_info = Vec::with_capacity(config.scales * l);
        for j in 0..config.scales {
            let sigma = SIGMA0 * 2f64.powi(j as i32);
            let xi = XI0 / 2f64.powi(j as i32);
            for t in 0..l {
                let angle = PI * t as f64 / l as f64;
                let (ux, uy) = (angle.cos(), angle.sin());
                let envelope = |vy: f64, vx: f64| {
                    let along = vx * ux + vy * uy;
                    let across = -vx * uy + vy * ux;
                    (-0.5 * sigma * sigma * (along * along + across * across / (slant * slant))).exp()
                };
                let shifted = periodized(h, w, |wy, wx| envelope(wy - xi * uy, wx - xi * ux));
                let centered = periodized(h, w, envelope);
                // remove the DC leak so that ψ̂(0) is exactly zero
                let kappa = shifted[0] / centered[0];
                let spectrum = shifted
                    .iter()
                    .zip(&centered)
                    .map(|(s, c)| s - kappa * c)
                    .collect();
                psi.push(spectrum);
                psi_info.push(BandPassInfo {
                    scale: j,
                    orientation: t,
                    angle,
                    center_frequency: xi,
                    sigma,
                    slant,
                });
            }
        }

        let phi_sigma = SIGMA0 * 2f64.powi(config.scales as i32);
        let mut phi = periodized(h, w, |wy, wx| {
            (-0.5 * phi_sigma * phi_sigma * (wy * wy + wx * wx)).exp()
        });
        let dc = phi[0];
        phi.iter_mut().for_each(|v| *v /= dc);

        let mut bank = Self {
            config: config.clone(),
            psi,
            psi_info,
            phi,
            phi_sigma,
        };
        bank.normalize_frame();
        Ok(bank)
    }

    /// Rescales the band-pass filters so the Littlewood–Paley sum peaks at
    /// exactly one while the low-pass keeps unit DC gain.
    fn normalize_frame(&mut self) {
        let band = self.band_energy();
        let mut factor = f64::INFINITY;
        for (i, (&b, &p)) in band.iter().zip(&self.phi).enumerate() {
            if i != 0 && b > 1e-12 {
                factor = factor.min((1.0 - p * p).max(0.0) / b);
            }
        }
        if factor.is_finite() && factor > 0.0 {
            let scale = factor.sqrt();
            for spectrum in &mut self.psi {
                spectrum.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }

    /// `½ Σ (|ψ̂(ω)|² + |ψ̂(−ω)|²)` on the DFT grid.
    fn band_energy(&self) -> Vec<f64> {
        let (h, w) = (self.config.height, self.config.width);
        let mut out = vec![0.0; h * w];
        for spectrum in &self.psi {
            for ky in 0..h {
                let my = mirror(ky, h);
                for kx in 0..w {
                    let a = spectrum[ky * w + kx];
                    let b = spectrum[my * w + mirror(kx, w)];
                    out[ky * w + kx] += 0.5 * (a * a + b * b);
                }
            }
        }
        out
    }

    /// `|φ̂(ω)|² + ½ Σ (|ψ̂(ω)|² + |ψ̂(−ω)|²)` on the DFT grid.
    pub fn littlewood_paley(&self) -> Vec<f64> {
        let mut lp = self.band_energy();
        lp.iter_mut().zip(&self.phi).for_each(|(v, p)| *v += p * p);
        lp
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.config
    }

    pub fn band_pass_count(&self) -> usize {
        self.psi.len()
    }

    /// Band-pass spectra in (scale, orientation) order.
    pub fn psi(&self) -> &[Vec<f64>] {
        &self.psi
    }

    pub fn psi_info(&self) -> &[BandPassInfo] {
        &self.psi_info
    }

    /// Band-pass spectrum for `(scale, orientation)`.
    pub fn band_pass(&self, scale: usize, orientation: usize) -> &[f64] {
        &self.psi[scale * self.config.orientations + orientation]
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi_sigma(&self) -> f64 {
        self.phi_sigma
    }
}
