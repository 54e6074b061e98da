//! 2D wavelet scattering transform up to order two.
//!
//! Each output channel is one scattering path: the image is filtered by a
//! cascade of band-pass wavelets with a modulus after each, then averaged by
//! the Gaussian low-pass and subsampled by `2^J`. All filtering is circular
//! (FFT based) at full resolution.

mod fft;
mod filters;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub use filters::{BandPassInfo, FilterBank};
pub(crate) use fft::Fft2;

/// Geometry of the scattering transform.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    /// Number of dyadic scales `J`.
    pub scales: usize,
    /// Orientations per scale `L`, spread over `[0, π)`.
    pub orientations: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            scales: 2,
            orientations: 8,
            height: 180,
            width: 300,
        }
    }
}

/// Output tensor extents of a scattering configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ScatteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.orientations == 0 {
            return Err(Error::Config(format!(
                "scattering needs at least one scale and orientation (J={}, L={})",
                self.scales, self.orientations
            )));
        }
        let factor = self.subsampling();
        if self.height == 0 || self.width == 0 || !self.height.is_multiple_of(factor) || !self.width.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "input {}×{} is not divisible by 2^J = {factor}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn subsampling(&self) -> usize {
        1usize.checked_shl(self.scales as u32).unwrap_or(0)
    }

    /// Channels and spatial extents of the full order-2 transform.
    pub fn output_layout(&self) -> Layout {
        let (j, l) = (self.scales, self.orientations);
        let factor = self.subsampling().max(1);
        Layout {
            channels: 1 + j * l + l * l * j * (j.saturating_sub(1)) / 2,
            height: self.height / factor,
            width: self.width / factor,
        }
    }

    /// Path of each output channel, in channel order.
    pub fn path_index(&self, max_order: usize) -> Vec<ScatteringPath> {
        let (j, l) = (self.scales, self.orientations);
        let mut paths = vec![ScatteringPath::Zeroth];
        if max_order >= 1 {
            for scale in 0..j {
                for orientation in 0..l {
                    paths.push(ScatteringPath::First { scale, orientation });
                }
            }
        }
        if max_order >= 2 {
            for scale1 in 0..j {
                for orientation1 in 0..l {
                    for scale2 in scale1 + 1..j {
                        for orientation2 in 0..l {
                            paths.push(ScatteringPath::Second {
                                scale1,
                                orientation1,
                                scale2,
                                orientation2,
                            });
                        }
                    }
                }
            }
        }
        paths
    }
}

/// `output_layout` as a free function.
pub fn output_layout(config: &ScatteringConfig) -> Layout {
    config.output_layout()
}

/// Builds the band-pass and low-pass filters for `config`.
pub fn build_filter_bank(config: &ScatteringConfig) -> Result<FilterBank> {
    FilterBank::new(config)
}

/// Which cascade produced a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScatteringPath {
    Zeroth,
    First {
        scale: usize,
        orientation: usize,
    },
    Second {
        scale1: usize,
        orientation1: usize,
        scale2: usize,
        orientation2: usize,
    },
}

impl ScatteringPath {
    pub fn order(&self) -> usize {
        match self {
            ScatteringPath::Zeroth => 0,
            ScatteringPath::First { .. } => 1,
            ScatteringPath::Second { .. } => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScatteringOutput {
    /// `C × H/2^J × W/2^J` coefficients.
    pub coefficients: Tensor<f64>,
    pub path_index: Vec<ScatteringPath>,
}

struct Workspace<'a> {
    bank: &'a FilterBank,
    full: Fft2,
    small: Fft2,
    scratch: Vec<Complex64>,
    small_h: usize,
    small_w: usize,
}

impl Workspace<'_> {
    /// `IFFT(spectrum · filter)` followed by the complex modulus, returned
    /// as the spectrum of the (real) result.
    fn modulus_spectrum(&mut self, spectrum: &[Complex64], filter: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = spectrum.iter().zip(filter).map(|(s, &f)| s * f).collect();
        self.full.inverse(&mut buf, &mut self.scratch);
        buf.iter_mut().for_each(|v| *v = Complex64::new(v.norm(), 0.0));
        self.full.forward(&mut buf, &mut self.scratch);
        buf
    }

    /// Low-pass then subsample by `2^J`. Subsampling a signal by `f` folds its
    /// spectrum onto an `H/f × W/f` grid, so only a small inverse FFT is needed.
    fn low_pass(&mut self, spectrum: &[Complex64], out: &mut Vec<f64>) {
        let cfg = self.bank.config();
        let (h, w) = (cfg.height, cfg.width);
        let factor = cfg.subsampling();
        let (sh, sw) = (self.small_h, self.small_w);
        let phi = self.bank.phi();
        let mut folded = vec![Complex64::default(); sh * sw];
        for ky in 0..h {
            let row = (ky % sh) * sw;
            for kx in 0..w {
                let i = ky * w + kx;
                folded[row + kx % sw] += spectrum[i] * phi[i];
            }
        }
        let norm = 1.0 / (factor * factor) as f64;
        folded.iter_mut().for_each(|v| *v *= norm);
        self.small.inverse(&mut folded, &mut self.scratch);
        out.extend(folded.iter().map(|v| v.re));
    }
}

/// Scattering coefficients of one grayscale `H × W` image.
pub fn scatter<T: Scalar>(image: &Tensor<T>, bank: &FilterBank, max_order: usize) -> Result<ScatteringOutput> {
    let cfg = bank.config();
    if max_order > 2 {
        return Err(Error::Config(format!(
            "scattering order {max_order} is unsupported (maximum 2)"
        )));
    }
    if image.shape() != [cfg.height, cfg.width] {
        return Err(Error::Shape(format!(
            "image of shape {:?} does not match the {}×{} filter bank",
            image.shape(),
            cfg.height,
            cfg.width
        )));
    }
    let layout = cfg.output_layout();
    let mut ws = Workspace {
        bank,
        full: Fft2::new(cfg.height, cfg.width),
        small: Fft2::new(layout.height, layout.width),
        scratch: Vec::new(),
        small_h: layout.height,
        small_w: layout.width,
    };

    let mut x_hat: Vec<Complex64> = image
        .data()
        .iter()
        .map(|v| Complex64::new(v.to_f64().unwrap_or(f64::NAN), 0.0))
        .collect();
    if x_hat.iter().any(|v| !v.re.is_finite()) {
        return Err(Error::NonFinite("scatter input".into()));
    }
    ws.full.forward(&mut x_hat, &mut ws.scratch);

    let paths = cfg.path_index(max_order);
    let mut first = Vec::with_capacity(layout.height * layout.width * paths.len());
    let mut second = Vec::new();
    ws.low_pass(&x_hat, &mut first);

    if max_order >= 1 {
        let l = cfg.orientations;
        for j1 in 0..cfg.scales {
            for t1 in 0..l {
                let u1 = ws.modulus_spectrum(&x_hat, bank.band_pass(j1, t1));
                ws.low_pass(&u1, &mut first);
                if max_order < 2 {
                    continue;
                }
                for j2 in j1 + 1..cfg.scales {
                    for t2 in 0..l {
                        let u2 = ws.modulus_spectrum(&u1, bank.band_pass(j2, t2));
                        ws.low_pass(&u2, &mut second);
                    }
                }
            }
        }
    }
    first.extend(second);
    let coefficients = Tensor::new(&[paths.len(), layout.height, layout.width], first)?;
    Ok(ScatteringOutput {
        coefficients,
        path_index: paths,
    })
}

/// Scatters many images in parallel; the output order matches the input.
pub fn scatter_batch<T: Scalar>(
    images: &[Tensor<T>],
    bank: &FilterBank,
    max_order: usize,
) -> Result<Vec<ScatteringOutput>> {
    images
        .par_iter()
        .map(|img| scatter(img, bank, max_order))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_examples() {
        let cases = [((2, 8, 180, 300), (81, 45, 75)), ((1, 8, 180, 300), (9, 90, 150)), ((3, 6, 240, 320), (127, 30, 40))];
        for ((j, l, h, w), (c, oh, ow)) in cases {
            let cfg = ScatteringConfig {
                scales: j,
                orientations: l,
                height: h,
                width: w,
            };
            assert_eq!(
                cfg.output_layout(),
                Layout {
                    channels: c,
                    height: oh,
                    width: ow
                }
            );
            assert_eq!(cfg.path_index(2).len(), c);
        }
    }

    #[test]
    fn rejects_indivisible_extent() {
        let cfg = ScatteringConfig {
            height: 182,
            ..Default::default()
        };
        assert!(matches!(build_filter_bank(&cfg), Err(Error::Config(_))));
        let cfg = ScatteringConfig {
            scales: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bank_sizes() {
        let small = |j, l| ScatteringConfig {
            scales: j,
            orientations: l,
            height: 32,
            width: 48,
        };
        let bank = build_filter_bank(&small(2, 8)).unwrap();
        assert_eq!(bank.band_pass_count(), 16);
        assert_eq!(bank.phi().len(), 32 * 48);
        let bank = build_filter_bank(&small(1, 4)).unwrap();
        assert_eq!(bank.band_pass_count(), 4);
    }

    #[test]
    fn band_pass_has_no_dc() {
        let bank = build_filter_bank(&ScatteringConfig::default()).unwrap();
        for psi in bank.psi() {
            let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(psi[0].abs() < 1e-6 * peak);
        }
        assert!((bank.phi()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_two_paths_decrease_in_frequency() {
        let cfg = ScatteringConfig {
            scales: 3,
            orientations: 4,
            height: 64,
            width: 64,
        };
        for p in cfg.path_index(2) {
            if let ScatteringPath::Second { scale1, scale2, .. } = p {
                assert!(scale2 > scale1);
            }
        }
        assert_eq!(cfg.path_index(0), vec![ScatteringPath::Zeroth]);
        assert_eq!(cfg.path_index(1).len(), 13);
    }

    #[test]
    fn zero_and_constant_images() {
        let cfg = ScatteringConfig {
            scales: 2,
            orientations: 4,
            height: 32,
            width: 48,
        };
        let bank = build_filter_bank(&cfg).unwrap();
        let zero = Tensor::<f64>::zeros(&[32, 48]).unwrap();
        let out = scatter(&zero, &bank, 2).unwrap();
        assert!(out.coefficients.data().iter().all(|&v| v == 0.0));

        let c = 0.7;
        let constant = Tensor::<f64>::full(&[32, 48], c).unwrap();
        let out = scatter(&constant, &bank, 2).unwrap();
        let plane = 8 * 12;
        let data = out.coefficients.data();
        assert!(data[..plane].iter().all(|v| (v - c).abs() < 1e-12));
        assert!(data[plane..].iter().all(|v| v.abs() < 1e-6 * c));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = ScatteringConfig {
            scales: 1,
            orientations: 2,
            height: 16,
            width: 16,
        };
        let bank = build_filter_bank(&cfg).unwrap();
        let img = Tensor::<f64>::zeros(&[16, 18]).unwrap();
        assert!(matches!(scatter(&img, &bank, 2), Err(Error::Shape(_))));
        let img = Tensor::<f64>::zeros(&[16, 16]).unwrap();
        assert!(matches!(scatter(&img, &bank, 3), Err(Error::Config(_))));
    }
}
