mod common;

use common::*;
use sigscat::scattering::{scatter, FilterBank, ScatteringConfig, ScatteringPath};

fn config(scales: usize, orientations: usize, height: usize, width: usize) -> ScatteringConfig {
    ScatteringConfig {
        scales,
        orientations,
        height,
        width,
    }
}

#[test]
fn channel_count_follows_the_path_count() {
    for (j, l, h, w) in [(2, 8, 180, 300), (3, 4, 64, 96), (1, 6, 40, 60)] {
        let cfg = config(j, l, h, w);
        let bank = FilterBank::new(&cfg).unwrap();
        let out = scatter(&noise_image(h, w, 1), &bank, 2).unwrap();
        let channels = 1 + j * l + l * l * j * (j - 1) / 2;
        let f = 1 << j;
        assert_eq!(out.coefficients.shape(), [channels, h / f, w / f]);
        assert_eq!(out.path_index.len(), channels);
        assert_eq!(out.path_index.iter().filter(|p| p.order() == 1).count(), j * l);
        assert_eq!(out.path_index[0], ScatteringPath::Zeroth);
    }
}

#[test]
fn matches_the_per_path_oracle() {
    let cfg = config(2, 8, 180, 300);
    let bank = FilterBank::new(&cfg).unwrap();
    for seed in 0..2 {
        let img = noise_image(180, 300, seed);
        let fast = scatter(&img, &bank, 2).unwrap();
        let slow = scatter_oracle(&img, &bank);
        let rel = l2_diff(fast.coefficients.data(), &slow) / l2(&slow);
        assert!(rel < 1e-5, "seed {seed}: relative error {rel:e}");
    }
}

#[test]
fn oracle_agrees_at_other_geometries() {
    for cfg in [config(3, 4, 64, 96), config(1, 6, 40, 60)] {
        let bank = FilterBank::new(&cfg).unwrap();
        let img = noise_image(cfg.height, cfg.width, 9);
        let fast = scatter(&img, &bank, 2).unwrap();
        let slow = scatter_oracle(&img, &bank);
        assert!(l2_diff(fast.coefficients.data(), &slow) / l2(&slow) < 1e-5);
    }
}

/// Coefficient norm rescaled to the input grid (each sample stands for
/// `4^J` pixels).
fn grid_norm(v: &[f64], cfg: &ScatteringConfig) -> f64 {
    l2(v) * (1usize << cfg.scales) as f64
}

#[test]
fn contraction_and_energy() {
    let cfg = config(2, 8, 180, 300);
    let bank = FilterBank::new(&cfg).unwrap();
    for seed in 0..4 {
        let (x, y) = (noise_image(180, 300, 2 * seed), noise_image(180, 300, 2 * seed + 1));
        let (sx, sy) = (scatter(&x, &bank, 2).unwrap(), scatter(&y, &bank, 2).unwrap());
        let (sx, sy) = (sx.coefficients.data(), sy.coefficients.data());
        let d_in = l2_diff(x.data(), y.data());
        let d_out = l2_diff(sx, sy) * (1usize << cfg.scales) as f64;
        assert!(d_out <= d_in, "{d_out} > {d_in}");
        assert!(grid_norm(sx, &cfg) <= l2(x.data()));
    }
}

#[test]
fn one_pixel_shift_is_nearly_invisible_on_smooth_images() {
    let cfg = config(2, 8, 180, 300);
    let bank = FilterBank::new(&cfg).unwrap();
    for seed in 0..2 {
        let x = smooth_image(180, 300, seed);
        let sx = scatter(&x, &bank, 2).unwrap();
        let ss = scatter(&roll_x(&x), &bank, 2).unwrap();
        let ratio = l2_diff(sx.coefficients.data(), ss.coefficients.data()) / l2(sx.coefficients.data());
        assert!(ratio <= 0.1, "seed {seed}: ratio {ratio}");
    }
}

#[test]
fn littlewood_paley_sum_is_bounded() {
    let cfg = config(2, 8, 180, 300);
    let bank = FilterBank::new(&cfg).unwrap();
    let lp = bank.littlewood_paley();
    let max = lp.iter().cloned().fold(f64::MIN, f64::max);
    assert!((max - 1.0).abs() < 1e-12, "max {max}");

    // covered band: the finest-to-coarsest annulus plus where the low-pass
    // carries at least half its energy
    let radius = radial_frequency(180, 300);
    let infos = bank.psi_info();
    let hi = infos.iter().map(|i| i.center_frequency).fold(f64::MIN, f64::max);
    let lo = infos.iter().map(|i| i.center_frequency).fold(f64::MAX, f64::min);
    let mut annulus_min = f64::MAX;
    let mut covered_min = f64::MAX;
    for ((&v, &r), &p) in lp.iter().zip(&radius).zip(bank.phi()) {
        if (lo..=hi).contains(&r) {
            annulus_min = annulus_min.min(v);
        }
        if (lo..=hi).contains(&r) || p * p >= 0.5 {
            covered_min = covered_min.min(v);
        }
    }
    assert!(annulus_min >= 0.6, "annulus minimum {annulus_min}");
    assert!(covered_min >= 0.5, "covered minimum {covered_min}");
}
