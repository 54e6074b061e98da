//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use sigscat::dataset::{EvalPair, PairLabel};
use sigscat::evaluation::ScoredPair;
use sigscat::scattering::FilterBank;
use sigscat::tensor::{grad_check, grad_check_at, Tape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise_image(h: usize, w: usize, seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::from_fn(&[h, w], |_| r.random::<f64>()).unwrap()
}

/// A sum of a few wide Gaussian blobs: nearly band-limited.
pub fn smooth_image(h: usize, w: usize, seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                r.random_range(0.2..0.8) * h as f64,
                r.random_range(0.2..0.8) * w as f64,
                r.random_range(12.0..30.0),
                r.random_range(0.3..1.0),
            )
        })
        .collect();
    Tensor::from_fn(&[h, w], |i| {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        blobs
            .iter()
            .map(|&(cy, cx, s, a)| a * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp())
            .sum()
    })
    .unwrap()
}

/// Circular shift by one pixel along the width.
pub fn roll_x(img: &Tensor<f64>) -> Tensor<f64> {
    let (h, w) = (img.shape()[0], img.shape()[1]);
    let d = img.data();
    Tensor::from_fn(&[h, w], |i| d[(i / w) * w + (i % w + w - 1) % w]).unwrap()
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Plain 2-D DFT by rows then columns, no shared plans with the library.
struct Dft2 {
    h: usize,
    w: usize,
    planner: FftPlanner<f64>,
}

impl Dft2 {
    fn new(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            planner: FftPlanner::new(),
        }
    }

    fn run(&mut self, data: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.h, self.w);
        let (row, col) = if inverse {
            (self.planner.plan_fft_inverse(w), self.planner.plan_fft_inverse(h))
        } else {
            (self.planner.plan_fft_forward(w), self.planner.plan_fft_forward(h))
        };
        for r in data.chunks_mut(w) {
            row.process(r);
        }
        let mut column = vec![Complex64::default(); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = data[y * w + x];
            }
            col.process(&mut column);
            for y in 0..h {
                data[y * w + x] = column[y];
            }
        }
        if inverse {
            let n = (h * w) as f64;
            data.iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Scattering coefficients computed path by path at full resolution, then
/// sampled every `2^J` pixels. Nothing is reused between paths.
pub fn scatter_oracle(image: &Tensor<f64>, bank: &FilterBank) -> Vec<f64> {
    let cfg = bank.config();
    let (h, w) = (cfg.height, cfg.width);
    let step = 1 << cfg.scales;
    let mut dft = Dft2::new(h, w);
    let spectrum = |dft: &mut Dft2, v: &[f64]| {
        let mut s: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        dft.run(&mut s, false);
        s
    };
    let filter_modulus = |dft: &mut Dft2, v: &[f64], filter: &[f64]| -> Vec<f64> {
        let mut s = spectrum(dft, v);
        s.iter_mut().zip(filter).for_each(|(a, f)| *a *= f);
        dft.run(&mut s, true);
        s.iter().map(|c| c.norm()).collect()
    };
    let average = |dft: &mut Dft2, v: &[f64]| -> Vec<f64> {
        let mut s = spectrum(dft, v);
        s.iter_mut().zip(bank.phi()).for_each(|(a, f)| *a *= f);
        dft.run(&mut s, true);
        let mut out = Vec::new();
        for y in (0..h).step_by(step) {
            for x in (0..w).step_by(step) {
                out.push(s[y * w + x].re);
            }
        }
        out
    };

    let x = image.data().to_vec();
    let l = cfg.orientations;
    let mut first = average(&mut dft, &x);
    let mut second = Vec::new();
    for j1 in 0..cfg.scales {
        for t1 in 0..l {
            let u1 = filter_modulus(&mut dft, &x, bank.band_pass(j1, t1));
            first.extend(average(&mut dft, &u1));
            for j2 in j1 + 1..cfg.scales {
                for t2 in 0..l {
                    let u1 = filter_modulus(&mut dft, &x, bank.band_pass(j1, t1));
                    let u2 = filter_modulus(&mut dft, &u1, bank.band_pass(j2, t2));
                    second.extend(average(&mut dft, &u2));
                }
            }
        }
    }
    first.extend(second);
    first
}

/// Radial frequency of every DFT bin, in radians per pixel.
pub fn radial_frequency(h: usize, w: usize) -> Vec<f64> {
    let signed = |k: usize, n: usize| {
        let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
        2.0 * PI * k / n as f64
    };
    (0..h * w)
        .map(|i| signed(i / w, h).hypot(signed(i % w, w)))
        .collect()
}

pub fn scored(genuine: &[f64], forged: &[f64]) -> Vec<ScoredPair> {
    let make = |score: f64, label| ScoredPair {
        pair: EvalPair {
            first: 0,
            second: 1,
            label,
        },
        score,
    };
    genuine
        .iter()
        .map(|&s| make(s, PairLabel::Genuine))
        .chain(forged.iter().map(|&s| make(s, PairLabel::Forgery)))
        .collect()
}

/// Random score sets on a coarse grid so ties are common.
pub fn random_scored(r: &mut ChaCha8Rng, max_pairs: usize) -> Vec<ScoredPair> {
    let n = r.random_range(2..=max_pairs);
    let grid = *[10usize, 50, 1000].get(r.random_range(0..3)).unwrap();
    let shift: f64 = r.random_range(0.0..0.4);
    let mut genuine = vec![r.random_range(0..=grid) as f64 / grid as f64 * 0.6];
    let mut forged = vec![(r.random_range(0..=grid) as f64 / grid as f64 * 0.6 + shift).min(1.0)];
    for _ in 2..n {
        let v = r.random_range(0..=grid) as f64 / grid as f64 * 0.6;
        if r.random_bool(0.5) {
            genuine.push(v);
        } else {
            forged.push((v + shift).min(1.0));
        }
    }
    scored(&genuine, &forged)
}

/// Probability that a genuine score beats a forgery score, ties counting half.
pub fn mann_whitney(s: &[ScoredPair]) -> f64 {
    let (g, f) = split_scores(s);
    let mut wins = 0.0;
    for a in &g {
        for b in &f {
            wins += if a < b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (g.len() * f.len()) as f64
}

fn split_scores(s: &[ScoredPair]) -> (Vec<f64>, Vec<f64>) {
    let of = |label| s.iter().filter(|p| p.pair.label == label).map(|p| p.score).collect();
    (of(PairLabel::Genuine), of(PairLabel::Forgery))
}

/// EER straight from the definitions: try every distinct score and every
/// midpoint, keep the smallest |FMR − FNMR| (first wins), report the
/// operating range `[s_i, s_{i+1})` by its midpoint.
pub fn eer_oracle(s: &[ScoredPair]) -> (f64, f64) {
    let (g, f) = split_scores(s);
    let mut distinct: Vec<f64> = g.iter().chain(&f).copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut candidates = distinct.clone();
    candidates.extend(distinct.windows(2).map(|p| p[0] + (p[1] - p[0]) / 2.0));
    candidates.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &t in &candidates {
        let fmr = f.iter().filter(|&&x| x <= t).count() as f64 / f.len() as f64;
        let fnmr = g.iter().filter(|&&x| x > t).count() as f64 / g.len() as f64;
        if (fmr - fnmr).abs() < best.0 {
            best = ((fmr - fnmr).abs(), (fmr + fnmr) / 2.0, t);
        }
    }
    let t = best.2;
    let t = match distinct.iter().position(|&x| x == t) {
        Some(i) if i + 1 < distinct.len() => t + (distinct[i + 1] - t) / 2.0,
        _ => t,
    };
    (best.1, t)
}

fn uniform<T: sigscat::tensor::Scalar>(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<T> {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| T::from_f64_lossy(r.random_range(lo..hi))).unwrap()
}

/// Contracts any tensor to a scalar with fixed random weights, so every
/// output element reaches the loss with a different sensitivity.
fn project<T: sigscat::tensor::Scalar>(tape: &mut Tape<T>, v: Var, seed: u64) -> sigscat::Result<Var> {
    let flat = tape.flatten(v)?;
    let n = tape.value(flat).len();
    let w = tape.leaf(uniform(&[1, n], -1.0, 1.0, seed));
    let b = tape.leaf(Tensor::zeros(&[1]).unwrap());
    let y = tape.dense(flat, w, b)?;
    tape.sum(y)
}

/// Worst finite-difference error of each differentiable op, in `f64`,
/// with the tolerance it must meet.
pub fn op_gradient_errors() -> Vec<(&'static str, f64, f64)> {
    let tol = 1e-4;
    let h = 1e-6;
    let mut out = Vec::new();

    let x: Tensor<f64> = uniform(&[3, 7, 6], -1.0, 1.0, 1);
    let k: Tensor<f64> = uniform(&[4, 3, 3, 3], -0.5, 0.5, 2);
    let bias: Tensor<f64> = uniform(&[4], -0.1, 0.1, 3);
    let conv_input = grad_check(
        |t, v| {
            let (k, b) = (t.leaf(k.clone()), t.leaf(bias.clone()));
            let y = t.conv2d(v, k, b, 1, 1)?;
            project(t, y, 4)
        },
        &x,
        h,
    );
    let conv_weight = grad_check(
        |t, v| {
            let (x, b) = (t.leaf(x.clone()), t.leaf(bias.clone()));
            let y = t.conv2d(x, v, b, 1, 1)?;
            project(t, y, 4)
        },
        &k,
        h,
    );
    let conv_bias = grad_check(
        |t, v| {
            let (x, k) = (t.leaf(x.clone()), t.leaf(k.clone()));
            let y = t.conv2d(x, k, v, 2, 0)?;
            project(t, y, 5)
        },
        &bias,
        h,
    );
    let conv = conv_input.unwrap().max(conv_weight.unwrap()).max(conv_bias.unwrap());
    out.push(("conv2d", conv, tol));

    let v: Tensor<f64> = uniform(&[12], -1.0, 1.0, 6);
    let w: Tensor<f64> = uniform(&[5, 12], -1.0, 1.0, 7);
    let b: Tensor<f64> = uniform(&[5], -1.0, 1.0, 8);
    let dense_x = grad_check(
        |t, x| {
            let (w, b) = (t.leaf(w.clone()), t.leaf(b.clone()));
            let y = t.dense(x, w, b)?;
            project(t, y, 9)
        },
        &v,
        h,
    );
    let dense_w = grad_check(
        |t, w| {
            let (x, b) = (t.leaf(v.clone()), t.leaf(b.clone()));
            let y = t.dense(x, w, b)?;
            project(t, y, 9)
        },
        &w,
        h,
    );
    out.push(("dense", dense_x.unwrap().max(dense_w.unwrap()), tol));

    // keep every element at least 0.1 away from the kink
    let mut r = rng(10);
    let away: Tensor<f64> = Tensor::from_fn(&[4, 5], |_| {
        let m: f64 = r.random_range(0.1..1.0);
        if r.random_bool(0.5) { m } else { -m }
    })
    .unwrap();
    let relu = grad_check(
        |t, x| {
            let y = t.relu(x)?;
            project(t, y, 11)
        },
        &away,
        h,
    );
    out.push(("relu", relu.unwrap(), tol));

    // distinct values spaced well beyond the probe step, so no ties
    let mut values: Vec<f64> = (0..2 * 7 * 9).map(|i| i as f64 * 0.01).collect();
    rand::seq::SliceRandom::shuffle(values.as_mut_slice(), &mut rng(12));
    let pool_in = Tensor::new(&[2, 7, 9], values).unwrap();
    let floor = grad_check(
        |t, x| {
            let y = t.maxpool2d(x, 2, 2, false)?;
            project(t, y, 13)
        },
        &pool_in,
        h,
    );
    let ceil = grad_check(
        |t, x| {
            let y = t.maxpool2d(x, 2, 2, true)?;
            project(t, y, 14)
        },
        &pool_in,
        h,
    );
    out.push(("maxpool2d", floor.unwrap().max(ceil.unwrap()), tol));

    let u: Tensor<f64> = uniform(&[16], -1.0, 1.0, 15);
    let norm = grad_check(
        |t, x| {
            let y = t.l2_normalize(x, 1e-12)?;
            project(t, y, 16)
        },
        &u,
        h,
    );
    out.push(("l2_normalize", norm.unwrap(), tol));

    // an active triplet: the negative sits close to the anchor
    let anchor: Tensor<f64> = uniform(&[8], -1.0, 1.0, 17);
    let positive: Tensor<f64> = uniform(&[8], -1.0, 1.0, 18);
    let negative = Tensor::from_fn(&[8], |i| anchor.data()[i] + 0.05 * (i as f64 - 3.5)).unwrap();
    let loss = |which: usize| {
        let (a, p, n) = (anchor.clone(), positive.clone(), negative.clone());
        let input = [&a, &p, &n][which].clone();
        grad_check(
            move |t, x| {
                let mut vars = [a.clone(), p.clone(), n.clone()].map(|v| t.leaf(v));
                vars[which] = x;
                sigscat::training::triplet_loss_on_tape(t, vars[0], vars[1], vars[2], 0.5)
            },
            &input,
            h,
        )
        .unwrap()
    };
    out.push(("triplet_loss", loss(0).max(loss(1)).max(loss(2)), tol));
    out
}

/// Finite-difference check of the whole embedding network with an `f32`
/// forward pass, probing first-convolution and dense weights.
///
/// A probe step can cross a ReLU or max-pool switch, where differences say
/// nothing about the gradient. Coordinates are therefore kept only where an
/// `f64` difference at the same step agrees with the `f64` gradient.
pub fn network_slice_error() -> f64 {
    use sigscat::model::{bind_parameters, forward, init_model, ModelConfig};
    use sigscat::tensor::Scalar;

    let step = 1e-3;
    let config = ModelConfig::default();
    let weights = init_model(&config, 3).unwrap();
    let layout = config.scattering.output_layout();
    let features: Tensor<f64> = uniform(&[layout.channels, layout.height, layout.width], 0.0, 0.2, 19);

    fn check<T: Scalar>(
        weights: &sigscat::model::ModelWeights,
        features: &Tensor<f64>,
        param: usize,
        step: f64,
        coords: &[usize],
    ) -> f64 {
        let features = features.cast::<T>();
        let target = weights.params()[param].tensor.cast::<T>();
        grad_check_at(
            |t: &mut Tape<T>, x| {
                let mut params = bind_parameters(t, weights, false);
                params[param] = x;
                let input = t.leaf(features.clone());
                let e = forward(t, weights.config(), &params, input)?;
                project(t, e, 22)
            },
            &target,
            step,
            coords,
        )
        .unwrap()
    }

    let mut worst: f64 = 0.0;
    for (param, seed) in [(0usize, 20u64), (8, 21)] {
        let n = weights.params()[param].tensor.len();
        let mut r = rng(seed);
        let smooth: Vec<usize> = (0..40)
            .map(|_| r.random_range(0..n))
            .filter(|&c| check::<f64>(&weights, &features, param, step, &[c]) < 1e-7)
            .take(6)
            .collect();
        assert!(smooth.len() >= 3, "too few smooth coordinates in parameter {param}");
        worst = worst.max(check::<f32>(&weights, &features, param, step, &smooth));
    }
    worst
}

/// Worst AUC deviation from Mann–Whitney and the number of score sets whose
/// (EER, threshold) differs from the exhaustive oracle.
pub fn metric_disagreements(sets: usize, max_pairs: usize, seed: u64) -> (f64, usize) {
    let mut r = rng(seed);
    let mut worst_auc: f64 = 0.0;
    let mut eer_misses = 0;
    for _ in 0..sets {
        let s = random_scored(&mut r, max_pairs);
        let (_, auc) = sigscat::evaluation::roc_auc(&s).unwrap();
        worst_auc = worst_auc.max((auc - mann_whitney(&s)).abs());
        let (_, eer, t) = sigscat::evaluation::fmr_fnmr_eer(&s).unwrap();
        if (eer, t) != eer_oracle(&s) {
            eer_misses += 1;
        }
    }
    (worst_auc, eer_misses)
}
