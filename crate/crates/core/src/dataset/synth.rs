//! Procedural signatures for runs that cannot ship a real dataset.
//!
//! A writer is a latent code: a few chains of cubic Bézier segments laid out
//! left to right, plus a pen width. Genuine samples redraw the code with
//! small jitter. Forgeries redraw it from a perturbed code, the way an
//! imitator gets the overall shape right but not the details.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::catalog::{
    index_dataset, writer_key, ImageSource, Label, Layout, Provenance, SignatureCatalog, SignatureRecord,
};
use super::image::{quantize, save_png, IMAGE_HEIGHT, IMAGE_WIDTH};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

type Point = [f64; 2];

/// Jitter applied when redrawing a latent code.
#[derive(Clone, Copy, Debug)]
struct Variation {
    max_shift: f64,
    point_sigma: f64,
    scale_sigma: f64,
    rotation_sigma: f64,
    shear_sigma: f64,
    width_delta: f64,
    wobble: f64,
}

const GENUINE: Variation = Variation {
    max_shift: 3.0,
    point_sigma: 0.8,
    scale_sigma: 0.02,
    rotation_sigma: 0.02,
    shear_sigma: 0.02,
    width_delta: 1.0,
    wobble: 1.0,
};

const NONE: Variation = Variation {
    max_shift: 0.0,
    point_sigma: 0.0,
    scale_sigma: 0.0,
    rotation_sigma: 0.0,
    shear_sigma: 0.0,
    width_delta: 0.0,
    wobble: 0.0,
};

/// How far an imitator's latent code strays from the writer's.
const FORGER_POINT_SIGMA: f64 = 7.0;
const FORGER_SLANT_SIGMA: f64 = 0.15;

#[derive(Clone, Debug, PartialEq)]
pub struct WriterStyle {
    strokes: Vec<Vec<Point>>,
    width: f64,
    seed: u64,
    index: u64,
}

/// Deterministic source of writer styles.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticGenerator {
    seed: u64,
}

fn stream(seed: u64, writer: u64, kind: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((writer << 24) | (kind << 20) | k);
    rng
}

impl SyntheticGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn writer(&self, index: u64) -> WriterStyle {
        let mut rng = stream(self.seed, index, 0, 0);
        let mut strokes = Vec::new();
        let mut x: f64 = rng.random_range(20.0..50.0);
        let baseline: f64 = rng.random_range(75.0..105.0);
        let n_strokes = rng.random_range(2..=4);
        for _ in 0..n_strokes {
            if x > 250.0 {
                break;
            }
            let mut anchor: Point = [x, baseline + rng.random_range(-30.0..30.0)];
            let mut pts = vec![anchor];
            for _ in 0..rng.random_range(3..=5) {
                let next = [
                    (anchor[0] + rng.random_range(12.0..40.0)).min(285.0),
                    (baseline + rng.random_range(-45.0..45.0)).clamp(15.0, 165.0),
                ];
                let mut ctrl = || {
                    [
                        rng.random_range(anchor[0].min(next[0]) - 25.0..anchor[0].max(next[0]) + 25.0),
                        (baseline + rng.random_range(-60.0..60.0)).clamp(5.0, 175.0),
                    ]
                };
                let (c1, c2) = (ctrl(), ctrl());
                pts.extend([c1, c2, next]);
                anchor = next;
            }
            x = anchor[0] + rng.random_range(5.0..20.0);
            strokes.push(pts);
        }
        if rng.random_bool(0.5) {
            // underline flourish
            let y = baseline + rng.random_range(35.0..55.0);
            let (x0, x1) = (rng.random_range(15.0..80.0), rng.random_range(180.0..285.0));
            strokes.push(vec![
                [x0, y],
                [x0 + 60.0, y + rng.random_range(-15.0..15.0)],
                [x1 - 60.0, y + rng.random_range(-15.0..15.0)],
                [x1, y + rng.random_range(-10.0..10.0)],
            ]);
        }
        WriterStyle {
            strokes,
            width: rng.random_range(1.8..3.2),
            seed: self.seed,
            index,
        }
    }
}

impl WriterStyle {
    /// The latent code drawn without any jitter.
    pub fn prototype(&self) -> Tensor<f32> {
        render(&self.strokes, self.width, &NONE, &mut stream(self.seed, self.index, 1, 0))
    }

    /// The `k`-th genuine sample.
    pub fn genuine(&self, k: u64) -> Tensor<f32> {
        render(&self.strokes, self.width, &GENUINE, &mut stream(self.seed, self.index, 2, k))
    }

    /// The `k`-th skilled forgery.
    pub fn forgery(&self, k: u64) -> Tensor<f32> {
        let mut rng = stream(self.seed, self.index, 3, k);
        let noise = Normal::new(0.0, FORGER_POINT_SIGMA).expect("valid sigma");
        let slant = Normal::new(0.0, FORGER_SLANT_SIGMA).expect("valid sigma").sample(&mut rng);
        let center = centroid(&self.strokes);
        let strokes: Vec<Vec<Point>> = self
            .strokes
            .iter()
            .map(|s| {
                s.iter()
                    .map(|p| {
                        [
                            p[0] + slant * (center[1] - p[1]) + noise.sample(&mut rng),
                            p[1] + noise.sample(&mut rng),
                        ]
                    })
                    .collect()
            })
            .collect();
        let width = (self.width + rng.random_range(-0.8..0.8)).max(1.0);
        render(&strokes, width, &GENUINE, &mut rng)
    }
}

fn centroid(strokes: &[Vec<Point>]) -> Point {
    let n = strokes.iter().map(Vec::len).sum::<usize>() as f64;
    let (sx, sy) = strokes
        .iter()
        .flatten()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / n, sy / n]
}

fn bezier(p: &[Point], t: f64) -> Point {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    [
        a * p[0][0] + b * p[1][0] + c * p[2][0] + d * p[3][0],
        a * p[0][1] + b * p[1][1] + c * p[2][1] + d * p[3][1],
    ]
}

fn render(strokes: &[Vec<Point>], width: f64, var: &Variation, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let gauss = |sigma: f64, rng: &mut ChaCha8Rng| {
        if sigma == 0.0 {
            0.0
        } else {
            Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
        }
    };
    let uniform = |half: f64, rng: &mut ChaCha8Rng| if half == 0.0 { 0.0 } else { rng.random_range(-half..=half) };

    let center = centroid(strokes);
    let scale = 1.0 + gauss(var.scale_sigma, rng);
    let (sin, cos) = gauss(var.rotation_sigma, rng).sin_cos();
    let shear = gauss(var.shear_sigma, rng);
    let shift = [uniform(var.max_shift, rng), uniform(var.max_shift, rng)];
    let width = (width + uniform(var.width_delta, rng)).max(0.8);
    let phase = [rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU)];
    let wobble = var.wobble;
    let warp = |p: Point| -> Point {
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        let (dx, dy) = (dx + shear * dy, dy);
        let (dx, dy) = (scale * (cos * dx - sin * dy), scale * (sin * dx + cos * dy));
        // smooth elastic displacement
        let ex = wobble * (p[1] / 23.0 + phase[0]).sin();
        let ey = wobble * (p[0] / 31.0 + phase[1]).sin();
        [center[0] + dx + shift[0] + ex, center[1] + dy + shift[1] + ey]
    };

    let mut ink = vec![0.0f32; IMAGE_HEIGHT * IMAGE_WIDTH];
    let radius = width / 2.0;
    for stroke in strokes {
        let pts: Vec<Point> = stroke
            .iter()
            .map(|&p| {
                let q = warp(p);
                [q[0] + gauss(var.point_sigma, rng), q[1] + gauss(var.point_sigma, rng)]
            })
            .collect();
        for seg in pts.windows(4).step_by(3) {
            let hull: f64 = seg.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
            let steps = (hull / 0.4).ceil().max(1.0) as usize;
            for s in 0..=steps {
                stamp(&mut ink, bezier(seg, s as f64 / steps as f64), radius);
            }
        }
    }
    let data = ink
        .into_iter()
        .map(|v| quantize(1.0 - v) as f32 / 255.0)
        .collect();
    Tensor::new(&[IMAGE_HEIGHT, IMAGE_WIDTH], data).expect("fixed extents")
}

/// Anti-aliased disc of ink centred on `c`, pixel centres at integers.
fn stamp(ink: &mut [f32], c: Point, radius: f64) {
    let reach = radius + 1.0;
    let y0 = (c[1] - reach).floor().max(0.0) as usize;
    let y1 = ((c[1] + reach).ceil() as isize).min(IMAGE_HEIGHT as isize - 1);
    let x0 = (c[0] - reach).floor().max(0.0) as usize;
    let x1 = ((c[0] + reach).ceil() as isize).min(IMAGE_WIDTH as isize - 1);
    if y1 < 0 || x1 < 0 {
        return;
    }
    for y in y0..=y1 as usize {
        for x in x0..=x1 as usize {
            let d = (x as f64 - c[0]).hypot(y as f64 - c[1]);
            let cover = (radius + 0.5 - d).clamp(0.0, 1.0) as f32;
            let px = &mut ink[y * IMAGE_WIDTH + x];
            *px = px.max(cover);
        }
    }
}

/// An in-memory catalog of `writers` procedural writers.
pub fn synthesize_dataset(writers: usize, genuine_per_writer: usize, forged_per_writer: usize, seed: u64) -> Result<SignatureCatalog> {
    if writers == 0 || genuine_per_writer == 0 || forged_per_writer == 0 {
        return Err(Error::Config(format!(
            "synthetic dataset needs at least one writer, genuine and forged sample (got {writers}, {genuine_per_writer}, {forged_per_writer})"
        )));
    }
    let generator = SyntheticGenerator::new(seed);
    let jobs: Vec<(usize, Label, usize)> = (0..writers)
        .flat_map(|w| {
            (0..genuine_per_writer)
                .map(move |k| (w, Label::Genuine, k))
                .chain((0..forged_per_writer).map(move |k| (w, Label::Forged, k)))
        })
        .collect();
    let records = jobs
        .into_par_iter()
        .map(|(w, label, k)| {
            let style = generator.writer(w as u64);
            let pixels = match label {
                Label::Genuine => style.genuine(k as u64),
                Label::Forged => style.forgery(k as u64),
            };
            let writer_id = writer_key(w as u32 + 1);
            SignatureRecord {
                id: format!("{writer_id}/{label}/{}", k + 1),
                writer_id,
                label,
                source: ImageSource::Memory(Arc::new(pixels)),
            }
        })
        .collect();
    SignatureCatalog::from_records(
        records,
        Provenance {
            dataset: format!("synthetic-{seed}"),
            layout: Layout::Synthetic,
            layout_version: Layout::VERSION,
        },
    )
}

/// Writes every image of `catalog` under `root` with the CEDAR naming and
/// returns the catalog re-indexed from disk, carrying over the split.
pub fn export_cedar_tree(catalog: &SignatureCatalog, root: &Path) -> Result<SignatureCatalog> {
    for dir in ["full_org", "full_forg"] {
        fs::create_dir_all(root.join(dir)).map_err(|e| Error::io(format!("creating {}", root.join(dir).display()), e))?;
    }
    let jobs: Vec<(usize, std::path::PathBuf)> = catalog
        .writers()
        .iter()
        .flat_map(|(writer, sigs)| {
            let n: u32 = writer.trim_start_matches('0').parse().unwrap_or(0);
            let org = sigs
                .genuine
                .iter()
                .enumerate()
                .map(move |(k, &i)| (i, root.join(format!("full_org/original_{n}_{}.png", k + 1))));
            let forg = sigs
                .forged
                .iter()
                .enumerate()
                .map(move |(k, &i)| (i, root.join(format!("full_forg/forgeries_{n}_{}.png", k + 1))));
            org.chain(forg)
        })
        .collect();
    if let Some(w) = catalog.writers().keys().find(|w| w.parse::<u32>().is_err()) {
        return Err(Error::Dataset(format!("writer id `{w}` is not numeric, cannot use CEDAR naming")));
    }
    jobs.par_iter()
        .map(|(i, path)| save_png(&catalog.load(*i)?.pixels, path))
        .collect::<Result<()>>()?;
    let indexed = index_dataset(root, Layout::Synthetic)?;
    indexed.with_split(catalog.split().clone())
}
