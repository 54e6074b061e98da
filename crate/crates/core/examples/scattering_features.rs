//! Build the Morlet filter bank, check its frame bound and scatter one
//! synthetic signature.
//!
//! ```text
//! cargo run --release --example scattering_features
//! ```

use sigscat::dataset::SyntheticGenerator;
use sigscat::scattering::{scatter, FilterBank, ScatteringConfig, ScatteringPath};

fn main() -> sigscat::Result<()> {
    let config = ScatteringConfig::default();
    let bank = FilterBank::new(&config)?;
    println!("J={} L={} on {}×{}", config.scales, config.orientations, config.height, config.width);
    for info in bank.psi_info().iter().filter(|i| i.orientation == 0) {
        println!(
            "  scale {}: ξ = {:.4} rad/px, σ = {:.2} px, slant {:.2}",
            info.scale, info.center_frequency, info.sigma, info.slant
        );
    }
    let lp = bank.littlewood_paley();
    let (lo, hi) = lp.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("Littlewood-Paley sum in [{lo:.3}, {hi:.3}]");

    let image = SyntheticGenerator::new(1).writer(0).genuine(0).cast::<f64>();
    let out = scatter(&image, &bank, 2)?;
    println!("output {:?}", out.coefficients.shape());

    let plane = out.coefficients.shape()[1] * out.coefficients.shape()[2];
    let mut energy = [0.0f64; 3];
    for (path, chunk) in out.path_index.iter().zip(out.coefficients.data().chunks(plane)) {
        energy[path.order()] += chunk.iter().map(|v| v * v).sum::<f64>();
    }
    let total: f64 = energy.iter().sum();
    for (order, e) in energy.iter().enumerate() {
        println!("  order {order}: {:5.2}% of the coefficient energy", 100.0 * e / total);
    }
    if let Some(ScatteringPath::Second { scale1, orientation1, scale2, orientation2 }) = out.path_index.last() {
        println!("last channel: ({scale1},{orientation1}) → ({scale2},{orientation2})");
    }
    Ok(())
}
