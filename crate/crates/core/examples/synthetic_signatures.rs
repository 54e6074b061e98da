//! Generate synthetic writers and write them out as a CEDAR-style tree.
//!
//! ```text
//! cargo run --release --example synthetic_signatures -- /tmp/signatures
//! ```

use std::path::PathBuf;

use sigscat::dataset::{export_cedar_tree, synthesize_dataset, writer_disjoint_split, Label, SyntheticGenerator};

fn l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
}

fn main() -> sigscat::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sigscat-synthetic"));

    // how far apart are writers compared with one writer's own variation?
    let generator = SyntheticGenerator::new(3);
    let (a, b) = (generator.writer(0), generator.writer(1));
    let proto = a.prototype();
    println!("genuine vs own prototype  {:.1}", l2(a.genuine(0).data(), proto.data()));
    println!("forgery vs prototype      {:.1}", l2(a.forgery(0).data(), proto.data()));
    println!("other writer's prototype  {:.1}", l2(b.prototype().data(), proto.data()));

    let catalog = writer_disjoint_split(synthesize_dataset(6, 5, 5, 3)?, 4, 3)?;
    let on_disk = export_cedar_tree(&catalog, &root)?;
    on_disk.write_manifest(&root.join("manifest.tsv"))?;
    let genuine = on_disk.records().iter().filter(|r| r.label == Label::Genuine).count();
    println!(
        "wrote {} images ({genuine} genuine) for {} writers to {}",
        on_disk.len(),
        on_disk.writers().len(),
        root.display()
    );
    Ok(())
}
