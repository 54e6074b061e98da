//! Image ingestion, dataset catalogs, writer-disjoint splits, evaluation
//! pairs and a procedural signature generator.

mod catalog;
mod image;
mod pairs;
mod synth;

pub use self::image::{load_image, resize_bilinear, save_png, IMAGE_HEIGHT, IMAGE_WIDTH};
pub use catalog::{
    index_dataset, read_manifest_split, writer_disjoint_split, ImageSource, Label, Layout, Provenance, SignatureCatalog, SignatureImage,
    SignatureRecord, Skipped, Split, WriterSignatures,
};
pub use pairs::{generate_eval_pairs, EvalPair, PairLabel};
pub use synth::{export_cedar_tree, synthesize_dataset, SyntheticGenerator, WriterStyle};
