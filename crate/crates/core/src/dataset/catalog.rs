use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::load_image;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Forged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// On-disk directory convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// `full_org/original_W_N.png` and `full_forg/forgeries_W_N.png`.
    Cedar,
    /// `{train,test}/<writer>/{genuine,forged}/*`, or the competition's own
    /// `{train,test}/Offline Genuine/WWW_NN.*` and
    /// `{train,test}/Offline Forgeries/FFFFWWW_NN.*` naming.
    SigcompDutch,
    /// Generated in memory; written to disk with the CEDAR convention.
    Synthetic,
}

impl Layout {
    pub const VERSION: u32 = 1;
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cedar" => Ok(Self::Cedar),
            "sigcomp-dutch" | "sigcomp" => Ok(Self::SigcompDutch),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(Error::Config(format!(
                "unknown dataset layout `{other}` (expected cedar or sigcomp-dutch)"
            ))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Genuine => "genuine",
            Label::Forged => "forged",
        })
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Where an image's pixels come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    /// Already-normalized 180×300 pixels.
    Memory(Arc<Tensor<f32>>),
}

/// One catalog entry; pixels are loaded on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureRecord {
    pub id: String,
    pub writer_id: String,
    pub label: Label,
    pub source: ImageSource,
}

impl SignatureRecord {
    pub fn source_path(&self) -> String {
        match &self.source {
            ImageSource::File(p) => p.display().to_string(),
            ImageSource::Memory(_) => format!("memory:{}", self.id),
        }
    }
}

/// Decoded pixels together with their catalog metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureImage {
    pub pixels: Tensor<f32>,
    pub writer_id: String,
    pub label: Label,
    pub source_path: String,
}

/// Record indices belonging to one writer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WriterSignatures {
    pub genuine: Vec<usize>,
    pub forged: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub layout: Layout,
    pub layout_version: u32,
}

/// A file the indexer saw but could not place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

/// Every signature of a dataset, grouped by writer, with a train/test split.
///
/// Catalogs that have not been split put every writer in the test split, so
/// a whole dataset can be evaluated directly.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureCatalog {
    records: Vec<SignatureRecord>,
    writers: BTreeMap<String, WriterSignatures>,
    split: BTreeMap<String, Split>,
    provenance: Provenance,
    skipped: Vec<Skipped>,
    warnings: Vec<String>,
}

impl SignatureCatalog {
    /// Groups records by writer. Records keep the order given.
    pub fn from_records(records: Vec<SignatureRecord>, provenance: Provenance) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Dataset(format!(
                "no signatures found for dataset `{}`",
                provenance.dataset
            )));
        }
        let mut writers: BTreeMap<String, WriterSignatures> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let entry = writers.entry(r.writer_id.clone()).or_default();
            match r.label {
                Label::Genuine => entry.genuine.push(i),
                Label::Forged => entry.forged.push(i),
            }
        }
        let split = writers.keys().map(|w| (w.clone(), Split::Test)).collect();
        Ok(Self {
            records,
            writers,
            split,
            provenance,
            skipped: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn records(&self) -> &[SignatureRecord] {
        &self.records
    }

    pub fn record(&self, index: usize) -> &SignatureRecord {
        &self.records[index]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn writers(&self) -> &BTreeMap<String, WriterSignatures> {
        &self.writers
    }

    pub fn split(&self) -> &BTreeMap<String, Split> {
        &self.split
    }

    pub fn split_of(&self, writer: &str) -> Option<Split> {
        self.split.get(writer).copied()
    }

    /// Writers assigned to `split`, in sorted order.
    pub fn writers_in(&self, split: Split) -> Vec<&str> {
        self.split
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(w, _)| w.as_str())
            .collect()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn skipped(&self) -> &[Skipped] {
        &self.skipped
    }

    /// Count mismatches against what the layout promises.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Replaces the split. Every writer must be covered and no unknown
    /// writer may appear.
    pub fn with_split(mut self, split: BTreeMap<String, Split>) -> Result<Self> {
        if let Some(w) = self.writers.keys().find(|w| !split.contains_key(*w)) {
            return Err(Error::Dataset(format!("split does not cover writer `{w}`")));
        }
        if let Some(w) = split.keys().find(|w| !self.writers.contains_key(*w)) {
            return Err(Error::Dataset(format!("split names unknown writer `{w}`")));
        }
        self.split = split;
        Ok(self)
    }

    /// Decodes one record's pixels.
    pub fn load(&self, index: usize) -> Result<SignatureImage> {
        let r = self.records.get(index).ok_or_else(|| {
            Error::Dataset(format!("record {index} outside catalog of {}", self.records.len()))
        })?;
        let pixels = match &r.source {
            ImageSource::File(p) => load_image(p)?,
            ImageSource::Memory(t) => (**t).clone(),
        };
        Ok(SignatureImage {
            pixels,
            writer_id: r.writer_id.clone(),
            label: r.label,
            source_path: r.source_path(),
        })
    }

    fn check_counts(&mut self, writers: &[&str], expected_writers: usize, min_genuine: usize, min_forged: usize, scope: &str) {
        if writers.len() != expected_writers {
            self.warnings.push(format!(
                "{scope}: {} writers (layout expects {expected_writers})",
                writers.len()
            ));
        }
        for w in writers {
            let s = &self.writers[*w];
            if s.genuine.len() < min_genuine || s.forged.len() < min_forged {
                self.warnings.push(format!(
                    "{scope}: writer {w} has {} genuine and {} forged (layout expects at least {min_genuine} and {min_forged})",
                    s.genuine.len(),
                    s.forged.len()
                ));
            }
        }
    }

    /// Writes one line per record: `path`, `writer`, `label`, `split`,
    /// tab-separated, after a `#` header line.
    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let mut out = String::from("# path\twriter\tlabel\tsplit\n");
        for r in &self.records {
            let split = self.split[&r.writer_id];
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.source_path(), r.writer_id, r.label, split));
        }
        fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Reads the writer → split assignment back from a manifest written by
/// [`SignatureCatalog::write_manifest`].
pub fn read_manifest_split(path: &Path) -> Result<BTreeMap<String, Split>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Dataset(format!("{}:{}: malformed manifest line", path.display(), n + 1));
        let [_, writer, _, split] = fields[..] else {
            return Err(bad());
        };
        let split = match split {
            "train" => Split::Train,
            "test" => Split::Test,
            _ => return Err(bad()),
        };
        if out.insert(writer.to_string(), split).is_some_and(|prev| prev != split) {
            return Err(Error::Dataset(format!("writer {writer} appears in both splits of {}", path.display())));
        }
    }
    Ok(out)
}

fn parse_number(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .is_some_and(|e| matches!(e.as_str(), "png" | "jpg" | "jpeg" | "tif" | "tiff" | "bmp"))
}

/// Sorted regular files of `dir`; a missing directory is empty.
fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))? {
        let entry = entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
        files.push(entry.path());
    }
    files.sort();
    Ok(files)
}

/// `original_12_3.png` → writer 12.
fn cedar_writer(file: &Path, prefix: &str) -> Option<u32> {
    let stem = file.file_stem()?.to_str()?;
    let rest = stem.strip_prefix(prefix)?.strip_prefix('_')?;
    let (writer, number) = rest.split_once('_')?;
    parse_number(number)?;
    parse_number(writer)
}

pub(crate) fn writer_key(n: u32) -> String {
    format!("{n:03}")
}

/// Builds a catalog from a directory tree.
pub fn index_dataset(root: &Path, layout: Layout) -> Result<SignatureCatalog> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!("dataset root {} is not a directory", root.display())));
    }
    match layout {
        Layout::Cedar | Layout::Synthetic => index_cedar(root, layout),
        Layout::SigcompDutch => index_sigcomp(root),
    }
}

fn provenance(root: &Path, layout: Layout) -> Provenance {
    Provenance {
        dataset: root
            .file_name()
            .map_or_else(|| root.display().to_string(), |n| n.to_string_lossy().into_owned()),
        layout,
        layout_version: Layout::VERSION,
    }
}

fn index_cedar(root: &Path, layout: Layout) -> Result<SignatureCatalog> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (dir, prefix, label) in [
        ("full_org", "original", Label::Genuine),
        ("full_forg", "forgeries", Label::Forged),
    ] {
        for file in list_files(&root.join(dir))? {
            if !file.is_file() {
                continue;
            }
            match cedar_writer(&file, prefix).filter(|_| is_image(&file)) {
                Some(w) => records.push(SignatureRecord {
                    id: format!("{dir}/{}", file.file_name().unwrap_or_default().to_string_lossy()),
                    writer_id: writer_key(w),
                    label,
                    source: ImageSource::File(file),
                }),
                None => skipped.push(Skipped {
                    path: file,
                    reason: format!("expected {prefix}_<writer>_<n>.<image ext>"),
                }),
            }
        }
    }
    records.sort_by_key(SignatureRecord::source_path);
    let mut catalog = SignatureCatalog::from_records(records, provenance(root, layout))?;
    catalog.skipped = skipped;
    if layout == Layout::Cedar {
        let all: Vec<String> = catalog.writers.keys().cloned().collect();
        let all: Vec<&str> = all.iter().map(String::as_str).collect();
        catalog.check_counts(&all, 55, 24, 24, "cedar");
    }
    Ok(catalog)
}

/// `001_05.png` → writer 1; forgeries `0119001_02.png` → writer 1 (forger 119).
fn sigcomp_native(file: &Path, label: Label) -> Option<u32> {
    let stem = file.file_stem()?.to_str()?;
    let (head, tail) = stem.split_once('_')?;
    parse_number(tail)?;
    match (label, head.len()) {
        (Label::Genuine, 3) => parse_number(head),
        (Label::Forged, 7) => parse_number(&head[4..]).filter(|_| parse_number(&head[..4]).is_some()),
        _ => None,
    }
}

fn index_sigcomp(root: &Path) -> Result<SignatureCatalog> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut split = BTreeMap::new();
    for (folder, which) in [("train", Split::Train), ("test", Split::Test)] {
        let base = root.join(folder);
        for dir in list_files(&base)? {
            if !dir.is_dir() {
                continue;
            }
            let name = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let native = match name.to_ascii_lowercase().as_str() {
                n if n.starts_with("offline") && n.contains("genuine") => Some(Label::Genuine),
                n if n.starts_with("offline") && n.contains("forg") => Some(Label::Forged),
                _ => None,
            };
            if let Some(label) = native {
                for file in list_files(&dir)? {
                    if !file.is_file() {
                        continue;
                    }
                    match sigcomp_native(&file, label).filter(|_| is_image(&file)) {
                        Some(w) => {
                            let writer_id = format!("{folder}-{}", writer_key(w));
                            split.insert(writer_id.clone(), which);
                            records.push(SignatureRecord {
                                id: format!("{folder}/{name}/{}", file.file_name().unwrap_or_default().to_string_lossy()),
                                writer_id,
                                label,
                                source: ImageSource::File(file),
                            });
                        }
                        None => skipped.push(Skipped {
                            path: file,
                            reason: "expected WWW_NN (genuine) or FFFFWWW_NN (forged)".into(),
                        }),
                    }
                }
                continue;
            }
            let writer_id = format!("{folder}-{name}");
            for (sub, label) in [("genuine", Label::Genuine), ("forged", Label::Forged)] {
                for file in list_files(&dir.join(sub))? {
                    if !file.is_file() {
                        continue;
                    }
                    if !is_image(&file) {
                        skipped.push(Skipped {
                            path: file,
                            reason: "not an image file".into(),
                        });
                        continue;
                    }
                    split.insert(writer_id.clone(), which);
                    records.push(SignatureRecord {
                        id: format!("{folder}/{name}/{sub}/{}", file.file_name().unwrap_or_default().to_string_lossy()),
                        writer_id: writer_id.clone(),
                        label,
                        source: ImageSource::File(file),
                    });
                }
            }
        }
    }
    records.sort_by_key(SignatureRecord::source_path);
    let mut catalog = SignatureCatalog::from_records(records, provenance(root, Layout::SigcompDutch))?;
    catalog.skipped = skipped;
    catalog = catalog.with_split(split)?;
    let train: Vec<String> = catalog.writers_in(Split::Train).iter().map(|s| s.to_string()).collect();
    let test: Vec<String> = catalog.writers_in(Split::Test).iter().map(|s| s.to_string()).collect();
    let train: Vec<&str> = train.iter().map(String::as_str).collect();
    let test: Vec<&str> = test.iter().map(String::as_str).collect();
    catalog.check_counts(&train, 64, 24, 8, "sigcomp train");
    catalog.check_counts(&test, 42, 12, 12, "sigcomp test");
    Ok(catalog)
}

/// Seeded writer-disjoint split: `train_writers` writers train, the rest test.
///
/// SigComp catalogs keep the split given by their own folders.
pub fn writer_disjoint_split(catalog: SignatureCatalog, train_writers: usize, seed: u64) -> Result<SignatureCatalog> {
    if catalog.provenance.layout == Layout::SigcompDutch {
        return Ok(catalog);
    }
    let total = catalog.writers.len();
    if train_writers >= total {
        return Err(Error::Dataset(format!(
            "cannot train on {train_writers} of {total} writers and still test on any"
        )));
    }
    let mut order: Vec<String> = catalog.writers.keys().cloned().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let split = order
        .into_iter()
        .enumerate()
        .map(|(i, w)| (w, if i < train_writers { Split::Train } else { Split::Test }))
        .collect();
    catalog.with_split(split)
}
