//! Rating-triple ingestion, seeded splitting, and synthetic matrix generation.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lfa::LatentFactors;

/// One observed cell of the rating matrix, carrying external ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTriple {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
}

/// One observed cell in dense-index form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
}

/// Field delimiter for triple files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Delimiter {
    /// Whitespace or comma, auto-detected per line.
    #[default]
    Auto,
    Whitespace,
    Comma,
    /// MovieLens `::` style.
    DoubleColon,
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::DoubleColon => line.split("::").map(str::trim).collect(),
            Delimiter::Auto => {
                if line.contains("::") {
                    line.split("::").map(str::trim).collect()
                } else if line.contains(',') {
                    line.split(',').map(str::trim).collect()
                } else {
                    line.split_whitespace().collect()
                }
            }
        }
    }
}

impl std::str::FromStr for Delimiter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Delimiter::Auto),
            "whitespace" | "space" | "tab" => Ok(Delimiter::Whitespace),
            "comma" | "csv" => Ok(Delimiter::Comma),
            "double-colon" | "::" => Ok(Delimiter::DoubleColon),
            other => Err(format!("unknown delimiter {other:?}")),
        }
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Delimiter::Auto => "auto",
            Delimiter::Whitespace => "whitespace",
            Delimiter::Comma => "comma",
            Delimiter::DoubleColon => "double-colon",
        };
        f.write_str(s)
    }
}

/// Indexed sparse store for the known entries of a rating matrix.
///
/// External ids are opaque tokens mapped to dense indices in
/// first-appearance order; the maps are bijective.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRatings {
    n_users: usize,
    n_items: usize,
    entries: Vec<Entry>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    /// Duplicate (user, item) pairs dropped at load time (last occurrence kept).
    duplicates: usize,
}

impl SparseRatings {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn user_id(&self, index: u32) -> Option<&str> {
        self.user_ids.get(index as usize).map(String::as_str)
    }

    pub fn item_id(&self, index: u32) -> Option<&str> {
        self.item_ids.get(index as usize).map(String::as_str)
    }

    pub fn user_index(&self, id: &str) -> Option<u32> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<u32> {
        self.item_index.get(id).copied()
    }

    pub fn density(&self) -> f64 {
        self.entries.len() as f64 / (self.n_users as f64 * self.n_items as f64)
    }

    /// Build directly from dense-index triples sharing this store's id space.
    fn with_entries(&self, entries: Vec<Entry>) -> SparseRatings {
        SparseRatings {
            n_users: self.n_users,
            n_items: self.n_items,
            entries,
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
            user_index: self.user_index.clone(),
            item_index: self.item_index.clone(),
            duplicates: 0,
        }
    }

    /// Assemble from external-id triples. Duplicate pairs keep the last
    /// occurrence; the dropped count is recorded.
    pub fn from_triples(triples: &[RatingTriple]) -> Result<SparseRatings> {
        if triples.is_empty() {
            return Err(Error::InvalidParam("no entries".into()));
        }
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut user_index: HashMap<String, u32> = HashMap::new();
        let mut item_index: HashMap<String, u32> = HashMap::new();
        // (user, item) -> slot in `entries`, so re-ratings overwrite in place.
        let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
        let mut entries: Vec<Entry> = Vec::with_capacity(triples.len());
        let mut duplicates = 0usize;

        for t in triples {
            if !t.rating.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "non-finite rating for ({}, {})",
                    t.user_id, t.item_id
                )));
            }
            let u = *user_index.entry(t.user_id.clone()).or_insert_with(|| {
                user_ids.push(t.user_id.clone());
                (user_ids.len() - 1) as u32
            });
            let i = *item_index.entry(t.item_id.clone()).or_insert_with(|| {
                item_ids.push(t.item_id.clone());
                (item_ids.len() - 1) as u32
            });
            match seen.get(&(u, i)) {
                Some(&slot) => {
                    entries[slot].rating = t.rating;
                    duplicates += 1;
                }
                None => {
                    seen.insert((u, i), entries.len());
                    entries.push(Entry {
                        user: u,
                        item: i,
                        rating: t.rating,
                    });
                }
            }
        }

        Ok(SparseRatings {
            n_users: user_ids.len(),
            n_items: item_ids.len(),
            entries,
            user_ids,
            item_ids,
            user_index,
            item_index,
            duplicates,
        })
    }

    /// Write entries as "user item rating" lines.
    pub fn write_triples(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.entries.len() * 16);
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {}\n",
                self.user_ids[e.user as usize], self.item_ids[e.item as usize], e.rating
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Keep a seeded uniform sample of entries (used for subsample smoke runs).
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<SparseRatings> {
        if !(0.0 < fraction && fraction <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "subsample fraction must be in (0, 1], got {fraction}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.shuffle(&mut rng);
        let keep = ((self.entries.len() as f64) * fraction).round().max(1.0) as usize;
        idx.truncate(keep);
        idx.sort_unstable();
        let entries = idx.into_iter().map(|k| self.entries[k]).collect();
        Ok(self.with_entries(entries))
    }
}

/// Disjoint train/validation/test partition of one [`SparseRatings`].
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: SparseRatings,
    pub validation: SparseRatings,
    pub test: SparseRatings,
    pub seed: u64,
    pub ratios: [f64; 3],
}

/// Sidecar manifest written next to the three partition files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub n_users: usize,
    pub n_items: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub duplicates: usize,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub source_entries: Option<usize>,
    #[serde(default)]
    pub source_checksum: Option<String>,
}

impl DatasetSplit {
    pub fn n_users(&self) -> usize {
        self.train.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            ratios: self.ratios,
            n_users: self.n_users(),
            n_items: self.n_items(),
            n_train: self.train.len(),
            n_validation: self.validation.len(),
            n_test: self.test.len(),
            duplicates: self.train.duplicates()
                + self.validation.duplicates()
                + self.test.duplicates(),
            source: None,
            source_entries: None,
            source_checksum: None,
        }
    }

    /// Persist as train/validation/test triple files plus a JSON manifest.
    pub fn write_dir(&self, dir: &Path, manifest: &SplitManifest) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.train.write_triples(&dir.join("train.txt"))?;
        self.validation.write_triples(&dir.join("validation.txt"))?;
        self.test.write_triples(&dir.join("test.txt"))?;
        let path = dir.join("manifest.json");
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let json = serde_json::to_string_pretty(manifest)
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        f.write_all(json.as_bytes()).map_err(|e| Error::io(&path, e))?;
        f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Load a persisted split. The three files are re-indexed together so the
    /// partitions share one dense id space.
    pub fn read_dir(dir: &Path) -> Result<DatasetSplit> {
        let manifest_path = dir.join("manifest.json");
        let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: SplitManifest = serde_json::from_str(&raw).map_err(|e| Error::Format {
            path: manifest_path.clone(),
            msg: e.to_string(),
        })?;

        let train_t = read_triples(&dir.join("train.txt"), Delimiter::Auto)?;
        let val_t = read_triples(&dir.join("validation.txt"), Delimiter::Auto)?;
        let test_t = read_triples(&dir.join("test.txt"), Delimiter::Auto)?;

        let mut all = train_t.clone();
        all.extend(val_t.iter().cloned());
        all.extend(test_t.iter().cloned());
        let full = SparseRatings::from_triples(&all)?;

        let project = |triples: &[RatingTriple]| -> Vec<Entry> {
            triples
                .iter()
                .map(|t| Entry {
                    user: full.user_index(&t.user_id).expect("id indexed above"),
                    item: full.item_index(&t.item_id).expect("id indexed above"),
                    rating: t.rating,
                })
                .collect()
        };

        Ok(DatasetSplit {
            train: full.with_entries(project(&train_t)),
            validation: full.with_entries(project(&val_t)),
            test: full.with_entries(project(&test_t)),
            seed: manifest.seed,
            ratios: manifest.ratios,
        })
    }
}

fn read_triples(path: &Path, delimiter: Delimiter) -> Result<Vec<RatingTriple>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut triples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = delimiter.split(trimmed);
        if fields.len() < 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected at least 3 fields, got {}", fields.len()),
            });
        }
        let rating: f64 = fields[2].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg: format!("bad rating {:?}", fields[2]),
        })?;
        if !rating.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("non-finite rating {:?}", fields[2]),
            });
        }
        // Fields past the third (timestamps etc.) are ignored.
        triples.push(RatingTriple {
            user_id: fields[0].to_string(),
            item_id: fields[1].to_string(),
            rating,
        });
    }
    Ok(triples)
}

/// Parse a triple file into an indexed sparse structure.
pub fn load_dataset(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<SparseRatings> {
    let path = path.as_ref();
    let triples = read_triples(path, delimiter)?;
    if triples.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
        });
    }
    SparseRatings::from_triples(&triples)
}

/// Seeded uniform shuffle then contiguous partition by ratios.
pub fn split_dataset(
    data: &SparseRatings,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (r_train, r_val, r_test) = ratios;
    let sum = r_train + r_val + r_test;
    if r_train <= 0.0 || r_val <= 0.0 || r_test <= 0.0 || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRatios(r_train, r_val, r_test));
    }
    let n = data.len();
    if n < 3 {
        return Err(Error::TooFewEntries { n });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = ((n as f64) * r_train).round().max(1.0) as usize;
    let n_val = ((n as f64) * r_val).round().max(1.0) as usize;
    if n_train + n_val >= n {
        return Err(Error::TooFewEntries { n });
    }

    let take = |range: std::ops::Range<usize>| -> Vec<Entry> {
        order[range].iter().map(|&k| data.entries()[k]).collect()
    };
    let train = take(0..n_train);
    let validation = take(n_train..n_train + n_val);
    let test = take(n_train + n_val..n);

    Ok(DatasetSplit {
        train: data.with_entries(train),
        validation: data.with_entries(validation),
        test: data.with_entries(test),
        seed,
        ratios: [r_train, r_val, r_test],
    })
}

/// Seeded low-rank synthetic matrix: ground-truth factors uniform in [0, 1],
/// observed cells sampled at the given density, ratings `<x_u, y_i>` plus
/// optional Gaussian noise. Returns both the observations and the truth.
pub fn generate_synthetic(
    n_users: usize,
    n_items: usize,
    rank: usize,
    density: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<(SparseRatings, LatentFactors)> {
    if n_users == 0 || n_items == 0 || rank == 0 {
        return Err(Error::InvalidParam("dimensions must be positive".into()));
    }
    if rank > n_users.min(n_items) {
        return Err(Error::InvalidParam(format!(
            "rank {rank} exceeds min(n_users, n_items) = {}",
            n_users.min(n_items)
        )));
    }
    if !(0.0 < density && density <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "density must be in (0, 1], got {density}"
        )));
    }
    if noise_sd < 0.0 || !noise_sd.is_finite() {
        return Err(Error::InvalidParam(format!("bad noise_sd {noise_sd}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = LatentFactors::from_fn(n_users, n_items, rank, |_, _| rng.random_range(0.0..1.0));

    let mut triples = Vec::new();
    for u in 0..n_users {
        for i in 0..n_items {
            if density < 1.0 && rng.random::<f64>() >= density {
                continue;
            }
            let mut r = truth.predict(u as u32, i as u32).expect("in range");
            if noise_sd > 0.0 {
                // Box-Muller keeps us on the one generator stream.
                let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                let u2: f64 = rng.random::<f64>();
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                r += noise_sd * z;
            }
            triples.push(RatingTriple {
                user_id: format!("u{u}"),
                item_id: format!("i{i}"),
                rating: r,
            });
        }
    }
    if triples.is_empty() {
        return Err(Error::InvalidParam(
            "density too low: no cells sampled".into(),
        ));
    }
    let ratings = SparseRatings::from_triples(&triples)?;
    Ok((ratings, truth))
}

/// FNV-1a over the raw file bytes, for split manifests.
pub fn file_checksum(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    Ok(format!("{hash:016x}"))
}

#[allow(unused)]
pub(crate) fn path_buf(p: &Path) -> PathBuf {
    p.to_path_buf()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_three_line_file() {
        let f = write_tmp("u1 i1 5\nu1 i2 3\nu2 i1 4\n");
        let r = load_dataset(f.path(), Delimiter::Auto).unwrap();
        assert_eq!(r.n_users(), 2);
        assert_eq!(r.n_items(), 2);
        assert_eq!(r.len(), 3);
        assert_eq!(r.duplicates(), 0);
    }

    #[test]
    fn load_empty_file_errors() {
        let f = write_tmp("# just a comment\n\n");
        let err = load_dataset(f.path(), Delimiter::Auto).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset { .. }));
    }

    #[test]
    fn load_reports_malformed_line_number() {
        let f = write_tmp("u1 i1 5\nu2 i2\n");
        match load_dataset(f.path(), Delimiter::Auto).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_rejects_non_finite_rating() {
        let f = write_tmp("u1 i1 NaN\n");
        assert!(load_dataset(f.path(), Delimiter::Auto).is_err());
    }

    #[test]
    fn duplicates_keep_last_and_count() {
        let f = write_tmp("u1 i1 5\nu1 i1 2\nu2 i1 4\n");
        let r = load_dataset(f.path(), Delimiter::Auto).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.duplicates(), 1);
        let e = r
            .entries()
            .iter()
            .find(|e| e.user == 0 && e.item == 0)
            .unwrap();
        assert_eq!(e.rating, 2.0);
    }

    #[test]
    fn double_colon_delimiter() {
        let f = write_tmp("1::10::4.5::978300760\n2::10::3.0::978300761\n");
        let r = load_dataset(f.path(), Delimiter::DoubleColon).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.n_users(), 2);
        assert_eq!(r.n_items(), 1);
    }

    #[test]
    fn loading_is_idempotent() {
        let f = write_tmp("a x 1\nb y 2\nc z 3\n");
        let r1 = load_dataset(f.path(), Delimiter::Auto).unwrap();
        let r2 = load_dataset(f.path(), Delimiter::Auto).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn split_ratio_arithmetic() {
        let triples: Vec<RatingTriple> = (0..10)
            .map(|k| RatingTriple {
                user_id: format!("u{k}"),
                item_id: "i".into(),
                rating: k as f64,
            })
            .collect();
        let data = SparseRatings::from_triples(&triples).unwrap();
        let split = split_dataset(&data, (0.7, 0.1, 0.2), 42).unwrap();
        assert_eq!(split.train.len(), 7);
        assert_eq!(split.validation.len(), 1);
        assert_eq!(split.test.len(), 2);
    }

    #[test]
    fn split_is_deterministic() {
        let (data, _) = generate_synthetic(20, 15, 2, 0.5, 0.0, 9).unwrap();
        let a = split_dataset(&data, (0.7, 0.1, 0.2), 42).unwrap();
        let b = split_dataset(&data, (0.7, 0.1, 0.2), 42).unwrap();
        assert_eq!(a.train.entries(), b.train.entries());
        assert_eq!(a.validation.entries(), b.validation.entries());
        assert_eq!(a.test.entries(), b.test.entries());
    }

    #[test]
    fn split_rejects_bad_ratios() {
        let (data, _) = generate_synthetic(5, 5, 1, 1.0, 0.0, 1).unwrap();
        let err = split_dataset(&data, (0.5, 0.5, 0.5), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidRatios(..)));
    }

    #[test]
    fn synthetic_rank_one_noiseless_has_rank_one() {
        let (data, truth) = generate_synthetic(6, 5, 1, 1.0, 0.0, 3).unwrap();
        assert_eq!(data.len(), 30);
        // every 2x2 minor vanishes for a rank-1 matrix
        let at = |u: u32, i: u32| truth.predict(u, i).unwrap();
        for u in 0..5u32 {
            for i in 0..4u32 {
                let minor = at(u, i) * at(u + 1, i + 1) - at(u, i + 1) * at(u + 1, i);
                assert!(minor.abs() < 1e-12, "minor {minor}");
            }
        }
    }

    #[test]
    fn synthetic_matches_truth_inner_products() {
        let (data, truth) = generate_synthetic(50, 40, 2, 0.3, 0.0, 7).unwrap();
        let n = data.len() as f64;
        assert!((400.0..800.0).contains(&n), "got {n} entries");
        // dense indices follow first appearance, so map back through the ids
        for e in data.entries() {
            let tu: u32 = data.user_id(e.user).unwrap()[1..].parse().unwrap();
            let ti: u32 = data.item_id(e.item).unwrap()[1..].parse().unwrap();
            let p = truth.predict(tu, ti).unwrap();
            assert!((p - e.rating).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_rejects_zero_density() {
        assert!(generate_synthetic(5, 5, 1, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn split_roundtrip_through_dir() {
        let (data, _) = generate_synthetic(12, 9, 2, 0.8, 0.1, 5).unwrap();
        let split = split_dataset(&data, (0.7, 0.1, 0.2), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        split.write_dir(dir.path(), &split.manifest()).unwrap();
        let back = DatasetSplit::read_dir(dir.path()).unwrap();
        assert_eq!(back.train.len(), split.train.len());
        assert_eq!(back.validation.len(), split.validation.len());
        assert_eq!(back.test.len(), split.test.len());
        assert_eq!(back.seed, split.seed);
        // same id space and ratings after the round trip
        for (a, b) in split.train.entries().iter().zip(back.train.entries()) {
            assert_eq!(
                split.train.user_id(a.user).unwrap(),
                back.train.user_id(b.user).unwrap()
            );
            assert!((a.rating - b.rating).abs() < 1e-12);
        }
    }
}
