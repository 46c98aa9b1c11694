//! Synthetic imbalanced Gaussian-mixture datasets.
//!
//! Class imbalance is set by `class_counts` and per-class learning difficulty
//! by `class_scales` (isotropic std) together with how close the class means
//! sit, so the two effects can be varied independently.
//!
//! CSV layout, one row per instance in id order:
//!
//! ```text
//! id,label,split,f0,f1,...,f{d-1}
//! 0,0,labeled,0.123,...
//! ```
//!
//! `split` is one of `labeled`, `unlabeled`, `test`; floats use the shortest
//! decimal representation that round-trips.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of every class reserved for testing.
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub d_in: usize,
    pub class_counts: Vec<usize>,
    pub class_scales: Vec<f64>,
    pub class_means: Vec<Vec<f64>>,
}

impl DatasetSpec {
    pub fn classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn total(&self) -> usize {
        self.class_counts.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.classes();
        if c < 2 {
            return Err(Error::config("class_counts: need at least 2 classes"));
        }
        if self.d_in == 0 {
            return Err(Error::config("d_in: must be at least 1"));
        }
        if let Some(i) = self.class_counts.iter().position(|&n| n < 2) {
            return Err(Error::config(format!("class_counts: class {i} has fewer than 2 instances")));
        }
        if self.class_scales.len() != c {
            return Err(Error::config(format!(
                "class_scales: {} entries for {c} classes",
                self.class_scales.len()
            )));
        }
        if let Some(i) = self.class_scales.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config(format!("class_scales: entry {i} must be positive")));
        }
        if self.class_means.len() != c {
            return Err(Error::config(format!(
                "class_means: {} vectors for {c} classes",
                self.class_means.len()
            )));
        }
        if let Some(i) = self.class_means.iter().position(|m| m.len() != self.d_in) {
            return Err(Error::config(format!("class_means: vector {i} does not have d_in = {} entries", self.d_in)));
        }
        if self.class_means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("class_means: entries must be finite"));
        }
        Ok(())
    }

    /// The shipped benchmark: 8 long-tailed classes in 16 dimensions.
    ///
    /// Classes 1 (majority side) and 6 (minority side) are hard: wide spread
    /// and means pulled toward a neighbouring class.
    pub fn desk_default() -> Self {
        let d_in = 16;
        let class_counts = vec![400, 280, 200, 140, 100, 70, 50, 35];
        let class_scales = vec![1.0, 1.6, 1.0, 1.0, 1.0, 1.0, 1.6, 1.0];
        let radius = 3.0;
        let mut class_means: Vec<Vec<f64>> = (0..8)
            .map(|c| {
                let mut m = vec![0.0; d_in];
                m[2 * c] = radius;
                m
            })
            .collect();
        // hard classes share part of a neighbour's direction
        class_means[1][0] = 0.5 * radius;
        class_means[6][10] = 0.5 * radius;
        DatasetSpec {
            d_in,
            class_counts,
            class_scales,
            class_means,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<(Self, Option<f64>)> {
        let file: SpecFile = toml::from_str(s).map_err(|e| Error::config(format!("dataset spec: {}", e.message())))?;
        file.dataset.validate()?;
        Ok((file.dataset, file.labeled_fraction))
    }

    pub fn to_toml_string(&self, labeled_fraction: Option<f64>) -> String {
        let file = SpecFile {
            labeled_fraction,
            dataset: self.clone(),
        };
        toml::to_string(&file).expect("dataset spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<f64>)> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labeled_fraction: Option<f64>,
    #[serde(flatten)]
    dataset: DatasetSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: usize,
    pub label: usize,
    pub features: Vec<f64>,
}

/// Draws `class_counts[c]` points from `N(class_means[c], class_scales[c]² I)`.
/// Instances are ordered by class, ids are positions.
pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<Vec<Instance>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.total());
    for (c, &n) in spec.class_counts.iter().enumerate() {
        let mean = &spec.class_means[c];
        let scale = spec.class_scales[c];
        for _ in 0..n {
            let features = mean
                .iter()
                .map(|m| m + scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            out.push(Instance {
                id: out.len(),
                label: c,
                features,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Labeled,
    Unlabeled,
    Test,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Labeled => "labeled",
            SplitKind::Unlabeled => "unlabeled",
            SplitKind::Test => "test",
        }
    }
}

/// Labeled, unlabeled and test subsets of one population.
///
/// Unlabeled instances keep their true label for diagnostics only; the
/// trainer reads them through [`Dataset::unlabeled_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub classes: usize,
    pub d_in: usize,
    pub labeled: Vec<Instance>,
    pub unlabeled: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl Dataset {
    pub fn unlabeled_features(&self) -> impl Iterator<Item = &[f64]> {
        self.unlabeled.iter().map(|i| i.features.as_slice())
    }

    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Instances of every split with their split tag, in id order.
    pub fn rows(&self) -> Vec<(SplitKind, &Instance)> {
        let mut rows: Vec<(SplitKind, &Instance)> = self
            .labeled
            .iter()
            .map(|i| (SplitKind::Labeled, i))
            .chain(self.unlabeled.iter().map(|i| (SplitKind::Unlabeled, i)))
            .chain(self.test.iter().map(|i| (SplitKind::Test, i)))
            .collect();
        rows.sort_by_key(|(_, i)| i.id);
        rows
    }

    /// Every class must appear in the labeled and test subsets.
    pub fn validate(&self) -> Result<()> {
        for (name, set) in [("labeled", &self.labeled), ("test", &self.test)] {
            let mut seen = vec![false; self.classes];
            for inst in set.iter() {
                if inst.label >= self.classes {
                    return Err(Error::data(format!("label {} out of range", inst.label)));
                }
                seen[inst.label] = true;
            }
            if let Some(c) = seen.iter().position(|s| !s) {
                return Err(Error::data(format!("class {c} missing from {name} split")));
            }
        }
        let all = self.labeled.iter().chain(&self.unlabeled).chain(&self.test);
        if let Some(bad) = all.clone().find(|i| i.features.len() != self.d_in) {
            return Err(Error::data(format!("instance {} has {} features, expected {}", bad.id, bad.features.len(), self.d_in)));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "label".to_string(), "split".to_string()];
        header.extend((0..self.d_in).map(|i| format!("f{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for (split, inst) in self.rows() {
            let mut rec = vec![inst.id.to_string(), inst.label.to_string(), split.name().to_string()];
            rec.extend(inst.features.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 4 || &header[0] != "id" || &header[1] != "label" || &header[2] != "split" {
            return Err(Error::data("dataset header must start with id,label,split,f0"));
        }
        let d_in = header.len() - 3;
        for (i, name) in header.iter().skip(3).enumerate() {
            if name != format!("f{i}") {
                return Err(Error::data(format!("unexpected column `{name}`, expected f{i}")));
            }
        }
        let mut ds = Dataset {
            classes: 0,
            d_in,
            labeled: vec![],
            unlabeled: vec![],
            test: vec![],
        };
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let parse_err = |what: &str| Error::data(format!("row {}: bad {what}", line + 1));
            let id = rec[0].parse().map_err(|_| parse_err("id"))?;
            let label: usize = rec[1].parse().map_err(|_| parse_err("label"))?;
            let features = rec
                .iter()
                .skip(3)
                .map(|v| v.parse::<f64>().map_err(|_| parse_err("feature")))
                .collect::<Result<Vec<_>>>()?;
            ds.classes = ds.classes.max(label + 1);
            let inst = Instance { id, label, features };
            match &rec[2] {
                "labeled" => ds.labeled.push(inst),
                "unlabeled" => ds.unlabeled.push(inst),
                "test" => ds.test.push(inst),
                other => return Err(Error::data(format!("row {}: unknown split `{other}`", line + 1))),
            }
        }
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::data(format!("csv: {e}"))
}

/// Sizes `(labeled, test, unlabeled)` of one class of `count` instances.
pub fn split_sizes(count: usize, labeled_fraction: f64) -> Result<(usize, usize, usize)> {
    let labeled = ((labeled_fraction * count as f64).ceil() as usize).max(1);
    let test = ((TEST_FRACTION * count as f64).floor() as usize).max(1);
    if labeled + test > count {
        return Err(Error::config(format!(
            "class of {count} instances cannot hold {labeled} labeled and {test} test instances"
        )));
    }
    Ok((labeled, test, count - labeled - test))
}

/// Stratified split: per class, `ceil(fraction·n)` labeled (at least 1),
/// `floor(0.2·n)` test (at least 1), the rest unlabeled.
pub fn split(population: &[Instance], labeled_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(labeled_fraction > 0.0 && labeled_fraction < 1.0) {
        return Err(Error::config(format!("labeled_fraction must be in (0, 1), got {labeled_fraction}")));
    }
    let first = population.first().ok_or_else(|| Error::config("empty population"))?;
    let d_in = first.features.len();
    let classes = population.iter().map(|i| i.label).max().unwrap_or(0) + 1;
    let mut by_class: Vec<Vec<&Instance>> = vec![Vec::new(); classes];
    for inst in population {
        by_class[inst.label].push(inst);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset {
        classes,
        d_in,
        labeled: vec![],
        unlabeled: vec![],
        test: vec![],
    };
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            return Err(Error::config(format!("class {c} has no instances")));
        }
        let (n_lab, n_test, _) = split_sizes(members.len(), labeled_fraction)?;
        members.shuffle(&mut rng);
        for (k, inst) in members.iter().enumerate() {
            let target = if k < n_lab {
                &mut ds.labeled
            } else if k < n_lab + n_test {
                &mut ds.test
            } else {
                &mut ds.unlabeled
            };
            target.push((*inst).clone());
        }
    }
    for set in [&mut ds.labeled, &mut ds.unlabeled, &mut ds.test] {
        set.sort_by_key(|i| i.id);
    }
    Ok(ds)
}

/// Feature-space perturbations standing in for geometric augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub strong_scale_lo: f64,
    pub strong_scale_hi: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            weak_sigma: 0.1,
            strong_sigma: 0.8,
            strong_scale_lo: 0.7,
            strong_scale_hi: 1.3,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.weak_sigma > 0.0 && self.weak_sigma < self.strong_sigma) {
            return Err(Error::config("augmentation: need 0 < weak_sigma < strong_sigma"));
        }
        if !(self.strong_scale_lo > 0.0 && self.strong_scale_lo <= 1.0 && self.strong_scale_hi >= 1.0) {
            return Err(Error::config("augmentation: need 0 < strong_scale_lo <= 1 <= strong_scale_hi"));
        }
        Ok(())
    }
}

/// `x + N(0, weak_sigma²)` per coordinate.
pub fn weak_augment<R: Rng + ?Sized>(x: &[f64], cfg: &AugmentConfig, rng: &mut R) -> Vec<f64> {
    x.iter()
        .map(|v| v + cfg.weak_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `s·x + N(0, strong_sigma²)` with one `s ~ U[lo, hi]` per call.
pub fn strong_augment<R: Rng + ?Sized>(x: &[f64], cfg: &AugmentConfig, rng: &mut R) -> Vec<f64> {
    let s = rng.random_range(cfg.strong_scale_lo..=cfg.strong_scale_hi);
    x.iter()
        .map(|v| s * v + cfg.strong_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn two_class_spec(counts: Vec<usize>, scale: f64) -> DatasetSpec {
        DatasetSpec {
            d_in: 2,
            class_scales: vec![scale; counts.len()],
            class_means: (0..counts.len()).map(|c| vec![5.0 * c as f64, -5.0 * c as f64]).collect(),
            class_counts: counts,
        }
    }

    #[test]
    fn generate_respects_counts() {
        let pop = generate(&two_class_spec(vec![3, 2], 1.0), 1).unwrap();
        assert_eq!(pop.iter().map(|i| i.label).collect::<Vec<_>>(), vec![0, 0, 0, 1, 1]);
        assert_eq!(pop, generate(&two_class_spec(vec![3, 2], 1.0), 1).unwrap());
        assert_ne!(pop, generate(&two_class_spec(vec![3, 2], 1.0), 2).unwrap());
    }

    #[test]
    fn nearest_mean_separates_tight_clusters() {
        let spec = DatasetSpec {
            d_in: 3,
            class_counts: vec![200, 150, 100, 50],
            class_scales: vec![0.1; 4],
            class_means: vec![
                vec![0.0, 0.0, 0.0],
                vec![2.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0],
                vec![0.0, 0.0, 2.0],
            ],
        };
        let pop = generate(&spec, 3).unwrap();
        let correct = pop
            .iter()
            .filter(|inst| {
                let dist = |m: &Vec<f64>| m.iter().zip(&inst.features).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let best = (0..4)
                    .min_by(|&a, &b| dist(&spec.class_means[a]).total_cmp(&dist(&spec.class_means[b])))
                    .unwrap();
                best == inst.label
            })
            .count();
        assert!(correct as f64 / pop.len() as f64 > 0.99);
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let mut s = two_class_spec(vec![3, 1], 1.0);
        assert!(s.validate().unwrap_err().to_string().contains("class_counts"));
        s.class_counts = vec![3, 3];
        s.class_scales = vec![1.0, 0.0];
        assert!(s.validate().unwrap_err().to_string().contains("class_scales"));
        s.class_scales = vec![1.0, 1.0];
        s.class_means[1].push(0.0);
        assert!(s.validate().unwrap_err().to_string().contains("class_means"));
    }

    #[test]
    fn split_sizes_examples() {
        assert_eq!(split_sizes(100, 0.1).unwrap(), (10, 20, 70));
        assert_eq!(split_sizes(4, 0.5).unwrap(), (2, 1, 1));
        assert!(split_sizes(2, 0.9).is_err());
    }

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let pop = generate(&DatasetSpec::desk_default(), 9).unwrap();
        let ds = split(&pop, 0.1, 4).unwrap();
        let ids = |v: &[Instance]| v.iter().map(|i| i.id).collect::<HashSet<_>>();
        let (l, u, t) = (ids(&ds.labeled), ids(&ds.unlabeled), ids(&ds.test));
        assert!(l.is_disjoint(&u) && l.is_disjoint(&t) && u.is_disjoint(&t));
        let all: HashSet<usize> = l.union(&u).chain(t.iter()).copied().collect();
        assert_eq!(all, (0..pop.len()).collect());
        ds.validate().unwrap();
        assert_eq!(ds, split(&pop, 0.1, 4).unwrap());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let pop = generate(&two_class_spec(vec![6, 5], 0.7), 5).unwrap();
        let ds = split(&pop, 0.3, 1).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,label,split,f0,f1\n0,0,"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn read_csv_rejects_missing_class() {
        let text = "id,label,split,f0\n0,0,labeled,1.0\n1,1,labeled,2.0\n2,0,test,1.0\n";
        assert!(matches!(Dataset::read_csv(text.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn degenerate_augmentations_are_identity() {
        let x = vec![0.5, -1.25, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = AugmentConfig {
            weak_sigma: 0.0,
            strong_sigma: 0.0,
            strong_scale_lo: 1.0,
            strong_scale_hi: 1.0,
        };
        assert_eq!(weak_augment(&x, &cfg, &mut rng), x);
        assert_eq!(strong_augment(&x, &cfg, &mut rng), x);
    }

    #[test]
    fn weak_noise_has_configured_std() {
        let cfg = AugmentConfig {
            weak_sigma: 0.3,
            ..AugmentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        let d = 3;
        let mut sq = vec![0.0; d];
        for _ in 0..n {
            for (s, v) in sq.iter_mut().zip(weak_augment(&vec![0.0; d], &cfg, &mut rng)) {
                *s += v * v;
            }
        }
        for s in sq {
            let std = (s / n as f64).sqrt();
            assert!((std - 0.3).abs() / 0.3 < 0.02, "std {std}");
        }
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = DatasetSpec::desk_default();
        let text = spec.to_toml_string(Some(0.1));
        let (back, frac) = DatasetSpec::from_toml_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(frac, Some(0.1));
        assert_eq!(spec.total(), 1275);
    }
}
