//! Labelled datasets: CSV input and output, synthetic generators, splits,
//! constant-feature jitter and the class-overlap diagnostic.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::Config;
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::mve::mve_fit;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub points: Vec<DVector<f64>>,
    /// Class index per record, in `0..class_names.len()`.
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Option<Vec<String>>,
    pub n: usize,
}

impl LabeledDataset {
    /// Builds a dataset from points and class indices; class names default
    /// to the indices themselves.
    pub fn new(points: Vec<DVector<f64>>, labels: Vec<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if points.len() != labels.len() {
            return Err(Error::InvalidParam(format!("{} points but {} labels", points.len(), labels.len())));
        }
        let n = points[0].len();
        if n == 0 {
            return Err(Error::InvalidParam("points need at least one feature".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: p.len() });
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParam("points must be finite".into()));
        }
        let k = labels.iter().max().map_or(0, |&l| l + 1);
        Ok(LabeledDataset { points, labels, class_names: (0..k).map(|c| c.to_string()).collect(), feature_names: None, n })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Records at `indices`, keeping class names so labels stay comparable.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            n: self.n,
        }
    }

    /// Points of `class` and of every other class, in record order.
    pub fn one_vs_rest(&self, class: usize) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (p, &l) in self.points.iter().zip(&self.labels) {
            if l == class {
                pos.push(p.clone());
            } else {
                neg.push(p.clone());
            }
        }
        (pos, neg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvOptions {
    pub label: LabelColumn,
    pub has_header: bool,
    /// Keep only rows whose raw cell in the named column equals the value.
    /// Filter columns are not used as features.
    pub filters: Vec<(String, String)>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { label: LabelColumn::Last, has_header: true, filters: Vec::new() }
    }
}

fn resolve_column(spec: &str, header: Option<&[String]>, width: usize) -> Result<usize> {
    if let Some(names) = header {
        if let Some(i) = names.iter().position(|h| h == spec) {
            return Ok(i);
        }
    }
    match spec.parse::<usize>() {
        Ok(i) if i < width => Ok(i),
        _ => Err(Error::MissingLabel(spec.to_string())),
    }
}

type Table = (Option<Vec<String>>, Vec<(usize, csv::StringRecord)>, usize);

/// Header (if any), non-blank records tagged with their file line, and the
/// table width.
fn read_table(path: &Path, has_header: bool) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records();

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    if has_header {
        match records.next() {
            Some(r) => header = Some(r?.iter().map(str::to_string).collect()),
            None => return Err(Error::EmptyFile),
        }
    }
    for r in records {
        let r = r?;
        if r.iter().all(str::is_empty) {
            continue;
        }
        let line = r.position().map_or(0, |p| p.line() as usize);
        rows.push((line, r));
    }
    let width = header.as_ref().map(Vec::len).or_else(|| rows.first().map(|(_, r)| r.len()));
    let width = match width {
        Some(w) if w > 0 => w,
        _ => return Err(Error::EmptyFile),
    };
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok((header, rows, width))
}

fn parse_features(line: usize, record: &csv::StringRecord, width: usize, cols: &[usize]) -> Result<DVector<f64>> {
    if record.len() != width {
        return Err(Error::ParseError {
            row: line,
            col: record.len().min(width),
            msg: format!("expected {width} fields, found {}", record.len()),
        });
    }
    let mut values = Vec::with_capacity(cols.len());
    for &c in cols {
        let cell = &record[c];
        if cell.is_empty() {
            return Err(Error::ParseError { row: line, col: c, msg: "missing value".into() });
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => return Err(Error::ParseError { row: line, col: c, msg: format!("not a finite number: {cell:?}") }),
        }
    }
    Ok(DVector::from_vec(values))
}

fn label_index(label: &LabelColumn, header: Option<&[String]>, width: usize) -> Result<usize> {
    match label {
        LabelColumn::Last => Ok(width - 1),
        LabelColumn::Index(i) if *i < width => Ok(*i),
        LabelColumn::Index(i) => Err(Error::MissingLabel(i.to_string())),
        LabelColumn::Name(name) => resolve_column(name, header, width),
    }
}

/// Reads feature rows only, skipping `label` when given.
pub fn load_points(path: impl AsRef<Path>, has_header: bool, label: Option<&LabelColumn>) -> Result<Vec<DVector<f64>>> {
    let (header, rows, width) = read_table(path.as_ref(), has_header)?;
    let skip = label.map(|l| label_index(l, header.as_deref(), width)).transpose()?;
    let cols: Vec<usize> = (0..width).filter(|&c| Some(c) != skip).collect();
    if cols.is_empty() {
        return Err(Error::InvalidParam("no feature columns".into()));
    }
    rows.iter().map(|(line, r)| parse_features(*line, r, width, &cols)).collect()
}

/// Reads a comma-separated file. Row numbers in errors are 1-based file
/// lines; columns are 0-based.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<LabeledDataset> {
    let (header, rows, width) = read_table(path.as_ref(), options.has_header)?;
    let label_col = label_index(&options.label, header.as_deref(), width)?;
    let filters = options
        .filters
        .iter()
        .map(|(c, v)| Ok((resolve_column(c, header.as_deref(), width)?, v.as_str())))
        .collect::<Result<Vec<(usize, &str)>>>()?;
    let feature_cols: Vec<usize> =
        (0..width).filter(|&c| c != label_col && !filters.iter().any(|(f, _)| *f == c)).collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidParam("no feature columns besides the label".into()));
    }

    let mut points = Vec::new();
    let mut raw_labels = Vec::new();
    for (line, record) in &rows {
        if record.len() == width && filters.iter().any(|&(c, v)| &record[c] != v) {
            continue;
        }
        let values = parse_features(*line, record, width, &feature_cols)?;
        let label = &record[label_col];
        if label.is_empty() {
            return Err(Error::ParseError { row: *line, col: label_col, msg: "missing label".into() });
        }
        points.push(values);
        raw_labels.push(label.to_string());
    }
    if points.is_empty() {
        return Err(Error::EmptyFile);
    }

    let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    let mut class_names: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    if class_names.iter().all(|c| c.parse::<f64>().is_ok()) {
        class_names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    let labels = raw_labels.iter().map(|l| class_names.iter().position(|c| c == l).unwrap()).collect();
    let feature_names = header.map(|h| feature_cols.iter().map(|&c| h[c].clone()).collect());
    Ok(LabeledDataset { n: feature_cols.len(), points, labels, class_names, feature_names })
}

/// Writes features then a `label` column holding class names.
pub fn save_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = match &data.feature_names {
        Some(names) => names.clone(),
        None => (0..data.n).map(|i| format!("x{i}")).collect(),
    };
    header.push("label".into());
    writer.write_record(&header)?;
    for (p, &l) in data.points.iter().zip(&data.labels) {
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        row.push(data.class_names[l].clone());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn xy(x: f64, y: f64) -> DVector<f64> {
    DVector::from_vec(vec![x, y])
}

fn check_generator(n_points: usize, noise: f64) -> Result<()> {
    if n_points < 4 {
        return Err(Error::InvalidParam(format!("need at least 4 points, got {n_points}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParam(format!("noise must be non-negative, got {noise}")));
    }
    Ok(())
}

fn add_noise(points: &mut [DVector<f64>], noise: f64, rng: &mut ChaCha8Rng) {
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("valid deviation");
        for p in points {
            for v in p.iter_mut() {
                *v += normal.sample(rng);
            }
        }
    }
}

/// The four corners of the unit square; `(0,0)` and `(1,1)` are class 1.
pub fn gen_xor() -> LabeledDataset {
    let points = vec![xy(0.0, 0.0), xy(1.0, 1.0), xy(0.0, 1.0), xy(1.0, 0.0)];
    LabeledDataset::new(points, vec![1, 1, 0, 0]).expect("fixed data")
}

/// Two concentric rings: radius 1 is class 0, radius 0.5 is class 1.
pub fn gen_circles(n_points: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    check_generator(n_points, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_outer = n_points / 2;
    let n_inner = n_points - n_outer;
    let ring = |count: usize, radius: f64| {
        (0..count).map(move |i| {
            let t = std::f64::consts::TAU * i as f64 / count as f64;
            xy(radius * t.cos(), radius * t.sin())
        })
    };
    let mut points: Vec<_> = ring(n_outer, 1.0).chain(ring(n_inner, 0.5)).collect();
    add_noise(&mut points, noise, &mut rng);
    let labels = (0..n_points).map(|i| usize::from(i >= n_outer)).collect();
    LabeledDataset::new(points, labels)
}

/// Two interleaved half-rings.
pub fn gen_moons(n_points: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    check_generator(n_points, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_upper = n_points / 2;
    let n_lower = n_points - n_upper;
    let angle = |i: usize, count: usize| std::f64::consts::PI * i as f64 / (count - 1).max(1) as f64;
    let mut points: Vec<_> = (0..n_upper)
        .map(|i| {
            let t = angle(i, n_upper);
            xy(t.cos(), t.sin())
        })
        .chain((0..n_lower).map(|i| {
            let t = angle(i, n_lower);
            xy(1.0 - t.cos(), 0.5 - t.sin())
        }))
        .collect();
    add_noise(&mut points, noise, &mut rng);
    let labels = (0..n_points).map(|i| usize::from(i >= n_upper)).collect();
    LabeledDataset::new(points, labels)
}

/// Two unit-variance Gaussian blobs whose means are `separation` apart
/// along the first axis.
pub fn gen_gaussians(n_per_class: usize, separation: f64, seed: u64) -> Result<LabeledDataset> {
    check_generator(2 * n_per_class, 0.0)?;
    if !separation.is_finite() {
        return Err(Error::InvalidParam(format!("separation must be finite, got {separation}")));
    }
    let centers = [vec![-separation / 2.0, 0.0], vec![separation / 2.0, 0.0]];
    gen_blobs(n_per_class, &centers, 1.0, seed)
}

/// Isotropic Gaussian blobs, one class per center.
pub fn gen_blobs(n_per_class: usize, centers: &[Vec<f64>], spread: f64, seed: u64) -> Result<LabeledDataset> {
    if centers.is_empty() || n_per_class == 0 {
        return Err(Error::InvalidParam("need at least one center and one point per class".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidParam(format!("spread must be non-negative, got {spread}")));
    }
    let n = centers[0].len();
    if n == 0 || centers.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParam("centers must share a positive dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).expect("valid deviation");
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (class, c) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            points.push(DVector::from_fn(n, |k, _| c[k] + normal.sample(&mut rng)));
            labels.push(class);
        }
    }
    LabeledDataset::new(points, labels)
}

/// Adds uniform noise of half-width `radius_frac * max(1, |value|)` to every
/// feature that takes a single value over the whole dataset.
pub fn jitter_constant_features(data: &LabeledDataset, radius_frac: f64, seed: u64) -> LabeledDataset {
    let mut out = data.clone();
    if data.points.len() < 2 || !(radius_frac > 0.0) {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in 0..data.n {
        let first = data.points[0][f];
        if data.points.iter().any(|p| p[f] != first) {
            continue;
        }
        let half = radius_frac * first.abs().max(1.0);
        for p in &mut out.points {
            p[f] = first + rng.random_range(-half..half);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn shuffled_by_class(data: &LabeledDataset, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); data.n_classes()];
    for (i, &l) in data.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for members in &mut by_class {
        members.shuffle(rng);
    }
    by_class
}

/// Stratified train/test split.
pub fn split(data: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Split { train: Vec::new(), test: Vec::new() };
    for (class, members) in shuffled_by_class(data, &mut rng).into_iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::ClassTooSmall { class, size: members.len(), k: 2 });
        }
        let n_test = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        out.test.extend_from_slice(&members[..n_test]);
        out.train.extend_from_slice(&members[n_test..]);
    }
    out.train.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Stratified k-fold cross-validation splits.
pub fn kfold(data: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; data.len()];
    for (class, members) in shuffled_by_class(data, &mut rng).into_iter().enumerate() {
        if members.len() < k {
            return Err(Error::ClassTooSmall { class, size: members.len(), k });
        }
        for (pos, &i) in members.iter().enumerate() {
            fold_of[i] = pos % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| fold_of[i] == f);
            Split { train, test }
        })
        .collect())
}

/// Overlap between the minimum-volume ellipsoids of two classes.
#[derive(Clone, Debug, PartialEq)]
pub struct OvrReport {
    pub classes: [usize; 2],
    pub class_volume: [f64; 2],
    pub class_ellipsoids: [Ellipsoid; 2],
    /// Volume measure of the ellipsoid fitted to the points lying in both
    /// class ellipsoids; absent when too few such points exist.
    pub overlap_volume: Option<f64>,
    pub ovr: [f64; 2],
    /// Points of each class inside both class ellipsoids.
    pub inside: [usize; 2],
    pub outside: [usize; 2],
}

pub fn ovr_report(data: &LabeledDataset, class_a: usize, class_b: usize, config: &Config) -> Result<OvrReport> {
    let k = data.n_classes();
    for c in [class_a, class_b] {
        if c >= k {
            return Err(Error::InvalidParam(format!("class {c} out of range (dataset has {k})")));
        }
    }
    if class_a == class_b {
        return Err(Error::InvalidParam("ovr_report needs two distinct classes".into()));
    }
    let classes = [class_a, class_b];
    let members = classes.map(|c| {
        data.points.iter().zip(&data.labels).filter(|(_, &l)| l == c).map(|(p, _)| p.clone()).collect::<Vec<_>>()
    });
    let fit = |pts: &[DVector<f64>]| mve_fit(pts, config.tol_fit).map(|s| s.ellipsoid);
    let ellipsoids = [fit(&members[0])?, fit(&members[1])?];
    let tol = config.tol_membership;
    let in_both = |p: &DVector<f64>| ellipsoids.iter().all(|e| e.contains_unchecked(p, tol));
    let inside = [0, 1].map(|i| members[i].iter().filter(|p| in_both(p)).count());
    let outside = [0, 1].map(|i| members[i].len() - inside[i]);
    let common: Vec<DVector<f64>> = members.iter().flatten().filter(|p| in_both(p)).cloned().collect();
    let overlap_volume = if common.len() > data.n {
        match mve_fit(&common, config.tol_fit) {
            Ok(s) => Some(s.ellipsoid.volume_measure()),
            Err(Error::RankDeficient { .. } | Error::TooFewPoints { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let class_volume = [ellipsoids[0].volume_measure(), ellipsoids[1].volume_measure()];
    let ovr = class_volume.map(|v| overlap_volume.map_or(0.0, |o| o / v));
    Ok(OvrReport { classes, class_volume, class_ellipsoids: ellipsoids, overlap_volume, ovr, inside, outside })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn xor_file() {
        let f = write("x,y,label\n0,0,1\n1,1,1\n0,1,0\n1,0,0\n");
        let d = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.labels, vec![1, 1, 0, 0]);
        assert_eq!(d.feature_names.as_deref(), Some(&["x".to_string(), "y".to_string()][..]));
    }

    #[test]
    fn bad_cell_reports_row() {
        let f = write("a,b,c\n1,2,0\n1,2,0\n1,2,1\n1,2,1\n1,2,0\n1,oops,1\n1,2,0\n");
        match load_csv(f.path(), &CsvOptions::default()) {
            Err(Error::ParseError { row, col, .. }) => assert_eq!((row, col), (7, 1)),
            other => panic!("unexpected {other:?}"),
        }
        let f = write("a,b,c\n1,,0\n");
        assert!(matches!(load_csv(f.path(), &CsvOptions::default()), Err(Error::ParseError { row: 2, col: 1, .. })));
    }

    #[test]
    fn empty_and_missing_label() {
        let f = write("");
        assert!(matches!(load_csv(f.path(), &CsvOptions::default()), Err(Error::EmptyFile)));
        let f = write("a,b\n");
        assert!(matches!(load_csv(f.path(), &CsvOptions::default()), Err(Error::EmptyFile)));
        let f = write("a,b\n1,2\n");
        let opts = CsvOptions { label: LabelColumn::Name("class".into()), ..CsvOptions::default() };
        assert!(matches!(load_csv(f.path(), &opts), Err(Error::MissingLabel(_))));
    }

    #[test]
    fn label_by_name_and_filters() {
        let f = write("kind,x,group,y\nb,1,u,2\na,3,v,4\nb,5,u,6\n");
        let opts = CsvOptions {
            label: LabelColumn::Name("kind".into()),
            has_header: true,
            filters: vec![("group".into(), "u".into())],
        };
        let d = load_csv(f.path(), &opts).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n, 2);
        assert_eq!(d.points[1].as_slice(), &[5.0, 6.0]);
        assert_eq!(d.class_names, vec!["b".to_string()]);
    }

    #[test]
    fn numeric_class_names_sort_numerically() {
        let f = write("1,10\n2,2\n3,-1\n");
        let opts = CsvOptions { has_header: false, ..CsvOptions::default() };
        let d = load_csv(f.path(), &opts).unwrap();
        assert_eq!(d.class_names, vec!["-1", "2", "10"]);
        assert_eq!(d.labels, vec![2, 1, 0]);
    }

    #[test]
    fn save_load_round_trip() {
        let d = gen_moons(60, 0.1, 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_csv(&d, f.path()).unwrap();
        let back = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(back.labels, d.labels);
        for (a, b) in back.points.iter().zip(&d.points) {
            assert!((a - b).amax() <= 1e-12);
        }
    }

    #[test]
    fn generators() {
        let x = gen_xor();
        assert_eq!(x.class_counts(), vec![2, 2]);
        let c = gen_circles(200, 0.0, 1).unwrap();
        let r = |p: &DVector<f64>| p.norm();
        let inner = c.points.iter().zip(&c.labels).filter(|(_, &l)| l == 1).map(|(p, _)| r(p)).fold(0.0, f64::max);
        let outer = c.points.iter().zip(&c.labels).filter(|(_, &l)| l == 0).map(|(p, _)| r(p)).fold(f64::INFINITY, f64::min);
        assert!(inner < outer);
        assert_eq!(gen_moons(50, 0.1, 4).unwrap(), gen_moons(50, 0.1, 4).unwrap());
        assert_ne!(gen_moons(50, 0.1, 4).unwrap(), gen_moons(50, 0.1, 5).unwrap());
        assert!(matches!(gen_circles(3, 0.0, 0), Err(Error::InvalidParam(_))));
        assert!(matches!(gen_moons(10, -1.0, 0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn jitter_only_touches_constant_features() {
        let d = gen_moons(40, 0.1, 1).unwrap();
        assert_eq!(jitter_constant_features(&d, 0.01, 9), d);
        let zeros = LabeledDataset::new(d.points.iter().map(|p| DVector::from_vec(vec![p[0], 0.0])).collect(), d.labels.clone()).unwrap();
        let j = jitter_constant_features(&zeros, 0.01, 9);
        assert!(j.points.iter().all(|p| p[1].abs() < 0.01));
        assert!(j.points.iter().any(|p| p[1] != j.points[0][1]));
        assert!(j.points.iter().zip(&zeros.points).all(|(a, b)| a[0] == b[0]));
        assert_eq!(j.labels, zeros.labels);
    }

    #[test]
    fn jitter_unblocks_flat_fit() {
        let points: Vec<_> = (0..4).map(|i| DVector::from_vec(vec![i as f64, 5.0])).collect();
        let flat = LabeledDataset::new(points, vec![0, 1, 0, 1]).unwrap();
        assert!(matches!(mve_fit(&flat.points, 1e-7), Err(Error::RankDeficient { .. })));
        let j = jitter_constant_features(&flat, 0.01, 2);
        assert!(j.points.iter().all(|p| (p[1] - 5.0).abs() < 0.05));
        mve_fit(&j.points, 1e-7).unwrap();
    }

    #[test]
    fn stratified_split_and_folds() {
        let d = gen_gaussians(100, 3.0, 1).unwrap();
        let s = split(&d, 0.2, 7).unwrap();
        let count = |idx: &[usize], c| idx.iter().filter(|&&i| d.labels[i] == c).count();
        assert_eq!((count(&s.train, 0), count(&s.train, 1)), (80, 80));
        assert_eq!((count(&s.test, 0), count(&s.test, 1)), (20, 20));
        assert_eq!(split(&d, 0.2, 7).unwrap(), s);

        let folds = kfold(&d, 4, 3).unwrap();
        let mut seen = vec![0; d.len()];
        for f in &folds {
            assert_eq!(f.train.len() + f.test.len(), d.len());
            for &i in &f.test {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(kfold(&d, 4, 3).unwrap(), folds);
        let small = d.subset(&[0, 1, 2, 150]);
        assert!(matches!(kfold(&small, 2, 0), Err(Error::ClassTooSmall { class: 1, .. })));
    }

    #[test]
    fn ovr_extremes() {
        let far = gen_gaussians(60, 40.0, 2).unwrap();
        let r = ovr_report(&far, 0, 1, &Config::default()).unwrap();
        assert_eq!(r.ovr, [0.0, 0.0]);
        assert_eq!(r.inside, [0, 0]);
        assert!(r.overlap_volume.is_none());

        let base = gen_blobs(60, &[vec![0.0, 0.0]], 1.0, 5).unwrap();
        let mut points = base.points.clone();
        points.extend(base.points.iter().cloned());
        let labels = (0..120).map(|i| usize::from(i >= 60)).collect();
        let twin = LabeledDataset::new(points, labels).unwrap();
        let r = ovr_report(&twin, 0, 1, &Config::default()).unwrap();
        assert!((r.ovr[0] - 1.0).abs() < 1e-5 && (r.ovr[1] - 1.0).abs() < 1e-5, "{:?}", r.ovr);
        assert_eq!(r.inside[0] + r.outside[0], 60);
    }
}
