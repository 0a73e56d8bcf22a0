//! JSON model files.
//!
//! Floats are written in shortest round-trip form, so a loaded model
//! reproduces every prediction of the saved one bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::config::Config;
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::partition::{Counts, IterationLog, Label, Origin, Partition, PartitionModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Group {
    Positive,
    Negative,
    Leftover,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidRecord {
    group: Group,
    label: Label,
    /// `A`, row-major.
    shape: Vec<f64>,
    offset: Vec<f64>,
    center: Vec<f64>,
    degenerate_radius: Option<f64>,
    train_counts: Counts,
    origin: Origin,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    dimension: usize,
    totals: Counts,
    ellipsoids: Vec<EllipsoidRecord>,
    training_points: Vec<Vec<f64>>,
    config: Config,
    iterations: usize,
    trained_at: u64,
    history: Vec<IterationLog>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: ModelRecord,
}

#[derive(Serialize, Deserialize)]
struct ClassifierFile {
    format_version: u32,
    class_names: Vec<String>,
    class_counts: Vec<usize>,
    models: Vec<ModelRecord>,
}

fn encode(model: &PartitionModel) -> ModelRecord {
    let groups = [(Group::Positive, &model.positive), (Group::Negative, &model.negative), (Group::Leftover, &model.leftovers)];
    let ellipsoids = groups
        .into_iter()
        .flat_map(|(group, parts)| {
            parts.iter().map(move |p| {
                let e = &p.ellipsoid;
                EllipsoidRecord {
                    group,
                    label: p.label,
                    shape: e.shape().transpose().as_slice().to_vec(),
                    offset: e.offset().as_slice().to_vec(),
                    center: e.center().as_slice().to_vec(),
                    degenerate_radius: e.degenerate_radius(),
                    train_counts: p.counts,
                    origin: p.origin,
                }
            })
        })
        .collect();
    ModelRecord {
        dimension: model.dim,
        totals: model.totals,
        ellipsoids,
        training_points: model.training.iter().map(|p| p.as_slice().to_vec()).collect(),
        config: model.config.clone(),
        iterations: model.iterations,
        trained_at: model.trained_at,
        history: model.history.clone(),
    }
}

fn decode(record: ModelRecord) -> Result<PartitionModel> {
    let n = record.dimension;
    if n == 0 {
        return Err(Error::CorruptModel("dimension must be positive".into()));
    }
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    let mut leftovers = Vec::new();
    for (k, r) in record.ellipsoids.into_iter().enumerate() {
        if r.shape.len() != n * n || r.offset.len() != n || r.center.len() != n {
            return Err(Error::CorruptModel(format!("ellipsoid {k} does not match dimension {n}")));
        }
        let shape = DMatrix::from_row_slice(n, n, &r.shape);
        let ellipsoid = Ellipsoid::restore(shape, DVector::from_vec(r.offset), DVector::from_vec(r.center), r.degenerate_radius)
            .map_err(|e| Error::CorruptModel(format!("ellipsoid {k}: {e}")))?;
        let part = Partition { ellipsoid, label: r.label, counts: r.train_counts, origin: r.origin };
        match r.group {
            Group::Positive => positive.push(part),
            Group::Negative => negative.push(part),
            Group::Leftover => leftovers.push(part),
        }
    }
    if record.training_points.len() != record.totals.total() {
        return Err(Error::CorruptModel(format!(
            "{} training points stored for totals {} + {}",
            record.training_points.len(),
            record.totals.positive,
            record.totals.negative
        )));
    }
    if record.training_points.iter().any(|p| p.len() != n || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::CorruptModel("malformed training point".into()));
    }
    record.config.validate().map_err(|e| Error::CorruptModel(e.to_string()))?;
    Ok(PartitionModel {
        dim: n,
        positive,
        negative,
        leftovers,
        totals: record.totals,
        training: record.training_points.into_iter().map(DVector::from_vec).collect(),
        config: record.config,
        iterations: record.iterations,
        history: record.history,
        trained_at: record.trained_at,
    })
}

fn read_versioned(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch { found: u32::try_from(found).unwrap_or(u32::MAX), expected: FORMAT_VERSION });
    }
    Ok(value)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn save(model: &PartitionModel, path: impl AsRef<Path>) -> Result<()> {
    write_json(&ModelFile { format_version: FORMAT_VERSION, model: encode(model) }, path.as_ref())
}

pub fn load(path: impl AsRef<Path>) -> Result<PartitionModel> {
    let file: ModelFile = serde_json::from_value(read_versioned(path.as_ref())?)?;
    decode(file.model)
}

pub fn save_classifier(classifier: &Classifier, path: impl AsRef<Path>) -> Result<()> {
    let file = ClassifierFile {
        format_version: FORMAT_VERSION,
        class_names: classifier.class_names.clone(),
        class_counts: classifier.class_counts.clone(),
        models: classifier.models.iter().map(encode).collect(),
    };
    write_json(&file, path.as_ref())
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<Classifier> {
    let file: ClassifierFile = serde_json::from_value(read_versioned(path.as_ref())?)?;
    let k = file.class_names.len();
    let expected_models = if k == 2 { 1 } else { k };
    if k < 2 || file.models.len() != expected_models || file.class_counts.len() != k {
        return Err(Error::CorruptModel(format!("{k} classes with {} models", file.models.len())));
    }
    let models = file.models.into_iter().map(decode).collect::<Result<Vec<_>>>()?;
    if models.iter().any(|m| m.dim != models[0].dim) {
        return Err(Error::CorruptModel("models disagree on dimension".into()));
    }
    Ok(Classifier { class_names: file.class_names, class_counts: file.class_counts, models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify;
    use crate::dataset::gen_xor;
    use crate::partition::partition;
    use nalgebra::dvector;

    fn xor_model() -> PartitionModel {
        let d = gen_xor();
        let (x, y) = d.one_vs_rest(1);
        partition(&x, &y, &Config::default()).unwrap()
    }

    #[test]
    fn round_trip_keeps_predictions() {
        let m = xor_model();
        let f = tempfile::NamedTempFile::new().unwrap();
        save(&m, f.path()).unwrap();
        let back = load(f.path()).unwrap();
        assert_eq!(back, m);
        let cfg = Config::default();
        for z in gen_xor().points {
            assert_eq!(classify(&m, &z, &cfg).unwrap(), classify(&back, &z, &cfg).unwrap());
        }
    }

    #[test]
    fn newer_version_is_rejected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        save(&xor_model(), f.path()).unwrap();
        let text = fs::read_to_string(f.path()).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        fs::write(f.path(), text).unwrap();
        assert!(matches!(load(f.path()), Err(Error::VersionMismatch { found: 2, expected: 1 })));
    }

    #[test]
    fn non_spd_shape_is_corrupt() {
        let f = tempfile::NamedTempFile::new().unwrap();
        save(&xor_model(), f.path()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.path()).unwrap()).unwrap();
        let a00 = v["model"]["ellipsoids"][0]["shape"][0].as_f64().unwrap();
        v["model"]["ellipsoids"][0]["shape"][0] = serde_json::json!(-a00);
        fs::write(f.path(), v.to_string()).unwrap();
        assert!(matches!(load(f.path()), Err(Error::CorruptModel(_))));
    }

    #[test]
    fn classifier_round_trip() {
        let d = crate::dataset::gen_blobs(15, &[vec![0.0, 0.0], vec![8.0, 0.0], vec![0.0, 8.0]], 1.0, 2).unwrap();
        let c = Classifier::train(&d, &Config::default()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_classifier(&c, f.path()).unwrap();
        let back = load_classifier(f.path()).unwrap();
        assert_eq!(back, c);
        let z = dvector![4.0, 3.0];
        assert_eq!(back.predict(&z, &Config::default()).unwrap(), c.predict(&z, &Config::default()).unwrap());
    }
}
