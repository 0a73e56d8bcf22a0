//! Class-level classifier over one or more partition models, and hold-out
//! evaluation.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::classify::{classify, predict_multiclass, Rule, TrustReport};
use crate::config::Config;
use crate::dataset::{kfold, split, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::partition::{partition, Counts, Label, PartitionModel};

/// Two classes use a single model whose positive label is class 1; more
/// classes use one one-vs-rest model per class.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub models: Vec<PartitionModel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// Index into `Classifier::models` of the model that decided.
    pub model: usize,
    pub report: TrustReport,
}

impl Classifier {
    pub fn train(data: &LabeledDataset, config: &Config) -> Result<Classifier> {
        config.validate()?;
        let counts = data.class_counts();
        let k = counts.len();
        if k < 2 || counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::InvalidParam(format!("training needs at least 2 populated classes, found {k}")));
        }
        let models = if k == 2 {
            let (x, y) = data.one_vs_rest(1);
            vec![partition(&x, &y, config)?]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..k)
                    .map(|c| {
                        s.spawn(move || {
                            let (x, y) = data.one_vs_rest(c);
                            partition(&x, &y, config)
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect::<Result<Vec<_>>>()
            })?
        };
        Ok(Classifier { class_names: data.class_names.clone(), class_counts: counts, models })
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim
    }

    pub fn predict(&self, z: &DVector<f64>, config: &Config) -> Result<Prediction> {
        if self.models.is_empty() {
            return Err(Error::EmptyModel);
        }
        if self.models.len() == 1 {
            let report = classify(&self.models[0], z, config)?;
            let class = usize::from(report.label == Label::Positive);
            return Ok(Prediction { class, model: 0, report });
        }
        let (class, report) = predict_multiclass(&self.models, z, config)?;
        Ok(Prediction { class, model: class, report })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPoint {
    pub fold: usize,
    /// Record index in the evaluated dataset.
    pub index: usize,
    pub truth: usize,
    pub predicted: usize,
    pub posterior: f64,
    pub abstain: bool,
    pub rule: Rule,
}

/// Test points grouped by the region that labelled them.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionRow {
    pub fold: usize,
    pub model: usize,
    /// Region kind and member partition ids, e.g. `Intersection[0,3]`.
    pub region: String,
    pub rule: Rule,
    pub counts: Counts,
    pub trust: f64,
    pub hits: usize,
    pub misses: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub folds: usize,
    pub predictions: Vec<ScoredPoint>,
    pub accuracy: f64,
    pub abstained: usize,
    /// Accuracy over predictions that did not abstain; `None` when all did.
    pub answered_accuracy: Option<f64>,
    pub regions: Vec<RegionRow>,
}

/// Trains on each split of `data` and scores the held-out points: k-fold
/// when `config.folds >= 2`, else one stratified split.
pub fn evaluate(data: &LabeledDataset, config: &Config) -> Result<EvalReport> {
    let splits: Vec<Split> =
        if config.folds >= 2 { kfold(data, config.folds, config.seed)? } else { vec![split(data, config.test_fraction, config.seed)?] };
    let mut predictions = Vec::new();
    let mut regions: BTreeMap<(usize, usize, String), RegionRow> = BTreeMap::new();
    for (fold, s) in splits.iter().enumerate() {
        let classifier = Classifier::train(&data.subset(&s.train), config)?;
        for &i in &s.test {
            let p = classifier.predict(&data.points[i], config)?;
            let truth = data.labels[i];
            let r = &p.report;
            let ids: Vec<String> = r.region.member_ids.iter().map(|(id, _)| id.to_string()).collect();
            let key = format!("{:?}[{}]", r.region.kind, ids.join(","));
            let row = regions.entry((fold, p.model, key.clone())).or_insert_with(|| RegionRow {
                fold,
                model: p.model,
                region: key,
                rule: r.rule_fired,
                counts: r.region.counts,
                trust: r.posterior,
                hits: 0,
                misses: 0,
            });
            if p.class == truth {
                row.hits += 1;
            } else {
                row.misses += 1;
            }
            predictions.push(ScoredPoint {
                fold,
                index: i,
                truth,
                predicted: p.class,
                posterior: r.posterior,
                abstain: r.abstain,
                rule: r.rule_fired,
            });
        }
    }
    let correct = predictions.iter().filter(|p| p.truth == p.predicted).count();
    let answered: Vec<&ScoredPoint> = predictions.iter().filter(|p| !p.abstain).collect();
    let answered_correct = answered.iter().filter(|p| p.truth == p.predicted).count();
    Ok(EvalReport {
        folds: splits.len(),
        accuracy: correct as f64 / predictions.len().max(1) as f64,
        abstained: predictions.len() - answered.len(),
        answered_accuracy: (!answered.is_empty()).then(|| answered_correct as f64 / answered.len() as f64),
        predictions,
        regions: regions.into_values().collect(),
    })
}
