//! Prediction by ellipsoid membership, with a smoothed Bayesian trust score.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::partition::{Counts, Label, PartitionModel};

const EQUIDISTANT_REL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    /// Inside exactly one ellipsoid.
    Single,
    /// Inside several ellipsoids whose common part holds training points.
    Intersection,
    /// Inside several ellipsoids whose common part holds no training point;
    /// counted over their union.
    UnionFallback,
    /// Outside every ellipsoid; the nearest ones were grown to reach it.
    Expanded,
}

/// Which set the region counts were taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountScope {
    Member,
    Intersection,
    Union,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2a,
    R2b,
    Case3,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::R1 => "R1",
            Rule::R2a => "R2a",
            Rule::R2b => "R2b",
            Rule::Case3 => "Case3",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    /// Partition ids (see [`PartitionModel::partitions`]) with their labels.
    pub member_ids: Vec<(usize, Label)>,
    pub kind: RegionKind,
    pub scope: CountScope,
    pub counts: Counts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrustReport {
    pub label: Label,
    /// Posterior probability of `label`.
    pub posterior: f64,
    pub odds_ratio: f64,
    pub abstain: bool,
    pub region: Region,
    pub rule_fired: Rule,
}

impl TrustReport {
    /// Posterior probability of the positive label, whatever was predicted.
    pub fn positive_posterior(&self) -> f64 {
        match self.label {
            Label::Positive => self.posterior,
            Label::Negative => 1.0 - self.posterior,
        }
    }
}

/// Posterior probability that a point in a region with `counts` carries
/// `predicted`, given the training totals.
///
/// Priors and region likelihoods are add-one smoothed toward the region's
/// majority label; on a tied region the likelihoods cancel and the smoothed
/// class frequencies decide. The posteriors of the two labels always sum to 1.
pub fn trust_score(counts: Counts, totals: Counts, predicted: Label) -> Result<f64> {
    if totals.positive == 0 || totals.negative == 0 {
        return Err(Error::InvalidCounts(format!(
            "both labels need training points, got {} and {}",
            totals.positive, totals.negative
        )));
    }
    if counts.positive > totals.positive || counts.negative > totals.negative {
        return Err(Error::InvalidCounts(format!(
            "region counts ({}, {}) exceed totals ({}, {})",
            counts.positive, counts.negative, totals.positive, totals.negative
        )));
    }
    let (n, m) = (counts.positive as f64, counts.negative as f64);
    let (big_n, big_m) = (totals.positive as f64, totals.negative as f64);
    let positive = match counts.positive.cmp(&counts.negative) {
        std::cmp::Ordering::Greater => {
            let favoured = (n + 1.0) * (big_n + 1.0);
            favoured / (favoured + m * big_m)
        }
        std::cmp::Ordering::Less => {
            let favoured = (m + 1.0) * (big_m + 1.0);
            n * big_n / (favoured + n * big_n)
        }
        std::cmp::Ordering::Equal => (big_n + 1.0) / (big_n + big_m + 2.0),
    };
    Ok(match predicted {
        Label::Positive => positive,
        Label::Negative => 1.0 - positive,
    })
}

fn check_query(model: &PartitionModel, z: &DVector<f64>) -> Result<()> {
    if model.is_empty() {
        return Err(Error::EmptyModel);
    }
    if z.len() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, found: z.len() });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("query point must be finite".into()));
    }
    Ok(())
}

fn count_members(model: &PartitionModel, ellipsoids: &[&Ellipsoid]) -> (CountScope, Counts) {
    if ellipsoids.len() == 1 {
        return (CountScope::Member, model.count_in(ellipsoids, true));
    }
    let common = model.count_in(ellipsoids, true);
    if common.total() > 0 {
        (CountScope::Intersection, common)
    } else {
        (CountScope::Union, model.count_in(ellipsoids, false))
    }
}

/// Finds the region of the model that `z` falls in, and its training counts.
pub fn locate(model: &PartitionModel, z: &DVector<f64>) -> Result<Region> {
    check_query(model, z)?;
    let tol = model.config.tol_membership;
    let labelled = |id: usize| model.partition(id).map(|p| (id, p.label));
    let hits: Vec<usize> = model
        .partitions()
        .enumerate()
        .filter(|(_, p)| p.ellipsoid.contains_unchecked(z, tol))
        .map(|(id, _)| id)
        .collect();

    if !hits.is_empty() {
        let ellipsoids: Vec<&Ellipsoid> = hits.iter().map(|&id| &model.partition(id).unwrap().ellipsoid).collect();
        let (scope, counts) = count_members(model, &ellipsoids);
        let kind = match scope {
            CountScope::Member => RegionKind::Single,
            CountScope::Intersection => RegionKind::Intersection,
            CountScope::Union => RegionKind::UnionFallback,
        };
        return Ok(Region { member_ids: hits.into_iter().filter_map(labelled).collect(), kind, scope, counts });
    }

    let distances = model
        .partitions()
        .map(|p| p.ellipsoid.distance_to_point(z))
        .collect::<Result<Vec<f64>>>()?;
    let nearest = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = nearest + EQUIDISTANT_REL * nearest.max(f64::MIN_POSITIVE);
    let chosen: Vec<usize> = (0..distances.len()).filter(|&i| distances[i] <= cutoff).collect();
    let grown = chosen
        .iter()
        .map(|&id| model.partition(id).unwrap().ellipsoid.expand_to_cover(z))
        .collect::<Result<Vec<Ellipsoid>>>()?;
    let refs: Vec<&Ellipsoid> = grown.iter().collect();
    let (scope, counts) = count_members(model, &refs);
    Ok(Region {
        member_ids: chosen.into_iter().filter_map(labelled).collect(),
        kind: RegionKind::Expanded,
        scope,
        counts,
    })
}

/// Labels `z` and scores the prediction. Inside a single ellipsoid, or when
/// only one ellipsoid had to grow to reach it, `z` takes that ellipsoid's
/// label; otherwise the region's majority decides, with the posterior
/// breaking ties.
pub fn classify(model: &PartitionModel, z: &DVector<f64>, config: &Config) -> Result<TrustReport> {
    let region = locate(model, z)?;
    let positive = trust_score(region.counts, model.totals, Label::Positive)?;
    let label = match (region.member_ids.as_slice(), region.counts.positive.cmp(&region.counts.negative)) {
        // A lone ellipsoid speaks for its own label; the trust score then
        // shows how far its training counts back that up.
        ([(_, own)], _) => *own,
        (_, std::cmp::Ordering::Greater) => Label::Positive,
        (_, std::cmp::Ordering::Less) => Label::Negative,
        (_, std::cmp::Ordering::Equal) if positive > 0.5 => Label::Positive,
        (_, std::cmp::Ordering::Equal) => Label::Negative,
    };
    let posterior = match label {
        Label::Positive => positive,
        Label::Negative => 1.0 - positive,
    };
    let rule_fired = match region.kind {
        RegionKind::Single => Rule::R1,
        RegionKind::Intersection => Rule::R2a,
        RegionKind::UnionFallback => Rule::R2b,
        RegionKind::Expanded => Rule::Case3,
    };
    Ok(TrustReport {
        label,
        posterior,
        odds_ratio: posterior / (1.0 - posterior),
        abstain: (posterior - 0.5).abs() < config.abstain_band,
        region,
        rule_fired,
    })
}

/// One-vs-rest prediction: the class whose model gives the highest positive
/// posterior wins. Ties go to the class with more training points, then to
/// the lower index.
pub fn predict_multiclass(
    models: &[PartitionModel],
    z: &DVector<f64>,
    config: &Config,
) -> Result<(usize, TrustReport)> {
    if models.len() < 2 {
        return Err(Error::InvalidParam(format!("one-vs-rest needs at least 2 models, got {}", models.len())));
    }
    let mut best: Option<(usize, TrustReport)> = None;
    for (class, model) in models.iter().enumerate() {
        let report = classify(model, z, config)?;
        let better = match &best {
            None => true,
            Some((b, r)) => {
                let (p, q) = (report.positive_posterior(), r.positive_posterior());
                p > q || (p == q && model.totals.positive > models[*b].totals.positive)
            }
        };
        if better {
            best = Some((class, report));
        }
    }
    Ok(best.expect("at least two models"))
}
