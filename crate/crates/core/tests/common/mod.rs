#![allow(dead_code)]

use ellpart::{Counts, Ellipsoid, Label, Origin, PartitionModel};
use nalgebra::DVector;

/// `‖Ax + b‖` evaluated from the raw matrices.
pub fn level(e: &Ellipsoid, x: &DVector<f64>) -> f64 {
    let a = e.shape();
    let b = e.offset();
    let mut sum = 0.0;
    for r in 0..a.nrows() {
        let mut acc = b[r];
        for c in 0..a.ncols() {
            acc += a[(r, c)] * x[c];
        }
        sum += acc * acc;
    }
    sum.sqrt()
}

pub fn inside(e: &Ellipsoid, x: &DVector<f64>, tol: f64) -> bool {
    level(e, x) <= 1.0 + tol
}

/// Training points inside all (or any) of `ellipsoids`, by exhaustive scan.
pub fn scan(model: &PartitionModel, ellipsoids: &[&Ellipsoid], all: bool) -> Counts {
    let tol = model.config.tol_membership;
    let mut c = Counts::default();
    for (i, p) in model.training.iter().enumerate() {
        let hit = if all {
            ellipsoids.iter().all(|e| inside(e, p, tol))
        } else {
            ellipsoids.iter().any(|e| inside(e, p, tol))
        };
        if hit {
            if i < model.totals.positive {
                c.positive += 1;
            } else {
                c.negative += 1;
            }
        }
    }
    c
}

/// For every main-loop partition, the opposite-label points it holds among
/// the working set of the pass that created it, recounted from the history.
pub fn replay_impurities(model: &PartitionModel) -> Vec<(usize, usize, usize)> {
    let tol = model.config.tol_membership;
    let mut out = Vec::new();
    for (id, part) in model.partitions().enumerate() {
        let Origin::MainLoop { iteration, impurity } = part.origin else { continue };
        let mut working = vec![true; model.training.len()];
        for log in model.history.iter().filter(|l| l.iteration < iteration) {
            for &i in &log.removed {
                working[i] = false;
            }
        }
        let recount = (0..model.training.len())
            .filter(|&i| working[i] && model.training_label(i) != part.label)
            .filter(|&i| inside(&part.ellipsoid, &model.training[i], tol))
            .count();
        out.push((id, impurity, recount));
    }
    out
}

/// Every training point lies in an ellipsoid of its own label.
pub fn uncovered(model: &PartitionModel) -> usize {
    let tol = model.config.tol_membership;
    model
        .training
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            let label = model.training_label(*i);
            !model.partitions().any(|part| part.label == label && inside(&part.ellipsoid, p, tol))
        })
        .count()
}

/// Partition ids containing `z`, by exhaustive scan.
pub fn hits(model: &PartitionModel, z: &DVector<f64>) -> Vec<usize> {
    let tol = model.config.tol_membership;
    model.partitions().enumerate().filter(|(_, p)| inside(&p.ellipsoid, z, tol)).map(|(i, _)| i).collect()
}

pub fn label_of(model: &PartitionModel, id: usize) -> Label {
    model.partitions().nth(id).unwrap().label
}

pub fn centroid(points: &[DVector<f64>]) -> DVector<f64> {
    points.iter().fold(DVector::zeros(points[0].len()), |a, p| a + p) / points.len() as f64
}
