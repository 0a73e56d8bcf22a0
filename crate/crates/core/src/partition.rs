//! Sequential ellipsoidal partitioning of a two-label training set.
//!
//! Each pass of the main loop asks [`rch_step`] for a separating slab between
//! the remaining points of both labels, shrinks each side until its
//! minimum-volume ellipsoid holds at most `n_imp` points of the other label,
//! records those ellipsoids and removes the carved points. When no further
//! split is possible the remainder of each label is covered by one final
//! ellipsoid, or kept as isolated point-ellipsoids when too few points are
//! left to span the feature space.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::mve::mve_fit;
use crate::rch::rch_step;

/// Binary label; `Positive` is the X set, `Negative` the Y set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn opposite(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

/// Numbers of positive and negative training points in some region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub positive: usize,
    pub negative: usize,
}

impl Counts {
    pub fn new(positive: usize, negative: usize) -> Self {
        Counts { positive, negative }
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Positive => self.positive,
            Label::Negative => self.negative,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

/// How a partition came to exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Carved in main-loop pass `iteration` (1-based); `impurity` counts the
    /// opposite-label working points it held at creation.
    MainLoop { iteration: usize, impurity: usize },
    /// Final ellipsoid over the label's remaining points; `augmented` jittered
    /// copies were added when the remainder did not span the space.
    Terminal { augmented: usize },
    /// Point dropped below the dimension bound while being refined.
    Isolated,
    /// Point left over after the main loop with too few companions.
    Leftover,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub ellipsoid: Ellipsoid,
    pub label: Label,
    /// Training points of each label inside the ellipsoid, over the full
    /// training set.
    pub counts: Counts,
    pub origin: Origin,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub disjoint: bool,
    /// Ellipsoids created this pass, with their impurity at creation.
    pub created_positive: Option<usize>,
    pub created_negative: Option<usize>,
    pub removed_positive: usize,
    pub removed_negative: usize,
    /// Training indices (see [`PartitionModel::training`]) taken out of the
    /// working sets by this pass.
    pub removed: Vec<usize>,
    pub isolated: usize,
    pub refine_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionModel {
    pub dim: usize,
    pub positive: Vec<Partition>,
    pub negative: Vec<Partition>,
    /// Point-ellipsoids for isolated and leftover training points.
    pub leftovers: Vec<Partition>,
    pub totals: Counts,
    /// Training points as used for counting (after any constant-feature
    /// jitter): the `totals.positive` positives first, then the negatives.
    pub training: Vec<DVector<f64>>,
    pub config: Config,
    pub iterations: usize,
    pub history: Vec<IterationLog>,
    /// Seconds since the Unix epoch at the end of training.
    pub trained_at: u64,
}

impl PartitionModel {
    /// All partitions in id order: positives, negatives, leftovers.
    pub fn partitions(&self) -> impl Iterator<Item = &Partition> {
        self.positive.iter().chain(&self.negative).chain(&self.leftovers)
    }

    pub fn partition(&self, id: usize) -> Option<&Partition> {
        self.partitions().nth(id)
    }

    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len() + self.leftovers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn training_label(&self, index: usize) -> Label {
        if index < self.totals.positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn training_points(&self) -> impl Iterator<Item = (&DVector<f64>, Label)> {
        self.training.iter().enumerate().map(|(i, p)| (p, self.training_label(i)))
    }

    /// Counts training points inside every (`all = true`) or any of the given
    /// ellipsoids.
    pub fn count_in(&self, ellipsoids: &[&Ellipsoid], all: bool) -> Counts {
        let tol = self.config.tol_membership;
        let mut counts = Counts::default();
        for (p, label) in self.training_points() {
            let inside = if all {
                ellipsoids.iter().all(|e| e.contains_unchecked(p, tol))
            } else {
                ellipsoids.iter().any(|e| e.contains_unchecked(p, tol))
            };
            if inside {
                match label {
                    Label::Positive => counts.positive += 1,
                    Label::Negative => counts.negative += 1,
                }
            }
        }
        counts
    }
}

/// Mutable training coordinates plus the jitter state.
struct Workspace {
    coords: Vec<DVector<f64>>,
    jittered: Vec<Vec<bool>>,
    rng: ChaCha8Rng,
    radius_frac: f64,
    tol_membership: f64,
}

impl Workspace {
    fn new(coords: Vec<DVector<f64>>, config: &Config) -> Self {
        let n = coords.first().map_or(0, |p| p.len());
        Workspace {
            jittered: vec![vec![false; n]; coords.len()],
            coords,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            radius_frac: config.jitter_radius_frac,
            tol_membership: config.tol_membership,
        }
    }

    fn points(&self, idx: &[usize]) -> Vec<DVector<f64>> {
        idx.iter().map(|&i| self.coords[i].clone()).collect()
    }

    /// Jitters every feature that is constant over `idx`. Each coordinate is
    /// perturbed at most once per run.
    fn jitter_constant(&mut self, idx: &[usize]) -> usize {
        if idx.len() < 2 {
            return 0;
        }
        let n = self.coords[idx[0]].len();
        let mut touched = 0;
        for f in 0..n {
            let first = self.coords[idx[0]][f];
            let tol = 1e-12 * first.abs().max(1.0);
            if idx.iter().any(|&i| (self.coords[i][f] - first).abs() > tol) {
                continue;
            }
            for &i in idx {
                if !self.jittered[i][f] {
                    let v = self.coords[i][f];
                    let half = self.radius_frac * v.abs().max(1.0);
                    self.coords[i][f] = v + self.rng.random_range(-half..half);
                    self.jittered[i][f] = true;
                    touched += 1;
                }
            }
        }
        touched
    }

    fn count_inside(&self, e: &Ellipsoid, idx: &[usize]) -> usize {
        idx.iter().filter(|&&i| e.contains_unchecked(&self.coords[i], self.tol_membership)).count()
    }
}

/// Outcome of shrinking one side until its ellipsoid meets the impurity budget.
#[derive(Clone, Debug)]
pub enum Refined {
    /// `members` (indices into the side's input) are covered by `ellipsoid`,
    /// which holds `impurity <= n_imp` points of the other label.
    Partition { members: Vec<usize>, ellipsoid: Ellipsoid, impurity: usize, steps: usize },
    /// The subset fell to the dimension bound; keep as isolated points.
    Isolated(Vec<usize>),
    /// No further separating direction: the slab degenerated, or the subset
    /// stopped shrinking while still over budget.
    Stuck(Vec<usize>),
}

fn refine_in(
    ws: &mut Workspace,
    side: Vec<usize>,
    ellipsoid: Ellipsoid,
    other: &[usize],
    config: &Config,
) -> Result<Refined> {
    let mut side = side;
    let mut ellipsoid = ellipsoid;
    let mut steps = 0;
    loop {
        let impurity = ws.count_inside(&ellipsoid, other);
        if impurity <= config.n_imp {
            return Ok(Refined::Partition { members: side, ellipsoid, impurity, steps });
        }
        ws.jitter_constant(&side);
        ws.jitter_constant(other);
        steps += 1;
        let split = match rch_step(&ws.points(&side), &ws.points(other), config) {
            Ok(s) => s,
            Err(Error::DegenerateSlab { .. } | Error::RankDeficient { .. } | Error::TooFewPoints { .. }) => {
                return Ok(Refined::Stuck(side));
            }
            Err(e) => return Err(e),
        };
        if split.disjoint {
            return Ok(Refined::Stuck(side));
        }
        let next: Vec<usize> = split.x_plus.iter().map(|&i| side[i]).collect();
        if next.len() == side.len() {
            return Ok(Refined::Stuck(side));
        }
        match split.mve_x_plus {
            Some(e) => {
                side = next;
                ellipsoid = e;
            }
            None => return Ok(Refined::Isolated(next)),
        }
    }
}

/// Shrinks `side` against `other` until the minimum-volume ellipsoid of the
/// kept subset holds at most `config.n_imp` points of `other`. Returned
/// indices refer to `side`.
pub fn refine_side(side: &[DVector<f64>], other: &[DVector<f64>], config: &Config) -> Result<Refined> {
    if side.is_empty() || other.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut coords = side.to_vec();
    coords.extend_from_slice(other);
    let mut ws = Workspace::new(coords, config);
    let side_idx: Vec<usize> = (0..side.len()).collect();
    let other_idx: Vec<usize> = (side.len()..side.len() + other.len()).collect();
    ws.jitter_constant(&side_idx);
    let ellipsoid = match mve_fit(&ws.points(&side_idx), config.tol_fit) {
        Ok(s) => s.ellipsoid,
        Err(Error::TooFewPoints { .. } | Error::RankDeficient { .. }) => {
            return Ok(Refined::Isolated(side_idx));
        }
        Err(e) => return Err(e),
    };
    refine_in(&mut ws, side_idx, ellipsoid, &other_idx, config)
}

/// Partitions X (positive) and Y (negative) into labelled ellipsoids.
pub fn partition(x: &[DVector<f64>], y: &[DVector<f64>], config: &Config) -> Result<PartitionModel> {
    config.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x[0].len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(p) = x.iter().chain(y).find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: p.len() });
    }
    if x.iter().chain(y).any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidParam("training points must be finite".into()));
    }

    let n_pos = x.len();
    let total = x.len() + y.len();
    let mut coords = x.to_vec();
    coords.extend_from_slice(y);
    let point_radius = 1e-6 * bounding_diagonal(&coords).max(1.0);
    let mut ws = Workspace::new(coords, config);

    let mut xw: Vec<usize> = (0..n_pos).collect();
    let mut yw: Vec<usize> = (n_pos..total).collect();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    let mut leftovers: Vec<(usize, Origin)> = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0;

    ws.jitter_constant(&xw);
    ws.jitter_constant(&yw);

    while xw.len() > n && yw.len() > n && iterations < total {
        ws.jitter_constant(&xw);
        ws.jitter_constant(&yw);
        let split = match rch_step(&ws.points(&xw), &ws.points(&yw), config) {
            Ok(s) => s,
            Err(Error::DegenerateSlab { .. } | Error::RankDeficient { .. } | Error::TooFewPoints { .. }) => break,
            Err(e) => return Err(e),
        };
        let mut log = IterationLog { iteration: iterations + 1, disjoint: split.disjoint, ..Default::default() };

        if split.disjoint {
            let ex = split.mve_x_plus.expect("disjoint split carries both ellipsoids");
            let ey = split.mve_y_minus.expect("disjoint split carries both ellipsoids");
            let ix = ws.count_inside(&ex, &yw);
            let iy = ws.count_inside(&ey, &xw);
            positive.push((ex, Origin::MainLoop { iteration: log.iteration, impurity: ix }));
            negative.push((ey, Origin::MainLoop { iteration: log.iteration, impurity: iy }));
            log.created_positive = Some(ix);
            log.created_negative = Some(iy);
            log.removed_positive = xw.len();
            log.removed_negative = yw.len();
            log.removed = xw.iter().chain(&yw).copied().collect();
            xw.clear();
            yw.clear();
            iterations += 1;
            history.push(log);
            break;
        }

        let x_side: Vec<usize> = split.x_plus.iter().map(|&i| xw[i]).collect();
        let y_side: Vec<usize> = split.y_minus.iter().map(|&j| yw[j]).collect();
        let x_ref = match split.mve_x_plus {
            Some(e) => refine_in(&mut ws, x_side, e, &yw, config)?,
            None => Refined::Stuck(x_side),
        };
        let y_ref = match split.mve_y_minus {
            Some(e) => refine_in(&mut ws, y_side, e, &xw, config)?,
            None => Refined::Stuck(y_side),
        };
        if matches!(x_ref, Refined::Stuck(_)) && matches!(y_ref, Refined::Stuck(_)) {
            break;
        }

        iterations += 1;
        let mut removed_x = Vec::new();
        let mut removed_y = Vec::new();
        for (refined, label) in [(x_ref, Label::Positive), (y_ref, Label::Negative)] {
            let removed = if label == Label::Positive { &mut removed_x } else { &mut removed_y };
            match refined {
                Refined::Partition { members, ellipsoid, impurity, steps } => {
                    log.refine_steps += steps;
                    let origin = Origin::MainLoop { iteration: iterations, impurity };
                    if label == Label::Positive {
                        log.created_positive = Some(impurity);
                        positive.push((ellipsoid, origin));
                    } else {
                        log.created_negative = Some(impurity);
                        negative.push((ellipsoid, origin));
                    }
                    removed.extend(members);
                }
                Refined::Isolated(members) => {
                    log.isolated += members.len();
                    leftovers.extend(members.iter().map(|&i| (i, Origin::Isolated)));
                    removed.extend(members);
                }
                Refined::Stuck(_) => {}
            }
        }
        log.removed_positive = removed_x.len();
        log.removed_negative = removed_y.len();
        log.removed = removed_x.iter().chain(&removed_y).copied().collect();
        log.removed.sort_unstable();
        let mut gone = vec![false; total];
        for &i in &log.removed {
            gone[i] = true;
        }
        xw.retain(|&i| !gone[i]);
        yw.retain(|&i| !gone[i]);
        history.push(log);
    }

    // Terminal partitions for whatever is left of each label.
    let mut augment_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    for (rest, label) in [(&xw, Label::Positive), (&yw, Label::Negative)] {
        if rest.is_empty() {
            continue;
        }
        let fitted = if rest.len() >= n {
            ws.jitter_constant(rest);
            fit_terminal(&ws.points(rest), config, &mut augment_rng)?
        } else {
            None
        };
        match fitted {
            Some((e, augmented)) => {
                let target = if label == Label::Positive { &mut positive } else { &mut negative };
                target.push((e, Origin::Terminal { augmented }));
            }
            None => leftovers.extend(rest.iter().map(|&i| (i, Origin::Leftover))),
        }
    }

    let config = config.clone();
    let mut model = PartitionModel {
        dim: n,
        positive: Vec::new(),
        negative: Vec::new(),
        leftovers: Vec::new(),
        totals: Counts::new(n_pos, total - n_pos),
        training: ws.coords,
        config,
        iterations,
        history,
        trained_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let finish = |model: &PartitionModel, e: Ellipsoid, label: Label, origin: Origin| -> Partition {
        let counts = model.count_in(&[&e], true);
        Partition { ellipsoid: e, label, counts, origin }
    };
    let mut built = Vec::new();
    for (e, origin) in positive {
        built.push(finish(&model, e, Label::Positive, origin));
    }
    model.positive = std::mem::take(&mut built);
    for (e, origin) in negative {
        built.push(finish(&model, e, Label::Negative, origin));
    }
    model.negative = std::mem::take(&mut built);
    leftovers.sort_by_key(|&(i, _)| i);
    for (i, origin) in leftovers {
        let e = Ellipsoid::point(&model.training[i], point_radius)?;
        let label = model.training_label(i);
        built.push(finish(&model, e, label, origin));
    }
    model.leftovers = built;
    Ok(model)
}

/// Covers the remaining points of one label. Point sets that do not span the
/// space get jittered copies of their points added, near the most recent one
/// first, until a full-dimensional ellipsoid exists.
fn fit_terminal(points: &[DVector<f64>], config: &Config, rng: &mut ChaCha8Rng) -> Result<Option<(Ellipsoid, usize)>> {
    let n = points[0].len();
    let magnitude = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let radius = config.jitter_radius_frac * magnitude;
    let mut pts = points.to_vec();
    let mut augmented = 0;
    loop {
        match mve_fit(&pts, config.tol_fit) {
            Ok(s) => return Ok(Some((s.ellipsoid, augmented))),
            Err(Error::TooFewPoints { .. } | Error::RankDeficient { .. }) if augmented <= 2 * n + 2 => {
                let anchor = &points[points.len() - 1 - augmented % points.len()];
                pts.push(anchor + sample_ball(n, radius, rng));
                augmented += 1;
            }
            Err(Error::TooFewPoints { .. } | Error::RankDeficient { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
}

/// Uniform sample from the ball of the given radius.
fn sample_ball(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = dir.norm().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    dir * (r / norm)
}

fn bounding_diagonal(points: &[DVector<f64>]) -> f64 {
    let n = points[0].len();
    let mut lo = DVector::from_element(n, f64::INFINITY);
    let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
    for p in points {
        for k in 0..n {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi - lo).norm()
}
