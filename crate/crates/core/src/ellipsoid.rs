//! Ellipsoids in the norm form `{x : ‖Ax + b‖ <= 1}` and the geometric
//! primitives the partitioner and the rule engine rely on.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// An ellipsoid `{x : ‖Ax + b‖₂ <= 1}` with `A` symmetric positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    shape: DMatrix<f64>,
    offset: DVector<f64>,
    center: DVector<f64>,
    degenerate_radius: Option<f64>,
}

impl Ellipsoid {
    /// Builds an ellipsoid from `A` and `b`, checking symmetry and positive
    /// definiteness of `A`.
    pub fn new(shape: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let n = offset.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if shape.nrows() != n || shape.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: shape.nrows() });
        }
        if shape.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let scale = shape.amax().max(f64::MIN_POSITIVE);
        let asym = (&shape - shape.transpose()).amax();
        if asym >= 1e-10 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let shape = (&shape + shape.transpose()) * 0.5;
        let chol = shape.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let center = -chol.solve(&offset);
        Ok(Ellipsoid { shape, offset, center, degenerate_radius: None })
    }

    /// Builds `{x : ‖A(x - c)‖ <= 1}`.
    pub fn from_center(shape: DMatrix<f64>, center: &DVector<f64>) -> Result<Self> {
        let offset = -(&shape * center);
        let mut e = Ellipsoid::new(shape, offset)?;
        e.center = center.clone();
        Ok(e)
    }

    /// Euclidean ball of the given radius.
    pub fn ball(center: &DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParam(format!("ball radius must be positive, got {radius}")));
        }
        let n = center.len();
        Ellipsoid::from_center(DMatrix::identity(n, n) / radius, center)
    }

    /// Tiny ball standing in for an isolated training point.
    pub fn point(center: &DVector<f64>, radius: f64) -> Result<Self> {
        let mut e = Ellipsoid::ball(center, radius)?;
        e.degenerate_radius = Some(radius);
        Ok(e)
    }

    /// Rebuilds a stored ellipsoid, keeping its recorded center exactly.
    pub(crate) fn restore(
        shape: DMatrix<f64>,
        offset: DVector<f64>,
        center: DVector<f64>,
        degenerate_radius: Option<f64>,
    ) -> Result<Self> {
        let mut e = Ellipsoid::new(shape, offset)?;
        if center.len() != e.dim() {
            return Err(Error::DimensionMismatch { expected: e.dim(), found: center.len() });
        }
        if let Some(r) = degenerate_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParam(format!("point radius must be positive, got {r}")));
            }
        }
        e.center = center;
        e.degenerate_radius = degenerate_radius;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn degenerate_radius(&self) -> Option<f64> {
        self.degenerate_radius
    }

    pub fn is_point(&self) -> bool {
        self.degenerate_radius.is_some()
    }

    /// Quadratic representation `xᵀPx + 2qᵀx + r <= 0` with
    /// `P = AᵀA`, `q = Aᵀb`, `r = bᵀb - 1`.
    pub fn quadratic_form(&self) -> (DMatrix<f64>, DVector<f64>, f64) {
        let at = self.shape.transpose();
        (&at * &self.shape, &at * &self.offset, self.offset.dot(&self.offset) - 1.0)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// `‖Ax + b‖₂`; at most 1 exactly on the ellipsoid.
    pub fn level(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.level_unchecked(x))
    }

    #[inline]
    pub(crate) fn level_unchecked(&self, x: &DVector<f64>) -> f64 {
        (&self.shape * x + &self.offset).norm()
    }

    pub fn contains(&self, x: &DVector<f64>, tol_membership: f64) -> Result<bool> {
        Ok(self.level(x)? <= 1.0 + tol_membership)
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &DVector<f64>, tol_membership: f64) -> bool {
        self.level_unchecked(x) <= 1.0 + tol_membership
    }

    /// `√det(A⁻¹)`, the volume up to the unit-ball constant.
    pub fn volume_measure(&self) -> f64 {
        1.0 / self.shape.determinant()
    }

    /// Same center and axes, scaled uniformly so that `x` lies on the
    /// boundary. Points already inside are returned unchanged.
    pub fn expand_to_cover(&self, x: &DVector<f64>) -> Result<Ellipsoid> {
        let level = self.level(x)?;
        if level <= 1.0 {
            return Ok(self.clone());
        }
        let shape = &self.shape / level;
        let mut e = Ellipsoid::from_center(shape, &self.center)?;
        e.degenerate_radius = self.degenerate_radius.map(|r| r * level);
        Ok(e)
    }

    /// Euclidean distance from `x` to the ellipsoid (0 for interior points).
    ///
    /// Works in the eigenbasis of `P = AᵀA`: the closest boundary point is
    /// `(I + tP)⁻¹ y` where `t > 0` solves `Σ pᵢ yᵢ² / (1 + t pᵢ)² = 1`.
    pub fn distance_to_point(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let rel = x - &self.center;
        if self.level_unchecked(x) <= 1.0 {
            return Ok(0.0);
        }
        if let Some(r) = self.degenerate_radius {
            return Ok((rel.norm() - r).max(0.0));
        }
        let at = self.shape.transpose();
        let eig = SymmetricEigen::new(&at * &self.shape);
        let y = eig.eigenvectors.transpose() * rel;
        let p = &eig.eigenvalues;

        let secular = |t: f64| -> (f64, f64) {
            let mut f = -1.0;
            let mut df = 0.0;
            for i in 0..y.len() {
                let denom = 1.0 + t * p[i];
                let a = p[i] * y[i] * y[i];
                f += a / (denom * denom);
                df += -2.0 * a * p[i] / (denom * denom * denom);
            }
            (f, df)
        };

        // F is convex and decreasing on t >= 0, so Newton from 0 increases
        // monotonically to the root.
        let mut t = 0.0;
        let mut converged = false;
        let mut last_step = f64::INFINITY;
        for _ in 0..500 {
            let (f, df) = secular(t);
            if f <= 0.0 || df >= 0.0 {
                converged = true;
                break;
            }
            let step = -f / df;
            t += step;
            last_step = step;
            if step <= 1e-15 * t.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                what: "point-to-ellipsoid distance",
                iterations: 500,
                residual: last_step,
            });
        }
        let dist2: f64 = (0..y.len())
            .map(|i| {
                let d = t * p[i] * y[i] / (1.0 + t * p[i]);
                d * d
            })
            .sum();
        Ok(dist2.sqrt())
    }
}

/// Reports whether two ellipsoids share a point, up to `tol` in level.
///
/// Evaluates `min_x max(q₁(x), q₂(x))` with `qᵢ = levelᵢ²` through its
/// concave dual `g(λ) = min_x λq₁(x) + (1-λ)q₂(x)`, `λ ∈ [0, 1]`. The inner
/// minimum is a linear solve and `g'(λ) = q₁(x(λ)) - q₂(x(λ))`, so the dual
/// optimum is found by bisection on the sign of the derivative. Any `λ` with
/// `g(λ) > (1 + tol)²` certifies separation; any `x(λ)` inside both
/// ellipsoids certifies intersection.
pub fn intersects(e1: &Ellipsoid, e2: &Ellipsoid, tol: f64) -> Result<bool> {
    if e1.dim() != e2.dim() {
        return Err(Error::DimensionMismatch { expected: e1.dim(), found: e2.dim() });
    }
    let bound = (1.0 + tol) * (1.0 + tol);
    let q1 = |x: &DVector<f64>| e1.level_unchecked(x).powi(2);
    let q2 = |x: &DVector<f64>| e2.level_unchecked(x).powi(2);
    if q1(e2.center()) <= bound || q2(e1.center()) <= bound {
        return Ok(true);
    }

    let (p1, _, _) = e1.quadratic_form();
    let (p2, _, _) = e2.quadratic_form();
    let r1 = &p1 * e1.center();
    let r2 = &p2 * e2.center();
    let inner = |lambda: f64| -> Result<(DVector<f64>, f64, f64)> {
        let k = &p1 * lambda + &p2 * (1.0 - lambda);
        let rhs = &r1 * lambda + &r2 * (1.0 - lambda);
        let chol = k.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let x = chol.solve(&rhs);
        let (a, b) = (q1(&x), q2(&x));
        Ok((x, a, b))
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut iterations = 0;
    let mut last = (0.0, 0.0);
    while iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (_, a, b) = inner(mid)?;
        last = (a, b);
        if a.max(b) <= bound {
            return Ok(true);
        }
        if mid * a + (1.0 - mid) * b > bound {
            return Ok(false);
        }
        if a > b {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    // Bracket collapsed without a certificate: the minimax value sits within
    // rounding of the boundary.
    let (a, b) = last;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonConvergence {
            what: "ellipsoid intersection test",
            iterations,
            residual: (a - b).abs(),
        });
    }
    Ok(a.max(b) <= bound * (1.0 + 1e-12))
}

/// Affine rank of a point set, using a relative eigenvalue cutoff on the
/// centered scatter matrix.
pub fn affine_rank(points: &[DVector<f64>]) -> usize {
    if points.is_empty() {
        return 0;
    }
    let n = points[0].len();
    let mean = points.iter().fold(DVector::zeros(n), |acc, p| acc + p) / points.len() as f64;
    let mut scatter = DMatrix::zeros(n, n);
    for p in points {
        let d = p - &mean;
        scatter += &d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let max = eig.eigenvalues.amax();
    if max <= 0.0 {
        return 0;
    }
    eig.eigenvalues.iter().filter(|&&l| l > 1e-12 * max).count()
}
