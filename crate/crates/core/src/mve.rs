//! Minimum-volume enclosing ellipsoids.
//!
//! The solver works on the lifted points `qᵢ = (xᵢ, 1)` and maximises
//! `log det Σ uᵢ qᵢqᵢᵀ` over the simplex by barycentric coordinate ascent
//! (Khachiyan) with Todd–Yıldırım away steps. With `ωᵢ = qᵢᵀM(u)⁻¹qᵢ` and
//! `d = n + 1`, the iterate is optimal iff `ωᵢ <= d` for every point with
//! equality on the support; `max ωᵢ / d - 1` bounds the distance to the
//! optimum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::ellipsoid::{affine_rank, Ellipsoid};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 1_000_000;
const REFRESH_EVERY: usize = 200;

#[derive(Clone, Debug)]
pub struct MveSolution {
    pub ellipsoid: Ellipsoid,
    /// Barycentric weights over the input points; they sum to 1.
    pub support_weights: Vec<f64>,
    /// Certified bound on `log det(A⁻¹) - log det(A*⁻¹)`.
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Fits the minimum-volume ellipsoid covering `points`.
///
/// Fails with `TooFewPoints` unless there are more points than dimensions
/// and with `RankDeficient` when the points lie in a proper affine subspace.
pub fn mve_fit(points: &[DVector<f64>], tol_fit: f64) -> Result<MveSolution> {
    let m = points.len();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    let n = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: p.len() });
    }
    if m <= n {
        return Err(Error::TooFewPoints { points: m, dim: n });
    }
    let rank = affine_rank(points);
    if rank < n {
        return Err(Error::RankDeficient { rank, dim: n });
    }
    if !(tol_fit > 0.0) {
        return Err(Error::InvalidParam(format!("tol_fit must be positive, got {tol_fit}")));
    }

    // Centre and scale for conditioning; the optimal weights are affine invariant.
    let mean = points.iter().fold(DVector::zeros(n), |acc, p| acc + p) / m as f64;
    let scale = points.iter().map(|p| (p - &mean).amax()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let d = n + 1;
    let lifted: Vec<DVector<f64>> = points
        .iter()
        .map(|p| {
            let mut q = DVector::zeros(d);
            q.rows_mut(0, n).copy_from(&((p - &mean) / scale));
            q[n] = 1.0;
            q
        })
        .collect();

    let mut u = vec![1.0 / m as f64; m];
    let (mut minv, mut omega) = refresh(&lifted, &u)?;
    let df = d as f64;
    let stop_plus = (2.0 * tol_fit / df).exp_m1().min(tol_fit);
    let mut iterations = 0;

    loop {
        let (j, &w_max) = argmax(&omega);
        let (k, w_min) = u
            .iter()
            .zip(&omega)
            .enumerate()
            .filter(|(_, (&ui, _))| ui > 0.0)
            .map(|(i, (_, &w))| (i, w))
            .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let eps_plus = w_max / df - 1.0;
        let eps_minus = 1.0 - w_min / df;
        if eps_plus <= stop_plus && eps_minus <= tol_fit {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                what: "minimum-volume ellipsoid",
                iterations,
                residual: eps_plus.max(eps_minus),
            });
        }
        iterations += 1;

        // Toward step raises the most violated point; away step lowers the
        // weakest support point, possibly dropping it.
        let (idx, tau) = if eps_plus >= eps_minus {
            (j, (w_max - df) / (df * (w_max - 1.0)))
        } else {
            let full = (df - w_min) / (df * (w_min - 1.0));
            let cap = u[k] / (1.0 - u[k]);
            (k, -full.min(cap))
        };
        let drop = tau < 0.0 && u[idx] / (1.0 - u[idx]) <= -tau;

        for ui in u.iter_mut() {
            *ui *= 1.0 - tau;
        }
        u[idx] += tau;
        if drop {
            u[idx] = 0.0;
        }

        if iterations % REFRESH_EVERY == 0 {
            let s: f64 = u.iter().sum();
            u.iter_mut().for_each(|ui| *ui /= s);
            (minv, omega) = refresh(&lifted, &u)?;
            continue;
        }

        // M' = (1-τ)M + τ q qᵀ, updated through Sherman–Morrison.
        let q = &lifted[idx];
        let v = &minv * q;
        let w_idx = omega[idx];
        let denom = (1.0 - tau) + tau * w_idx;
        if denom <= 0.0 || !denom.is_finite() {
            (minv, omega) = refresh(&lifted, &u)?;
            continue;
        }
        let inv_keep = 1.0 / (1.0 - tau);
        for (wi, qi) in omega.iter_mut().zip(&lifted) {
            let proj = qi.dot(&v);
            *wi = inv_keep * (*wi - tau * proj * proj / denom);
        }
        minv = (&minv - (&v * v.transpose()) * (tau / denom)) * inv_keep;
    }

    let (_, w_max) = argmax(&omega);
    let duality_gap = 0.5 * df * (w_max / df).ln().max(0.0);

    // Recover centre and shape in the original coordinates.
    let center_s = lifted
        .iter()
        .zip(&u)
        .fold(DVector::zeros(n), |acc, (q, &ui)| acc + q.rows(0, n) * ui);
    let mut scatter = DMatrix::zeros(n, n);
    for (q, &ui) in lifted.iter().zip(&u) {
        if ui > 0.0 {
            let x = q.rows(0, n);
            scatter += (x * x.transpose()) * ui;
        }
    }
    scatter -= &center_s * center_s.transpose();
    let shape_s = scatter.try_inverse().ok_or(Error::RankDeficient { rank: n - 1, dim: n })?;
    let center = &mean + &center_s * scale;
    let mut shape = sqrt_spd(&(shape_s / (scale * scale)))?;

    // Scale so the farthest point sits exactly on the boundary.
    let probe = Ellipsoid::from_center(shape.clone(), &center)?;
    let max_level = points.iter().map(|p| probe.level_unchecked(p)).fold(0.0, f64::max);
    shape /= max_level;
    let mut ellipsoid = Ellipsoid::from_center(shape.clone(), &center)?;
    let worst = points.iter().map(|p| ellipsoid.level_unchecked(p)).fold(0.0, f64::max);
    if worst > 1.0 {
        ellipsoid = Ellipsoid::from_center(shape / worst, &center)?;
    }

    Ok(MveSolution { ellipsoid, support_weights: u, duality_gap, iterations })
}

fn refresh(lifted: &[DVector<f64>], u: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = lifted[0].len();
    let mut mat = DMatrix::zeros(d, d);
    for (q, &ui) in lifted.iter().zip(u) {
        if ui > 0.0 {
            mat += (q * q.transpose()) * ui;
        }
    }
    let chol = mat.cholesky().ok_or(Error::RankDeficient { rank: d - 2, dim: d - 1 })?;
    let minv = chol.inverse();
    let omega = lifted.iter().map(|q| q.dot(&(&minv * q))).collect();
    Ok((minv, omega))
}

fn argmax(values: &[f64]) -> (usize, &f64) {
    values
        .iter()
        .enumerate()
        .fold((0, &values[0]), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Symmetric square root of a symmetric positive-definite matrix.
pub(crate) fn sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let v = &eig.eigenvectors;
    let s = v * root * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}
