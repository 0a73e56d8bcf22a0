//! Reduced-convex-hull nearest points and the slab split they induce.
//!
//! The QP `min ½‖Xᵀu − Yᵀv‖²` over `Σu = Σv = 1`, `0 <= u, v <= D` is solved
//! by projected gradient on the product of two capped simplices. Steps start
//! from the Barzilai–Borwein length and backtrack until the objective drops,
//! and the Frank–Wolfe gap certifies the stopping point.

use nalgebra::DVector;

use crate::config::Config;
use crate::ellipsoid::{intersects, Ellipsoid};
use crate::error::{Error, Result};
use crate::mve::mve_fit;

const MAX_ITERATIONS: usize = 500_000;

#[derive(Clone, Debug)]
pub struct RchSolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Closest point of the reduced hull of X, `Xᵀu`.
    pub c: DVector<f64>,
    /// Closest point of the reduced hull of Y, `Yᵀv`.
    pub d: DVector<f64>,
    /// Slab normal `c − d`.
    pub w: DVector<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub objective: f64,
    /// Frank–Wolfe duality gap at return.
    pub gap: f64,
    pub iterations: usize,
}

/// Solves the reduced-convex-hull QP with weight cap `cap`.
pub fn solve_rch_qp(x: &[DVector<f64>], y: &[DVector<f64>], cap: f64, tol_qp: f64) -> Result<RchSolution> {
    solve_rch_qp_traced(x, y, cap, tol_qp, |_| {})
}

/// As [`solve_rch_qp`], calling `observe` with the objective after every
/// accepted iterate (including the starting point).
pub fn solve_rch_qp_traced(
    x: &[DVector<f64>],
    y: &[DVector<f64>],
    cap: f64,
    tol_qp: f64,
    mut observe: impl FnMut(f64),
) -> Result<RchSolution> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x[0].len();
    if let Some(p) = x.iter().chain(y).find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: p.len() });
    }
    let smaller = x.len().min(y.len());
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(Error::InvalidParam(format!("weight cap must lie in (0, 1], got {cap}")));
    }
    if cap * (smaller as f64) < 1.0 - 1e-12 {
        return Err(Error::InfeasibleD { d: cap, size: smaller });
    }

    // Work in coordinates centred on the pooled mean; w is unchanged.
    let total = (x.len() + y.len()) as f64;
    let shift = x.iter().chain(y).fold(DVector::zeros(n), |acc, p| acc + p) / total;
    let xs: Vec<DVector<f64>> = x.iter().map(|p| p - &shift).collect();
    let ys: Vec<DVector<f64>> = y.iter().map(|p| p - &shift).collect();
    let scale2 = xs.iter().chain(&ys).map(|p| p.norm_squared()).fold(0.0, f64::max);
    let tol = tol_qp * scale2.max(1.0);

    let combine = |pts: &[DVector<f64>], wts: &[f64]| {
        pts.iter().zip(wts).fold(DVector::zeros(n), |acc, (p, &a)| acc + p * a)
    };

    let mut u = vec![1.0 / x.len() as f64; x.len()];
    let mut v = vec![1.0 / y.len() as f64; y.len()];
    let mut w = combine(&xs, &u) - combine(&ys, &v);
    let mut f = 0.5 * w.norm_squared();
    observe(f);

    let gradients = |w: &DVector<f64>| -> (Vec<f64>, Vec<f64>) {
        (xs.iter().map(|p| p.dot(w)).collect(), ys.iter().map(|p| -p.dot(w)).collect())
    };
    let (mut gu, mut gv) = gradients(&w);
    let mut step = 1.0 / scale2.max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut gap;

    loop {
        gap = fw_gap(&u, &gu, cap) + fw_gap(&v, &gv, cap);
        if gap <= tol {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence { what: "reduced convex hull QP", iterations, residual: gap });
        }
        iterations += 1;

        let dir_dot = |a: &[f64], b: &[f64], g: &[f64]| -> f64 {
            a.iter().zip(b).zip(g).map(|((ai, bi), gi)| (ai - bi) * gi).sum()
        };
        let mut accepted = None;
        for _ in 0..60 {
            let nu = project_capped_simplex(&axpy(&u, -step, &gu), cap);
            let nv = project_capped_simplex(&axpy(&v, -step, &gv), cap);
            let nw = combine(&xs, &nu) - combine(&ys, &nv);
            let nf = 0.5 * nw.norm_squared();
            let decrease = dir_dot(&nu, &u, &gu) + dir_dot(&nv, &v, &gv);
            if decrease >= 0.0 {
                // Projection did not move: stationary point.
                break;
            }
            if nf <= f + 1e-4 * decrease {
                accepted = Some((nu, nv, nw, nf));
                break;
            }
            step *= 0.5;
        }
        let Some((nu, nv, nw, nf)) = accepted else {
            // No descent at machine precision: the iterate is optimal to rounding.
            break;
        };

        // Barzilai–Borwein length for the next trial step.
        let du: Vec<f64> = nu.iter().zip(&u).map(|(a, b)| a - b).collect();
        let dv: Vec<f64> = nv.iter().zip(&v).map(|(a, b)| a - b).collect();
        let ss: f64 = du.iter().chain(&dv).map(|t| t * t).sum();
        let sy = (combine(&xs, &du) - combine(&ys, &dv)).norm_squared();
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { step * 2.0 };

        u = nu;
        v = nv;
        w = nw;
        f = nf;
        observe(f);
        (gu, gv) = gradients(&w);
    }

    let c = combine(x, &u);
    let d = combine(y, &v);
    let w = &c - &d;
    let alpha = c.dot(&w);
    let beta = d.dot(&w);
    Ok(RchSolution { u, v, objective: 0.5 * w.norm_squared(), c, d, w, alpha, beta, gap, iterations })
}

fn axpy(z: &[f64], s: f64, g: &[f64]) -> Vec<f64> {
    z.iter().zip(g).map(|(a, b)| a + s * b).collect()
}

/// `gᵀz − min gᵀs` over the capped simplex: greedy fill of the smallest
/// gradient entries.
fn fw_gap(z: &[f64], g: &[f64], cap: f64) -> f64 {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g[a].total_cmp(&g[b]));
    let mut left = 1.0;
    let mut lin_min = 0.0;
    for &i in &order {
        if left <= 0.0 {
            break;
        }
        let take = cap.min(left);
        lin_min += take * g[i];
        left -= take;
    }
    let current: f64 = z.iter().zip(g).map(|(a, b)| a * b).sum();
    (current - lin_min).max(0.0)
}

/// Euclidean projection onto `{z : Σz = 1, 0 <= z <= cap}`.
///
/// The projection is `clip(y − τ, 0, cap)` for the unique `τ` where the sum
/// equals 1; `τ` is located among the sorted breakpoints `yᵢ` and `yᵢ − cap`
/// and then interpolated on the linear piece.
pub fn project_capped_simplex(y: &[f64], cap: f64) -> Vec<f64> {
    let clipped_sum = |t: f64| -> f64 { y.iter().map(|&v| (v - t).clamp(0.0, cap)).sum() };
    let mut points: Vec<f64> = y.iter().flat_map(|&v| [v - cap, v]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    // clipped_sum is non-increasing: n·cap at the first breakpoint, 0 at the last.
    let (mut lo, mut hi) = (0usize, points.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_sum(points[mid]) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (points[lo], points[hi]);
    let (ha, hb) = (clipped_sum(a), clipped_sum(b));
    let tau = if ha <= 1.0 || (ha - hb).abs() < f64::EPSILON {
        a
    } else {
        a + (ha - 1.0) * (b - a) / (ha - hb)
    };
    let mut z: Vec<f64> = y.iter().map(|&v| (v - tau).clamp(0.0, cap)).collect();
    // Absorb rounding in the sum into an interior coordinate when one exists.
    let excess = z.iter().sum::<f64>() - 1.0;
    if excess != 0.0 {
        if let Some(i) = (0..z.len()).find(|&i| z[i] - excess > 0.0 && z[i] - excess < cap) {
            z[i] -= excess;
        }
    }
    z
}

/// Result of one separating step: the points of each side that fall on their
/// own side of the slab, with the ellipsoids covering them.
#[derive(Clone, Debug)]
pub struct RchSplit {
    pub x_plus: Vec<usize>,
    pub y_minus: Vec<usize>,
    /// `None` when the side has too few points (or too little spread) for a
    /// full-dimensional ellipsoid.
    pub mve_x_plus: Option<Ellipsoid>,
    pub mve_y_minus: Option<Ellipsoid>,
    /// True when the ellipsoids of X and Y were already disjoint; the split
    /// then keeps every point and no QP is solved.
    pub disjoint: bool,
    pub solution: Option<RchSolution>,
}

/// One separating step between X and Y.
///
/// If the minimum-volume ellipsoids of X and Y do not intersect the sets are
/// returned whole. Otherwise the QP is solved with `D = 1/min(|X|, |Y|)` and
/// the points with `xᵀw >= α` (resp. `yᵀw <= β`) are kept.
pub fn rch_step(x: &[DVector<f64>], y: &[DVector<f64>], config: &Config) -> Result<RchSplit> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ex = mve_fit(x, config.tol_fit)?.ellipsoid;
    let ey = mve_fit(y, config.tol_fit)?.ellipsoid;
    if !intersects(&ex, &ey, config.tol_membership)? {
        return Ok(RchSplit {
            x_plus: (0..x.len()).collect(),
            y_minus: (0..y.len()).collect(),
            mve_x_plus: Some(ex),
            mve_y_minus: Some(ey),
            disjoint: true,
            solution: None,
        });
    }

    let cap = 1.0 / x.len().min(y.len()) as f64;
    let sol = solve_rch_qp(x, y, cap, config.tol_qp)?;
    let scale = x.iter().chain(y).map(|p| p.amax()).fold(1.0, f64::max);
    let norm = sol.w.norm();
    if norm <= 1e-10 * scale {
        return Err(Error::DegenerateSlab { norm });
    }
    let tie = 1e-12 * sol.alpha.abs().max(sol.beta.abs()).max(1.0);
    let x_plus: Vec<usize> = (0..x.len()).filter(|&i| x[i].dot(&sol.w) >= sol.alpha - tie).collect();
    let y_minus: Vec<usize> = (0..y.len()).filter(|&j| y[j].dot(&sol.w) <= sol.beta + tie).collect();

    let side_mve = |idx: &[usize], pts: &[DVector<f64>]| -> Result<Option<Ellipsoid>> {
        let sub: Vec<DVector<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
        match mve_fit(&sub, config.tol_fit) {
            Ok(s) => Ok(Some(s.ellipsoid)),
            Err(Error::TooFewPoints { .. } | Error::RankDeficient { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mve_x_plus = side_mve(&x_plus, x)?;
    let mve_y_minus = side_mve(&y_minus, y)?;
    Ok(RchSplit { x_plus, y_minus, mve_x_plus, mve_y_minus, disjoint: false, solution: Some(sol) })
}
