//! Christoffel symbols and the essential convex hull of their values.
//!
//! Where the metric is differentiable the Koszul formula gives
//! `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`. Near interfaces the
//! metric is only Lipschitz, and the geodesic equation is read as a
//! differential inclusion: the acceleration must lie in the essential convex
//! hull of nearby Christoffel values, sampled here off the (measure-zero)
//! interface set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::filippov::FilippovState;
use crate::rng;
use crate::tolerances;

/// Christoffel tensor `Γ^k_ij` at a point, symmetric in `(i, j)`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    n: usize,
    /// `data[k * n * n + i * n + j]`
    data: Vec<f64>,
    pub at: DVector<f64>,
    pub branch_id: usize,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[k * self.n * self.n + i * self.n + j]
    }

    /// `Γ(u, w)^k = Σ_ij Γ^k_ij u_i w_j`.
    pub fn bilinear(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                let ui = u[i];
                if ui == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.gamma(k, i, j) * ui * w[j];
                }
            }
            out[k] = s;
        }
        out
    }

    /// Quadratic evaluation `Γ(v, v)`.
    pub fn quad(&self, v: &DVector<f64>) -> DVector<f64> {
        self.bilinear(v, v)
    }

    /// Largest `|Γ^k_ij − Γ^k_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..i {
                    worst = worst.max((self.gamma(k, i, j) - self.gamma(k, j, i)).abs());
                }
            }
        }
        worst
    }
}

/// Christoffel symbols of the active branch at `x`.
///
/// Errors with [`Error::OnSingularSet`] when `x` lies within the interface
/// margin of an interface; the hull machinery must be used there instead.
pub fn christoffel_at(field: &MetricField, x: &DVector<f64>) -> Result<Christoffel> {
    if let Some((j, dist)) = field.nearest_interface(x) {
        if dist <= field.interface_margin() {
            return Err(Error::OnSingularSet {
                interface: j,
                level: dist,
            });
        }
    }
    christoffel_for_branch(field, field.branch_index(x), x, tolerances::FD_STEP)
}

/// Christoffel symbols of a specific smooth branch at `x`, regardless of
/// which side of the interfaces `x` lies on. Used by the integrator while a
/// branch is pinned and by the Filippov selection for one-sided values.
pub fn christoffel_for_branch(
    field: &MetricField,
    branch: usize,
    x: &DVector<f64>,
    fd_step: f64,
) -> Result<Christoffel> {
    let n = field.dim();
    let g = field.branch_matrix(branch, x);
    let g_inv = g.clone().try_inverse().ok_or(Error::SignatureLoss {
        point: x.iter().copied().collect(),
    })?;

    // dg[k] = ∂_k g, analytic when the branch provides it.
    let mut dg: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        match field.branch_partial(branch, x, k) {
            Some(p) => dg.push(p),
            None => {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += fd_step;
                xm[k] -= fd_step;
                let fp = field.branch_matrix(branch, &xp);
                let fm = field.branch_matrix(branch, &xm);
                dg.push((fp - fm) / (2.0 * fd_step));
            }
        }
    }

    let mut data = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..=i {
            // lower[l] = ∂_i g_jl + ∂_j g_il − ∂_l g_ij
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let lower = dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)];
                    s += g_inv[(k, l)] * lower;
                }
                let val = 0.5 * s;
                data[k * n * n + i * n + j] = val;
                data[k * n * n + j * n + i] = val;
            }
        }
    }

    Ok(Christoffel {
        n,
        data,
        at: x.clone(),
        branch_id: branch,
    })
}

/// Conservative analytic bound on `||Γ_x(v,v)|| / ||v||²` derived from the
/// Lipschitz constant: `½·√n·(2√n + 1)·L·sup||g⁻¹||`.
pub fn christoffel_norm_bound_from_lipschitz(field: &MetricField, samples: usize, seed: u64) -> f64 {
    let n = field.dim() as f64;
    let mut rng = rng::stream(seed, "ginv-bound");
    let mut sup_inv: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let x = rng::ball_point(&mut rng, field.dim(), field.domain_radius());
        if let Some(inv) = field.matrix_at(&x).try_inverse() {
            let eig = inv.symmetric_eigen();
            sup_inv = sup_inv.max(eig.eigenvalues.amax());
        }
    }
    0.5 * n.sqrt() * (2.0 * n.sqrt() + 1.0) * field.lipschitz_l() * sup_inv
}

/// Empirical bound `C₂ = sup ||Γ_x(w,w)||` over random chart points (off the
/// interfaces) and unit vectors `w`. This is the constant controlling
/// `||γ''|| <= C₂·||γ'||²` along Filippov geodesics.
pub fn christoffel_quadratic_bound(field: &MetricField, samples: usize, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, "christoffel-bound");
    let n = field.dim();
    let mut bound: f64 = 0.0;
    let mut taken = 0usize;
    while taken < samples {
        let x = rng::ball_point(&mut rng, n, field.domain_radius());
        if let Some((_, d)) = field.nearest_interface(&x) {
            if d <= field.interface_margin() {
                continue;
            }
        }
        taken += 1;
        let w = rng::unit_vector(&mut rng, n);
        if let Ok(gamma) = christoffel_at(field, &x) {
            bound = bound.max(gamma.quad(&w).norm());
        }
    }
    bound
}

/// Finite sample of the essential convex hull of `Γ_x(w,w)` near a phase
/// point.
#[derive(Debug, Clone)]
pub struct HullSample {
    pub center_x: DVector<f64>,
    pub center_v: DVector<f64>,
    pub delta: f64,
    pub values: Vec<DVector<f64>>,
    pub count: usize,
}

/// Draw `count` phase points uniformly in the `delta`-ball around
/// `(state.x, state.v)`, rejecting points within the interface margin (the
/// singular set has measure zero), and record `Γ_x(w,w)` at each.
pub fn sample_essential_hull(
    field: &MetricField,
    state: &FilippovState,
    delta: f64,
    count: usize,
    rng_seed: u64,
) -> Result<HullSample> {
    if delta <= 0.0 {
        return Err(Error::NotPositive {
            what: "hull sampling radius delta",
            value: delta,
        });
    }
    let n = field.dim();
    if count < n + 2 {
        return Err(Error::InvalidParameter(format!(
            "hull sample count {count} below n + 2 = {}",
            n + 2
        )));
    }
    let mut rng = rng::stream(rng_seed, "essential-hull");
    let mut values = Vec::with_capacity(count);
    let mut rejected = 0usize;
    let max_attempts = count * 100;
    let mut attempts = 0usize;
    while values.len() < count && attempts < max_attempts {
        attempts += 1;
        let offset = rng::ball_point(&mut rng, 2 * n, delta);
        let x = &state.x + offset.rows(0, n).clone_owned();
        let w = &state.v + offset.rows(n, n).clone_owned();
        if let Some((_, dist)) = field.nearest_interface(&x) {
            if dist <= field.interface_margin() {
                rejected += 1;
                continue;
            }
        }
        match christoffel_at(field, &x) {
            Ok(gamma) => values.push(gamma.quad(&w)),
            Err(_) => {
                rejected += 1;
            }
        }
    }
    let rate = rejected as f64 / attempts.max(1) as f64;
    if values.len() < count {
        return Err(Error::DegenerateNeighborhood { rate });
    }
    Ok(HullSample {
        center_x: state.x.clone(),
        center_v: state.v.clone(),
        delta,
        values,
        count,
    })
}

/// Euclidean distance from `a` to the convex hull of `sample.values`
/// (0 when `a` lies inside).
///
/// The projection problem `min ||Σ λ_i v_i − a||` over the simplex is solved
/// by the min-norm-point active-set method: each major cycle adds the vertex
/// violating the optimality certificate, each minor cycle minimizes exactly
/// over the affine hull of the active set and clips negative weights. The
/// certificate bounds the distance to [`tolerances::HULL_PROJECTION_TOL`].
pub fn hull_membership_margin(sample: &HullSample, a: &DVector<f64>) -> f64 {
    hull_distance(&sample.values, a)
}

pub(crate) fn hull_distance(values: &[DVector<f64>], a: &DVector<f64>) -> f64 {
    assert!(!values.is_empty(), "hull needs at least one sample");
    let pts: Vec<DVector<f64>> = values.iter().map(|v| v - a).collect();
    if pts.len() == 1 {
        return pts[0].norm();
    }
    let scale = pts.iter().map(|p| p.norm()).fold(1.0f64, f64::max);
    let gap_tol = (tolerances::HULL_PROJECTION_TOL * scale).powi(2) * 1e-4;

    // Active set with weights; start at the vertex nearest the origin.
    let start = (0..pts.len())
        .min_by(|&i, &j| {
            pts[i]
                .norm_squared()
                .partial_cmp(&pts[j].norm_squared())
                .unwrap()
        })
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = pts[start].clone();

    for _ in 0..tolerances::HULL_PROJECTION_MAX_ITERS {
        // Optimality: x·p >= x·x for every vertex p.
        let xx = x.norm_squared();
        let mut best = 0usize;
        let mut best_dot = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let d = x.dot(p);
            if d < best_dot {
                best_dot = d;
                best = i;
            }
        }
        if xx - best_dot <= gap_tol || active.contains(&best) {
            break;
        }
        active.push(best);
        weights.push(0.0);

        // Minor cycles: exact affine minimization over the active set,
        // clipping toward the previous feasible weights when a coefficient
        // turns negative.
        for _ in 0..2 * active.len() + 4 {
            let alpha = match affine_min_norm_weights(&pts, &active) {
                Some(alpha) => alpha,
                None => break,
            };
            if alpha.iter().all(|&w| w > 1e-12) {
                weights = alpha;
                break;
            }
            let mut theta = f64::INFINITY;
            for (w, &aw) in weights.iter().zip(&alpha) {
                if aw <= 1e-12 && *w > aw {
                    theta = theta.min(*w / (*w - aw));
                }
            }
            let theta = theta.clamp(0.0, 1.0);
            for (w, &aw) in weights.iter_mut().zip(&alpha) {
                *w = (1.0 - theta) * *w + theta * aw;
            }
            // Drop vanished vertices.
            let mut i = 0;
            while i < active.len() {
                if weights[i] <= 1e-12 {
                    active.swap_remove(i);
                    weights.swap_remove(i);
                } else {
                    i += 1;
                }
            }
            if active.len() <= 1 {
                break;
            }
        }

        x = DVector::zeros(pts[0].len());
        for (&i, &w) in active.iter().zip(&weights) {
            x += &pts[i] * w;
        }
    }
    x.norm()
}

/// Minimize `||Σ α_i p_i||` over `Σ α_i = 1` (signs free) for the active
/// subset, via the bordered Gram system. Returns `None` when the system is
/// numerically singular.
fn affine_min_norm_weights(pts: &[DVector<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    let mut trace = 0.0;
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            m[(r, c)] = pts[i].dot(&pts[j]);
        }
        trace += m[(r, r)];
    }
    let ridge = 1e-14 * (trace / k as f64).max(1e-300);
    for r in 0..k {
        m[(r, r)] += ridge;
        m[(r, k)] = 1.0;
        m[(k, r)] = 1.0;
    }
    rhs[k] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    Some(sol.rows(0, k).iter().copied().collect())
}

/// Hull membership margins under decreasing sampling radii. The essential
/// hull is an intersection over all radii and null sets; this refinement
/// profile is its computable approximation.
pub fn hull_margin_profile(
    field: &MetricField,
    state: &FilippovState,
    accel: &DVector<f64>,
    deltas: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(deltas.len());
    for (i, &delta) in deltas.iter().enumerate() {
        let sample = sample_essential_hull(field, state, delta, count, seed.wrapping_add(i as u64))?;
        out.push((delta, hull_membership_margin(&sample, accel)));
    }
    Ok(out)
}
