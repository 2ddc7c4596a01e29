//! Constructive stability pipeline.
//!
//! For an approximate Wigner solution `f` and a point `x`:
//!
//! 1. scaled iterates `f_n(x) = c^n f(c^-n x)` for `n = 0..=n_max`;
//! 2. `F(x)`: an accumulation point of the iterates, found as the densest
//!    norm cluster in the tail (in finite dimension bounded sequences have
//!    norm-convergent subsequences, so this realizes the weak limit);
//! 3. `a = <F(x), f(x)>` is normal with `|a| = <x, x>`; its spectral sign
//!    `s(x)` is a partial isometry in the abelian algebra generated by `a`;
//! 4. `p(x) = s(x)* s(x)`, `I(x) = F(x) s(x)` and `h(x) = f(x) - I(x)`.
//!
//! Every relation the construction relies on is measured and stored with the
//! point so that [`crate::verify`] can check it independently.

use serde::Serialize;

use crate::algebra::AlgebraElement;
use crate::control::ControlFunction;
use crate::mapgen::ModuleMap;
use crate::module::ModuleElement;
use crate::{Error, Result};

/// Norm beyond which a scaled iterate counts as diverging.
pub const OVERFLOW_NORM: f64 = 1e150;

/// Smallest cluster accepted as an accumulation point.
pub const MIN_CLUSTER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityParams {
    pub c: f64,
    /// Largest iterate index `n`.
    pub n_max: usize,
    /// Cluster diameter, scaled by `1 + ||x||`.
    pub cluster_tol: f64,
    /// Relative normality threshold for `<F(x), f(x)>`.
    pub normality_tol: f64,
    /// Relative zero threshold for the polar sign.
    pub rank_tol: f64,
    /// Threshold of the limit-relation gate on `|<F(x), f(y)>|^2 = |<x, y>|^2`,
    /// scaled by `1 + (||x|| ||y||)^2`.
    pub gate_tol: f64,
    /// First iterate index searched for clusters; `None` means `n_max / 4`.
    pub tail_start: Option<usize>,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            c: 2.0,
            n_max: 40,
            cluster_tol: 1e-6,
            normality_tol: 1e-6,
            rank_tol: 1e-8,
            gate_tol: 1e-6,
            tail_start: None,
        }
    }
}

impl StabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0 && self.c != 1.0) {
            return Err(Error::InvalidParameter(format!("c = {} must be positive and != 1", self.c)));
        }
        if self.n_max < 4 {
            return Err(Error::InvalidParameter(format!("n_max = {} must be at least 4", self.n_max)));
        }
        for (name, v) in [
            ("cluster_tol", self.cluster_tol),
            ("normality_tol", self.normality_tol),
            ("rank_tol", self.rank_tol),
            ("gate_tol", self.gate_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.tail_start.is_some_and(|t| t > self.n_max) {
            return Err(Error::InvalidParameter("tail_start exceeds n_max".into()));
        }
        Ok(())
    }

    pub fn tail_start(&self) -> usize {
        self.tail_start.unwrap_or(self.n_max / 4)
    }

    pub fn cluster_tol_at(&self, x: &ModuleElement) -> f64 {
        self.cluster_tol * (1.0 + x.norm())
    }
}

#[derive(Debug, Clone)]
pub struct ScaledIterates {
    /// `f_n(x)` for `n = 0..=n_max`.
    pub values: Vec<ModuleElement>,
    /// `||<f_n(x), f_n(x)> - <x, x>||`.
    pub diag_defects: Vec<f64>,
}

/// `f_n(x) = c^n f(c^-n x)` for `n = 0..=n_max`.
pub fn iterate_scaled<M: ModuleMap + ?Sized>(
    f: &M,
    x: &ModuleElement,
    params: &StabilityParams,
) -> Result<ScaledIterates> {
    let xx = x.inner(x);
    let mut values = Vec::with_capacity(params.n_max + 1);
    let mut diag_defects = Vec::with_capacity(params.n_max + 1);
    for n in 0..=params.n_max {
        let k = n as i32;
        let fn_x = f.eval(&x.scale_real(params.c.powi(-k))).scale_real(params.c.powi(k));
        let norm = if fn_x.is_finite() { fn_x.norm() } else { f64::INFINITY };
        if !norm.is_finite() || norm > OVERFLOW_NORM {
            return Err(Error::Overflow { n, norm });
        }
        diag_defects.push(fn_x.inner(&fn_x).dist(&xx));
        values.push(fn_x);
    }
    Ok(ScaledIterates { values, diag_defects })
}

#[derive(Debug, Clone)]
pub struct Limit {
    /// Average of the cluster members.
    pub value: ModuleElement,
    /// Iterate indices in the cluster, increasing.
    pub indices: Vec<usize>,
    /// `max ||seq[l] - value||` over the cluster.
    pub spread: f64,
}

/// Densest cluster of `seq[tail_start..]`.
///
/// Each candidate center collects the tail elements within `cluster_tol / 2`
/// of it, so members are pairwise within `cluster_tol` and within
/// `cluster_tol` of their average. Ties go to the later center.
pub fn extract_limit(
    seq: &[ModuleElement],
    cluster_tol: f64,
    tail_start: usize,
    min_size: usize,
) -> Result<Limit> {
    let tail = seq.len().saturating_sub(tail_start);
    if tail == 0 {
        return Err(Error::NoAccumulationPoint {
            best_size: 0,
            required: min_size,
            cluster_tol,
        });
    }
    let mut dist = vec![vec![0.0; tail]; tail];
    for i in 0..tail {
        for j in (i + 1)..tail {
            let d = seq[tail_start + i].dist(&seq[tail_start + j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let radius = cluster_tol / 2.0;
    let mut best: Vec<usize> = Vec::new();
    for row in &dist {
        let members: Vec<usize> = (0..tail).filter(|&j| row[j] <= radius).collect();
        if members.len() >= best.len() {
            best = members;
        }
    }
    if best.len() < min_size.max(1) {
        return Err(Error::NoAccumulationPoint {
            best_size: best.len(),
            required: min_size,
            cluster_tol,
        });
    }
    let indices: Vec<usize> = best.iter().map(|&j| tail_start + j).collect();
    let mut sum = seq[indices[0]].clone();
    for &l in &indices[1..] {
        sum = &sum + &seq[l];
    }
    let value = sum.scale_real(1.0 / indices.len() as f64);
    let spread = indices.iter().map(|&l| seq[l].dist(&value)).fold(0.0, f64::max);
    debug_assert!(spread <= cluster_tol * (1.0 + 1e-12));
    Ok(Limit { value, indices, spread })
}

/// `||<u, v>* <u, v> - <x, y>* <x, y>||`, i.e. the defect of
/// `|<u, v>|^2 = |<x, y>|^2` without taking square roots.
pub fn squared_modulus_defect(u: &ModuleElement, v: &ModuleElement, x: &ModuleElement, y: &ModuleElement) -> f64 {
    let uv = u.inner(v);
    let xy = x.inner(y);
    (&uv.adjoint() * &uv).dist(&(&xy.adjoint() * &xy))
}

#[derive(Debug, Clone)]
pub struct LimitPoint {
    pub iterates: ScaledIterates,
    pub limit: Limit,
    /// Worst scaled defect of `|<F(x), f(y)>|^2 = |<x, y>|^2` over the probes.
    pub gate_residual: f64,
}

/// `F(x)`: the accumulation point of the scaled iterates, gated by
/// `|<F(x), f(y)>|^2 = |<x, y>|^2` on `x` itself and on every probe `y`.
pub fn construct_limit<M: ModuleMap + ?Sized>(
    f: &M,
    x: &ModuleElement,
    params: &StabilityParams,
    probes: &[ModuleElement],
) -> Result<LimitPoint> {
    let iterates = iterate_scaled(f, x, params)?;
    let limit = extract_limit(&iterates.values, params.cluster_tol_at(x), params.tail_start(), MIN_CLUSTER)?;
    let nx = x.norm();
    let mut gate_residual: f64 = 0.0;
    for y in std::iter::once(x).chain(probes) {
        let scale = 1.0 + (nx * y.norm()).powi(2);
        let r = squared_modulus_defect(&limit.value, &f.eval(y), x, y) / scale;
        gate_residual = gate_residual.max(r);
    }
    if gate_residual > params.gate_tol {
        return Err(Error::LimitRelation {
            relation: "|<F(x), f(y)>|^2 = |<x, y>|^2",
            residual: gate_residual,
            threshold: params.gate_tol,
        });
    }
    Ok(LimitPoint {
        iterates,
        limit,
        gate_residual,
    })
}

/// Residuals stored with every processed point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Residuals {
    /// `||<I(x), I(x)> - <x, x>||`.
    pub iso: f64,
    /// `||f(x) - I(x)||`.
    pub dist: f64,
    /// `sqrt(phi(x, x))`.
    pub sqrt_phi: f64,
    /// `||<h(x), I(x)>||`.
    pub h_orth: f64,
    /// `||h(x)||`.
    pub h_norm: f64,
    /// `||a*a - aa*|| / ||a||^2` for `a = <F(x), f(x)>` (0 when `a = 0`).
    pub normality: f64,
    /// `|| |a| - <x, x> ||`.
    pub modulus_gap: f64,
    /// `||F(x) p(x) - F(x)||`.
    pub support: f64,
    /// `||<f(x), I(x)> - <x, x>||`.
    pub fit: f64,
    /// `||I(x) s(x)* - F(x)||`.
    pub recovery: f64,
    /// `||<f(x), f(x)> - <x, x>||`.
    pub diag_defect: f64,
    /// Largest `||<f_n, f_n> - <x, x>|| - c^{2n} phi(c^-n x, c^-n x)`.
    pub envelope_excess: f64,
    /// Limit-relation gate residual.
    pub gate: f64,
    /// Largest distance of a cluster member from `F(x)`.
    pub cluster_spread: f64,
}

/// One processed point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub x: ModuleElement,
    pub fx: ModuleElement,
    /// `F(x)`.
    pub limit: ModuleElement,
    /// `s(x)`.
    pub sign: AlgebraElement,
    /// `p(x) = s(x)* s(x)`.
    pub support: AlgebraElement,
    /// `I(x) = F(x) s(x)`.
    pub image: ModuleElement,
    /// `h(x) = f(x) - I(x)`.
    pub remainder: ModuleElement,
    pub subsequence: Vec<usize>,
    pub residuals: Residuals,
}

/// Full construction of `F(x)`, `s(x)`, `p(x)`, `I(x)` and `h(x)` at `x`.
pub fn construct_point<M: ModuleMap + ?Sized>(
    f: &M,
    x: &ModuleElement,
    params: &StabilityParams,
    phi: &ControlFunction,
    probes: &[ModuleElement],
) -> Result<PointResult> {
    params.validate()?;
    let lp = construct_limit(f, x, params, probes)?;
    let big_f = lp.limit.value.clone();
    let fx = lp.iterates.values[0].clone();
    let xx = x.inner(x);

    let a = big_f.inner(&fx);
    let a_norm = a.op_norm();
    let normality = if a_norm > 0.0 {
        a.normality_residual() / (a_norm * a_norm)
    } else {
        0.0
    };
    let polar = a.polar_normal_with(params.rank_tol, params.normality_tol)?;
    let s = polar.partial_isometry;
    let p = &s.adjoint() * &s;
    let image = big_f.right_mul(&s);
    let remainder = &fx - &image;

    let nx = x.norm();
    let envelope_excess = lp
        .iterates
        .diag_defects
        .iter()
        .enumerate()
        .map(|(n, d)| {
            let cn = params.c.powi(n as i32);
            let bound = cn * cn * phi.eval(nx / cn, nx / cn);
            d - bound
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let residuals = Residuals {
        iso: image.inner(&image).dist(&xx),
        dist: remainder.norm(),
        sqrt_phi: phi.eval(nx, nx).sqrt(),
        h_orth: remainder.inner(&image).op_norm(),
        h_norm: remainder.norm(),
        normality,
        modulus_gap: polar.modulus.dist(&xx),
        support: big_f.right_mul(&p).dist(&big_f),
        fit: fx.inner(&image).dist(&xx),
        recovery: image.right_mul(&s.adjoint()).dist(&big_f),
        diag_defect: fx.inner(&fx).dist(&xx),
        envelope_excess,
        gate: lp.gate_residual,
        cluster_spread: lp.limit.spread,
    };
    Ok(PointResult {
        x: x.clone(),
        fx,
        limit: big_f,
        sign: s,
        support: p,
        image,
        remainder,
        subsequence: lp.limit.indices,
        residuals,
    })
}

/// Per-point records for a batch of points.
#[derive(Debug, Clone, Default)]
pub struct StabilityResult {
    pub points: Vec<PointResult>,
}
