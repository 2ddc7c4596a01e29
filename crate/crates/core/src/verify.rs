//! Independent checks of hypotheses and conclusions.
//!
//! Checks recompute every residual from the stored raw values (`x`, `f(x)`,
//! `F(x)`, `s(x)`, `I(x)`, `h(x)`); the residual fields filled in by the
//! pipeline are never trusted here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{DEFAULT_NORMALITY_TOL, DEFAULT_RANK_TOL};

use crate::control::ControlFunction;
use crate::mapgen::ModuleMap;
use crate::module::{polarize, ModuleDescriptor, ModuleElement};
use crate::random;
use crate::stability::{PointResult, StabilityResult};
use crate::{Error, Result};

/// Slack for the approximate Wigner check, `defect - phi <= slack`.
pub const APPROX_SLACK: f64 = 1e-12;

/// Slack for the iterate envelope check.
pub const ENVELOPE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// The relation being checked.
    pub anchor: String,
    pub applicable: bool,
    pub pass: bool,
    pub worst_residual: f64,
    pub threshold: f64,
    /// Point or pair indices of the worst case (always set on failure).
    pub witness: Option<Vec<usize>>,
    pub checked: usize,
    pub skipped: usize,
    pub vacuous: usize,
}

impl CheckRecord {
    /// An empty record; feed it with [`observe`](Self::observe), then [`finish`](Self::finish).
    pub fn new(name: &str, anchor: &str, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            applicable: true,
            pass: false,
            worst_residual: f64::NEG_INFINITY,
            threshold,
            witness: None,
            checked: 0,
            skipped: 0,
            vacuous: 0,
        }
    }

    pub fn not_applicable(name: &str, anchor: &str) -> Self {
        Self {
            applicable: false,
            pass: true,
            ..Self::new(name, anchor, 0.0)
        }
    }

    pub fn observe(&mut self, residual: f64, witness: &[usize]) {
        self.checked += 1;
        if residual > self.worst_residual || residual.is_nan() {
            self.worst_residual = residual;
            self.witness = Some(witness.to_vec());
        }
    }

    /// Sets `pass`: something was checked or vacuous, and the worst residual
    /// is within the threshold.
    pub fn finish(mut self) -> Self {
        let total = self.checked + self.vacuous;
        self.pass = total > 0 && (self.checked == 0 || self.worst_residual <= self.threshold);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn push(&mut self, record: CheckRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        self.records.extend(records);
    }

    /// Pass iff there is at least one applicable record and every applicable
    /// record passes.
    pub fn pass(&self) -> bool {
        let mut applicable = self.records.iter().filter(|r| r.applicable).peekable();
        applicable.peek().is_some() && applicable.all(|r| r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

/// `|| |<fx, fy>| - |<x, y>| ||`.
pub fn wigner_defect(fx: &ModuleElement, fy: &ModuleElement, x: &ModuleElement, y: &ModuleElement) -> f64 {
    fx.inner(fy).abs().dist(&x.inner(y).abs())
}

/// `|| |<fx, fy>| - |<x, y>| || <= phi(x, y)` on every pair; pairs with
/// infinite `phi` pass vacuously.
pub fn check_approx_wigner<M: ModuleMap + ?Sized>(
    f: &M,
    pairs: &[(ModuleElement, ModuleElement)],
    phi: &ControlFunction,
) -> CheckRecord {
    check_approx_wigner_with_ratio(f, pairs, phi).0
}

/// As [`check_approx_wigner`], also returning the worst `defect / phi` over
/// pairs with finite positive `phi`.
pub fn check_approx_wigner_with_ratio<M: ModuleMap + ?Sized>(
    f: &M,
    pairs: &[(ModuleElement, ModuleElement)],
    phi: &ControlFunction,
) -> (CheckRecord, f64) {
    let mut rec = CheckRecord::new(
        "approx_wigner",
        "|| |<f(x), f(y)>| - |<x, y>| || <= phi(x, y)",
        APPROX_SLACK,
    );
    let mut worst_ratio: f64 = 0.0;
    for (i, (x, y)) in pairs.iter().enumerate() {
        let bound = phi.eval_at(x, y);
        if bound.is_infinite() {
            rec.vacuous += 1;
            continue;
        }
        let defect = wigner_defect(&f.eval(x), &f.eval(y), x, y);
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(defect / bound);
        }
        rec.observe(defect - bound, &[i]);
    }
    (rec.finish(), worst_ratio)
}

/// Isometry `<I(x), I(x)> = <x, x>`, the distance bound
/// `||f(x) - I(x)|| <= sqrt(phi(x, x))`, `<h(x), I(x)> = 0` and
/// `||h(x)|| <= sqrt(phi(x, x))`.
pub fn check_theorem_conclusions(result: &StabilityResult, phi: &ControlFunction, tol: f64) -> Vec<CheckRecord> {
    let mut iso = CheckRecord::new("isometry", "<I(x), I(x)> = <x, x>", tol);
    let mut dist = CheckRecord::new("distance_bound", "||f(x) - I(x)|| <= sqrt(phi(x, x))", tol);
    let mut orth = CheckRecord::new("h_orthogonality", "<h(x), I(x)> = 0", tol);
    let mut hnorm = CheckRecord::new("h_norm_bound", "||h(x)|| <= sqrt(phi(x, x))", tol);
    for (i, p) in result.points.iter().enumerate() {
        let xx = p.x.inner(&p.x);
        let sqrt_phi = phi.eval_at(&p.x, &p.x).sqrt();
        iso.observe(p.image.inner(&p.image).dist(&xx), &[i]);
        dist.observe(p.fx.dist(&p.image) - sqrt_phi, &[i]);
        orth.observe(p.remainder.inner(&p.image).op_norm(), &[i]);
        hnorm.observe(p.remainder.norm() - sqrt_phi, &[i]);
    }
    vec![iso.finish(), dist.finish(), orth.finish(), hnorm.finish()]
}

/// Relations the construction passes through: normality of
/// `a = <F(x), f(x)>`, `|a| = <x, x>`, `F(x) p(x) = F(x)`,
/// `<f(x), I(x)> = <x, x>` and `I(x) s(x)* = F(x)`.
pub fn check_construction_relations(result: &StabilityResult, tol: f64) -> Vec<CheckRecord> {
    let mut normal = CheckRecord::new("limit_normality", "<F(x), f(x)> is normal", tol);
    let mut modulus = CheckRecord::new("limit_modulus", "|<F(x), f(x)>| = <x, x>", tol);
    let mut support = CheckRecord::new("support", "F(x) p(x) = F(x)", tol);
    let mut fit = CheckRecord::new("fit", "<f(x), I(x)> = <x, x>", tol);
    let mut recovery = CheckRecord::new("recovery", "I(x) s(x)* = F(x)", tol);
    for (i, p) in result.points.iter().enumerate() {
        let xx = p.x.inner(&p.x);
        let a = p.limit.inner(&p.fx);
        let an = a.op_norm();
        normal.observe(if an > 0.0 { a.normality_residual() / (an * an) } else { 0.0 }, &[i]);
        modulus.observe(a.abs().dist(&xx), &[i]);
        support.observe(p.limit.right_mul(&p.support).dist(&p.limit), &[i]);
        fit.observe(p.fx.inner(&p.image).dist(&xx), &[i]);
        recovery.observe(p.image.right_mul(&p.sign.adjoint()).dist(&p.limit), &[i]);
    }
    vec![
        normal.finish(),
        modulus.finish(),
        support.finish(),
        fit.finish(),
        recovery.finish(),
    ]
}

/// `||<f_n(x), f_n(x)> - <x, x>|| <= c^{2n} phi(c^-n x, c^-n x)` for all
/// computed `n`, read from the stored envelope excess.
pub fn check_envelope(result: &StabilityResult) -> CheckRecord {
    let mut rec = CheckRecord::new(
        "iterate_envelope",
        "||<f_n(x), f_n(x)> - <x, x>|| <= c^{2n} phi(c^-n x, c^-n x)",
        ENVELOPE_SLACK,
    );
    for (i, p) in result.points.iter().enumerate() {
        rec.observe(p.residuals.envelope_excess, &[i]);
    }
    rec.finish()
}

/// Both directions of orthogonality preservation.
///
/// Forward: `||<I(x), I(y)>|| <= tol` on orthogonal pairs (pairs whose
/// `||<x, y>||` exceeds `tol` are skipped). Backward: for pairs with
/// `||<x, y>|| >= margin`, the certified lower bound
/// `||s(x) <I(x), I(y)> s(y)*|| <= ||<I(x), I(y)>||` must reach
/// `||<x, y>|| - tol`; pairs inside the gap are skipped. Witness indices
/// refer to the pair lists, offset by `orth.len()` for backward pairs.
pub fn check_orthogonality(
    orth: &[(&PointResult, &PointResult)],
    nonorth: &[(&PointResult, &PointResult)],
    margin: f64,
    tol: f64,
) -> CheckRecord {
    let mut rec = CheckRecord::new(
        "orthogonality",
        "<x, y> = 0 iff <I(x), I(y)> = 0",
        tol,
    );
    for (i, (px, py)) in orth.iter().enumerate() {
        if px.x.inner(&py.x).op_norm() > tol {
            rec.skipped += 1;
            continue;
        }
        rec.observe(px.image.inner(&py.image).op_norm(), &[i]);
    }
    let forward_checked = rec.checked;
    for (i, (px, py)) in nonorth.iter().enumerate() {
        let m = px.x.inner(&py.x).op_norm();
        if m < margin {
            rec.skipped += 1;
            continue;
        }
        let iixy = px.image.inner(&py.image);
        let certified = (&(&px.sign * &iixy) * &py.sign.adjoint()).op_norm();
        let shortfall = (m - certified).max(m - iixy.op_norm()).max(0.0);
        rec.observe(shortfall, &[orth.len() + i]);
    }
    let backward_checked = rec.checked - forward_checked;
    let mut rec = rec.finish();
    // both directions must actually have been exercised
    rec.pass &= forward_checked > 0 && backward_checked > 0;
    if !rec.pass && rec.witness.is_none() {
        rec.witness = Some(Vec::new());
    }
    rec
}

/// Exact Wigner equation `|<I(x), I(y)>| = |<x, y>|`; only claimed when the
/// target algebra is abelian.
pub fn check_exact_wigner(pairs: &[(&PointResult, &PointResult)], tol: f64) -> Result<CheckRecord> {
    let mut rec = CheckRecord::new("exact_wigner", "|<I(x), I(y)>| = |<x, y>|", tol);
    if let Some((p, _)) = pairs.first() {
        let desc = p.image.descriptor();
        if !desc.algebra().is_abelian() {
            return Err(Error::NotAbelian(desc.algebra().block_sizes().to_vec()));
        }
    }
    for (i, (px, py)) in pairs.iter().enumerate() {
        rec.observe(wigner_defect(&px.image, &py.image, &px.x, &py.x), &[i]);
    }
    Ok(rec.finish())
}

/// `|<F(x), F(y)>| = |<x, y>|` on probe pairs.
pub fn check_limit_modulus(pairs: &[(&PointResult, &PointResult)], tol: f64) -> CheckRecord {
    let mut rec = CheckRecord::new("limit_pairs", "|<F(x), F(y)>| = |<x, y>|", tol);
    for (i, (px, py)) in pairs.iter().enumerate() {
        rec.observe(wigner_defect(&px.limit, &py.limit, &px.x, &py.x), &[i]);
    }
    rec.finish()
}

/// Polarization recovers the inner product from the diagonal values
/// `<z, z>`, so `<x, y>` lies in any *-algebra containing all `<z, z>`.
pub fn check_polarization(pairs: &[(&ModuleElement, &ModuleElement)], tol: f64) -> CheckRecord {
    let mut rec = CheckRecord::new(
        "polarization",
        "<x, y> = 1/4 sum_k conj(i^k) <x + i^k y, x + i^k y>",
        tol,
    );
    for (i, (x, y)) in pairs.iter().enumerate() {
        match polarize(x, y) {
            Ok(p) => rec.observe(p.dist(&x.inner(y)), &[i]),
            Err(_) => rec.observe(f64::INFINITY, &[i]),
        }
    }
    rec.finish()
}

/// Randomized self-test of the algebra and module layers on `samples`
/// seeded draws. Residuals are relative to the natural scale of each identity.
pub fn invariant_suite(desc: &ModuleDescriptor, seed: u64, samples: usize, tol: f64) -> VerificationReport {
    let alg = desc.algebra();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cstar = CheckRecord::new("c_star_identity", "||a* a|| = ||a||^2", tol);
    let mut invol = CheckRecord::new("involution", "(a b)* = b* a*", tol);
    let mut sqrt = CheckRecord::new("pos_sqrt", "r = r*, r >= 0, r^2 = b", tol);
    let mut absu = CheckRecord::new("abs_unitary_invariance", "|u a| = |a|", tol);
    let mut spectral = CheckRecord::new("spectral_reconstruction", "a = U diag(lambda) U*", tol);
    let mut polar = CheckRecord::new("polar_normal", "s |a| = a, s* s |a| = |a|, s* s = s s*", tol);
    let mut pos = CheckRecord::new("inner_positivity", "<x, x> >= 0", tol);
    let mut right = CheckRecord::new("right_linearity", "<x, y a> = <x, y> a", tol);
    let mut herm = CheckRecord::new("inner_adjoint", "<x, y>* = <y, x>", tol);
    let mut cs = CheckRecord::new("cauchy_schwarz", "||<x, y>|| <= ||x|| ||y||", tol);
    let mut pol = CheckRecord::new(
        "polarization",
        "<x, y> = 1/4 sum_k conj(i^k) <x + i^k y, x + i^k y>",
        tol,
    );
    for i in 0..samples {
        let w = [i];
        let a = random::element(alg, &mut rng);
        let b = random::element(alg, &mut rng);
        let an = a.op_norm();
        let scale = an * b.op_norm();
        cstar.observe(((&a.adjoint() * &a).op_norm() - an * an).abs() / an.powi(2).max(1e-300), &w);
        invol.observe((&a * &b).adjoint().dist(&(&b.adjoint() * &a.adjoint())) / scale.max(1e-300), &w);

        let p = random::positive(alg, &mut rng);
        let pn = p.op_norm().max(1e-300);
        match p.pos_sqrt() {
            Ok(r) => {
                let res = ((&r * &r).dist(&p) / pn)
                    .max(r.hermitian_residual() / pn.sqrt())
                    .max(-r.min_hermitian_eigenvalue() / pn.sqrt());
                sqrt.observe(res, &w);
            }
            Err(_) => sqrt.observe(f64::INFINITY, &w),
        }

        let u = random::unitary(alg, &mut rng);
        absu.observe((&u * &a).abs().dist(&a.abs()) / an.max(1e-300), &w);

        let (nrm, _) = random::normal_with_spectrum(alg, &mut rng);
        let nn = nrm.op_norm().max(1e-300);
        match nrm.spectral_decomp_normal(DEFAULT_NORMALITY_TOL) {
            Ok(sd) => spectral.observe(sd.reconstruct().dist(&nrm) / nn, &w),
            Err(_) => spectral.observe(f64::INFINITY, &w),
        }
        match nrm.polar_normal(DEFAULT_RANK_TOL) {
            Ok(pn) => {
                let s = &pn.partial_isometry;
                let m = &pn.modulus;
                let sts = &s.adjoint() * s;
                let res = ((s * m).dist(&nrm) / nn)
                    .max((&sts * m).dist(m) / nn)
                    .max(sts.dist(&(s * &s.adjoint())));
                polar.observe(res, &w);
            }
            Err(_) => polar.observe(f64::INFINITY, &w),
        }

        let x = random::module_element(desc, &mut rng);
        let y = random::module_element(desc, &mut rng);
        let (xn, yn) = (x.norm(), y.norm());
        let xs = (xn * xn).max(1e-300);
        let ys = (xn * yn).max(1e-300);
        let xx = x.inner(&x);
        pos.observe((-xx.min_hermitian_eigenvalue() / xs).max(xx.hermitian_residual() / xs), &w);
        let xy = x.inner(&y);
        right.observe(x.inner(&y.right_mul(&a)).dist(&(&xy * &a)) / (ys * an).max(1e-300), &w);
        herm.observe(xy.adjoint().dist(&y.inner(&x)) / ys, &w);
        cs.observe((xy.op_norm() - xn * yn) / ys, &w);
        match polarize(&x, &y) {
            Ok(v) => pol.observe(v.dist(&xy) / ys, &w),
            Err(_) => pol.observe(f64::INFINITY, &w),
        }
    }
    VerificationReport {
        records: [cstar, invol, sqrt, absu, spectral, polar, pos, right, herm, cs, pol]
            .into_iter()
            .map(CheckRecord::finish)
            .collect(),
    }
}
