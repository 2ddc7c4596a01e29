//! Synthetic inputs for the stability construction: exact Wigner solutions
//! and perturbed maps certified against a control function.
//!
//! An exact solution is `x -> xi(x) * w (x ∘ π)` embedded in the first `k`
//! slots of a target module of rank `k + extra`. Since `w` is unitary and
//! `|xi| = 1`, `<I x, I y> = conj(xi(x)) xi(y) <x, y>`, so `|<Ix, Iy>| = |<x, y>|`.
//!
//! A perturbed map adds `delta ||x||^r d(x)` where `d(x)` is a pseudo-random
//! unit vector derived from a hash of `x` and a seed. By default `d(x)` lives
//! in the `extra` slots, orthogonal to the range of the exact core.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::algebra::AlgebraElement;
use crate::control::{norm_pow, ControlFunction};
use crate::module::{ModuleDescriptor, ModuleElement};
use crate::random;
use crate::verify::{self, CheckRecord};
use crate::{Error, Result, C64};

/// Default number of halvings of `delta` during certification.
pub const DEFAULT_MAX_RETRIES: usize = 10;

/// A mapping between modules that can be evaluated pointwise.
pub trait ModuleMap: Sync {
    fn eval(&self, x: &ModuleElement) -> ModuleElement;
}

/// Unimodular phase `xi(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseRule {
    /// `exp(i theta)` everywhere.
    Constant(f64),
    /// `exp(i alpha log ||x||)`, with `xi(0) = 1`. Scaling `x` by `c^-n`
    /// rotates the phase by `-n alpha log c`.
    Oscillating { alpha: f64 },
}

impl PhaseRule {
    pub fn at_norm(&self, t: f64) -> C64 {
        match *self {
            PhaseRule::Constant(theta) => C64::from_polar(1.0, theta),
            PhaseRule::Oscillating { alpha } => {
                if t == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::from_polar(1.0, alpha * t.ln())
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    source: ModuleDescriptor,
    target: ModuleDescriptor,
    unitary: AlgebraElement,
    permutation: Vec<usize>,
    phase: PhaseRule,
}

impl ExactSolution {
    /// `x -> x` padded into a target of rank `target_rank`.
    pub fn identity(source: &ModuleDescriptor, target_rank: usize) -> Result<Self> {
        if target_rank < source.rank() {
            return Err(Error::InvalidParameter(format!(
                "target rank {target_rank} is smaller than source rank {}",
                source.rank()
            )));
        }
        Ok(Self {
            source: source.clone(),
            target: ModuleDescriptor::new(source.algebra().clone(), target_rank)?,
            unitary: source.algebra().identity(),
            permutation: (0..source.rank()).collect(),
            phase: PhaseRule::Constant(0.0),
        })
    }

    pub fn with_unitary(mut self, w: AlgebraElement) -> Result<Self> {
        if !w.matches(self.source.algebra()) {
            return Err(Error::DescriptorMismatch("unitary has the wrong block structure".into()));
        }
        self.unitary = w;
        Ok(self)
    }

    pub fn with_permutation(mut self, permutation: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; self.source.rank()];
        if permutation.len() != seen.len() {
            return Err(Error::InvalidParameter("permutation length must equal the source rank".into()));
        }
        for &i in &permutation {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("{permutation:?} is not a permutation")));
            }
        }
        self.permutation = permutation;
        Ok(self)
    }

    pub fn with_phase(mut self, phase: PhaseRule) -> Self {
        self.phase = phase;
        self
    }

    pub fn source(&self) -> &ModuleDescriptor {
        &self.source
    }

    pub fn target(&self) -> &ModuleDescriptor {
        &self.target
    }

    pub fn unitary(&self) -> &AlgebraElement {
        &self.unitary
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn phase(&self) -> PhaseRule {
        self.phase
    }

    /// `w (x ∘ π)` in the first `k` target slots; satisfies
    /// `<core x, core y> = <x, y>`.
    pub fn core(&self, x: &ModuleElement) -> ModuleElement {
        let comps = x.components();
        let mut out: Vec<AlgebraElement> = self
            .permutation
            .iter()
            .map(|&j| &self.unitary * &comps[j])
            .collect();
        out.resize(self.target.rank(), self.source.algebra().zero());
        ModuleElement::new(&self.target, out).expect("core image follows the target descriptor")
    }

    pub fn phase_at(&self, x: &ModuleElement) -> C64 {
        self.phase.at_norm(x.norm())
    }
}

impl ModuleMap for ExactSolution {
    fn eval(&self, x: &ModuleElement) -> ModuleElement {
        self.core(x).scale(self.phase_at(x))
    }
}

/// Seeded exact solution: Haar block unitary, random permutation of the
/// slots, and the given phase rule. The target has `extra_rank` additional
/// zero slots.
pub fn make_exact_solution(
    seed: u64,
    source: &ModuleDescriptor,
    extra_rank: usize,
    phase: PhaseRule,
) -> ExactSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random::unitary(source.algebra(), &mut rng);
    let mut perm: Vec<usize> = (0..source.rank()).collect();
    perm.shuffle(&mut rng);
    ExactSolution::identity(source, source.rank() + extra_rank)
        .and_then(|s| s.with_unitary(w))
        .and_then(|s| s.with_permutation(perm))
        .expect("seeded solution is well formed")
        .with_phase(phase)
}

/// Where the perturbation direction `d(x)` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionSpace {
    /// Only the target slots outside the range of the exact core.
    Complement,
    /// All target slots.
    Full,
}

/// `f(x) = xi(x) w (x ∘ π) + delta ||x||^r d(x)` with `||d(x)|| = 1`.
#[derive(Debug, Clone)]
pub struct ApproxMap {
    base: ExactSolution,
    delta: f64,
    exponent: f64,
    seed: u64,
    space: DirectionSpace,
}

impl ApproxMap {
    pub fn base(&self) -> &ExactSolution {
        &self.base
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }

    /// Unit perturbation direction at `x`, a deterministic function of the
    /// bytes of `x` and the seed.
    pub fn direction(&self, x: &ModuleElement) -> ModuleElement {
        let mut hasher = Sha256::new();
        hasher.update(b"wigner-direction");
        hasher.update(self.seed.to_le_bytes());
        hasher.update(x.canonical_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());

        let target = self.base.target();
        let alg = target.algebra();
        let first = match self.space {
            DirectionSpace::Complement => self.base.source().rank(),
            DirectionSpace::Full => 0,
        };
        let comps = (0..target.rank())
            .map(|i| if i < first { alg.zero() } else { random::element(alg, &mut rng) })
            .collect();
        let d = ModuleElement::new(target, comps).expect("direction follows the target descriptor");
        let n = d.norm();
        d.scale_real(1.0 / n)
    }
}

impl ModuleMap for ApproxMap {
    fn eval(&self, x: &ModuleElement) -> ModuleElement {
        let exact = self.base.eval(x);
        if self.delta == 0.0 {
            return exact;
        }
        let amp = self.delta * norm_pow(x.norm(), self.exponent);
        if amp == 0.0 {
            return exact;
        }
        &exact + &self.direction(x).scale_real(amp)
    }
}

/// Perturbation of `base` in the complement of its range.
///
/// When the target has no extra slots the direction falls back to the full
/// module.
pub fn make_perturbation(base: ExactSolution, delta: f64, exponent: f64, seed: u64) -> Result<ApproxMap> {
    let space = if base.target().rank() > base.source().rank() {
        DirectionSpace::Complement
    } else {
        DirectionSpace::Full
    };
    make_perturbation_in(base, delta, exponent, seed, space)
}

pub fn make_perturbation_in(
    base: ExactSolution,
    delta: f64,
    exponent: f64,
    seed: u64,
    space: DirectionSpace,
) -> Result<ApproxMap> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be finite and nonnegative")));
    }
    if !exponent.is_finite() {
        return Err(Error::InvalidParameter("perturbation exponent must be finite".into()));
    }
    if space == DirectionSpace::Complement && base.target().rank() == base.source().rank() {
        return Err(Error::InvalidParameter("complement direction needs extra target slots".into()));
    }
    Ok(ApproxMap {
        base,
        delta,
        exponent,
        seed,
        space,
    })
}

#[derive(Debug, Clone)]
pub struct Certificate {
    /// The approximate Wigner check on the final map.
    pub record: CheckRecord,
    /// Largest `defect / phi` over pairs with finite positive `phi`.
    pub worst_ratio: f64,
    pub retries: usize,
    pub delta: f64,
}

/// Certifies the approximate Wigner condition on `pairs`, halving `delta`
/// up to `max_retries` times until every pair passes.
pub fn assemble_approximate_map(
    f: &ApproxMap,
    phi: &ControlFunction,
    pairs: &[(ModuleElement, ModuleElement)],
    max_retries: usize,
) -> Result<(ApproxMap, Certificate)> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("certification needs at least one pair".into()));
    }
    let mut current = f.clone();
    let mut retries = 0;
    loop {
        let (record, worst_ratio) = verify::check_approx_wigner_with_ratio(&current, pairs, phi);
        if record.pass {
            let delta = current.delta;
            return Ok((
                current,
                Certificate {
                    record,
                    worst_ratio,
                    retries,
                    delta,
                },
            ));
        }
        if retries == max_retries {
            return Err(Error::CannotCertify { retries, worst_ratio });
        }
        retries += 1;
        current = current.with_delta(current.delta / 2.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraDescriptor;
    use crate::verify::wigner_defect;

    fn source() -> ModuleDescriptor {
        ModuleDescriptor::new(AlgebraDescriptor::new(vec![2, 1]).unwrap(), 3).unwrap()
    }

    fn sample(n: usize, seed: u64) -> Vec<ModuleElement> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| random::module_element_with_norm(&source(), 0.5, 1.5, &mut rng))
            .collect()
    }

    fn max_defect<M: ModuleMap>(m: &M, pts: &[ModuleElement]) -> f64 {
        let mut worst: f64 = 0.0;
        for x in pts {
            for y in pts {
                worst = worst.max(wigner_defect(&m.eval(x), &m.eval(y), x, y));
            }
        }
        worst
    }

    #[test]
    fn identity_solution_has_zero_defect() {
        let s = ExactSolution::identity(&source(), 3).unwrap();
        let pts = sample(6, 1);
        assert!(max_defect(&s, &pts) <= 1e-12);
        assert_eq!(s.eval(&pts[0]), pts[0]);
    }

    #[test]
    fn oscillating_phase_solution() {
        let s = ExactSolution::identity(&source(), 3)
            .unwrap()
            .with_phase(PhaseRule::Oscillating { alpha: 1.0 });
        let pts = sample(8, 2);
        assert!(max_defect(&s, &pts) <= 1e-12);
        let x = &pts[0];
        let expected = C64::from_polar(1.0, x.norm().ln());
        assert!((s.phase_at(x) - expected).norm() < 1e-15);
        assert_eq!(s.phase_at(&source().zero()), C64::new(1.0, 0.0));
    }

    #[test]
    fn unitary_and_transposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random::unitary(source().algebra(), &mut rng);
        let s = ExactSolution::identity(&source(), 4)
            .unwrap()
            .with_unitary(w)
            .unwrap()
            .with_permutation(vec![1, 0, 2])
            .unwrap();
        let pts = sample(8, 4);
        assert!(max_defect(&s, &pts) <= 1e-12);
        for x in &pts {
            for y in &pts {
                assert!(s.core(x).inner(&s.core(y)).dist(&x.inner(y)) <= 1e-12);
            }
        }
        assert!(ExactSolution::identity(&source(), 3).unwrap().with_permutation(vec![0, 0, 1]).is_err());
        assert!(ExactSolution::identity(&source(), 2).is_err());
    }

    #[test]
    fn seeded_solution_is_reproducible() {
        let a = make_exact_solution(9, &source(), 1, PhaseRule::Constant(0.3));
        let b = make_exact_solution(9, &source(), 1, PhaseRule::Constant(0.3));
        let x = &sample(1, 5)[0];
        assert_eq!(a.eval(x), b.eval(x));
        assert!(a.unitary().classify(1e-12).partial_isometry);
        assert!((&a.unitary().adjoint() * a.unitary()).dist(&source().algebra().identity()) <= 1e-12);
        assert_eq!(a.target().rank(), 4);
    }

    #[test]
    fn zero_delta_matches_base() {
        let base = make_exact_solution(1, &source(), 1, PhaseRule::Oscillating { alpha: 0.5 });
        let f = make_perturbation(base.clone(), 0.0, 2.0, 7).unwrap();
        for x in sample(5, 6) {
            assert_eq!(f.eval(&x), base.eval(&x));
        }
    }

    #[test]
    fn perturbation_size_and_determinism() {
        let base = make_exact_solution(1, &source(), 2, PhaseRule::Constant(0.0));
        let f = make_perturbation(base.clone(), 1e-2, 2.0, 7).unwrap();
        for x in sample(5, 7) {
            let diff = f.eval(&x).dist(&base.eval(&x));
            let expected = 1e-2 * x.norm().powi(2);
            assert!((diff - expected).abs() <= 1e-14, "{diff} vs {expected}");
            assert_eq!(f.eval(&x), f.eval(&x));
            // direction stays out of the core's range
            assert!(f.direction(&x).inner(&base.core(&x)).op_norm() == 0.0);
        }
        assert!(make_perturbation(base.clone(), -1.0, 2.0, 7).is_err());
        assert!(make_perturbation(base.clone(), f64::NAN, 2.0, 7).is_err());
    }

    #[test]
    fn scaled_iterate_perturbation_decays_geometrically() {
        let base = make_exact_solution(1, &source(), 1, PhaseRule::Constant(0.0));
        let (delta, r, c) = (1e-3, 2.0, 2.0f64);
        let f = make_perturbation(base.clone(), delta, r, 7).unwrap();
        let x = &sample(1, 8)[0];
        for n in 0..20 {
            let scaled = x.scale_real(c.powi(-n));
            let diff = f.eval(&scaled).scale_real(c.powi(n)).dist(&base.eval(&scaled).scale_real(c.powi(n)));
            let expected = c.powf(n as f64 * (1.0 - r)) * delta * x.norm().powf(r);
            assert!((diff - expected).abs() <= 1e-12 * expected, "n = {n}");
        }
    }

    fn all_pairs(pts: &[ModuleElement]) -> Vec<(ModuleElement, ModuleElement)> {
        let mut out = Vec::new();
        for (i, x) in pts.iter().enumerate() {
            for y in &pts[i..] {
                out.push((x.clone(), y.clone()));
            }
        }
        out
    }

    #[test]
    fn certification_first_pass_and_zero_delta() {
        let base = make_exact_solution(2, &source(), 1, PhaseRule::Oscillating { alpha: 1.0 });
        let phi = ControlFunction::power(1e-2, 2.0, 2.0, 2.0).unwrap();
        let pairs = all_pairs(&sample(8, 9));

        let f0 = make_perturbation(base.clone(), 0.0, 2.0, 1).unwrap();
        let (_, cert) = assemble_approximate_map(&f0, &phi, &pairs, DEFAULT_MAX_RETRIES).unwrap();
        assert!(cert.worst_ratio <= 1e-10);
        assert_eq!(cert.retries, 0);

        let f = make_perturbation(base, 1e-3, 2.0, 1).unwrap();
        let (g, cert) = assemble_approximate_map(&f, &phi, &pairs, DEFAULT_MAX_RETRIES).unwrap();
        assert_eq!(cert.retries, 0);
        assert_eq!(g.delta(), 1e-3);
        assert!(cert.worst_ratio < 1.0);
    }

    #[test]
    fn certification_halves_then_gives_up() {
        let base = make_exact_solution(2, &source(), 1, PhaseRule::Constant(0.0));
        let phi = ControlFunction::power(1e-2, 2.0, 2.0, 2.0).unwrap();
        let pairs = all_pairs(&sample(6, 10));
        let f = make_perturbation(base.clone(), 1.0, 2.0, 1).unwrap();
        let (g, cert) = assemble_approximate_map(&f, &phi, &pairs, DEFAULT_MAX_RETRIES).unwrap();
        assert!(cert.retries > 0);
        assert!(g.delta() < 1.0);

        let tiny = ControlFunction::power(1e-6, 2.0, 2.0, 2.0).unwrap();
        let big = make_perturbation(base, 1e3, 2.0, 1).unwrap();
        assert!(matches!(
            assemble_approximate_map(&big, &tiny, &pairs, DEFAULT_MAX_RETRIES),
            Err(Error::CannotCertify { .. })
        ));
    }

    #[test]
    fn infinite_control_is_vacuous() {
        let base = make_exact_solution(2, &source(), 1, PhaseRule::Constant(0.0));
        let f = make_perturbation(base, 0.5, 0.5, 1).unwrap();
        let phi = ControlFunction::power(1e-3, -1.0, 0.5, 0.5).unwrap();
        let x = sample(1, 11).remove(0);
        let zero = source().zero();
        let (_, cert) = assemble_approximate_map(&f, &phi, &[(zero, x)], 0).unwrap();
        assert_eq!(cert.record.vacuous, 1);
    }
}
