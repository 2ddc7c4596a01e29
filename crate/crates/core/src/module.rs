//! Standard inner product modules `A^k` over a block matrix algebra `A`.
//!
//! The module is a right `A`-module with `(x a)_i = x_i a` and the
//! `A`-valued inner product `<x, y> = sum_i x_i* y_i`, which is
//! conjugate-linear in the first argument.

use crate::algebra::{AlgebraDescriptor, AlgebraElement};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModuleDescriptor {
    algebra: AlgebraDescriptor,
    rank: usize,
}

impl ModuleDescriptor {
    pub fn new(algebra: AlgebraDescriptor, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidDescriptor("module rank must be at least 1".into()));
        }
        Ok(Self { algebra, rank })
    }

    pub fn algebra(&self) -> &AlgebraDescriptor {
        &self.algebra
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn zero(&self) -> ModuleElement {
        ModuleElement {
            components: vec![self.algebra.zero(); self.rank],
        }
    }

    /// `a` in slot `i`, zeros elsewhere.
    pub fn slot(&self, i: usize, a: AlgebraElement) -> Result<ModuleElement> {
        if i >= self.rank {
            return Err(Error::DescriptorMismatch(format!("slot {i} out of range for rank {}", self.rank)));
        }
        if !a.matches(&self.algebra) {
            return Err(Error::DescriptorMismatch("slot element has the wrong block structure".into()));
        }
        let mut x = self.zero();
        x.components[i] = a;
        Ok(x)
    }

    /// The standard basis element `e_i` (identity in slot `i`).
    pub fn basis(&self, i: usize) -> Result<ModuleElement> {
        self.slot(i, self.algebra.identity())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleElement {
    components: Vec<AlgebraElement>,
}

impl ModuleElement {
    pub fn new(desc: &ModuleDescriptor, components: Vec<AlgebraElement>) -> Result<Self> {
        if components.len() != desc.rank {
            return Err(Error::DescriptorMismatch(format!(
                "expected {} components, got {}",
                desc.rank,
                components.len()
            )));
        }
        if let Some(i) = components.iter().position(|c| !c.matches(&desc.algebra)) {
            return Err(Error::DescriptorMismatch(format!("component {i} has the wrong block structure")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[AlgebraElement] {
        &self.components
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn descriptor(&self) -> ModuleDescriptor {
        ModuleDescriptor {
            algebra: self.components[0].descriptor(),
            rank: self.components.len(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.components.len() == other.components.len()
            && self.components[0].same_shape(&other.components[0])
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DescriptorMismatch(format!(
                "module elements of rank {} and {} (or different algebras)",
                self.rank(),
                other.rank()
            )))
        }
    }

    /// `<self, y> = sum_i self_i* y_i`. Panics on shape mismatch; see [`ip`].
    pub fn inner(&self, y: &Self) -> AlgebraElement {
        ip(self, y).expect("module element shapes must match")
    }

    /// `||x|| = sqrt(||<x, x>||)`.
    pub fn norm(&self) -> f64 {
        self.inner(self).op_norm().sqrt()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    /// Right action `x a`.
    pub fn right_mul(&self, a: &AlgebraElement) -> Self {
        right_act(self, a).expect("algebra element must match the module's algebra")
    }

    pub fn scale(&self, lambda: C64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scale(lambda)).collect(),
        }
    }

    pub fn scale_real(&self, t: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scale_real(t)).collect(),
        }
    }

    /// Left multiplication of every component by `w`.
    pub fn left_mul(&self, w: &AlgebraElement) -> Self {
        Self {
            components: self.components.iter().map(|c| w * c).collect(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a - b).collect(),
        })
    }

    /// Zero iff `||x|| <= tol`.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.norm() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(AlgebraElement::is_finite)
    }

    /// Copy padded with zero components up to `rank` (an isometric embedding
    /// `A^k -> A^rank`).
    pub fn padded(&self, rank: usize) -> Self {
        let mut components = self.components.clone();
        let zero = self.components[0].descriptor().zero();
        components.resize(rank, zero);
        Self { components }
    }

    /// Little-endian bytes of every entry (column-major per block, real part
    /// first). Negative zero is normalized so equal points serialize equally.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for comp in &self.components {
            for block in comp.blocks() {
                out.extend_from_slice(&(block.nrows() as u64).to_le_bytes());
                for z in block.iter() {
                    out.extend_from_slice(&(z.re + 0.0).to_le_bytes());
                    out.extend_from_slice(&(z.im + 0.0).to_le_bytes());
                }
            }
        }
        out
    }
}

/// `<x, y> = sum_i x_i* y_i`.
pub fn ip(x: &ModuleElement, y: &ModuleElement) -> Result<AlgebraElement> {
    x.check_shape(y)?;
    let mut acc = x.components[0].descriptor().zero();
    for (a, b) in x.components.iter().zip(&y.components) {
        acc = &acc + &(&a.adjoint() * b);
    }
    Ok(acc)
}

/// Right action `x a`, component-wise `x_i a`.
pub fn right_act(x: &ModuleElement, a: &AlgebraElement) -> Result<ModuleElement> {
    if !x.components[0].same_shape(a) {
        return Err(Error::DescriptorMismatch("right action by an element of another algebra".into()));
    }
    Ok(ModuleElement {
        components: x.components.iter().map(|c| c * a).collect(),
    })
}

/// Polarization: `(1/4) sum_{k=0}^{3} conj(i^k) <x + i^k y, x + i^k y> = <x, y>`.
///
/// Weighting by `i^k` instead of `conj(i^k)` yields `<y, x> = <x, y>*`,
/// because the inner product is conjugate-linear in its first argument.
/// Both land in the same *-closed algebra.
pub fn polarize(x: &ModuleElement, y: &ModuleElement) -> Result<AlgebraElement> {
    x.check_shape(y)?;
    let phases = [
        C64::new(1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, -1.0),
    ];
    let mut acc = x.components[0].descriptor().zero();
    for ik in phases {
        let z = x.checked_add(&y.scale(ik))?;
        acc = &acc + &z.inner(&z).scale(ik.conj());
    }
    Ok(acc.scale_real(0.25))
}

impl std::ops::Add<&ModuleElement> for &ModuleElement {
    type Output = ModuleElement;

    fn add(self, rhs: &ModuleElement) -> ModuleElement {
        self.checked_add(rhs).expect("module element shapes must match")
    }
}

impl std::ops::Sub<&ModuleElement> for &ModuleElement {
    type Output = ModuleElement;

    fn sub(self, rhs: &ModuleElement) -> ModuleElement {
        self.checked_sub(rhs).expect("module element shapes must match")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desc() -> ModuleDescriptor {
        ModuleDescriptor::new(AlgebraDescriptor::new(vec![2, 1]).unwrap(), 3).unwrap()
    }

    #[test]
    fn basis_inner_products() {
        let d = desc();
        let e1 = d.basis(0).unwrap();
        let e2 = d.basis(1).unwrap();
        assert_eq!(e1.inner(&e1), d.algebra().identity());
        assert_eq!(e1.inner(&e2).op_norm(), 0.0);
        assert!((e1.norm() - 1.0).abs() < 1e-15);
        assert!(d.basis(3).is_err());
    }

    #[test]
    fn rank_zero_and_mismatch() {
        assert!(ModuleDescriptor::new(AlgebraDescriptor::new(vec![1]).unwrap(), 0).is_err());
        let d = desc();
        let other = ModuleDescriptor::new(AlgebraDescriptor::new(vec![2, 1]).unwrap(), 2).unwrap();
        assert!(ip(&d.zero(), &other.zero()).is_err());
        let wrong_alg = AlgebraDescriptor::new(vec![3]).unwrap().identity();
        assert!(right_act(&d.basis(0).unwrap(), &wrong_alg).is_err());
        assert!(ModuleElement::new(&d, vec![wrong_alg]).is_err());
    }

    #[test]
    fn involution_axiom_and_homogeneity() {
        let d = desc();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random::module_element(&d, &mut rng);
            let y = random::module_element(&d, &mut rng);
            assert!(x.inner(&y).adjoint().dist(&y.inner(&x)) <= 1e-12);
            let lambda = C64::new(-1.3, 0.7);
            let lhs = x.scale(lambda).norm();
            assert!((lhs - lambda.norm() * x.norm()).abs() <= 1e-12 * (1.0 + lhs));
        }
    }

    #[test]
    fn right_action_examples() {
        let d = desc();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random::module_element(&d, &mut rng);
        assert_eq!(x.right_mul(&d.algebra().identity()), x);
        assert_eq!(x.right_mul(&d.algebra().zero()).norm(), 0.0);
        for _ in 0..50 {
            let y = random::module_element(&d, &mut rng);
            let z = random::module_element(&d, &mut rng);
            let a = random::element(d.algebra(), &mut rng);
            let lhs = z.inner(&y.right_mul(&a));
            let rhs = &z.inner(&y) * &a;
            assert!(lhs.dist(&rhs) <= 1e-12 * (1.0 + rhs.op_norm()));
        }
    }

    #[test]
    fn cauchy_schwarz_on_random_pairs() {
        let d = desc();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = random::module_element(&d, &mut rng);
            let y = random::module_element(&d, &mut rng);
            assert!(x.inner(&y).op_norm() <= x.norm() * y.norm() + 1e-12);
        }
    }

    // Expands <x + i^k y, x + i^k y> by hand into its four inner products.
    fn polarize_by_expansion(x: &ModuleElement, y: &ModuleElement) -> AlgebraElement {
        let xx = x.inner(x);
        let xy = x.inner(y);
        let yx = y.inner(x);
        let yy = y.inner(y);
        let mut acc = xx.descriptor().zero();
        for k in 0..4 {
            let ik = C64::new(0.0, 1.0).powi(k);
            // <x + w y, x + w y> = xx + w xy + conj(w) yx + |w|^2 yy
            let term = &(&(&xx + &xy.scale(ik)) + &yx.scale(ik.conj())) + &yy;
            acc = &acc + &term.scale(ik.conj());
        }
        acc.scale_real(0.25)
    }

    #[test]
    fn polarization_examples() {
        let d = desc();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random::module_element(&d, &mut rng);
        assert!(polarize(&x, &x).unwrap().dist(&x.inner(&x)) <= 1e-12);

        let a = random::element(d.algebra(), &mut rng);
        let b = random::element(d.algebra(), &mut rng);
        let u = d.slot(0, a).unwrap();
        let v = d.slot(2, b).unwrap();
        assert!(polarize(&u, &v).unwrap().op_norm() <= 1e-12);

        for _ in 0..50 {
            let x = random::module_element(&d, &mut rng);
            let y = random::module_element(&d, &mut rng);
            let p = polarize(&x, &y).unwrap();
            assert!(p.dist(&x.inner(&y)) <= 1e-10);
            assert!(p.dist(&polarize_by_expansion(&x, &y)) <= 1e-10);
        }
    }

    #[test]
    fn unconjugated_weights_give_the_adjoint() {
        let d = desc();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random::module_element(&d, &mut rng);
        let y = random::module_element(&d, &mut rng);
        let mut acc = d.algebra().zero();
        for k in 0..4 {
            let ik = C64::new(0.0, 1.0).powi(k);
            let z = &x + &y.scale(ik);
            acc = &acc + &z.inner(&z).scale(ik);
        }
        let acc = acc.scale_real(0.25);
        assert!(acc.dist(&y.inner(&x)) <= 1e-10);
    }

    #[test]
    fn canonical_bytes_are_stable() {
        let d = desc();
        let x = d.basis(1).unwrap();
        let neg_zero = x.scale_real(-1.0).scale_real(-1.0);
        assert_eq!(x.canonical_bytes(), neg_zero.canonical_bytes());
        assert_ne!(x.canonical_bytes(), d.basis(0).unwrap().canonical_bytes());
    }

    #[test]
    fn padding_is_isometric() {
        let d = desc();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random::module_element(&d, &mut rng);
        let y = random::module_element(&d, &mut rng);
        let (px, py) = (x.padded(5), y.padded(5));
        assert_eq!(px.rank(), 5);
        assert!(px.inner(&py).dist(&x.inner(&y)) <= 1e-15);
    }
}
