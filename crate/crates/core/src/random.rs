//! Seeded samplers for algebra and module elements.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::algebra::{AlgebraDescriptor, AlgebraElement};
use crate::module::{ModuleDescriptor, ModuleElement};
use crate::C64;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_block<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| gaussian(rng))
}

/// Element with i.i.d. standard complex Gaussian entries.
pub fn element<R: Rng + ?Sized>(desc: &AlgebraDescriptor, rng: &mut R) -> AlgebraElement {
    let blocks = desc.block_sizes().iter().map(|&n| gaussian_block(n, rng)).collect();
    AlgebraElement::from_blocks(blocks).expect("descriptor blocks are valid")
}

/// Haar-distributed block unitary (QR of a Gaussian block with the phase of
/// `diag(R)` pushed into `Q`).
pub fn unitary<R: Rng + ?Sized>(desc: &AlgebraDescriptor, rng: &mut R) -> AlgebraElement {
    let blocks = desc
        .block_sizes()
        .iter()
        .map(|&n| {
            let qr = gaussian_block(n, rng).qr();
            let r = qr.r();
            let mut q = qr.q();
            for j in 0..n {
                let d = r[(j, j)];
                let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
                let mut col = q.column_mut(j);
                col *= phase;
            }
            q
        })
        .collect();
    AlgebraElement::from_blocks(blocks).expect("descriptor blocks are valid")
}

/// `b*b` for a Gaussian `b`.
pub fn positive<R: Rng + ?Sized>(desc: &AlgebraDescriptor, rng: &mut R) -> AlgebraElement {
    let b = element(desc, rng);
    &b.adjoint() * &b
}

/// `w diag(λ) w*` for a random unitary `w`. Roughly a quarter of the
/// eigenvalues are exactly zero, the rest have modulus in `[0.2, 2]`.
/// Returns the element and the concatenated spectrum.
pub fn normal_with_spectrum<R: Rng + ?Sized>(
    desc: &AlgebraDescriptor,
    rng: &mut R,
) -> (AlgebraElement, Vec<C64>) {
    let w = unitary(desc, rng);
    let modulus = Uniform::new(0.2, 2.0);
    let angle = Uniform::new(0.0, std::f64::consts::TAU);
    let mut spectrum = Vec::with_capacity(desc.matrix_size());
    let blocks = desc
        .block_sizes()
        .iter()
        .zip(w.blocks())
        .map(|(&n, wb)| {
            let lambdas: Vec<C64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.25) {
                        C64::new(0.0, 0.0)
                    } else {
                        C64::from_polar(modulus.sample(rng), angle.sample(rng))
                    }
                })
                .collect();
            spectrum.extend_from_slice(&lambdas);
            wb * DMatrix::from_diagonal(&DVector::from_vec(lambdas)) * wb.adjoint()
        })
        .collect();
    (
        AlgebraElement::from_blocks(blocks).expect("descriptor blocks are valid"),
        spectrum,
    )
}

/// Module element with Gaussian components.
pub fn module_element<R: Rng + ?Sized>(desc: &ModuleDescriptor, rng: &mut R) -> ModuleElement {
    let comps = (0..desc.rank()).map(|_| element(desc.algebra(), rng)).collect();
    ModuleElement::new(desc, comps).expect("components follow the descriptor")
}

/// Module element rescaled so that its module norm is uniform in `[lo, hi]`.
pub fn module_element_with_norm<R: Rng + ?Sized>(
    desc: &ModuleDescriptor,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> ModuleElement {
    let x = module_element(desc, rng);
    let target = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let n = x.norm();
    x.scale_real(target / n)
}
