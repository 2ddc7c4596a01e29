use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wigner_core::algebra::AlgebraDescriptor;
use wigner_core::control::ControlFunction;
use wigner_core::mapgen::{make_exact_solution, make_perturbation, ModuleMap, PhaseRule};
use wigner_core::module::{polarize, ModuleDescriptor};
use wigner_core::random;
use wigner_core::stability::{iterate_scaled, StabilityParams};
use wigner_core::verify::wigner_defect;

fn blocks() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 1..=3)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn c_star_identity(b in blocks(), seed in any::<u64>()) {
        let d = AlgebraDescriptor::new(b).unwrap();
        let a = random::element(&d, &mut rng(seed));
        let n = a.op_norm();
        prop_assert!(((&a.adjoint() * &a).op_norm() - n * n).abs() <= 1e-9 * n * n);
        prop_assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn pos_sqrt_squares_back(b in blocks(), seed in any::<u64>()) {
        let d = AlgebraDescriptor::new(b).unwrap();
        let p = random::positive(&d, &mut rng(seed));
        let r = p.pos_sqrt().unwrap();
        prop_assert!((&r * &r).dist(&p) <= 1e-10 * (1.0 + p.op_norm()));
    }

    #[test]
    fn polar_support_is_a_normal_projection(b in blocks(), seed in any::<u64>()) {
        let d = AlgebraDescriptor::new(b).unwrap();
        let (a, _) = random::normal_with_spectrum(&d, &mut rng(seed));
        let pn = a.polar_normal(1e-8).unwrap();
        let s = &pn.partial_isometry;
        let p = &s.adjoint() * s;
        prop_assert!(p.projection_residual() <= 1e-9);
        prop_assert!(p.dist(&(s * &s.adjoint())) <= 1e-9);
        prop_assert!((s * &pn.modulus).dist(&a) <= 1e-9 * (1.0 + a.op_norm()));
    }

    #[test]
    fn spectral_reconstruction(b in blocks(), seed in any::<u64>()) {
        let d = AlgebraDescriptor::new(b).unwrap();
        let (a, _) = random::normal_with_spectrum(&d, &mut rng(seed));
        let sd = a.spectral_decomp_normal(1e-6).unwrap();
        prop_assert!(sd.reconstruct().dist(&a) <= 1e-9 * a.op_norm().max(1e-300));
        prop_assert!(sd.unitarity_residual() <= 1e-9);
    }

    #[test]
    fn abs_is_left_unitary_invariant(b in blocks(), seed in any::<u64>()) {
        let d = AlgebraDescriptor::new(b).unwrap();
        let mut g = rng(seed);
        let a = random::element(&d, &mut g);
        let u = random::unitary(&d, &mut g);
        prop_assert!((&u * &a).abs().dist(&a.abs()) <= 1e-9 * (1.0 + a.op_norm()));
    }

    #[test]
    fn module_axioms(b in blocks(), k in 1usize..=3, seed in any::<u64>()) {
        let d = ModuleDescriptor::new(AlgebraDescriptor::new(b).unwrap(), k).unwrap();
        let mut g = rng(seed);
        let x = random::module_element(&d, &mut g);
        let y = random::module_element(&d, &mut g);
        let z = random::module_element(&d, &mut g);
        let a = random::element(d.algebra(), &mut g);
        let lambda = wigner_core::C64::new(0.3, -1.2);
        let xx = x.inner(&x);
        let scale = 1.0 + x.norm() * (1.0 + y.norm() + z.norm()) * (1.0 + a.op_norm());
        prop_assert!(xx.classify(1e-10).positive);
        // (ii) linear in the second argument
        let lin = x.inner(&(&y.scale(lambda) + &z));
        prop_assert!(lin.dist(&(&x.inner(&y).scale(lambda) + &x.inner(&z))) <= 1e-10 * scale);
        // (iii) and (iv)
        prop_assert!(x.inner(&y.right_mul(&a)).dist(&(&x.inner(&y) * &a)) <= 1e-10 * scale);
        prop_assert!(x.inner(&y).adjoint().dist(&y.inner(&x)) <= 1e-10 * scale);
        prop_assert!(polarize(&x, &y).unwrap().dist(&x.inner(&y)) <= 1e-10 * scale);
    }

    #[test]
    fn power_scaling_identity(
        eps in 1e-4f64..1.0,
        p in 1.1f64..3.0,
        q in 1.1f64..3.0,
        nx in 0.1f64..10.0,
        ny in 0.1f64..10.0,
        n in 0i32..30,
    ) {
        let c = 2.0f64;
        let phi = ControlFunction::power(eps, p, q, c).unwrap();
        let lhs = c.powi(n) * phi.eval(c.powi(-n) * nx, ny);
        let rhs = c.powf(n as f64 * (1.0 - p)) * phi.eval(nx, ny);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn exact_solutions_are_wigner(b in blocks(), seed in any::<u64>(), extra in 0usize..=2) {
        let d = ModuleDescriptor::new(AlgebraDescriptor::new(b).unwrap(), 2).unwrap();
        let s = make_exact_solution(seed, &d, extra, PhaseRule::Oscillating { alpha: 1.7 });
        let mut g = rng(seed ^ 1);
        let x = random::module_element(&d, &mut g);
        let y = random::module_element(&d, &mut g);
        let scale = 1.0 + x.norm() * y.norm();
        prop_assert!(wigner_defect(&s.eval(&x), &s.eval(&y), &x, &y) <= 1e-11 * scale);
    }

    #[test]
    fn perturbed_maps_are_deterministic(seed in any::<u64>(), delta in 0.0f64..1e-2) {
        let d = ModuleDescriptor::new(AlgebraDescriptor::new(vec![2, 1]).unwrap(), 2).unwrap();
        let base = make_exact_solution(seed, &d, 1, PhaseRule::Constant(0.4));
        let f = make_perturbation(base.clone(), delta, 2.0, seed).unwrap();
        let g = make_perturbation(base, delta, 2.0, seed).unwrap();
        let x = random::module_element(&d, &mut rng(seed));
        prop_assert_eq!(f.eval(&x).canonical_bytes(), g.eval(&x).canonical_bytes());
    }

    #[test]
    fn iterate_envelope(seed in any::<u64>(), delta in 0.0f64..1e-2) {
        let d = ModuleDescriptor::new(AlgebraDescriptor::new(vec![1, 2]).unwrap(), 2).unwrap();
        let base = make_exact_solution(seed, &d, 1, PhaseRule::Oscillating { alpha: 0.9 });
        let f = make_perturbation(base, delta, 2.0, seed).unwrap();
        let phi = ControlFunction::power(delta.max(1e-12) * 3.0, 2.0, 2.0, 2.0).unwrap();
        let x = random::module_element_with_norm(&d, 0.5, 1.5, &mut rng(seed));
        let params = StabilityParams { n_max: 20, ..StabilityParams::default() };
        let it = iterate_scaled(&f, &x, &params).unwrap();
        for (n, defect) in it.diag_defects.iter().enumerate() {
            let t = 2f64.powi(-(n as i32));
            let bound = 4f64.powi(n as i32) * phi.eval(t * x.norm(), t * x.norm());
            prop_assert!(*defect <= bound + 1e-9, "n = {}: {} > {}", n, defect, bound);
        }
    }
}

#[test]
fn cauchy_schwarz_on_many_pairs() {
    let d = ModuleDescriptor::new(AlgebraDescriptor::new(vec![2, 1]).unwrap(), 3).unwrap();
    let mut g = rng(2024);
    let mut violations = 0;
    for _ in 0..1000 {
        let x = random::module_element(&d, &mut g);
        let y = random::module_element(&d, &mut g);
        if x.inner(&y).op_norm() > x.norm() * y.norm() + 1e-12 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
