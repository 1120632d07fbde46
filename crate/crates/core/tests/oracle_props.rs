//! Property checks against the independent Simpson oracle: the oracle itself
//! reproduces the known fixture values, and the engine's evaluated averaged
//! function agrees with direct quadrature of its defining integrand.

mod support;

use pwsavg::averaging::{example1_perturbation, example2_perturbation};
use pwsavg::{averaged_generic, CircleProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn oracle_reproduces_example1_polynomial() {
    let pert = example1_perturbation();
    let plus: Vec<_> = pert.plus().collect();
    let minus: Vec<_> = pert.minus().collect();
    // psi = r (r - z0): check a few direct values
    for (r, z0) in [(1.0, 0.0), (2.0, 2.0), (3.0, 1.0), (0.5, -1.5)] {
        let got = support::oracle_psi(&plus, &minus, support::i_h_zero, r, z0, 1e-13);
        let want = r * (r - z0);
        assert!((got - want).abs() < 1e-11, "oracle psi({r}, {z0}) = {got}");
    }
}

#[test]
fn oracle_linear_solver_is_exact_on_small_systems() {
    let a = vec![
        vec![2.0, 1.0, -1.0],
        vec![-3.0, -1.0, 2.0],
        vec![-2.0, 1.0, 2.0],
    ];
    let x = support::solve_dense(a, vec![8.0, -11.0, -3.0]);
    assert!((x[0] - 2.0).abs() < 1e-12);
    assert!((x[1] - 3.0).abs() < 1e-12);
    assert!((x[2] + 1.0).abs() < 1e-12);
}

#[test]
fn evaluated_polynomial_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (profile, i_h) in [
        (CircleProfile::zero(), support::i_h_zero as fn(f64) -> f64),
        (CircleProfile::cos_theta(), support::i_h_cos as fn(f64) -> f64),
    ] {
        for _ in 0..10 {
            let degree = rng.gen_range(1..=4);
            let pert = support::random_pert(degree, 1.5, &mut rng);
            let poly = averaged_generic(&pert, &profile).unwrap();
            let plus: Vec<_> = pert.plus().collect();
            let minus: Vec<_> = pert.minus().collect();
            for _ in 0..2 {
                let r = rng.gen_range(0.2..3.0);
                let z0 = rng.gen_range(-2.0..2.0);
                let via_poly = poly.eval(r, z0).unwrap();
                let via_quad = support::oracle_psi(&plus, &minus, i_h, r, z0, 1e-12);
                assert!(
                    (via_poly - via_quad).abs() <= 1e-8,
                    "psi({r}, {z0}): poly {via_poly} vs quadrature {via_quad}"
                );
            }
        }
    }
}

#[test]
fn example2_locus_radius_follows_the_recomputed_constant() {
    // the traced circle has radius sqrt(9 - C00) about (3, 0); with the
    // recomputed constant 8.5 that is sqrt(1/2)
    let poly = averaged_generic(&example2_perturbation(), &CircleProfile::cos_theta()).unwrap();
    let radius_sq = 9.0 - poly.coeff(0, 0);
    assert!((radius_sq - 0.5).abs() < 1e-9);
}
