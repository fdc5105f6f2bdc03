use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lgvortex_core::{
    analytic_translation_modes, assemble_d, bosonic_residual, fermion_to_boson, sample_background, smallest_singulars,
    solve_profile, subspace_overlap, translation_mode_overlap, translation_modes, FluctuationPair, Layout, ProfileMethod,
    RadialProfile, Scheme, Sector, StateVector, VortexParams,
};

fn kernel(n: i64, m: usize) -> (RadialProfile, lgvortex_core::Background2D, Vec<StateVector>) {
    let p = solve_profile(VortexParams::new(n, 1.0, 1.0), ProfileMethod::Shooting).unwrap();
    let bg = sample_background(&p, m).unwrap();
    let d = assemble_d(&bg, Scheme::Central2).unwrap();
    let report = smallest_singulars(&d, 2 * n as usize + 4, 1e-3, 0).unwrap();
    assert_eq!(report.kernel_count, 2 * n as usize);
    (p, bg, report.kernel_basis())
}

/// Smooth localized fields that solve nothing in particular.
fn bump_modes(layout: &Arc<Layout>) -> Vec<StateVector> {
    let shapes: [fn(f64, f64) -> [Complex64; 2]; 2] = [
        |x, y| {
            let g = (-(x * x + y * y) / 2.0).exp();
            [Complex64::new(x * g, 0.3 * y * g), Complex64::new(0.5 * g, 0.0)]
        },
        |x, y| {
            let g = (-((x - 1.0).powi(2) + y * y) / 3.0).exp();
            [Complex64::new(0.0, g), Complex64::new(y * g, -x * g)]
        },
    ];
    shapes
        .iter()
        .map(|s| {
            let values = (0..layout.n_points()).flat_map(|p| {
                let (x, y) = layout.xy(p);
                s(x, y)
            });
            StateVector::new(values.collect(), Sector::FermionLower, layout.clone()).unwrap()
        })
        .collect()
}

/// Sums of Gaussians with seeded random centres and complex amplitudes.
fn random_smooth_modes(layout: &Arc<Layout>, count: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let terms: Vec<(f64, f64, Complex64, Complex64)> = (0..6)
                .map(|_| {
                    let c = |rng: &mut ChaCha8Rng| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    (rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0), c(&mut rng), c(&mut rng))
                })
                .collect();
            StateVector::from_fn(Sector::FermionLower, layout.clone(), |x, y| {
                terms.iter().fold([Complex64::new(0.0, 0.0); 2], |acc, &(cx, cy, a, b)| {
                    let g = (-((x - cx).powi(2) + (y - cy).powi(2)) / 2.0).exp();
                    [acc[0] + a * g, acc[1] + b * g]
                })
            })
        })
        .collect()
}

#[test]
fn mapped_zero_modes_solve_the_linearized_equations() {
    for n in 1..=2 {
        let (_, bg, basis) = kernel(n, 96);
        let mut worst_mode = 0.0f64;
        for mode in &basis {
            let pair = fermion_to_boson(mode).unwrap();
            let r = bosonic_residual(&pair, &bg).unwrap();
            assert!(r <= 1e-3 * mode.norm(), "n={n}: residual {r:e} vs norm {:e}", mode.norm());
            worst_mode = worst_mode.max(r / mode.norm());
        }
        // A generic smooth fluctuation is far from a solution.
        for bump in bump_modes(&basis[0].layout) {
            let pair = fermion_to_boson(&bump).unwrap();
            let r = bosonic_residual(&pair, &bg).unwrap() / bump.norm();
            assert!(r > 100.0 * worst_mode, "n={n}: bump residual {r:e}, zero modes {worst_mode:e}");
        }
    }
}

#[test]
fn fluctuation_fields_match_the_fermionic_components() {
    let (_, _, basis) = kernel(1, 96);
    let pair = fermion_to_boson(&basis[0]).unwrap();
    let b = pair.gauge();
    let (da1, da2) = (pair.delta_a1(), pair.delta_a2());
    for p in 0..basis[0].layout.n_points() {
        assert_eq!(pair.delta_phi[p], basis[0].component(p, 0));
        let expected = basis[0].component(p, 1) * Complex64::new(0.0, -std::f64::consts::SQRT_2);
        assert!((b[p] - expected).norm() <= 1e-15 * expected.norm().max(1e-300));
        assert!((Complex64::new(da1[p], da2[p]) - b[p]).norm() <= 1e-15 * b[p].norm().max(1e-300));
    }
    let built = FluctuationPair::from_fields(pair.delta_phi.clone(), &b, pair.layout.clone()).unwrap();
    for (x, y) in built.gauge_scaled.iter().zip(&pair.gauge_scaled) {
        assert!((x - y).norm() <= 1e-15 * y.norm().max(1e-300));
    }
}

#[test]
fn kernel_contains_the_translation_modes() {
    let (p, bg, basis) = kernel(1, 128);
    let overlap = translation_mode_overlap(&bg, &basis).unwrap();
    assert!(overlap >= 0.99, "{overlap}");
    let analytic = analytic_translation_modes(&p, basis[0].layout.clone()).unwrap();
    assert!(subspace_overlap(&analytic, &translation_modes(&bg)) > 0.999);
    assert!(subspace_overlap(&basis, &analytic) >= 0.99);
    for seed in 0..5 {
        let random = random_smooth_modes(&basis[0].layout, 2, seed);
        let overlap = subspace_overlap(&random, &translation_modes(&bg));
        assert!(overlap < 0.3, "seed {seed}: {overlap}");
    }
}

#[test]
fn translation_overlap_needs_a_single_vortex() {
    let (_, bg, basis) = kernel(2, 96);
    assert!(translation_mode_overlap(&bg, &basis[..2]).is_err());
}
