use num_complex::Complex64;

use lgvortex_core::susy::build_susy;
use lgvortex_core::{
    assemble_d, assemble_d_adjoint, compute_index, radial_channel_oracle, sample_background, smallest_singulars,
    solve_profile, Background2D, Grid, ProfileMethod, Scheme, VortexParams,
};

fn background(n: i64, r_max: f64, m: usize) -> Background2D {
    let p = solve_profile(VortexParams::new(n, 1.0, 1.0).with_r_max(r_max), ProfileMethod::Shooting).unwrap();
    sample_background(&p, m).unwrap()
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn oracle_total(n: i64) -> (usize, Vec<i64>) {
    let p = solve_profile(VortexParams::new(n, 1.0, 1.0), ProfileMethod::Shooting).unwrap();
    let channels = radial_channel_oracle(&p, -5..=n + 4).unwrap();
    let total = channels.iter().map(|c| c.real_count).sum();
    let occupied = channels.iter().filter(|c| c.complex_count > 0).map(|c| c.m).collect();
    (total, occupied)
}

#[test]
fn kernel_count_is_stable_under_domain_and_grid_changes() {
    for n in 1..=3 {
        for (r_max, m) in [(10.0, 128), (12.0, 96)] {
            let report = compute_index(&background(n, r_max, m), 6, 1e-3, 0).unwrap();
            assert!(report.resolved, "n={n} r_max={r_max} m={m} unresolved");
            assert_eq!(report.n_minus, 2 * n as usize, "n={n} r_max={r_max} m={m}");
            assert_eq!(report.n_plus, 0, "n={n} r_max={r_max} m={m}");
        }
    }
}

#[test]
fn nonzero_singular_values_of_d_and_adjoint_pair_up() {
    let bg = background(1, 12.0, 64);
    let d = assemble_d(&bg, Scheme::Central2).unwrap();
    let dt = assemble_d_adjoint(&bg, Scheme::Central2).unwrap();
    let rd = smallest_singulars(&d, 12, 1e-3, 3).unwrap();
    let rdt = smallest_singulars(&dt, 12, 1e-3, 4).unwrap();
    assert_eq!(rd.near_zero_count, rdt.near_zero_count);
    for (a, b) in rd.sigma.iter().zip(&rdt.sigma).skip(rd.near_zero_count) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn radial_oracle_counts_channels() {
    assert_eq!(oracle_total(0), (0, vec![]));
    assert_eq!(oracle_total(1), (2, vec![0]));
    assert_eq!(oracle_total(3), (6, vec![0, 1, 2]));
}

#[test]
fn radial_oracle_rejects_unconverged_profile() {
    let mut p = solve_profile(VortexParams::new(1, 1.0, 1.0), ProfileMethod::Shooting).unwrap();
    p.residual_norm = 1.0;
    assert!(radial_channel_oracle(&p, 0..=0).is_err());
}

#[test]
fn kernel_of_h_minus_is_the_kernel_of_d() {
    let bg = background(1, 12.0, 96);
    let d = assemble_d(&bg, Scheme::Central2).unwrap();
    let report = smallest_singulars(&d, 8, 1e-3, 0).unwrap();
    assert_eq!(report.kernel_count, 2);
    let susy = build_susy(&d).unwrap();
    for v in report.kernel_basis() {
        let hv = susy.apply_h_minus(&v.values).unwrap();
        let dv = d.apply(&v.values).unwrap();
        assert!(norm(&hv) <= 1e-8 * norm(&v.values), "|H- v| = {:e}", norm(&hv));
        assert!(norm(&dv) <= 1e-4 * norm(&v.values), "|D v| = {:e}", norm(&dv));
    }
    // The first vector above the near-kernel block is not annihilated.
    let above = &report.vectors[report.near_zero_count];
    let hv = susy.apply_h_minus(&above.values).unwrap();
    let rayleigh: f64 = above.values.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / norm(&above.values).powi(2);
    assert!(rayleigh > 0.1, "{rayleigh}");
}

#[test]
fn vacuum_has_no_kernel() {
    let bg = Background2D::vacuum(Grid::new(41, 12.0), 1.0, 1.0);
    let report = compute_index(&bg, 6, 1e-3, 0).unwrap();
    assert_eq!((report.n_minus, report.n_plus, report.witten_index), (0, 0, 0));
    assert!(report.d.sigma[0] > 1.0, "{}", report.d.sigma[0]);
}
