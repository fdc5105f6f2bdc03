use std::f64::consts::SQRT_2;
use std::sync::Arc;

use lgvortex_core::{
    assemble_d, assemble_d_adjoint, assemble_d_boson, sample_background, smallest_singulars, solve_profile, Background2D, Grid,
    Layout, ProfileMethod, Scheme, Sector, StateVector, VortexParams,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn vortex(n: i64, m: usize) -> Background2D {
    let p = solve_profile(VortexParams::new(n, 1.0, 1.0), ProfileMethod::Shooting).unwrap();
    sample_background(&p, m).unwrap()
}

/// A smooth winding-one background in closed form with `e ≠ 1`.
fn closed_form(m: usize) -> Background2D {
    Background2D::from_fn(Grid::new(m, 6.0), 1.3, 0.8, 1, |x, y| {
        let r2 = x * x + y * y;
        let s = (-r2 / 3.0).exp();
        (Complex64::new(x, y) * (0.8 / (1.0 + r2).sqrt()), -0.4 * y * s, 0.4 * x * s)
    })
}

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Matrix-free application of `D` on full `m × m` arrays, zero outside the
/// disk, written directly from the continuum operator.
fn stencil_apply(bg: &Background2D, scheme: Scheme, u: &[Complex64]) -> Vec<Complex64> {
    let layout = Layout::from_background(bg);
    let m = bg.grid.m as isize;
    let h = bg.grid.h;
    let mut psi = vec![Complex64::new(0.0, 0.0); bg.grid.len()];
    let mut chi = psi.clone();
    for p in 0..layout.n_points() {
        psi[layout.grid_index(p)] = u[2 * p];
        chi[layout.grid_index(p)] = u[2 * p + 1];
    }
    let weights: &[(isize, f64)] = match scheme {
        Scheme::Central2 => &[(-1, -0.5), (1, 0.5)],
        Scheme::Central4 => &[(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)],
    };
    let field = |f: &[Complex64], ix: isize, iy: isize| {
        if ix < 0 || iy < 0 || ix >= m || iy >= m {
            Complex64::new(0.0, 0.0)
        } else {
            f[(iy * m + ix) as usize]
        }
    };
    let dx = |f: &[Complex64], ix: isize, iy: isize| weights.iter().map(|&(o, w)| field(f, ix + o, iy) * w).sum::<Complex64>() / h;
    let dy = |f: &[Complex64], ix: isize, iy: isize| weights.iter().map(|&(o, w)| field(f, ix, iy + o) * w).sum::<Complex64>() / h;
    let mut out = Vec::with_capacity(u.len());
    for p in 0..layout.n_points() {
        let k = layout.grid_index(p);
        let (ix, iy) = ((k as isize) % m, (k as isize) / m);
        let (ea1, ea2) = (bg.a1[k], bg.a2[k]);
        let cov1 = dx(&psi, ix, iy) - I * ea1 * psi[k];
        let cov2 = dy(&psi, ix, iy) - I * ea2 * psi[k];
        let coupling = bg.phi[k] * (SQRT_2 * bg.e);
        out.push(cov1 + I * cov2 - coupling * chi[k]);
        out.push(-coupling.conj() * psi[k] + dx(&chi, ix, iy) - I * dy(&chi, ix, iy));
    }
    out
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn assembled_operator_matches_matrix_free_stencil() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (bg, scheme) in [(vortex(1, 64), Scheme::Central2), (vortex(1, 64), Scheme::Central4), (closed_form(50), Scheme::Central2)] {
        let d = assemble_d(&bg, scheme).unwrap();
        for _ in 0..5 {
            let u = random_vector(d.cols, &mut rng);
            let got = d.apply(&u).unwrap();
            let want = stencil_apply(&bg, scheme, &u);
            let diff: Vec<Complex64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
            assert!(max_abs(&diff) <= 1e-12 * max_abs(&want), "difference {:.3e}", max_abs(&diff));
        }
    }
}

#[test]
fn adjoint_satisfies_inner_product_identity() {
    let bg = vortex(1, 64);
    let d = assemble_d(&bg, Scheme::Central2).unwrap();
    let dt = assemble_d_adjoint(&bg, Scheme::Central2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    for _ in 0..100 {
        let u = random_vector(d.cols, &mut rng);
        let w = random_vector(d.rows, &mut rng);
        let lhs = dot(&d.apply(&u).unwrap(), &w);
        let rhs = dot(&u, &dt.apply(&w).unwrap());
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn adjoint_is_entrywise_conjugate_transpose() {
    for bg in [vortex(2, 64), closed_form(40), Background2D::vacuum(Grid::new(40, 5.0), 1.0, 1.0)] {
        let d = assemble_d(&bg, Scheme::Central4).unwrap();
        let dt = assemble_d_adjoint(&bg, Scheme::Central4).unwrap();
        let mut flipped: Vec<_> = d.entries().iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        flipped.sort_by_key(|&(r, c, _)| (r, c));
        assert_eq!(flipped, dt.entries());
    }
}

#[test]
fn boson_operator_is_bit_identical_for_every_background() {
    let backgrounds = [vortex(1, 128), vortex(2, 128), vortex(3, 96), closed_form(64), Background2D::vacuum(Grid::new(64, 12.0), 1.0, 1.0)];
    for bg in &backgrounds {
        for scheme in [Scheme::Central2, Scheme::Central4] {
            let d = assemble_d(bg, scheme).unwrap();
            let b = assemble_d_boson(bg, scheme).unwrap();
            assert!(d.bit_identical(&b), "n={} {scheme}", bg.n);
        }
    }
}

#[test]
fn compact_stencil_stays_in_domain() {
    let bg = vortex(1, 64);
    let d = assemble_d(&bg, Scheme::Central2).unwrap();
    assert_eq!(d.rows, 2 * bg.in_domain_count());
    assert!(d.max_row_nnz() <= 10);
    assert!(d.entries().windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
}

/// Test field `u₀ = (1 + x) g`, `u₁ = i y g` with `g = exp(−r²/2)` and its
/// exact derivatives.
fn test_field(x: f64, y: f64) -> ([Complex64; 2], [Complex64; 2], [Complex64; 2]) {
    let g = (-(x * x + y * y) / 2.0).exp();
    let u0 = Complex64::new((1.0 + x) * g, 0.0);
    let u1 = I * y * g;
    let d1u0 = Complex64::new(g - (1.0 + x) * x * g, 0.0);
    let d2u0 = Complex64::new(-(1.0 + x) * y * g, 0.0);
    let d1u1 = I * (-y * x * g);
    let d2u1 = I * (g - y * y * g);
    ([u0, u1], [d1u0, d1u1], [d2u0, d2u1])
}

/// Max error of the discrete action on the test field over points with
/// `r < 4`, where no stencil reaches the boundary.
fn consistency_error(m: usize, scheme: Scheme) -> f64 {
    let bg = closed_form(m);
    let d = assemble_d(&bg, scheme).unwrap();
    let layout = d.layout.clone();
    let u = StateVector::from_fn(Sector::FermionLower, layout.clone(), |x, y| test_field(x, y).0);
    let du = d.apply(&u.values).unwrap();
    let mut worst: f64 = 0.0;
    for p in 0..layout.n_points() {
        let (x, y) = layout.xy(p);
        if x.hypot(y) >= 4.0 {
            continue;
        }
        let k = layout.grid_index(p);
        let ([u0, u1], [d1u0, d1u1], [d2u0, d2u1]) = test_field(x, y);
        let coupling = bg.phi[k] * (SQRT_2 * bg.e);
        let row0 = d1u0 + I * d2u0 + (bg.a2[k] - I * bg.a1[k]) * u0 - coupling * u1;
        let row1 = -coupling.conj() * u0 + d1u1 - I * d2u1;
        worst = worst.max((du[2 * p] - row0).norm()).max((du[2 * p + 1] - row1).norm());
    }
    worst
}

#[test]
fn consistency_order_matches_scheme() {
    for (scheme, order) in [(Scheme::Central2, 2.0), (Scheme::Central4, 4.0)] {
        let sizes = [41, 81, 161];
        let errors: Vec<f64> = sizes.iter().map(|&m| consistency_error(m, scheme)).collect();
        for w in errors.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - order).abs() <= 0.3, "{scheme}: slope {slope}, errors {errors:?}");
        }
    }
}

#[test]
fn plane_wave_on_vacuum() {
    let k = 0.7;
    let mut errors = Vec::new();
    for m in [61, 121] {
        let bg = Background2D::vacuum(Grid::new(m, 6.0), 1.0, 1.0);
        let d = assemble_d(&bg, Scheme::Central2).unwrap();
        let dt = assemble_d_adjoint(&bg, Scheme::Central2).unwrap();
        let layout = d.layout.clone();
        let wave = StateVector::from_fn(Sector::FermionLower, layout.clone(), |x, _| [Complex64::from_polar(1.0, k * x), Complex64::new(0.0, 0.0)]);
        let du = d.apply(&wave.values).unwrap();
        let dtu = dt.apply(&wave.values).unwrap();
        let mut worst: f64 = 0.0;
        for p in 0..layout.n_points() {
            let (x, y) = layout.xy(p);
            if x.hypot(y) >= 5.0 {
                continue;
            }
            let e = Complex64::from_polar(1.0, k * x);
            // D: (ik e, −√2 v e). D† = [[−(∂₁ − i∂₂), −√2 v], [−√2 v, −(∂₁ + i∂₂)]].
            worst = worst
                .max((du[2 * p] - I * k * e).norm())
                .max((du[2 * p + 1] + SQRT_2 * e).norm())
                .max((dtu[2 * p] + I * k * e).norm())
                .max((dtu[2 * p + 1] + SQRT_2 * e).norm());
        }
        errors.push(worst);
    }
    let slope = (errors[0] / errors[1]).log2();
    assert!((slope - 2.0).abs() < 0.3, "{errors:?}");
}

#[test]
fn gauge_transformation_conjugates_by_the_phase() {
    let e = 1.3;
    let lambda = |x: f64, y: f64| 0.4 * (0.7 * x).sin() * (0.5 * y).cos();
    let grad = |x: f64, y: f64| (0.28 * (0.7 * x).cos() * (0.5 * y).cos(), -0.2 * (0.7 * x).sin() * (0.5 * y).sin());
    let mut errors = Vec::new();
    for m in [41, 81, 161] {
        let bg = closed_form(m);
        let gauged = Background2D::from_fn(bg.grid, bg.e, bg.v, bg.n, |x, y| {
            let k = bg.grid.index(((x + bg.grid.r_max) / bg.grid.h).round() as usize, ((y + bg.grid.r_max) / bg.grid.h).round() as usize);
            let (g1, g2) = grad(x, y);
            (bg.phi[k] * Complex64::from_polar(1.0, e * lambda(x, y)), bg.a1[k] + e * g1, bg.a2[k] + e * g2)
        });
        let d = assemble_d(&bg, Scheme::Central2).unwrap();
        let dg = assemble_d(&gauged, Scheme::Central2).unwrap();
        let layout = d.layout.clone();
        let phase: Vec<Complex64> = (0..layout.n_points())
            .flat_map(|p| {
                let (x, y) = layout.xy(p);
                [Complex64::from_polar(1.0, e * lambda(x, y)), Complex64::new(1.0, 0.0)]
            })
            .collect();
        let u = StateVector::from_fn(Sector::FermionLower, layout.clone(), |x, y| test_field(x, y).0).values;
        let gu: Vec<Complex64> = u.iter().zip(&phase).map(|(a, b)| a * b).collect();
        let lhs = dg.apply(&gu).unwrap();
        let rhs: Vec<Complex64> = d.apply(&u).unwrap().iter().zip(&phase).map(|(a, b)| a * b).collect();
        let mut worst: f64 = 0.0;
        for p in 0..layout.n_points() {
            let (x, y) = layout.xy(p);
            if x.hypot(y) < 4.0 {
                worst = worst.max((lhs[2 * p] - rhs[2 * p]).norm()).max((lhs[2 * p + 1] - rhs[2 * p + 1]).norm());
            }
        }
        errors.push(worst);
    }
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.7, "{errors:?}");
    }
}

#[test]
fn free_operator_has_no_continuum_kernel() {
    let bg = Background2D::from_fn(Grid::new(41, 6.0), 1.0, 1.0, 0, |_, _| (Complex64::new(0.0, 0.0), 0.0, 0.0));
    let d = assemble_d(&bg, Scheme::Central2).unwrap();
    let report = smallest_singulars(&d, 8, 1e-3, 0).unwrap();
    // The discrete Cauchy–Riemann pair on the jagged disk has exact null
    // vectors, but they sit on the boundary and are staggered.
    assert!(report.near_zero_count > 0);
    assert_eq!(report.kernel_count, 0, "{:?}", report.sigma);
    for v in &report.vectors[..report.near_zero_count] {
        let (mut edge, mut total) = (0.0, 0.0);
        for p in 0..v.layout.n_points() {
            let (x, y) = v.layout.xy(p);
            let w = v.component(p, 0).norm_sqr() + v.component(p, 1).norm_sqr();
            total += w;
            if x.hypot(y) > 4.5 {
                edge += w;
            }
        }
        assert!(edge / total > 0.6, "edge weight {}", edge / total);
    }
    assert!(report.smoothness[..report.near_zero_count].iter().all(|&s| s < 0.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn application_is_linear(seed in any::<u64>(), alpha_re in -2.0..2.0f64, alpha_im in -2.0..2.0f64) {
        let bg = closed_form(24);
        let d = assemble_d(&bg, Scheme::Central4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vector(d.cols, &mut rng);
        let w = random_vector(d.cols, &mut rng);
        let alpha = Complex64::new(alpha_re, alpha_im);
        let combo: Vec<Complex64> = u.iter().zip(&w).map(|(a, b)| alpha * a + b).collect();
        let lhs = d.apply(&combo).unwrap();
        let du = d.apply(&u).unwrap();
        let dw = d.apply(&w).unwrap();
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (alpha * du[i] + dw[i])).norm() <= 1e-12 * (1.0 + lhs[i].norm()));
        }
    }

    #[test]
    fn adjoint_identity_holds_for_random_pairs(seed in any::<u64>()) {
        let bg = closed_form(24);
        let d = assemble_d(&bg, Scheme::Central2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vector(d.cols, &mut rng);
        let w = random_vector(d.rows, &mut rng);
        let lhs: Complex64 = d.apply(&u).unwrap().iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = u.iter().zip(&d.apply_adjoint(&w).unwrap()).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }
}

#[test]
fn state_vector_layout_is_checked() {
    let bg = closed_form(24);
    let layout = Arc::new(Layout::from_background(&bg));
    assert!(StateVector::new(vec![Complex64::new(0.0, 0.0); layout.dim() + 1], Sector::Boson, layout.clone()).is_err());
    assert!(StateVector::new(vec![Complex64::new(f64::NAN, 0.0); layout.dim()], Sector::Boson, layout).is_err());
}
