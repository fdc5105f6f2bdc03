use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::special::{bessel_k, bessel_k1_over_k0};
use super::VortexParams;
use crate::error::{Error, Result};

/// Which radial solver produced a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileMethod {
    /// Adaptive Dormand–Prince integration with bisection on the core coefficient.
    Shooting,
    /// Damped Newton on the trapezoidal discretization, Richardson-extrapolated.
    Relaxation,
}

/// Radial profile functions `f(r)`, `a(r)` on a uniform grid `r[0] = 0 .. r_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub params: VortexParams,
    pub method: ProfileMethod,
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub a: Vec<f64>,
    /// Pointwise ODE residual (Simpson consistency, scaled radius units).
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    /// `c` in `f ≈ c (e v r)^n` near the origin.
    pub core_coefficient: f64,
}

// Bracket trajectories that differ by more than this are replaced by the
// linearized Bessel tail.
const BRACKET_AGREEMENT: f64 = 1e-10;

/// Solve the radial self-duality equations for `params.n >= 1`, or return the
/// vacuum for `n = 0`.
pub fn solve_profile(params: VortexParams, method: ProfileMethod) -> Result<RadialProfile> {
    params.validate()?;
    let m = params.m_r;
    let dr = params.r_max / (m - 1) as f64;
    let r: Vec<f64> = (0..m).map(|i| i as f64 * dr).collect();
    if params.n == 0 {
        return Ok(RadialProfile {
            params,
            method,
            r,
            f: vec![1.0; m],
            a: vec![0.0; m],
            residuals: vec![0.0; m],
            residual_norm: 0.0,
            core_coefficient: 0.0,
        });
    }
    let n = params.n as f64;
    let rho_max = params.r_max * params.ev();
    let (f, a, c) = match method {
        ProfileMethod::Shooting => shoot(n, rho_max, m)?,
        ProfileMethod::Relaxation => relax_extrapolated(n, rho_max, m)?,
    };
    let drho = rho_max / (m - 1) as f64;
    let residuals = simpson_residuals(n, drho, c, &f, &a);
    let residual_norm = residuals.iter().copied().fold(0.0, f64::max);
    Ok(RadialProfile { params, method, r, f, a, residuals, residual_norm, core_coefficient: c })
}

/// Right-hand side of the scaled system.
pub(crate) fn rhs(n: f64, rho: f64, f: f64, a: f64) -> (f64, f64) {
    ((n / rho) * (1.0 - a) * f, (rho / n) * (1.0 - f * f))
}

/// Core expansion `(f, a)` to relative order `ρ^{2n+4}`.
pub(crate) fn series(n: f64, c: f64, rho: f64) -> (f64, f64) {
    let p = rho.powf(2.0 * n + 2.0);
    let f = c * rho.powf(n) * (-rho * rho / 4.0 + c * c * p / ((2.0 * n + 2.0).powi(2))).exp();
    let a = rho * rho / (2.0 * n) - c * c * p / (n * (2.0 * n + 2.0));
    (f, a)
}

/// `(∂f/∂c, ∂a/∂c)` of [`series`].
fn series_dc(n: f64, c: f64, rho: f64) -> (f64, f64) {
    let p = rho.powf(2.0 * n + 2.0);
    let q = (2.0 * n + 2.0).powi(2);
    let e = (-rho * rho / 4.0 + c * c * p / q).exp();
    let df = rho.powf(n) * e * (1.0 + 2.0 * c * c * p / q);
    let da = -2.0 * c * p / (n * (2.0 * n + 2.0));
    (df, da)
}

fn rhs_at(n: f64, c: f64, rho: f64, f: f64, a: f64) -> (f64, f64) {
    if rho == 0.0 {
        // f' -> n c ρ^{n-1}, a' -> ρ / n
        (if n == 1.0 { c } else { 0.0 }, 0.0)
    } else {
        rhs(n, rho, f, a)
    }
}

fn simpson_residuals(n: f64, drho: f64, c: f64, f: &[f64], a: &[f64]) -> Vec<f64> {
    let m = f.len();
    let deriv: Vec<(f64, f64)> =
        (0..m).map(|i| rhs_at(n, c, i as f64 * drho, f[i], a[i])).collect();
    let mut out = vec![0.0; m];
    for i in 1..m - 1 {
        let sf = (f[i + 1] - f[i - 1]) - drho / 3.0 * (deriv[i - 1].0 + 4.0 * deriv[i].0 + deriv[i + 1].0);
        let sa = (a[i + 1] - a[i - 1]) - drho / 3.0 * (deriv[i - 1].1 + 4.0 * deriv[i].1 + deriv[i + 1].1);
        out[i] = sf.abs().max(sa.abs()) / (2.0 * drho);
    }
    out
}

/// Linearized tail `(1 - f, 1 - a)` continued from `(ρ0, 1 - f0)`.
fn bessel_tail(n: f64, rho0: f64, df0: f64, rho: f64) -> (f64, f64) {
    let s = std::f64::consts::SQRT_2;
    let df = df0 * bessel_k(0.0, s * rho) / bessel_k(0.0, s * rho0);
    let da = df * (s * rho / n) * bessel_k1_over_k0(s * rho);
    (df, da)
}

// ---------------------------------------------------------------------------
// Shooting

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    /// `f` crossed 1: core coefficient too large.
    Over,
    /// `a` crossed 1 or `f` turned over: core coefficient too small.
    Under,
    /// Reached the end of the integration window without diverging.
    Undecided,
}

struct Trajectory {
    f: Vec<f64>,
    a: Vec<f64>,
    /// Number of grid nodes recorded before the trajectory diverged.
    valid: usize,
    fate: Fate,
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince 5(4) step. Returns the new state and the error estimate.
fn dp_step(n: f64, rho: f64, y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            yi[0] += h * DP_A[s][j] * kj[0];
            yi[1] += h * DP_A[s][j] * kj[1];
        }
        let (df, da) = rhs(n, rho + DP_C[s] * h, yi[0], yi[1]);
        k[s] = [df, da];
    }
    let mut out = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        out[0] += h * DP_B[s] * k[s][0];
        out[1] += h * DP_B[s] * k[s][1];
        err[0] += h * DP_E[s] * k[s][0];
        err[1] += h * DP_E[s] * k[s][1];
    }
    (out, err[0].abs().max(err[1].abs()))
}

fn classify(n: f64, rho: f64, y: [f64; 2]) -> Option<Fate> {
    if y[0] > 1.0 {
        Some(Fate::Over)
    } else if y[1] > 1.0 || y[0] < 0.0 || rhs(n, rho, y[0], y[1]).0 < 0.0 {
        Some(Fate::Under)
    } else {
        None
    }
}

/// Integrate from node 1 through `nodes` grid points and on to `rho_end`,
/// stopping at the first divergence.
fn integrate(n: f64, c: f64, drho: f64, nodes: usize, rho_end: f64) -> Trajectory {
    const TOL: f64 = 1e-13;
    let mut f = Vec::with_capacity(nodes);
    let mut a = Vec::with_capacity(nodes);
    f.push(0.0);
    a.push(0.0);
    let (f1, a1) = series(n, c, drho);
    f.push(f1);
    a.push(a1);
    let mut y = [f1, a1];
    let mut rho = drho;
    let mut h = drho / 4.0;
    let mut node = 1usize;
    loop {
        let target = if node + 1 < nodes { (node + 1) as f64 * drho } else { rho_end };
        while rho < target {
            let step = h.min(target - rho);
            let (next, err) = dp_step(n, rho, y, step);
            let scale = TOL * (1.0 + y[0].abs().max(y[1].abs()));
            if err <= scale || step < 1e-12 {
                rho = if step == target - rho { target } else { rho + step };
                y = next;
                if let Some(fate) = classify(n, rho, y) {
                    return Trajectory { valid: f.len(), f, a, fate };
                }
            }
            let factor = if err == 0.0 { 5.0 } else { 0.9 * (scale / err).powf(0.2) };
            h = (step * factor.clamp(0.2, 5.0)).max(1e-12);
        }
        if node + 1 < nodes {
            node += 1;
            f.push(y[0]);
            a.push(y[1]);
        } else {
            return Trajectory { valid: f.len(), f, a, fate: Fate::Undecided };
        }
    }
}

fn shoot(n: f64, rho_max: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let drho = rho_max / (m - 1) as f64;
    // Far enough out that any representable error in c has blown up.
    let rho_end = rho_max.max(40.0) + 10.0;
    // Bisection must follow the same step sequence as the final sampling run,
    // otherwise integration error is not absorbed into c.
    let fate = |c: f64| integrate(n, c, drho, m, rho_end).fate;

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while fate(hi) != Fate::Over {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::NonConvergence("no upper bracket for core coefficient".into()));
        }
    }
    if lo > 0.0 && fate(lo) != Fate::Under {
        return Err(Error::NonConvergence("lower bracket lost".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match fate(mid) {
            Fate::Over => hi = mid,
            Fate::Under => lo = mid,
            Fate::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }
    if lo == 0.0 {
        return Err(Error::NonConvergence("bisection collapsed onto c = 0".into()));
    }

    let tl = integrate(n, lo, drho, m, rho_max);
    let th = integrate(n, hi, drho, m, rho_max);
    let mut f = vec![0.0; m];
    let mut a = vec![0.0; m];
    let mut good = 0usize;
    for i in 0..m {
        if i < tl.valid && i < th.valid && (tl.f[i] - th.f[i]).abs().max((tl.a[i] - th.a[i]).abs()) <= BRACKET_AGREEMENT {
            f[i] = 0.5 * (tl.f[i] + th.f[i]);
            a[i] = 0.5 * (tl.a[i] + th.a[i]);
            good = i;
        } else {
            break;
        }
    }
    if good + 1 < m {
        // Hand over to the Bessel tail through a smooth blend over one unit of
        // ρ, so the small mismatch between trajectory and tail shows up as a
        // gentle slope rather than a jump.
        let blend = ((1.0 / drho).round() as usize).clamp(1, good);
        let start = good - blend;
        let rho0 = start as f64 * drho;
        let df0 = 1.0 - f[start];
        if rho0 < 2.0 || df0 <= 0.0 || df0 > 1e-3 {
            return Err(Error::NonConvergence(format!(
                "shooting trajectories separated at rho = {:.3} before reaching the tail",
                good as f64 * drho
            )));
        }
        let (ft, at) = nonlinear_tail(n, drho, start, f[start], df0, m)?;
        for i in start..m {
            let k = i - start;
            if i <= good {
                let t = k as f64 / blend as f64;
                let w = t * t * (3.0 - 2.0 * t);
                f[i] = (1.0 - w) * f[i] + w * ft[k];
                a[i] = (1.0 - w) * a[i] + w * at[k];
            } else {
                f[i] = ft[k];
                a[i] = at[k];
            }
        }
    }
    Ok((f, a, 0.5 * (lo + hi)))
}

/// Solve the full nonlinear system on `[ρ_start, ρ_max]` with `f(ρ_start)`
/// pinned and the Bessel relation at the far end, starting from the linear
/// tail. Returns `(f, a)` on nodes `start..m`.
fn nonlinear_tail(
    n: f64,
    drho: f64,
    start: usize,
    f_start: f64,
    df0: f64,
    m: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = m - start;
    let rho = |k: usize| (start + k) as f64 * drho;
    let rho0 = rho(0);
    let rho_max = rho(len - 1);
    let robin = (std::f64::consts::SQRT_2 * rho_max / n) * bessel_k1_over_k0(std::f64::consts::SQRT_2 * rho_max);

    // unknowns: [a_0, f_1, a_1, ..., f_{len-1}, a_{len-1}]
    let dim = 2 * len - 1;
    let mut x = vec![0.0; dim];
    for k in 0..len {
        let (df, da) = bessel_tail(n, rho0, df0, rho(k));
        if k > 0 {
            x[2 * k - 1] = 1.0 - df;
        }
        x[2 * k] = 1.0 - da;
    }
    let node = |x: &[f64], k: usize| if k == 0 { (f_start, x[0]) } else { (x[2 * k - 1], x[2 * k]) };
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(dim);
        for k in 0..len - 1 {
            let (f0, a0) = node(x, k);
            let (f1, a1) = node(x, k + 1);
            let d0 = rhs(n, rho(k), f0, a0);
            let d1 = rhs(n, rho(k + 1), f1, a1);
            r.push(f1 - f0 - 0.5 * drho * (d0.0 + d1.0));
            r.push(a1 - a0 - 0.5 * drho * (d0.1 + d1.1));
        }
        let (fl, al) = node(x, len - 1);
        r.push((1.0 - al) - robin * (1.0 - fl));
        r
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

    let mut res = residual(&x);
    for _ in 0..30 {
        if norm(&res) < 1e-15 {
            break;
        }
        let mut trip = Vec::with_capacity(8 * dim);
        for k in 0..len - 1 {
            let row = 2 * k;
            for (kk, sign) in [(k, -1.0), (k + 1, 1.0)] {
                let (f, a) = node(&x, kk);
                let p = rho(kk);
                // f' = (n/ρ)(1-a) f, a' = (ρ/n)(1-f²)
                let (dff, dfa) = ((n / p) * (1.0 - a), -(n / p) * f);
                let daf = -2.0 * (p / n) * f;
                let jf = [sign - 0.5 * drho * dff, -0.5 * drho * dfa];
                let ja = [-0.5 * drho * daf, sign];
                if kk == 0 {
                    trip.push(Triplet::new(row, 0, jf[1]));
                    trip.push(Triplet::new(row + 1, 0, ja[1]));
                } else {
                    let col = 2 * kk - 1;
                    trip.push(Triplet::new(row, col, jf[0]));
                    trip.push(Triplet::new(row, col + 1, jf[1]));
                    trip.push(Triplet::new(row + 1, col, ja[0]));
                    trip.push(Triplet::new(row + 1, col + 1, ja[1]));
                }
            }
        }
        trip.push(Triplet::new(dim - 1, dim - 2, robin));
        trip.push(Triplet::new(dim - 1, dim - 1, -1.0));
        let jac = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &trip)
            .map_err(|e| Error::NonConvergence(format!("tail jacobian assembly: {e:?}")))?;
        let lu = jac
            .sp_lu()
            .map_err(|e| Error::NonConvergence(format!("tail jacobian factorization: {e:?}")))?;
        let mut rhs_vec = Mat::<f64>::zeros(dim, 1);
        for (i, r) in res.iter().enumerate() {
            rhs_vec[(i, 0)] = -r;
        }
        let dx = lu.solve(&rhs_vec);
        let prev = norm(&res);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx[(i, 0)];
        }
        res = residual(&x);
        if norm(&res) >= prev {
            break;
        }
    }
    if norm(&res) > 1e-12 {
        return Err(Error::NonConvergence(format!("tail residual {:.3e}", norm(&res))));
    }
    Ok((0..len).map(|k| node(&x, k)).unzip())
}

// ---------------------------------------------------------------------------
// Relaxation

fn relax_extrapolated(n: f64, rho_max: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (fc, ac, cc) = relax(n, rho_max, m)?;
    let (ff, af, cf) = relax(n, rho_max, 2 * m - 1)?;
    let f = (0..m).map(|i| (4.0 * ff[2 * i] - fc[i]) / 3.0).collect();
    let a = (0..m).map(|i| (4.0 * af[2 * i] - ac[i]) / 3.0).collect();
    Ok((f, a, (4.0 * cf - cc) / 3.0))
}

/// Trapezoidal relaxation in `g = f / ρⁿ`, whose linearization is regular at
/// the origin (the `f` form picks up `Δ² ln Δ` error terms there). Node 1
/// follows the core series in `c = g(0)`; the outer boundary carries the
/// asymptotic Bessel relation between `1 - a` and `1 - f`.
fn relax(n: f64, rho_max: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let drho = rho_max / (m - 1) as f64;
    let rho = |i: usize| i as f64 * drho;
    let s = std::f64::consts::SQRT_2;
    let robin = (s * rho_max / n) * bessel_k1_over_k0(s * rho_max);
    let rho_n_max = rho_max.powf(n);

    // g' = -n (a / ρ) g,  a' = (ρ / n)(1 - ρ^{2n} g²)
    let deriv = |p: f64, g: f64, a: f64| (-n * (a / p) * g, (p / n) * (1.0 - p.powf(2.0 * n) * g * g));

    // unknowns: [c, g_2, a_2, ..., g_{m-1}, a_{m-1}]
    let dim = 1 + 2 * (m - 2);
    let k: f64 = 0.8;
    let mut x = vec![0.0; dim];
    x[0] = k.powf(n);
    for i in 2..m {
        x[1 + 2 * (i - 2)] = (k * rho(i)).tanh().powf(n) / rho(i).powf(n);
        x[2 + 2 * (i - 2)] = (rho(i) / (2.0 * n).sqrt()).tanh().powi(2);
    }

    let node = |x: &[f64], i: usize| -> (f64, f64) {
        if i == 1 {
            let (f, a) = series(n, x[0], drho);
            (f / drho.powf(n), a)
        } else {
            (x[1 + 2 * (i - 2)], x[2 + 2 * (i - 2)])
        }
    };
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(dim);
        for i in 1..m - 1 {
            let (g0, a0) = node(x, i);
            let (g1, a1) = node(x, i + 1);
            let d0 = deriv(rho(i), g0, a0);
            let d1 = deriv(rho(i + 1), g1, a1);
            r.push(g1 - g0 - 0.5 * drho * (d0.0 + d1.0));
            r.push(a1 - a0 - 0.5 * drho * (d0.1 + d1.1));
        }
        let (gl, al) = node(x, m - 1);
        r.push((1.0 - al) - robin * (1.0 - rho_n_max * gl));
        r
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

    let mut res = residual(&x);
    for _iter in 0..100 {
        if norm(&res) < 1e-14 {
            break;
        }
        let mut trip = Vec::with_capacity(10 * dim);
        let mut push = |row: usize, col: usize, v: f64| {
            if v != 0.0 {
                trip.push(Triplet::new(row, col, v));
            }
        };
        for i in 1..m - 1 {
            let row = 2 * (i - 1);
            for (node_i, sign) in [(i, -1.0), (i + 1, 1.0)] {
                let (g, a) = node(&x, node_i);
                let p = rho(node_i);
                let (dgg, dga) = (-n * a / p, -n * g / p);
                let dag = -(2.0 * p.powf(2.0 * n + 1.0) / n) * g;
                let jg = [sign - 0.5 * drho * dgg, -0.5 * drho * dga];
                let ja = [-0.5 * drho * dag, sign];
                if node_i == 1 {
                    let (dfc, dac) = series_dc(n, x[0], drho);
                    let dgc = dfc / drho.powf(n);
                    push(row, 0, jg[0] * dgc + jg[1] * dac);
                    push(row + 1, 0, ja[0] * dgc + ja[1] * dac);
                } else {
                    let col = 1 + 2 * (node_i - 2);
                    push(row, col, jg[0]);
                    push(row, col + 1, jg[1]);
                    push(row + 1, col, ja[0]);
                    push(row + 1, col + 1, ja[1]);
                }
            }
        }
        let last = 1 + 2 * (m - 3);
        push(dim - 1, last, robin * rho_n_max);
        push(dim - 1, last + 1, -1.0);

        let jac = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &trip)
            .map_err(|e| Error::NonConvergence(format!("jacobian assembly: {e:?}")))?;
        let lu = jac
            .sp_lu()
            .map_err(|e| Error::NonConvergence(format!("jacobian factorization: {e:?}")))?;
        let mut rhs_vec = Mat::<f64>::zeros(dim, 1);
        for (i, r) in res.iter().enumerate() {
            rhs_vec[(i, 0)] = -r;
        }
        let dx = lu.solve(&rhs_vec);

        let r0 = norm(&res);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().enumerate().map(|(i, xi)| xi + lambda * dx[(i, 0)]).collect();
            let tr = residual(&trial);
            if norm(&tr) < (1.0 - 0.25 * lambda) * r0 || lambda < 1e-3 {
                x = trial;
                res = tr;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm(&res) > 1e-10 {
        return Err(Error::NonConvergence(format!(
            "relaxation residual {:.3e} after Newton iteration cap",
            norm(&res)
        )));
    }

    let mut f = vec![0.0; m];
    let mut a = vec![0.0; m];
    for i in 1..m {
        let (gi, ai) = node(&x, i);
        f[i] = rho(i).powf(n) * gi;
        a[i] = ai;
    }
    Ok((f, a, x[0]))
}

// ---------------------------------------------------------------------------
// Evaluation

impl RadialProfile {
    fn drho(&self) -> f64 {
        self.params.r_max * self.params.ev() / (self.r.len() - 1) as f64
    }

    /// `(f(r), a(r))` by cubic Hermite interpolation with exact ODE slopes;
    /// the core series is used for `r` below two radial spacings.
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        if self.params.n == 0 {
            return Ok((1.0, 0.0));
        }
        let n = self.params.n as f64;
        let rho = r.abs() * self.params.ev();
        let drho = self.drho();
        let last = self.r.len() - 1;
        if rho < 2.0 * drho {
            return Ok(series(n, self.core_coefficient, rho));
        }
        if rho >= last as f64 * drho {
            return Ok((self.f[last], self.a[last]));
        }
        let i = ((rho / drho).floor() as usize).min(last - 1);
        let (r0, r1) = (i as f64 * drho, (i + 1) as f64 * drho);
        let t = (rho - r0) / drho;
        let d0 = rhs_at(n, self.core_coefficient, r0, self.f[i], self.a[i]);
        let d1 = rhs(n, r1, self.f[i + 1], self.a[i + 1]);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let f = h00 * self.f[i] + h10 * drho * d0.0 + h01 * self.f[i + 1] + h11 * drho * d1.0;
        let a = h00 * self.a[i] + h10 * drho * d0.1 + h01 * self.a[i + 1] + h11 * drho * d1.1;
        if !(f.is_finite() && a.is_finite()) {
            return Err(Error::Interpolation(format!("non-finite profile at r = {r}")));
        }
        Ok((f, a))
    }

    /// `(f / rⁿ, a / r²)` in physical units, finite at the origin.
    pub fn eval_regular(&self, r: f64) -> Result<(f64, f64)> {
        let ev = self.params.ev();
        if self.params.n == 0 {
            return Ok((1.0, 0.0));
        }
        let n = self.params.n as f64;
        let rho = r.abs() * ev;
        if rho < 2.0 * self.drho() {
            let c = self.core_coefficient;
            let p = rho.powf(2.0 * n + 2.0);
            let f_over = c * (-rho * rho / 4.0 + c * c * p / ((2.0 * n + 2.0).powi(2))).exp();
            let a_over = 1.0 / (2.0 * n) - c * c * rho.powf(2.0 * n) / (n * (2.0 * n + 2.0));
            return Ok((f_over * ev.powf(n), a_over * ev * ev));
        }
        let (f, a) = self.eval(r)?;
        Ok((f / r.abs().powf(n), a / (r * r)))
    }

    /// `(f'(r), a'(r))` in physical units.
    pub fn eval_derivative(&self, r: f64) -> Result<(f64, f64)> {
        if self.params.n == 0 {
            return Ok((0.0, 0.0));
        }
        let ev = self.params.ev();
        let n = self.params.n as f64;
        let rho = r.abs() * ev;
        let (f, a) = self.eval(r)?;
        let (df, da) = rhs_at(n, self.core_coefficient, rho, f, a);
        Ok((df * ev, da * ev))
    }

    /// CSV with header `r,f,a,residual`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,f,a,residual")?;
        for i in 0..self.r.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.r[i], self.f[i], self.a[i], self.residuals[i]
            )?;
        }
        Ok(())
    }
}
