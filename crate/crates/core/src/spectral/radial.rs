//! Kernel of `D` channel by channel.
//!
//! With `ψ = g(ρ) e^{imθ}` and `χ = h(ρ) e^{i(m+1−n)θ}` the equation `D(ψ, χ) = 0`
//! becomes, in `ρ = e v r`,
//!
//! ```text
//! g' = ((m − n a) / ρ) g + √2 f h
//! h' = −((m + 1 − n) / ρ) h + √2 f g
//! ```
//!
//! Near the origin `g ~ ρ^m` is regular for `m ≥ 0` and `h ~ ρ^{n−1−m}` for
//! `m ≤ n − 1`; at infinity one of the two solutions decays like `e^{−√2ρ}`.
//! The channel's kernel dimension (complex) is the dimension of the
//! intersection of the regular and decaying solution spaces, read off at a
//! matching radius.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vortex::RadialProfile;

/// Kernel count of one angular momentum channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCount {
    /// Angular momentum of `ψ`.
    pub m: i64,
    /// Dimension of the regular solution space at the origin.
    pub regular: usize,
    /// Complex dimension of the channel's kernel.
    pub complex_count: usize,
    /// Real dimension, `2 · complex_count`.
    pub real_count: usize,
    /// Smallest singular value of the normalized matching matrix.
    pub matching_sigma: f64,
}

const START: f64 = 1e-4;
const TOL: f64 = 1e-12;
/// Normalized matching matrices with a singular value below this are rank
/// deficient.
const RANK_TOL: f64 = 1e-6;

/// One adaptive Dormand–Prince integration of a 2-vector ODE from `t0` to `t1`.
fn integrate<F>(rhs: F, mut y: [f64; 2], t0: f64, t1: f64) -> Result<[f64; 2]>
where
    F: Fn(f64, [f64; 2]) -> Result<[f64; 2]>,
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut h = dir * (t1 - t0).abs().min(1e-2).min(0.1 * t0.abs().max(START));
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let mut k = [[0.0; 2]; 7];
        for s in 0..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            k[s] = rhs(t + C[s] * h, ys)?;
        }
        let mut next = y;
        let mut err = [0.0; 2];
        for s in 0..7 {
            next[0] += h * B[s] * k[s][0];
            next[1] += h * B[s] * k[s][1];
            err[0] += h * E[s] * k[s][0];
            err[1] += h * E[s] * k[s][1];
        }
        let scale = TOL * y[0].abs().max(y[1].abs()).max(next[0].abs()).max(next[1].abs()).max(1e-300);
        let err = err[0].abs().max(err[1].abs());
        if err <= scale {
            t += h;
            y = next;
        }
        let factor = if err == 0.0 { 5.0 } else { 0.9 * (scale / err).powf(0.2) };
        h *= factor.clamp(0.2, 5.0);
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::NonConvergence("channel integration step cap".into()));
        }
    }
    Ok(y)
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Kernel count of channel `m` with the matching point at `rho_match`.
fn channel(profile: &RadialProfile, m: i64, rho_match: f64) -> Result<ChannelCount> {
    let n = profile.params.n;
    let nf = n as f64;
    let ev = profile.params.ev();
    let mf = m as f64;
    let s2 = std::f64::consts::SQRT_2;
    let fail = |reason: String| Error::ChannelNonConvergence { channel: m, reason };

    let rhs = |rho: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        let (f, a) = profile.eval(rho / ev).map_err(|e| fail(e.to_string()))?;
        Ok([((mf - nf * a) / rho) * y[0] + s2 * f * y[1], -((mf + 1.0 - nf) / rho) * y[1] + s2 * f * y[0]])
    };

    // Leading behaviour of the regular solutions, f ≈ c ρⁿ.
    let c = if n == 0 { 1.0 } else { profile.core_coefficient };
    let mut regular = Vec::new();
    if m >= 0 {
        let g = START.powf(mf);
        let h = s2 * c * START.powf(nf + mf + 1.0) / (2.0 * mf + 2.0);
        regular.push([g, h]);
    }
    if m <= n - 1 {
        let h = START.powf(nf - 1.0 - mf);
        let g = s2 * c * START.powf(2.0 * nf - mf) / (2.0 * nf - 2.0 * mf);
        regular.push([g, h]);
    }
    let regular: Vec<[f64; 2]> =
        regular.into_iter().map(|y0| integrate(rhs, y0, START, rho_match).map(unit)).collect::<Result<_>>()?;

    // Decaying solution, started on the asymptotic eigenvector (1, −1).
    let rho_far = profile.params.r_max * ev;
    if rho_far <= rho_match {
        return Err(fail(format!("domain end {rho_far} inside matching radius {rho_match}")));
    }
    let decaying = unit(integrate(rhs, [1.0, -1.0], rho_far, rho_match)?);

    // Each regular solution that is parallel to the decaying one, or a
    // two-dimensional regular space, contributes one intersection direction.
    let (complex_count, matching_sigma) = match regular.len() {
        1 => {
            let r = regular[0];
            let sin = (r[0] * decaying[1] - r[1] * decaying[0]).abs();
            (usize::from(sin < RANK_TOL), sin)
        }
        2 => {
            let (r1, r2) = (regular[0], regular[1]);
            let sin = (r1[0] * r2[1] - r1[1] * r2[0]).abs();
            if sin < RANK_TOL {
                return Err(fail(format!("regular solutions became parallel (sin {sin:.2e})")));
            }
            (1, sin)
        }
        _ => (0, 0.0),
    };
    Ok(ChannelCount { m, regular: regular.len(), complex_count, real_count: 2 * complex_count, matching_sigma })
}

/// Per-channel kernel counts of `D` for `m_range`. Each channel is solved
/// with two matching radii; disagreement is reported as non-convergence.
pub fn radial_channel_oracle(profile: &RadialProfile, m_range: RangeInclusive<i64>) -> Result<Vec<ChannelCount>> {
    if !(profile.residual_norm <= 1e-6) {
        return Err(Error::InvalidParams(format!("profile not converged (residual {:.3e})", profile.residual_norm)));
    }
    let mut out = Vec::new();
    for m in m_range {
        let a = channel(profile, m, 1.5)?;
        let b = channel(profile, m, 3.0)?;
        if a.complex_count != b.complex_count {
            return Err(Error::ChannelNonConvergence {
                channel: m,
                reason: format!("matching radii disagree ({} vs {})", a.complex_count, b.complex_count),
            });
        }
        out.push(a);
    }
    Ok(out)
}
