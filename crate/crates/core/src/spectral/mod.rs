//! Smallest singular values of the assembled operators, numerical kernels and
//! index reports.
//!
//! Central differences on a square lattice carry spurious low modes at the
//! corners of the Brillouin zone. A square matrix has equal numbers of
//! near-zero singular values on both sides, so these lattice modes pair up
//! with the physical zero modes of `D` and show up in the near-kernel of
//! `D†`. Near-kernel vectors are therefore sorted by smoothness: the
//! cell-average operator `B` (mean over each 2×2 plaquette) keeps smooth
//! fields and annihilates modes alternating in sign along either axis, and
//! `‖B v‖² / ‖v‖²` is close to 1 for continuum modes and close to 0 for
//! lattice modes. Only smooth near-kernel vectors count as kernel.
//!
//! Kernel dimensions are real dimensions: each complex kernel vector `v`
//! contributes the pair `v, i v`.

mod radial;
mod solver;

use std::io::Write;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{assemble_d, assemble_d_adjoint, Layout, OperatorTag, Scheme, Sector, SparseOperator, StateVector};
use crate::vortex::Background2D;

pub use radial::{radial_channel_oracle, ChannelCount};
pub use solver::RESIDUAL_TOL;

/// Minimum `gap_ratio` for a resolved kernel.
pub const GAP_RATIO_MIN: f64 = 10.0;
/// Floor used in place of a vanishing singular value in `gap_ratio`.
pub const GAP_EPS: f64 = 1e-300;
/// Smoothness above which a vector counts as a continuum mode.
pub const SMOOTH_THRESHOLD: f64 = 0.5;
/// Smoothness scores inside this band make a classification ambiguous.
const AMBIGUOUS_BAND: (f64, f64) = (0.25, 0.75);

/// Iteration metadata of a singular value solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    /// Applications of `(AᴴA)⁻¹` to a block of vectors.
    pub block_applications: usize,
    pub restarts: usize,
    pub seed: u64,
    /// `‖AᴴA x − σ² x‖ / ‖x‖` per returned vector.
    pub residuals: Vec<f64>,
}

/// Smallest singular values and right singular vectors of one operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub operator_tag: OperatorTag,
    /// Ascending.
    pub sigma: Vec<f64>,
    /// Right singular vectors, normalized in the discrete `L²` product.
    /// Within the near-kernel block they are rotated into smoothness
    /// eigenvectors, smoothest first.
    #[serde(skip)]
    pub vectors: Vec<StateVector>,
    /// Smoothness `‖B v‖² / ‖v‖²` of each vector.
    pub smoothness: Vec<f64>,
    /// Singular values below `tol_zero`, lattice modes included.
    pub near_zero_count: usize,
    /// Smooth near-zero vectors (complex dimension).
    pub smooth_zero_modes: usize,
    /// Real dimension of the numerical kernel, `2 · smooth_zero_modes`.
    pub kernel_count: usize,
    /// `sigma[near_zero_count] / max(sigma[near_zero_count − 1], ε)`, or
    /// `sigma[0] / tol_zero` if nothing is below the threshold.
    pub gap_ratio: f64,
    /// First singular value above the near-kernel block, a lower bound for
    /// every non-kernel singular value, smooth or not.
    pub sigma_above_kernel: Option<f64>,
    /// Smallest singular value above the near-kernel block whose vector is
    /// smooth, if one was computed.
    pub smallest_smooth_sigma: Option<f64>,
    pub resolved: bool,
    pub tol_zero: f64,
    pub solver_meta: SolverMeta,
}

impl SpectralReport {
    /// Real orthonormal basis `(v₁, i v₁, v₂, i v₂, …)` of the kernel.
    pub fn kernel_basis(&self) -> Vec<StateVector> {
        let mut out = Vec::with_capacity(self.kernel_count);
        for v in self.vectors.iter().take(self.near_zero_count).zip(&self.smoothness).filter(|(_, &s)| s > SMOOTH_THRESHOLD).map(|(v, _)| v) {
            out.push(v.clone());
            let mut iv = v.clone();
            iv.values.iter_mut().for_each(|z| *z *= Complex64::i());
            out.push(iv);
        }
        out
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Mode CSV `x,y,re_c0,im_c0,re_c1,im_c1` of vector `i`.
    pub fn write_mode_csv<W: Write>(&self, i: usize, w: W) -> Result<()> {
        self.vectors
            .get(i)
            .ok_or_else(|| Error::InvalidParams(format!("no singular vector {i}")))?
            .write_csv(w)
    }
}

/// Cell averages of a two-component vector over every plaquette, zero
/// outside the domain.
fn cell_average(layout: &Layout, v: &[Complex64]) -> Vec<Complex64> {
    let m = layout.grid.m;
    let at = |ix: usize, iy: usize, c: usize| {
        layout.point_of(iy * m + ix).map(|p| v[layout.index(p, c)]).unwrap_or(Complex64::new(0.0, 0.0))
    };
    let mut out = Vec::with_capacity(2 * (m - 1) * (m - 1));
    for iy in 0..m - 1 {
        for ix in 0..m - 1 {
            for c in 0..2 {
                out.push((at(ix, iy, c) + at(ix + 1, iy, c) + at(ix, iy + 1, c) + at(ix + 1, iy + 1, c)) * 0.25);
            }
        }
    }
    out
}

/// Smoothness score `‖B v‖² / ‖v‖²`.
pub fn smoothness(v: &StateVector) -> f64 {
    let norm: f64 = v.values.iter().map(|z| z.norm_sqr()).sum();
    if norm == 0.0 {
        return 0.0;
    }
    cell_average(&v.layout, &v.values).iter().map(|z| z.norm_sqr()).sum::<f64>() / norm
}

/// Multiply by a unit phase making the largest-magnitude entry real positive.
fn fix_phase(values: &mut [Complex64]) {
    let mut best = 0;
    for (i, z) in values.iter().enumerate() {
        if z.norm_sqr() > values[best].norm_sqr() {
            best = i;
        }
    }
    let z = values[best];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        values.iter_mut().for_each(|v| *v *= phase);
    }
}

/// Rotate the columns of `cols` (orthonormal) into eigenvectors of `BᴴB`
/// restricted to their span, smoothest first.
fn rotate_by_smoothness(layout: &Layout, cols: &[Vec<Complex64>]) -> Result<Vec<(Vec<Complex64>, f64)>> {
    let r = cols.len();
    if r == 0 {
        return Ok(Vec::new());
    }
    let averaged: Vec<Vec<Complex64>> = cols.iter().map(|c| cell_average(layout, c)).collect();
    let gram = Mat::<Complex64>::from_fn(r, r, |i, j| {
        averaged[i].iter().zip(&averaged[j]).map(|(a, b)| a.conj() * b).sum::<Complex64>()
    });
    let eig = gram.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Factorization(format!("smoothness eigen: {e:?}")))?;
    let (vals, vecs) = (eig.S().column_vector(), eig.U());
    let mut out = Vec::with_capacity(r);
    for j in (0..r).rev() {
        let mut v = vec![Complex64::new(0.0, 0.0); cols[0].len()];
        for (i, c) in cols.iter().enumerate() {
            let w = vecs[(i, j)];
            v.iter_mut().zip(c).for_each(|(acc, x)| *acc += w * x);
        }
        out.push((v, vals[j].re));
    }
    Ok(out)
}

/// The `k` smallest singular values and right singular vectors of `op`.
pub fn smallest_singulars(op: &SparseOperator, k: usize, tol_zero: f64, seed: u64) -> Result<SpectralReport> {
    if !(tol_zero > 0.0) {
        return Err(Error::InvalidParams(format!("tol_zero must be positive, got {tol_zero}")));
    }
    let t = solver::smallest(op, k, seed)?;
    let layout = op.layout.clone();
    let n = op.rows;
    let cols: Vec<Vec<Complex64>> = (0..k).map(|j| (0..n).map(|i| t.vectors[(i, j)]).collect()).collect();

    let near_zero_count = t.sigma.iter().filter(|&&s| s < tol_zero).count();
    let mut rotated = rotate_by_smoothness(&layout, &cols[..near_zero_count])?;
    for c in &cols[near_zero_count..] {
        let sv = StateVector { values: c.clone(), sector: Sector::FermionLower, layout: layout.clone() };
        let s = smoothness(&sv);
        rotated.push((c.clone(), s));
    }

    let sector = match op.tag {
        OperatorTag::D => Sector::FermionLower,
        OperatorTag::DAdjoint => Sector::FermionUpper,
        OperatorTag::DBoson => Sector::Boson,
    };
    let h = layout.grid.h;
    let mut vectors = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    for (mut v, s) in rotated {
        fix_phase(&mut v);
        v.iter_mut().for_each(|z| *z /= h);
        vectors.push(StateVector { values: v, sector, layout: layout.clone() });
        scores.push(s);
    }

    let smooth_zero_modes = scores[..near_zero_count].iter().filter(|&&s| s > SMOOTH_THRESHOLD).count();
    let ambiguous = scores[..near_zero_count].iter().any(|&s| s > AMBIGUOUS_BAND.0 && s < AMBIGUOUS_BAND.1);
    let gap_ratio = if near_zero_count == 0 {
        t.sigma[0] / tol_zero
    } else if near_zero_count < k {
        t.sigma[near_zero_count] / t.sigma[near_zero_count - 1].max(GAP_EPS)
    } else {
        0.0
    };
    let sigma_above_kernel = t.sigma.get(near_zero_count).copied();
    let smallest_smooth_sigma = (near_zero_count..k).find(|&i| scores[i] > SMOOTH_THRESHOLD).map(|i| t.sigma[i]);
    let resolved = gap_ratio >= GAP_RATIO_MIN && !ambiguous && near_zero_count < k;
    if !resolved {
        log::warn!(
            "{} kernel unresolved: gap ratio {gap_ratio:.3e}, near-zero {near_zero_count} of {k}, ambiguous smoothness {ambiguous}",
            op.tag
        );
    }

    Ok(SpectralReport {
        operator_tag: op.tag,
        sigma: t.sigma,
        vectors,
        smoothness: scores,
        near_zero_count,
        smooth_zero_modes,
        kernel_count: 2 * smooth_zero_modes,
        gap_ratio,
        sigma_above_kernel,
        smallest_smooth_sigma,
        resolved,
        tol_zero,
        solver_meta: SolverMeta {
            block_applications: t.block_applications,
            restarts: t.restarts,
            seed,
            residuals: t.residuals,
        },
    })
}

/// Graded zero-mode counts of `H₋ = D†D` and `H₊ = DD†`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexReport {
    pub vorticity: i64,
    /// `dim ker D†D = dim ker D`.
    pub n_minus: usize,
    /// `dim ker DD† = dim ker D†`.
    pub n_plus: usize,
    /// `n_minus − n_plus`.
    pub witten_index: i64,
    /// `dim ker D − dim ker D†`.
    pub fredholm_index: i64,
    pub resolved: bool,
    /// Near-zero counts including lattice modes; their difference is the
    /// index of the square matrix, which is always zero.
    pub raw_near_zero_d: usize,
    pub raw_near_zero_d_adjoint: usize,
    pub sign_convention: String,
    pub d: SpectralReport,
    pub d_adjoint: SpectralReport,
}

/// Index report for `D` assembled with the default scheme.
pub fn compute_index(bg: &Background2D, k: usize, tol_zero: f64, seed: u64) -> Result<IndexReport> {
    compute_index_with(bg, Scheme::Central2, k, tol_zero, seed)
}

/// Index report for `D` assembled with `scheme`. `k` is raised to at least
/// `2n + 4` so the near-kernel block of `D†` is followed by regular modes.
pub fn compute_index_with(bg: &Background2D, scheme: Scheme, k: usize, tol_zero: f64, seed: u64) -> Result<IndexReport> {
    let k = k.max(2 * bg.n.unsigned_abs() as usize + 4);
    let d = assemble_d(bg, scheme)?;
    let dt = assemble_d_adjoint(bg, scheme)?;
    index_from_operators(bg.n, &d, &dt, k, tol_zero, seed)
}

/// Index report from an operator and its adjoint.
pub fn index_from_operators(
    vorticity: i64,
    d: &SparseOperator,
    dt: &SparseOperator,
    k: usize,
    tol_zero: f64,
    seed: u64,
) -> Result<IndexReport> {
    let (rd, rdt) = rayon::join(|| smallest_singulars(d, k, tol_zero, seed), || smallest_singulars(dt, k, tol_zero, seed));
    Ok(IndexReport::from_reports(vorticity, rd?, rdt?))
}

impl IndexReport {
    /// Combine the reports of `D` and `D†`.
    pub fn from_reports(vorticity: i64, d: SpectralReport, d_adjoint: SpectralReport) -> Self {
        let n_minus = d.kernel_count;
        let n_plus = d_adjoint.kernel_count;
        IndexReport {
            vorticity,
            n_minus,
            n_plus,
            witten_index: n_minus as i64 - n_plus as i64,
            fredholm_index: d.kernel_count as i64 - d_adjoint.kernel_count as i64,
            resolved: d.resolved && d_adjoint.resolved,
            raw_near_zero_d: d.near_zero_count,
            raw_near_zero_d_adjoint: d_adjoint.near_zero_count,
            sign_convention: "witten_index = dim ker D†D - dim ker DD†".into(),
            d,
            d_adjoint,
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
