//! Smallest singular triplets of a sparse square operator by restarted block
//! Krylov iteration on `(AᴴA + μ²)⁻¹`.
//!
//! The shifted inverse is applied through one sparse LU solve with the
//! augmented matrix
//!
//! ```text
//! M = | −iμ   A  |
//!     |  Aᴴ  −iμ |
//! ```
//!
//! since `M (x, y) = (0, w)` gives `y = iμ (AᴴA + μ²)⁻¹ w`. Unlike `(AᴴA)⁻¹`,
//! this stays well conditioned when `A` has singular values near zero, while
//! keeping the eigenvectors and the ordering of `AᴴA`. Ritz values come from
//! a thin SVD of `A V`, which keeps singular values far below `√ε` accurate.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Accum, Conj, Mat, MatRef, Par};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::SparseOperator;

/// Residual target `‖AᴴA x − σ² x‖ / ‖x‖` for accepted Ritz pairs.
pub const RESIDUAL_TOL: f64 = 1e-8;
const MAX_RESTARTS: usize = 30;
/// Target number of basis columns per restart cycle.
const BASIS_COLUMNS: usize = 112;

pub(crate) struct Triplets {
    /// Ascending.
    pub sigma: Vec<f64>,
    /// Unit (Euclidean) right singular vectors, one column per value.
    pub vectors: Mat<Complex64>,
    pub residuals: Vec<f64>,
    pub block_applications: usize,
    pub restarts: usize,
}

/// Restarts over which the worst residual has to halve before the iteration
/// counts as stalled.
const STALL_WINDOW: usize = 3;
/// Distance of the real shift below the lowest Ritz value, in units of its
/// residual.
const STALL_MARGIN: f64 = 10.0;

/// Relative size of the shift `μ`.
const SHIFT_FRACTION: f64 = 1e-2;

/// Shift scale: the largest coupling between the two components at one
/// point, or the inverse domain radius when there is none.
fn shift(op: &SparseOperator) -> f64 {
    let local = op
        .entries()
        .iter()
        .filter(|&&(r, c, _)| r / 2 == c / 2 && r != c)
        .map(|&(_, _, v)| v.norm())
        .fold(0.0, f64::max);
    let scale = if local > 0.0 { local } else { 1.0 / op.layout.grid.r_max };
    SHIFT_FRACTION * scale
}

/// Factor `M(s) = [[−s, A], [Aᴴ, −s]]`. Solving `M (x, y) = (0, w)` gives
/// `y = s (AᴴA − s²)⁻¹ w`.
fn factor_augmented(op: &SparseOperator, s: Complex64) -> Result<Lu<usize, Complex64>> {
    let n = op.rows;
    let mut trip = Vec::with_capacity(2 * op.nnz() + 2 * n);
    for &(r, c, v) in op.entries() {
        trip.push(Triplet::new(r, n + c, v));
        trip.push(Triplet::new(n + c, r, v.conj()));
    }
    for i in 0..2 * n {
        trip.push(Triplet::new(i, i, -s));
    }
    let m = SparseColMat::<usize, Complex64>::try_new_from_triplets(2 * n, 2 * n, &trip)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    m.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))
}

/// `A X` column by column.
fn apply_block(op: &SparseOperator, x: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let mut y = Mat::<Complex64>::zeros(op.rows, x.ncols());
    for &(r, c, v) in op.entries() {
        for j in 0..x.ncols() {
            y[(r, j)] += v * x[(c, j)];
        }
    }
    y
}

fn apply_adjoint_block(op: &SparseOperator, x: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let mut y = Mat::<Complex64>::zeros(op.cols, x.ncols());
    for &(r, c, v) in op.entries() {
        let vc = v.conj();
        for j in 0..x.ncols() {
            y[(c, j)] += vc * x[(r, j)];
        }
    }
    y
}

/// `W ← W − V (Vᴴ W)`, twice.
fn project_out(v: MatRef<'_, Complex64>, w: &mut Mat<Complex64>) {
    if v.ncols() == 0 {
        return;
    }
    for _ in 0..2 {
        let mut c = Mat::<Complex64>::zeros(v.ncols(), w.ncols());
        matmul(&mut c, Accum::Replace, v.adjoint(), w.as_ref(), Complex64::new(1.0, 0.0), Par::Seq);
        matmul(w.as_mut(), Accum::Add, v, c.as_ref(), Complex64::new(-1.0, 0.0), Par::Seq);
    }
}

fn orthonormal(w: &Mat<Complex64>) -> Mat<Complex64> {
    w.qr().compute_thin_Q()
}

pub(crate) fn smallest(op: &SparseOperator, want: usize, seed: u64) -> Result<Triplets> {
    let n = op.rows;
    if op.rows != op.cols {
        return Err(Error::DimensionMismatch(format!("operator is {}x{}", op.rows, op.cols)));
    }
    if want == 0 || want > n {
        return Err(Error::InvalidParams(format!("requested {want} singular values of a {n}-dimensional operator")));
    }
    let mut shift_s = Complex64::new(0.0, shift(op));
    let mut lu = factor_augmented(op, shift_s)?;
    let mut history: Vec<f64> = Vec::new();
    let block = (want + 6).min(n);
    let steps = (BASIS_COLUMNS / block).max(3).min(n / block - 1).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Mat::<Complex64>::from_fn(n, block, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let mut x = orthonormal(&start);

    let inverse_normal = |lu: &Lu<usize, Complex64>, s: Complex64, w: &mut Mat<Complex64>| {
        let mut z = Mat::<Complex64>::zeros(2 * n, w.ncols());
        z.as_mut().subrows_mut(n, n).copy_from(&*w);
        lu.solve_in_place_with_conj(Conj::No, z.as_mut());
        let scale = s.inv();
        for j in 0..w.ncols() {
            for i in 0..n {
                w[(i, j)] = z[(n + i, j)] * scale;
            }
        }
    };

    let mut applications = 0;
    let mut worst = f64::INFINITY;
    for restart in 1..=MAX_RESTARTS {
        let mut basis = Mat::<Complex64>::zeros(n, (steps + 1) * block);
        let mut filled = 0;
        let mut current = x.clone();
        basis.as_mut().subcols_mut(0, block).copy_from(&current);
        filled += block;
        for _ in 0..steps {
            let mut w = current.clone();
            inverse_normal(&lu, shift_s, &mut w);
            applications += 1;
            project_out(basis.as_ref().subcols(0, filled), &mut w);
            let mut q = orthonormal(&w);
            project_out(basis.as_ref().subcols(0, filled), &mut q);
            let q = orthonormal(&q);
            basis.as_mut().subcols_mut(filled, block).copy_from(&q);
            filled += block;
            current = q;
        }
        let v = basis.as_ref().subcols(0, filled);

        let av = apply_block(op, v);
        let svd = av.thin_svd().map_err(|e| Error::Factorization(format!("projected svd: {e:?}")))?;
        let s = svd.S().column_vector();
        let right = svd.V();
        // Singular values come back in nonincreasing order.
        let order: Vec<usize> = (0..filled).rev().collect();
        let keep = block.min(filled);
        let mut coeffs = Mat::<Complex64>::zeros(filled, keep);
        let mut sigma = Vec::with_capacity(keep);
        for (j, &src) in order.iter().take(keep).enumerate() {
            coeffs.col_mut(j).copy_from(right.col(src));
            sigma.push(s[src].re);
        }
        let mut ritz = Mat::<Complex64>::zeros(n, keep);
        matmul(&mut ritz, Accum::Replace, v, coeffs.as_ref(), Complex64::new(1.0, 0.0), Par::Seq);

        let az = apply_block(op, ritz.as_ref().subcols(0, want));
        let aaz = apply_adjoint_block(op, az.as_ref());
        let residuals: Vec<f64> = (0..want)
            .map(|j| {
                let s2 = sigma[j] * sigma[j];
                let norm_z = ritz.col(j).norm_l2();
                let r: f64 = (0..n).map(|i| (aaz[(i, j)] - ritz[(i, j)] * s2).norm_sqr()).sum::<f64>().sqrt();
                r / norm_z
            })
            .collect();
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        log::debug!("restart {restart}: worst residual {worst:.3e}, residuals {residuals:?}");
        if worst <= RESIDUAL_TOL {
            sigma.truncate(want);
            let vectors = ritz.as_ref().subcols(0, want).to_owned();
            return Ok(Triplets { sigma, vectors, residuals, block_applications: applications, restarts: restart });
        }
        history.push(worst);
        // A stalled iteration means the unconverged values sit in a cluster
        // that the current shift cannot separate. Shift-invert just below
        // the lowest unconverged value. Converged vectors stay in the basis
        // because every cycle starts from the previous Ritz block.
        let stalled = history.len() > STALL_WINDOW && worst > 0.5 * history[history.len() - 1 - STALL_WINDOW];
        if let Some(j) = residuals.iter().position(|&r| r > RESIDUAL_TOL).filter(|_| stalled) {
            let s2 = sigma[j] * sigma[j];
            let floor = s2 - STALL_MARGIN * residuals[j];
            if floor > 0.0 && residuals[j] < 1e-3 * s2 {
                shift_s = Complex64::new(floor.sqrt(), 0.0);
                lu = factor_augmented(op, shift_s)?;
                history.clear();
                log::debug!("restart {restart}: stalled, real shift {:.12} below value {j}", shift_s.re);
            }
        }
        x = orthonormal(&ritz);
    }
    Err(Error::NoConvergence { iterations: applications, residual: worst })
}
