//! Supersymmetric quantum mechanics built on a zero-mode operator `D`.
//!
//! On the graded space `H₊ ⊕ H₋` (upper block first) the blocks are
//!
//! ```text
//! Q  = | 0  D |    Q† = | 0   0 |    H = | DD†   0  |    W = | I   0 |
//!      | 0  0 |         | D†  0 |        |  0   D†D |        | 0  -I |
//! ```
//!
//! with `P± = (I ± W) / 2`. The lower block hosts `(ψ↓, χ↑)` and bosonic
//! fluctuations (parity −1), the upper block hosts `(ψ↑, χ↓)` (parity +1).
//! Blocks are applied as compositions of `D` and `D†`; no products are formed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{OperatorTag, Sector, SparseOperator, StateVector};
use crate::spectral::IndexReport;

/// Largest grid side for which [`SusyBlocks::dense_check`] densifies.
pub const DENSE_MAX_M_XY: usize = 48;

type CVec = Vec<Complex64>;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn add(a: &[Complex64], b: &[Complex64]) -> CVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Witten parity of a graded state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// Upper block, `W = +1`.
    Plus,
    /// Lower block, `W = −1`.
    Minus,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Plus => 1.0,
            Parity::Minus => -1.0,
        }
    }

    /// Parity carried by a sector.
    pub fn of_sector(sector: Sector) -> Parity {
        match sector {
            Sector::FermionUpper => Parity::Plus,
            Sector::FermionLower | Sector::Boson => Parity::Minus,
        }
    }
}

/// Supercharges, Hamiltonian, Witten parity and projectors over one operator.
#[derive(Debug, Clone)]
pub struct SusyBlocks {
    d: Arc<SparseOperator>,
    /// Separately stored conjugate transpose, used by `Q†` and `H`.
    d_adjoint: Arc<SparseOperator>,
}

/// Build the blocks over `d` (either `D` or the bosonic operator).
pub fn build_susy(d: &SparseOperator) -> Result<SusyBlocks> {
    if d.rows != d.cols {
        return Err(Error::DimensionMismatch(format!("operator is {}x{}, blocks need a square map", d.rows, d.cols)));
    }
    if d.rows != d.layout.dim() {
        return Err(Error::DimensionMismatch(format!("operator has {} rows, layout has dimension {}", d.rows, d.layout.dim())));
    }
    let adjoint_tag = match d.tag {
        OperatorTag::DAdjoint => OperatorTag::D,
        _ => OperatorTag::DAdjoint,
    };
    Ok(SusyBlocks { d: Arc::new(d.clone()), d_adjoint: Arc::new(d.conj_transpose(adjoint_tag)) })
}

impl SusyBlocks {
    /// Dimension of one block.
    pub fn block_dim(&self) -> usize {
        self.d.rows
    }

    /// Dimension of the graded space.
    pub fn dim(&self) -> usize {
        2 * self.d.rows
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.d
    }

    fn check(&self, x: &[Complex64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("graded vector of length {}, expected {}", x.len(), self.dim())));
        }
        Ok(())
    }

    fn split<'a>(&self, x: &'a [Complex64]) -> (&'a [Complex64], &'a [Complex64]) {
        x.split_at(self.block_dim())
    }

    fn join(upper: CVec, lower: CVec) -> CVec {
        let mut out = upper;
        out.extend(lower);
        out
    }

    /// `Q (u, l) = (D l, 0)`.
    pub fn apply_q(&self, x: &[Complex64]) -> Result<CVec> {
        self.check(x)?;
        let (_, l) = self.split(x);
        Ok(Self::join(self.d.apply(l)?, vec![zero(); self.block_dim()]))
    }

    /// `Q† (u, l) = (0, D† u)`.
    pub fn apply_q_dag(&self, x: &[Complex64]) -> Result<CVec> {
        self.check(x)?;
        let (u, _) = self.split(x);
        Ok(Self::join(vec![zero(); self.block_dim()], self.d_adjoint.apply(u)?))
    }

    /// `H (u, l) = (D D† u, D† D l)`.
    pub fn apply_h(&self, x: &[Complex64]) -> Result<CVec> {
        self.check(x)?;
        let (u, l) = self.split(x);
        let upper = self.d.apply(&self.d.apply_adjoint(u)?)?;
        let lower = self.d.apply_adjoint(&self.d.apply(l)?)?;
        Ok(Self::join(upper, lower))
    }

    /// `H₊ = D D†` on the upper block.
    pub fn apply_h_plus(&self, u: &[Complex64]) -> Result<CVec> {
        self.d.apply(&self.d.apply_adjoint(u)?)
    }

    /// `H₋ = D† D` on the lower block.
    pub fn apply_h_minus(&self, l: &[Complex64]) -> Result<CVec> {
        self.d.apply_adjoint(&self.d.apply(l)?)
    }

    /// `W (u, l) = (u, −l)`.
    pub fn apply_w(&self, x: &[Complex64]) -> Result<CVec> {
        self.check(x)?;
        let n = self.block_dim();
        Ok(x.iter().enumerate().map(|(i, &z)| if i < n { z } else { -z }).collect())
    }

    /// `P± = (I ± W) / 2`.
    pub fn apply_projector(&self, parity: Parity, x: &[Complex64]) -> Result<CVec> {
        self.check(x)?;
        let n = self.block_dim();
        let keep_upper = parity == Parity::Plus;
        Ok(x.iter().enumerate().map(|(i, &z)| if (i < n) == keep_upper { z } else { zero() }).collect())
    }

    /// Residuals of the algebra relations on `samples` random vectors.
    ///
    /// Structural relations report the largest absolute norm of the
    /// left-hand side; `{Q,Q†} = H` reports `‖({Q,Q†} − H) x‖ / ‖H x‖`.
    pub fn verify_algebra(&self, samples: usize, seed: u64) -> Result<AlgebraReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut residuals: BTreeMap<String, f64> = BTreeMap::new();
        let mut record = |name: &str, value: f64| {
            let slot = residuals.entry(name.to_string()).or_insert(0.0);
            *slot = slot.max(value);
        };
        let mut min_rayleigh = f64::INFINITY;
        for _ in 0..samples {
            let x: CVec = (0..self.dim()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let qx = self.apply_q(&x)?;
            let qdx = self.apply_q_dag(&x)?;
            let wx = self.apply_w(&x)?;
            let hx = self.apply_h(&x)?;

            record("Q^2", norm(&self.apply_q(&qx)?));
            record("Qdag^2", norm(&self.apply_q_dag(&qdx)?));
            let anti = add(&self.apply_q(&qdx)?, &self.apply_q_dag(&qx)?);
            record("{Q,Qdag}-H", diff_norm(&anti, &hx) / norm(&hx).max(f64::MIN_POSITIVE));
            record("W^2-I", diff_norm(&self.apply_w(&wx)?, &x));
            record("{W,Q}", norm(&add(&self.apply_w(&qx)?, &self.apply_q(&wx)?)));
            record("{W,Qdag}", norm(&add(&self.apply_w(&qdx)?, &self.apply_q_dag(&wx)?)));
            let wh = self.apply_w(&hx)?;
            let hw = self.apply_h(&wx)?;
            record("[W,H]", diff_norm(&wh, &hw));
            let pp = self.apply_projector(Parity::Plus, &x)?;
            let pm = self.apply_projector(Parity::Minus, &x)?;
            record("P+ + P- - I", diff_norm(&add(&pp, &pm), &x));
            record("P+^2 - P+", diff_norm(&self.apply_projector(Parity::Plus, &pp)?, &pp));

            let xhx: Complex64 = x.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum();
            let xx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            min_rayleigh = min_rayleigh.min(xhx.re / xx);
        }
        Ok(AlgebraReport { operator_tag: self.d.tag, samples, seed, residuals, min_rayleigh })
    }

    /// Residuals of the same relations on explicitly formed dense matrices,
    /// with `H` built from dense products of `D` and `D†`. Only for grids
    /// with side at most [`DENSE_MAX_M_XY`].
    pub fn dense_check(&self) -> Result<BTreeMap<String, f64>> {
        let m = self.d.layout.grid.m;
        if m > DENSE_MAX_M_XY {
            return Err(Error::InvalidParams(format!("dense check limited to m_xy <= {DENSE_MAX_M_XY}, got {m}")));
        }
        let n = self.block_dim();
        let big = self.dim();
        let d = self.d.to_dense();
        let dt = self.d_adjoint.to_dense();
        let mut q = faer::Mat::<Complex64>::zeros(big, big);
        let mut qd = faer::Mat::<Complex64>::zeros(big, big);
        let mut w = faer::Mat::<Complex64>::zeros(big, big);
        for i in 0..n {
            for j in 0..n {
                q[(i, n + j)] = d[i][j];
                qd[(n + i, j)] = dt[i][j];
            }
            w[(i, i)] = Complex64::new(1.0, 0.0);
            w[(n + i, n + i)] = Complex64::new(-1.0, 0.0);
        }
        let dm = faer::Mat::<Complex64>::from_fn(n, n, |i, j| d[i][j]);
        let dtm = faer::Mat::<Complex64>::from_fn(n, n, |i, j| dt[i][j]);
        let h_plus = &dm * &dtm;
        let h_minus = &dtm * &dm;
        let mut h = faer::Mat::<Complex64>::zeros(big, big);
        h.as_mut().submatrix_mut(0, 0, n, n).copy_from(&h_plus);
        h.as_mut().submatrix_mut(n, n, n, n).copy_from(&h_minus);
        let ident = faer::Mat::<Complex64>::identity(big, big);

        let fro = |a: &faer::Mat<Complex64>| a.norm_l2();
        let mut out = BTreeMap::new();
        out.insert("Q^2".to_string(), fro(&(&q * &q)));
        out.insert("Qdag^2".to_string(), fro(&(&qd * &qd)));
        out.insert("{Q,Qdag}-H".to_string(), fro(&(&q * &qd + &qd * &q - &h)) / fro(&h).max(f64::MIN_POSITIVE));
        out.insert("W^2-I".to_string(), fro(&(&w * &w - &ident)));
        out.insert("{W,Q}".to_string(), fro(&(&w * &q + &q * &w)));
        out.insert("{W,Qdag}".to_string(), fro(&(&w * &qd + &qd * &w)));
        out.insert("[W,H]".to_string(), fro(&(&w * &h - &h * &w)));
        let herm = fro(&(&h - h.adjoint().to_owned()));
        out.insert("H-Hdag".to_string(), herm);
        Ok(out)
    }
}

/// Largest residual of each algebra relation over random samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub operator_tag: OperatorTag,
    pub samples: usize,
    pub seed: u64,
    /// `relation → max residual`.
    pub residuals: BTreeMap<String, f64>,
    /// Smallest `⟨x, H x⟩ / ⟨x, x⟩` seen.
    pub min_rayleigh: f64,
}

/// Structural relations that must hold with zero residual.
pub const STRUCTURAL_RELATIONS: [&str; 7] = ["Q^2", "Qdag^2", "W^2-I", "{W,Q}", "{W,Qdag}", "[W,H]", "P+ + P- - I"];

impl AlgebraReport {
    pub fn structural_exact(&self) -> bool {
        STRUCTURAL_RELATIONS.iter().all(|r| self.residuals.get(*r).is_some_and(|&v| v == 0.0))
    }

    pub fn product_residual(&self) -> f64 {
        self.residuals.get("{Q,Qdag}-H").copied().unwrap_or(f64::INFINITY)
    }
}

/// Outcome of the Witten index test for supersymmetry breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Unbroken,
    Broken,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Unbroken => "unbroken",
            Verdict::Broken => "broken",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Supersymmetry is unbroken when the Witten index is nonzero, or when it
/// vanishes with `n₊ = n₋ ≠ 0`; broken when both counts vanish.
pub fn verify_unbroken(report: &IndexReport) -> Verdict {
    if !report.resolved {
        Verdict::Indeterminate
    } else if report.witten_index != 0 || report.n_plus != 0 {
        Verdict::Unbroken
    } else {
        Verdict::Broken
    }
}

/// JSON verification report: relation residuals and the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub relations: BTreeMap<String, f64>,
    pub min_rayleigh: f64,
    pub unbroken: Verdict,
}

impl VerificationReport {
    pub fn new(algebra: &AlgebraReport, verdict: Verdict) -> Self {
        Self { relations: algebra.residuals.clone(), min_rayleigh: algebra.min_rayleigh, unbroken: verdict }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// A state placed in one parity block of the graded space.
#[derive(Debug, Clone)]
pub struct GradedState {
    pub parity: Parity,
    pub payload: StateVector,
    /// `(v, 0)` for parity +1, `(0, v)` for parity −1.
    pub assembled: CVec,
}

/// Place `v` in the block its sector belongs to.
pub fn grade_state(v: &StateVector) -> GradedState {
    let parity = Parity::of_sector(v.sector);
    let zeros = vec![zero(); v.values.len()];
    let assembled = match parity {
        Parity::Plus => SusyBlocks::join(v.values.clone(), zeros),
        Parity::Minus => SusyBlocks::join(zeros, v.values.clone()),
    };
    GradedState { parity, payload: v.clone(), assembled }
}

/// [`grade_state`] with the sector given by name.
pub fn grade_state_named(values: Vec<Complex64>, sector: &str, layout: Arc<crate::operator::Layout>) -> Result<GradedState> {
    let sector: Sector = sector.parse()?;
    Ok(grade_state(&StateVector::new(values, sector, layout)?))
}
