//! Finite-difference discretization of the zero-mode operator
//!
//! ```text
//! D = | D₁ + iD₂     -√2 e φ  |
//!     | -√2 e φ*     ∂₁ - i∂₂ |
//! ```
//!
//! acting on `(ψ↓, χ↑)`, its adjoint, and the bosonic operator obtained from
//! the linearized self-duality equations. `D_μ = ∂_μ - i e A_μ`. Fields vanish
//! outside the disk.

mod exact;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vortex::{Background2D, Grid};
use exact::Exact;

/// Largest allowed `max |eA| · h`.
pub const STENCIL_GUARD: f64 = 0.5;

/// Finite-difference stencil for first derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Second-order central difference.
    #[default]
    Central2,
    /// Fourth-order central difference.
    Central4,
}

impl Scheme {
    /// `(offset, weight)` pairs; the derivative is `Σ weight · u[i + offset] / h`.
    pub fn stencil(self) -> &'static [(isize, f64)] {
        match self {
            Scheme::Central2 => &[(-1, -0.5), (1, 0.5)],
            Scheme::Central4 => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Scheme::Central2 => 2,
            Scheme::Central4 => 4,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Central2 => "central2",
            Scheme::Central4 => "central4",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central2" => Ok(Scheme::Central2),
            "central4" => Ok(Scheme::Central4),
            other => Err(Error::InvalidParams(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Which operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorTag {
    D,
    #[serde(rename = "D_adjoint")]
    DAdjoint,
    #[serde(rename = "D_boson")]
    DBoson,
}

impl fmt::Display for OperatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorTag::D => "D",
            OperatorTag::DAdjoint => "D_adjoint",
            OperatorTag::DBoson => "D_boson",
        })
    }
}

/// Component content of a state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// `(ψ↓, χ↑)`
    FermionLower,
    /// `(ψ↑, χ↓)`
    FermionUpper,
    /// `(δφ, (i/√2)(δA₁ + iδA₂))`
    Boson,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::FermionLower => "fermion_lower",
            Sector::FermionUpper => "fermion_upper",
            Sector::Boson => "boson",
        })
    }
}

impl FromStr for Sector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fermion_lower" => Ok(Sector::FermionLower),
            "fermion_upper" => Ok(Sector::FermionUpper),
            "boson" => Ok(Sector::Boson),
            other => Err(Error::UnknownSector(other.to_string())),
        }
    }
}

/// Map between `(in-domain point, component)` and matrix index
/// `2 · point + component`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub grid: Grid,
    /// Grid index of each in-domain point, ascending.
    points: Vec<usize>,
    /// Inverse of `points`; `usize::MAX` outside the domain.
    slot: Vec<usize>,
}

impl Layout {
    pub fn from_background(bg: &Background2D) -> Self {
        Self::from_mask(bg.grid, &bg.mask)
    }

    pub fn from_mask(grid: Grid, mask: &[bool]) -> Self {
        let points: Vec<usize> = (0..grid.len()).filter(|&k| mask[k]).collect();
        let mut slot = vec![usize::MAX; grid.len()];
        for (p, &k) in points.iter().enumerate() {
            slot[k] = p;
        }
        Self { grid, points, slot }
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Vector length, two components per point.
    pub fn dim(&self) -> usize {
        2 * self.points.len()
    }

    pub fn grid_index(&self, point: usize) -> usize {
        self.points[point]
    }

    pub fn point_of(&self, grid_index: usize) -> Option<usize> {
        match self.slot.get(grid_index) {
            Some(&p) if p != usize::MAX => Some(p),
            _ => None,
        }
    }

    pub fn index(&self, point: usize, component: usize) -> usize {
        debug_assert!(component < 2);
        2 * point + component
    }

    pub fn xy(&self, point: usize) -> (f64, f64) {
        self.grid.xy(self.points[point])
    }

    /// In-domain neighbour at grid offset `(dx, dy)`.
    pub fn neighbour(&self, point: usize, dx: isize, dy: isize) -> Option<usize> {
        let m = self.grid.m as isize;
        let k = self.points[point] as isize;
        let (ix, iy) = (k % m + dx, k / m + dy);
        if ix < 0 || iy < 0 || ix >= m || iy >= m {
            return None;
        }
        self.point_of((iy * m + ix) as usize)
    }
}

/// Complex vector on a layout, tagged with its sector.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub values: Vec<Complex64>,
    pub sector: Sector,
    pub layout: Arc<Layout>,
}

impl StateVector {
    pub fn new(values: Vec<Complex64>, sector: Sector, layout: Arc<Layout>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "vector of length {} on a layout of dimension {}",
                values.len(),
                layout.dim()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidParams("state vector has non-finite entries".into()));
        }
        Ok(Self { values, sector, layout })
    }

    pub fn zeros(sector: Sector, layout: Arc<Layout>) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); layout.dim()], sector, layout }
    }

    /// Build from a function of position returning both components.
    pub fn from_fn<F>(sector: Sector, layout: Arc<Layout>, mut field: F) -> Self
    where
        F: FnMut(f64, f64) -> [Complex64; 2],
    {
        let mut values = Vec::with_capacity(layout.dim());
        for p in 0..layout.n_points() {
            let (x, y) = layout.xy(p);
            values.extend(field(x, y));
        }
        Self { values, sector, layout }
    }

    pub fn component(&self, point: usize, c: usize) -> Complex64 {
        self.values[self.layout.index(point, c)]
    }

    /// Discrete `L²` inner product `h² Σ conj(a) b`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        let h2 = self.layout.grid.h * self.layout.grid.h;
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h2
    }

    /// Discrete `L²` norm squared `h² Σ |v|²`.
    pub fn norm_sq(&self) -> f64 {
        let h2 = self.layout.grid.h * self.layout.grid.h;
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h2
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Two-component point-wise CSV `x,y,re_c0,im_c0,re_c1,im_c1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,re_c0,im_c0,re_c1,im_c1")?;
        for p in 0..self.layout.n_points() {
            let (x, y) = self.layout.xy(p);
            let (a, b) = (self.component(p, 0), self.component(p, 1));
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", x, y, a.re, a.im, b.re, b.im)?;
        }
        Ok(())
    }
}

/// Boundary treatment recorded in operator metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Fields vanish outside the disk.
    Dirichlet,
}

/// Complex sparse matrix in coordinate format, entries sorted by `(row, col)`.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub tag: OperatorTag,
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(usize, usize, Complex64)>,
    pub layout: Arc<Layout>,
    pub h: f64,
    pub scheme: Scheme,
    pub bc: BoundaryCondition,
}

impl SparseOperator {
    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Largest number of stored entries in a single row.
    pub fn max_row_nnz(&self) -> usize {
        let mut counts = vec![0usize; self.rows];
        for &(r, _, _) in &self.entries {
            counts[r] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    fn check_len(&self, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(Error::LayoutMismatch(format!("vector of length {len}, operator expects {expected}")));
        }
        Ok(())
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len(), self.cols)?;
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        Ok(y)
    }

    /// `y = Aᴴ x`.
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len(), self.rows)?;
        let mut y = vec![Complex64::new(0.0, 0.0); self.cols];
        for &(r, c, v) in &self.entries {
            y[c] += v.conj() * x[r];
        }
        Ok(y)
    }

    /// Apply to a state vector on the same layout; the sector is kept.
    pub fn apply_state(&self, v: &StateVector) -> Result<StateVector> {
        if *v.layout != *self.layout {
            return Err(Error::LayoutMismatch("state vector and operator use different layouts".into()));
        }
        Ok(StateVector { values: self.apply(&v.values)?, sector: v.sector, layout: v.layout.clone() })
    }

    /// Exact conjugate transpose, re-sorted by `(row, col)`.
    pub fn conj_transpose(&self, tag: OperatorTag) -> SparseOperator {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        SparseOperator { tag, rows: self.cols, cols: self.rows, entries, ..self.clone() }
    }

    /// Entrywise equality of patterns and value bits; tags may differ.
    pub fn bit_identical(&self, other: &SparseOperator) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.0 == b.0 && a.1 == b.1 && a.2.re.to_bits() == b.2.re.to_bits() && a.2.im.to_bits() == b.2.im.to_bits()
            })
    }

    /// Dense row-major copy, for small grids.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut m = vec![vec![Complex64::new(0.0, 0.0); self.cols]; self.rows];
        for &(r, c, v) in &self.entries {
            m[r][c] += v;
        }
        m
    }

    /// Text export: header `# rows cols nnz h scheme`, then `row col re im`.
    pub fn write_matrix<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {} {} {} {:.16e} {}", self.rows, self.cols, self.nnz(), self.h, self.scheme)?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{} {} {:.16e} {:.16e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }
}

fn check_guard(bg: &Background2D) -> Result<()> {
    let value = bg.max_gauge() * bg.grid.h;
    if !(value < STENCIL_GUARD) {
        return Err(Error::StencilOverflow { value, limit: STENCIL_GUARD });
    }
    if bg.phi.len() != bg.grid.len() || bg.mask.len() != bg.grid.len() {
        return Err(Error::LayoutMismatch("background arrays do not match its grid".into()));
    }
    Ok(())
}

type ExactEntries = Vec<(usize, usize, Exact)>;

/// Append the row of `D₁ + iD₂ = ∂₁ + i∂₂ + (eA₂ - i eA₁)` acting on
/// component `col_comp`.
fn push_holomorphic(out: &mut ExactEntries, bg: &Background2D, layout: &Layout, scheme: Scheme, p: usize, row: usize, col_comp: usize) {
    let h = bg.grid.h;
    for &(off, w) in scheme.stencil() {
        let coef = Exact::real(w / h);
        if let Some(q) = layout.neighbour(p, off, 0) {
            out.push((row, layout.index(q, col_comp), coef));
        }
        if let Some(q) = layout.neighbour(p, 0, off) {
            out.push((row, layout.index(q, col_comp), coef.times_i()));
        }
    }
    let k = layout.grid_index(p);
    out.push((row, layout.index(p, col_comp), Exact::new(Complex64::new(bg.a2[k], -bg.a1[k]))));
}

/// Append the row of `∂₁ - i∂₂` acting on component `col_comp`, multiplied
/// by each constant `(re + i im) √2^pow` in `scales`.
fn push_antiholomorphic(
    out: &mut ExactEntries,
    layout: &Layout,
    scheme: Scheme,
    h: f64,
    p: usize,
    row: usize,
    col_comp: usize,
    scales: &[(i64, i64, i32)],
) {
    let scaled = |c: Exact| scales.iter().fold(c, |acc, &(re, im, pow)| acc.times(re, im, pow));
    for &(off, w) in scheme.stencil() {
        let coef = Exact::real(w / h);
        if let Some(q) = layout.neighbour(p, off, 0) {
            out.push((row, layout.index(q, col_comp), scaled(coef)));
        }
        if let Some(q) = layout.neighbour(p, 0, off) {
            out.push((row, layout.index(q, col_comp), scaled(coef.times(0, -1, 0))));
        }
    }
}

/// Entries of all rows, generated point by point in parallel. The order is
/// canonicalized later by [`finish`].
fn rows_by_point<F>(layout: &Layout, fill: F) -> ExactEntries
where
    F: Fn(usize, &mut ExactEntries) + Sync,
{
    (0..layout.n_points())
        .into_par_iter()
        .flat_map_iter(|p| {
            let mut raw = Vec::with_capacity(16);
            fill(p, &mut raw);
            raw
        })
        .collect()
}

/// `e φ` at grid index `k`.
fn coupling(bg: &Background2D, k: usize) -> Complex64 {
    bg.phi[k] * bg.e
}

fn finish(tag: OperatorTag, bg: &Background2D, layout: Arc<Layout>, scheme: Scheme, mut raw: ExactEntries) -> SparseOperator {
    raw.sort_by_key(|&(r, c, _)| (r, c));
    let entries: Vec<_> = raw
        .into_iter()
        .map(|(r, c, v)| (r, c, v.value()))
        .filter(|&(_, _, v)| v != Complex64::new(0.0, 0.0))
        .collect();
    let dim = layout.dim();
    SparseOperator { tag, rows: dim, cols: dim, entries, layout, h: bg.grid.h, scheme, bc: BoundaryCondition::Dirichlet }
}

/// Assemble `D` on the in-domain points of `bg`.
pub fn assemble_d(bg: &Background2D, scheme: Scheme) -> Result<SparseOperator> {
    check_guard(bg)?;
    let layout = Arc::new(Layout::from_background(bg));
    let raw = rows_by_point(&layout, |p, raw| {
        let k = layout.grid_index(p);
        let (r0, r1) = (layout.index(p, 0), layout.index(p, 1));
        let g = coupling(bg, k);
        // (D₁ + iD₂) ψ - √2 e φ χ
        push_holomorphic(raw, bg, &layout, scheme, p, r0, 0);
        raw.push((r0, layout.index(p, 1), Exact::new(g).times(-1, 0, 1)));
        // -√2 e φ* ψ + (∂₁ - i∂₂) χ
        raw.push((r1, layout.index(p, 0), Exact::new(g.conj()).times(-1, 0, 1)));
        push_antiholomorphic(raw, &layout, scheme, bg.grid.h, p, r1, 1, &[]);
    });
    Ok(finish(OperatorTag::D, bg, layout, scheme, raw))
}

/// Assemble `D†` as the exact conjugate transpose of [`assemble_d`].
pub fn assemble_d_adjoint(bg: &Background2D, scheme: Scheme) -> Result<SparseOperator> {
    Ok(assemble_d(bg, scheme)?.conj_transpose(OperatorTag::DAdjoint))
}

/// Assemble the bosonic operator from the linearized self-duality equations
///
/// ```text
/// (D₁ + iD₂) δφ - i e φ b = 0
/// (∂₁ - i∂₂) b + 2 i e φ* δφ = 0,      b = δA₁ + i δA₂
/// ```
///
/// in the variables `(δφ, (i/√2) b)`, with the second equation scaled by
/// `i/√2`.
pub fn assemble_d_boson(bg: &Background2D, scheme: Scheme) -> Result<SparseOperator> {
    check_guard(bg)?;
    let layout = Arc::new(Layout::from_background(bg));
    // b = -i√2 · (second component); second equation times i/√2.
    let col_scale = (0, -1, 1);
    let row_scale = (0, 1, -1);
    let raw = rows_by_point(&layout, |p, raw| {
        let k = layout.grid_index(p);
        let (r0, r1) = (layout.index(p, 0), layout.index(p, 1));
        let g = coupling(bg, k);
        push_holomorphic(raw, bg, &layout, scheme, p, r0, 0);
        let mix = Exact::new(g).times(0, -1, 0).times(col_scale.0, col_scale.1, col_scale.2);
        raw.push((r0, layout.index(p, 1), mix));

        let back = Exact::new(g.conj()).times(0, 2, 0).times(row_scale.0, row_scale.1, row_scale.2);
        raw.push((r1, layout.index(p, 0), back));
        push_antiholomorphic(raw, &layout, scheme, bg.grid.h, p, r1, 1, &[col_scale, row_scale]);
    });
    Ok(finish(OperatorTag::DBoson, bg, layout, scheme, raw))
}
