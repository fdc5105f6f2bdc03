//! Fermion to boson zero-mode correspondence.
//!
//! A lower fermionic pair `(ψ↓, χ↑)` maps to the fluctuation
//! `δφ = ψ↓`, `δA₁ + iδA₂ = −i√2 χ↑`. The gauge part is stored as
//! `(δA₁ + iδA₂)/√2 = −i χ↑`, so the map and its inverse only swap and negate
//! real and imaginary parts and the round trip is exact.

use std::io::Write;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{Layout, Scheme, Sector, StateVector};
use crate::vortex::{Background2D, RadialProfile};

/// Bosonic fluctuation `(δφ, δA₁, δA₂)` on the in-domain points of a layout.
#[derive(Debug, Clone)]
pub struct FluctuationPair {
    pub delta_phi: Vec<Complex64>,
    /// `(δA₁ + iδA₂) / √2` per point.
    pub gauge_scaled: Vec<Complex64>,
    pub layout: Arc<Layout>,
    /// The fermionic mode this pair was mapped from, if any.
    pub source_mode: Option<StateVector>,
}

impl FluctuationPair {
    /// Pair from physical fields `δφ` and `b = δA₁ + iδA₂`.
    pub fn from_fields(delta_phi: Vec<Complex64>, b: &[Complex64], layout: Arc<Layout>) -> Result<Self> {
        let n = layout.n_points();
        if delta_phi.len() != n || b.len() != n {
            return Err(Error::LayoutMismatch(format!(
                "fields of length {} and {} on a layout with {n} points",
                delta_phi.len(),
                b.len()
            )));
        }
        let gauge_scaled = b.iter().map(|z| z / std::f64::consts::SQRT_2).collect();
        Ok(Self { delta_phi, gauge_scaled, layout, source_mode: None })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let n = layout.n_points();
        Self { delta_phi: vec![Complex64::new(0.0, 0.0); n], gauge_scaled: vec![Complex64::new(0.0, 0.0); n], layout, source_mode: None }
    }

    /// `δA₁ + iδA₂` per point.
    pub fn gauge(&self) -> Vec<Complex64> {
        self.gauge_scaled.iter().map(|z| z * std::f64::consts::SQRT_2).collect()
    }

    pub fn delta_a1(&self) -> Vec<f64> {
        self.gauge().iter().map(|z| z.re).collect()
    }

    pub fn delta_a2(&self) -> Vec<f64> {
        self.gauge().iter().map(|z| z.im).collect()
    }

    /// Discrete `L²` norm of the fermionic image `(δφ, (i/√2)(δA₁ + iδA₂))`.
    pub fn norm(&self) -> f64 {
        let h = self.layout.grid.h;
        let s: f64 = self.delta_phi.iter().chain(&self.gauge_scaled).map(|z| z.norm_sqr()).sum();
        (s * h * h).sqrt()
    }

    /// CSV `x,y,re_dphi,im_dphi,dA1,dA2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,re_dphi,im_dphi,dA1,dA2")?;
        let b = self.gauge();
        for p in 0..self.layout.n_points() {
            let (x, y) = self.layout.xy(p);
            let d = self.delta_phi[p];
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", x, y, d.re, d.im, b[p].re, b[p].im)?;
        }
        Ok(())
    }
}

/// Map a lower fermionic pair to a bosonic fluctuation.
pub fn fermion_to_boson(mode: &StateVector) -> Result<FluctuationPair> {
    if mode.sector != Sector::FermionLower {
        return Err(Error::SectorMismatch { expected: Sector::FermionLower.to_string(), found: mode.sector.to_string() });
    }
    let n = mode.layout.n_points();
    let mut delta_phi = Vec::with_capacity(n);
    let mut gauge_scaled = Vec::with_capacity(n);
    for p in 0..n {
        delta_phi.push(mode.component(p, 0));
        let chi = mode.component(p, 1);
        gauge_scaled.push(Complex64::new(chi.im, -chi.re));
    }
    Ok(FluctuationPair { delta_phi, gauge_scaled, layout: mode.layout.clone(), source_mode: Some(mode.clone()) })
}

/// Inverse of [`fermion_to_boson`]: `ψ↓ = δφ`, `χ↑ = (i/√2)(δA₁ + iδA₂)`.
pub fn boson_to_fermion(pair: &FluctuationPair) -> StateVector {
    let mut values = Vec::with_capacity(2 * pair.delta_phi.len());
    for (d, g) in pair.delta_phi.iter().zip(&pair.gauge_scaled) {
        values.push(*d);
        values.push(Complex64::new(-g.im, g.re));
    }
    StateVector { values, sector: Sector::FermionLower, layout: pair.layout.clone() }
}

/// Same fluctuation expressed as a bosonic-sector state `(δφ, (i/√2) b)`.
pub fn boson_state(pair: &FluctuationPair) -> StateVector {
    StateVector { sector: Sector::Boson, ..boson_to_fermion(pair) }
}

fn check_grid(pair: &FluctuationPair, bg: &Background2D) -> Result<()> {
    if pair.layout.grid != bg.grid || *pair.layout != Layout::from_background(bg) {
        return Err(Error::GridMismatch(format!(
            "pair on a {}x{} grid with {} points, background on {}x{} with {} points",
            pair.layout.grid.m,
            pair.layout.grid.m,
            pair.layout.n_points(),
            bg.grid.m,
            bg.grid.m,
            bg.in_domain_count()
        )));
    }
    Ok(())
}

/// First derivative of a point field along `axis` (0 = x, 1 = y), zero
/// outside the domain.
fn derivative(layout: &Layout, scheme: Scheme, field: &[Complex64], p: usize, axis: usize) -> Complex64 {
    let h = layout.grid.h;
    scheme
        .stencil()
        .iter()
        .map(|&(off, w)| {
            let q = if axis == 0 { layout.neighbour(p, off, 0) } else { layout.neighbour(p, 0, off) };
            q.map_or(Complex64::new(0.0, 0.0), |q| field[q] * w)
        })
        .sum::<Complex64>()
        / h
}

/// Residuals of the linearized self-duality equations
///
/// ```text
/// E₁ = (D₁ + iD₂) δφ − i e φ b
/// E₂ = (∂₁ − i∂₂) b + 2 i e φ* δφ,      b = δA₁ + iδA₂
/// ```
///
/// evaluated point by point with `scheme`; returns `max(‖E₁‖, ‖E₂‖)` in the
/// discrete `L²` norm.
pub fn bosonic_residual_with(pair: &FluctuationPair, bg: &Background2D, scheme: Scheme) -> Result<f64> {
    check_grid(pair, bg)?;
    let layout = &pair.layout;
    let b = pair.gauge();
    let i = Complex64::i();
    let (mut e1, mut e2) = (0.0, 0.0);
    for p in 0..layout.n_points() {
        let k = layout.grid_index(p);
        let phi = bg.phi[k] * bg.e;
        let ea = Complex64::new(bg.a1[k], bg.a2[k]);
        let dphi = pair.delta_phi[p];
        // D₁ + iD₂ = ∂₁ + i∂₂ − i e (A₁ + i A₂)
        let cov = derivative(layout, scheme, &pair.delta_phi, p, 0) + i * derivative(layout, scheme, &pair.delta_phi, p, 1)
            - i * ea * dphi;
        let r1 = cov - i * phi * b[p];
        let r2 = derivative(layout, scheme, &b, p, 0) - i * derivative(layout, scheme, &b, p, 1) + 2.0 * i * phi.conj() * dphi;
        e1 += r1.norm_sqr();
        e2 += r2.norm_sqr();
    }
    let h = layout.grid.h;
    Ok((e1.sqrt() * h).max(e2.sqrt() * h))
}

/// [`bosonic_residual_with`] for the second-order scheme.
pub fn bosonic_residual(pair: &FluctuationPair, bg: &Background2D) -> Result<f64> {
    bosonic_residual_with(pair, bg, Scheme::Central2)
}

/// Real inner product `Re⟨a, b⟩` on the discrete `L²` measure.
fn real_inner(a: &StateVector, b: &StateVector) -> f64 {
    a.inner(b).re
}

/// Orthonormal basis of the real span of `vectors`, dropping dependent ones.
fn real_orthonormal(vectors: &[StateVector]) -> Vec<StateVector> {
    let mut out: Vec<StateVector> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = real_inner(q, &w);
                w.values.iter_mut().zip(&q.values).for_each(|(x, y)| *x -= y * c);
            }
        }
        let n = w.norm();
        if n > 1e-12 * v.norm().max(f64::MIN_POSITIVE) {
            w.values.iter_mut().for_each(|x| *x /= n);
            out.push(w);
        }
    }
    out
}

/// Cosine of the largest principal angle between the real spans of `a` and
/// `b`: 1 when one span contains the other, 0 when they are orthogonal.
pub fn subspace_overlap(a: &[StateVector], b: &[StateVector]) -> f64 {
    let qa = real_orthonormal(a);
    let qb = real_orthonormal(b);
    if qa.is_empty() || qb.is_empty() {
        return 0.0;
    }
    let m = Mat::<f64>::from_fn(qa.len(), qb.len(), |i, j| real_inner(&qa[i], &qb[j]));
    let s = m.singular_values().unwrap_or_default();
    let k = qa.len().min(qb.len());
    s.iter().take(k).cloned().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0)
}

/// Translation zero modes of an `n = 1` vortex built from the background
/// fields: `T_x = (D₁φ, −F₁₂/√2)`, `T_y = i T_x`, with
/// `F₁₂ = e (v² − |φ|²)` and `D₁φ` from fourth-order differences.
pub fn translation_modes(bg: &Background2D) -> Vec<StateVector> {
    let layout = Arc::new(Layout::from_background(bg));
    let m = bg.grid.m;
    let h = bg.grid.h;
    let phi_at = |ix: isize, iy: isize| -> Complex64 {
        let ix = ix.clamp(0, m as isize - 1) as usize;
        let iy = iy.clamp(0, m as isize - 1) as usize;
        bg.phi[bg.grid.index(ix, iy)]
    };
    let mut values = Vec::with_capacity(layout.dim());
    for p in 0..layout.n_points() {
        let k = layout.grid_index(p);
        let (ix, iy) = ((k % m) as isize, (k / m) as isize);
        let d1 = (phi_at(ix - 2, iy) - phi_at(ix - 1, iy) * 8.0 + phi_at(ix + 1, iy) * 8.0 - phi_at(ix + 2, iy)) / (12.0 * h);
        let cov = d1 - Complex64::i() * bg.a1[k] * bg.phi[k];
        let f12 = bg.e * (bg.v * bg.v - bg.phi[k].norm_sqr());
        values.push(cov);
        values.push(Complex64::new(-f12 / std::f64::consts::SQRT_2, 0.0));
    }
    modes_pair(values, layout)
}

/// Translation modes from the radial profile:
/// `T_x = (v f'(r) e^{i(n−1)θ}, −e v² (1 − f²)/√2)`, `T_y = i T_x`.
pub fn analytic_translation_modes(profile: &RadialProfile, layout: Arc<Layout>) -> Result<Vec<StateVector>> {
    let p = &profile.params;
    let mut values = Vec::with_capacity(layout.dim());
    for q in 0..layout.n_points() {
        let (x, y) = layout.xy(q);
        let r = x.hypot(y);
        let (f, _) = profile.eval(r)?;
        let (df, _) = profile.eval_derivative(r)?;
        let phase = if r == 0.0 { Complex64::new(1.0, 0.0) } else { (Complex64::new(x, y) / r).powi((p.n - 1) as i32) };
        values.push(phase * (p.v * df));
        values.push(Complex64::new(-p.e * p.v * p.v * (1.0 - f * f) / std::f64::consts::SQRT_2, 0.0));
    }
    Ok(modes_pair(values, layout))
}

fn modes_pair(values: Vec<Complex64>, layout: Arc<Layout>) -> Vec<StateVector> {
    let tx = StateVector { values, sector: Sector::FermionLower, layout };
    let mut ty = tx.clone();
    ty.values.iter_mut().for_each(|z| *z *= Complex64::i());
    vec![tx, ty]
}

/// Principal-angle overlap between a two-dimensional real kernel basis and
/// the translation modes of an `n = 1` background.
pub fn translation_mode_overlap(bg: &Background2D, kernel_basis: &[StateVector]) -> Result<f64> {
    if bg.n != 1 {
        return Err(Error::InvalidParams(format!("translation modes are defined here for n = 1, got n = {}", bg.n)));
    }
    if kernel_basis.len() != 2 {
        return Err(Error::WrongKernelDimension { expected: 2, found: kernel_basis.len() });
    }
    let layout = Layout::from_background(bg);
    if kernel_basis.iter().any(|v| *v.layout != layout) {
        return Err(Error::GridMismatch("kernel basis and background use different layouts".into()));
    }
    Ok(subspace_overlap(kernel_basis, &translation_modes(bg)))
}
