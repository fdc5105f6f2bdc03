use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::RadialProfile;
use crate::error::{Error, Result};

/// Uniform square grid `[-r_max, r_max]²` with `m` points per side.
///
/// Points are indexed row-major, `idx = iy * m + ix`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub m: usize,
    pub r_max: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(m: usize, r_max: f64) -> Self {
        Self { m, r_max, h: 2.0 * r_max / (m - 1) as f64 }
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.r_max + i as f64 * self.h
    }

    #[inline]
    pub fn xy(&self, idx: usize) -> (f64, f64) {
        (self.coord(idx % self.m), self.coord(idx / self.m))
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.m + ix
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Points strictly inside the disk of radius `r_max`.
    pub fn disk_mask(&self) -> Vec<bool> {
        let cut = self.r_max * (1.0 - 1e-12);
        (0..self.len())
            .map(|k| {
                let (x, y) = self.xy(k);
                x.hypot(y) < cut
            })
            .collect()
    }
}

/// Sampled Higgs field and gauge potentials.
///
/// `a1`, `a2` hold `e A_1`, `e A_2`. Fields are sampled on the whole square;
/// `mask` marks the disk on which operators act.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Background2D {
    pub grid: Grid,
    pub e: f64,
    pub v: f64,
    /// Winding the background was built with.
    pub n: i64,
    pub phi: Vec<Complex64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Sample the vortex `φ = v f(r) ((x+iy)/r)^n`, `eA = n a(r) (-y, x) / r²` on
/// an `m_xy × m_xy` grid covering the profile's disk.
pub fn sample_background(profile: &RadialProfile, m_xy: usize) -> Result<Background2D> {
    if m_xy < 64 {
        return Err(Error::InvalidParams(format!("m_xy must be >= 64, got {m_xy}")));
    }
    if !(profile.residual_norm <= 1e-6) {
        return Err(Error::InvalidParams(format!(
            "profile not converged (residual {:.3e})",
            profile.residual_norm
        )));
    }
    let params = profile.params;
    let grid = Grid::new(m_xy, params.r_max);
    let dr = params.r_max / (params.m_r - 1) as f64;
    if profile.params.n > 0 && dr > 0.25 * grid.h {
        return Err(Error::Interpolation(format!(
            "radial spacing {dr:.3e} too coarse for grid spacing {:.3e}",
            grid.h
        )));
    }
    let n = params.n;
    let v = params.v;
    let mut phi = Vec::with_capacity(grid.len());
    let mut a1 = Vec::with_capacity(grid.len());
    let mut a2 = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (x, y) = grid.xy(k);
        let r = x.hypot(y);
        if n == 0 {
            phi.push(Complex64::new(v, 0.0));
            a1.push(0.0);
            a2.push(0.0);
            continue;
        }
        let (f_over, a_over) = profile.eval_regular(r)?;
        let z = Complex64::new(x, y).powi(n as i32);
        let p = z * (v * f_over);
        let s = n as f64 * a_over;
        if !(p.re.is_finite() && p.im.is_finite() && s.is_finite()) {
            return Err(Error::Interpolation(format!("non-finite field at ({x}, {y})")));
        }
        phi.push(p);
        a1.push(-s * y);
        a2.push(s * x);
    }
    Ok(Background2D { mask: grid.disk_mask(), grid, e: params.e, v, n, phi, a1, a2 })
}

impl Background2D {
    /// Build a background from closed-form fields `(φ, eA₁, eA₂)`.
    pub fn from_fn<F>(grid: Grid, e: f64, v: f64, n: i64, mut fields: F) -> Self
    where
        F: FnMut(f64, f64) -> (Complex64, f64, f64),
    {
        let mut phi = Vec::with_capacity(grid.len());
        let mut a1 = Vec::with_capacity(grid.len());
        let mut a2 = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let (x, y) = grid.xy(k);
            let (p, b1, b2) = fields(x, y);
            phi.push(p);
            a1.push(b1);
            a2.push(b2);
        }
        Self { mask: grid.disk_mask(), grid, e, v, n, phi, a1, a2 }
    }

    /// `φ = v`, `A = 0`.
    pub fn vacuum(grid: Grid, e: f64, v: f64) -> Self {
        Self::from_fn(grid, e, v, 0, |_, _| (Complex64::new(v, 0.0), 0.0, 0.0))
    }

    pub fn in_domain_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Largest `|eA|` over the disk.
    pub fn max_gauge(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&k| self.mask[k])
            .map(|k| self.a1[k].hypot(self.a2[k]))
            .fold(0.0, f64::max)
    }

    /// Winding of `φ` around a circle just inside the boundary, by summing
    /// wrapped phase increments of the bilinearly interpolated field.
    pub fn winding_number(&self) -> i64 {
        let g = &self.grid;
        let radius = g.r_max - 3.0 * g.h;
        let samples = 8 * g.m;
        let at = |t: f64| {
            let (x, y) = (radius * t.cos(), radius * t.sin());
            let fx = (x + g.r_max) / g.h;
            let fy = (y + g.r_max) / g.h;
            let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let p = |i: usize, j: usize| self.phi[g.index(i, j)];
            p(ix, iy) * ((1.0 - tx) * (1.0 - ty))
                + p(ix + 1, iy) * (tx * (1.0 - ty))
                + p(ix, iy + 1) * ((1.0 - tx) * ty)
                + p(ix + 1, iy + 1) * (tx * ty)
        };
        let mut total = 0.0;
        let mut prev = at(0.0).arg();
        for s in 1..=samples {
            let cur = at(2.0 * PI * s as f64 / samples as f64).arg();
            let mut d = cur - prev;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            total += d;
            prev = cur;
        }
        (total / (2.0 * PI)).round() as i64
    }

    /// CSV with header `x,y,re_phi,im_phi,a1,a2,in_domain`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,re_phi,im_phi,a1,a2,in_domain")?;
        for k in 0..self.grid.len() {
            let (x, y) = self.grid.xy(k);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                x, y, self.phi[k].re, self.phi[k].im, self.a1[k], self.a2[k], self.mask[k] as u8
            )?;
        }
        Ok(())
    }
}

/// Magnetic flux `Φ = ∫ F₁₂` from plaquette circulations of the links
/// `e ∫ A·dl` (trapezoidal along each link), over plaquettes inside the disk.
pub fn flux(bg: &Background2D) -> f64 {
    let g = &bg.grid;
    let h = g.h;
    let link_x = |ix: usize, iy: usize| 0.5 * h * (bg.a1[g.index(ix, iy)] + bg.a1[g.index(ix + 1, iy)]);
    let link_y = |ix: usize, iy: usize| 0.5 * h * (bg.a2[g.index(ix, iy)] + bg.a2[g.index(ix, iy + 1)]);
    let mut total = 0.0;
    for iy in 0..g.m - 1 {
        for ix in 0..g.m - 1 {
            let corners = [g.index(ix, iy), g.index(ix + 1, iy), g.index(ix, iy + 1), g.index(ix + 1, iy + 1)];
            if !corners.iter().all(|&c| bg.mask[c]) {
                continue;
            }
            total += link_x(ix, iy) + link_y(ix + 1, iy) - link_x(ix, iy + 1) - link_y(ix, iy);
        }
    }
    total / bg.e
}

/// Static energy `∫ ½F₁₂² + |D_iφ|² + ½e²(|φ|² − v²)²` over the disk, with
/// fourth-order central differences at the nodes.
pub fn energy(bg: &Background2D) -> f64 {
    let g = &bg.grid;
    let m = g.m as isize;
    let h = g.h;
    let e = bg.e;
    let v2 = bg.v * bg.v;
    let d4 = |vals: [f64; 4]| (8.0 * (vals[2] - vals[1]) - (vals[3] - vals[0])) / (12.0 * h);
    let d4c = |vals: [Complex64; 4]| (8.0 * (vals[2] - vals[1]) - (vals[3] - vals[0])) / (12.0 * h);
    let mut total = 0.0;
    for iy in 2..m - 2 {
        for ix in 2..m - 2 {
            let k = g.index(ix as usize, iy as usize);
            if !bg.mask[k] {
                continue;
            }
            let at = |dx: isize, dy: isize| g.index((ix + dx) as usize, (iy + dy) as usize);
            let xs = [at(-2, 0), at(-1, 0), at(1, 0), at(2, 0)];
            let ys = [at(0, -2), at(0, -1), at(0, 1), at(0, 2)];
            let d1a2 = d4(xs.map(|q| bg.a2[q]));
            let d2a1 = d4(ys.map(|q| bg.a1[q]));
            let f12 = (d1a2 - d2a1) / e;
            let i = Complex64::i();
            let d1phi = d4c(xs.map(|q| bg.phi[q])) - i * bg.a1[k] * bg.phi[k];
            let d2phi = d4c(ys.map(|q| bg.phi[q])) - i * bg.a2[k] * bg.phi[k];
            let pot = bg.phi[k].norm_sqr() - v2;
            total += 0.5 * f12 * f12 + d1phi.norm_sqr() + d2phi.norm_sqr() + 0.5 * e * e * pot * pot;
        }
    }
    total * h * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_has_no_flux_or_energy() {
        let bg = Background2D::vacuum(Grid::new(64, 10.0), 1.3, 0.7);
        assert_eq!(flux(&bg), 0.0);
        assert_eq!(energy(&bg), 0.0);
        assert_eq!(bg.winding_number(), 0);
    }

    #[test]
    fn grid_is_symmetric() {
        let g = Grid::new(65, 12.0);
        assert_eq!(g.coord(0), -12.0);
        assert!((g.coord(64) - 12.0).abs() < 1e-12);
        assert_eq!(g.coord(32), 0.0);
    }

    #[test]
    fn winding_of_pure_phase() {
        let g = Grid::new(96, 8.0);
        for n in [-2i32, 1, 3] {
            let bg = Background2D::from_fn(g, 1.0, 1.0, n as i64, |x, y| {
                let z = Complex64::new(x, y);
                ((z / z.norm().max(1e-300)).powi(n), 0.0, 0.0)
            });
            assert_eq!(bg.winding_number(), n as i64);
        }
    }
}
