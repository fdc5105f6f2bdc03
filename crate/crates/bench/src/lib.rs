//! Shared fixtures for the benchmarks.

use lgvortex_core::{sample_background, solve_profile, Background2D, ProfileMethod, Result, VortexParams};

/// Background of an `n`-vortex at `e = v = 1` on an `m × m` grid.
pub fn vortex_background(n: i64, m: usize) -> Result<Background2D> {
    let profile = solve_profile(VortexParams::new(n, 1.0, 1.0), ProfileMethod::Shooting)?;
    sample_background(&profile, m)
}
