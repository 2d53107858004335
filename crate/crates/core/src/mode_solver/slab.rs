//! Symmetric three-layer slab: the transcendental TE dispersion relation and a
//! matching one-dimensional index map for the finite-difference solver.

use super::{IndexMap, Polarization};

/// n_eff of TE mode `order` of a symmetric slab, or `None` below cutoff.
///
/// Solves `v = u·tan u` (even orders) or `v = −u·cot u` (odd orders) with
/// `u = κd/2`, `v = γd/2`, `u² + v² = V²` by bisection.
pub fn symmetric_slab_te(
    n_core: f64,
    n_clad: f64,
    thickness_um: f64,
    wavelength_um: f64,
    order: usize,
) -> Option<f64> {
    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;
    let v_number = 0.5 * k0 * thickness_um * (n_core * n_core - n_clad * n_clad).sqrt();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let lo = order as f64 * half_pi;
    if lo >= v_number {
        return None;
    }
    let hi = ((order + 1) as f64 * half_pi).min(v_number);
    let mismatch = |u: f64| {
        let v = (v_number * v_number - u * u).max(0.0).sqrt();
        if order.is_multiple_of(2) {
            u * u.tan() - v
        } else {
            -u / u.tan() - v
        }
    };
    // the mismatch increases monotonically on (lo, hi)
    let (mut a, mut b) = (lo + 1e-15, hi - 1e-15);
    if mismatch(a) > 0.0 || mismatch(b) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if mismatch(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let u = 0.5 * (a + b);
    let kappa = 2.0 * u / thickness_um;
    Some((n_core * n_core - (kappa / k0).powi(2)).sqrt())
}

/// A single-column (x-invariant) index map of the same slab, sampled every
/// `dz_um` with `margin_um` of cladding on each side. Boundary cells are
/// area-averaged in permittivity, like the 2-D rasterizer.
pub fn slab_index_map(
    n_core: f64,
    n_clad: f64,
    thickness_um: f64,
    wavelength_um: f64,
    dz_um: f64,
    margin_um: f64,
) -> IndexMap {
    let span = thickness_um + 2.0 * margin_um;
    let mut cells = (span / dz_um - 1e-9).ceil() as usize;
    // pad to a multiple of 2^levels for the multigrid hierarchy
    let mut levels = 0;
    while (cells >> (levels + 1)) >= 6 {
        levels += 1;
    }
    let m = 1usize << levels;
    cells = cells.div_ceil(m) * m;
    let nz = cells - 1;
    let half = 0.5 * thickness_um;
    let (e_core, e_clad) = (n_core * n_core, n_clad * n_clad);
    let mut map = IndexMap::from_fn(1, nz, 1.0, dz_um, wavelength_um, Polarization::Te, n_clad, |_, z| {
        let lo = (z - 0.5 * dz_um).max(-half);
        let hi = (z + 0.5 * dz_um).min(half);
        let f = ((hi - lo) / dz_um).clamp(0.0, 1.0);
        if f == 1.0 {
            n_core
        } else if f == 0.0 {
            n_clad
        } else {
            (f * e_core + (1.0 - f) * e_clad).sqrt()
        }
    });
    map.temperature_c = 25.0;
    map
}
