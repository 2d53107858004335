//! Five-point scalar Helmholtz operator normalised by k0².
//!
//! `A u = (∂x² + ∂z²) u / k0² + n² u`, zero field outside the node array. The
//! eigenvalues of `A` are n_eff². An axis with a single node is translation
//! invariant and contributes no derivative.

use super::geometry::IndexMap;

/// Stencil with weights `cx`, `cz` on the neighbours and `center` on the node.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub nx: usize,
    pub nz: usize,
    pub cx: f64,
    pub cz: f64,
    pub center: Vec<f64>,
}

impl Stencil {
    /// `y = S u` with `(S u)_ij = center_ij u_ij + cx (u_{i±1,j}) + cz (u_{i,j±1})`.
    pub fn apply(&self, u: &[f64], y: &mut [f64]) {
        let (nx, nz, cx, cz) = (self.nx, self.nz, self.cx, self.cz);
        for i in 0..nx {
            let row = i * nz;
            for j in 0..nz {
                let k = row + j;
                let mut acc = self.center[k] * u[k];
                if cz != 0.0 {
                    if j > 0 {
                        acc += cz * u[k - 1];
                    }
                    if j + 1 < nz {
                        acc += cz * u[k + 1];
                    }
                }
                if cx != 0.0 {
                    if i > 0 {
                        acc += cx * u[k - nz];
                    }
                    if i + 1 < nx {
                        acc += cx * u[k + nz];
                    }
                }
                y[k] = acc;
            }
        }
    }
}

/// Neighbour weights 1/(k0·h)², zero along invariant axes.
pub fn coupling(map: &IndexMap) -> (f64, f64) {
    let k0 = 2.0 * std::f64::consts::PI / map.wavelength_um;
    let cx = if map.nx > 1 { 1.0 / (k0 * map.dx_um).powi(2) } else { 0.0 };
    let cz = if map.nz > 1 { 1.0 / (k0 * map.dz_um).powi(2) } else { 0.0 };
    (cx, cz)
}

/// The Helmholtz operator `A` whose eigenvalues are n_eff².
pub fn helmholtz(map: &IndexMap) -> Stencil {
    let (cx, cz) = coupling(map);
    let center = map
        .index
        .iter()
        .map(|n| n * n - 2.0 * cx - 2.0 * cz)
        .collect();
    Stencil {
        nx: map.nx,
        nz: map.nz,
        cx,
        cz,
        center,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
