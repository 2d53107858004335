use serde::Serialize;

use crate::error::{Error, Result};

use super::ModeSolution;

/// Three-wave overlap of a harmonic mode with the square of a fundamental mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overlap {
    /// |∬E₂ω E_ω² dA| / (√∬E₂ω² dA · ∬E_ω² dA), in 1/m. Its square is the
    /// inverse effective area entering the SHG efficiency.
    pub factor_per_m: f64,
    /// Profile overlap |∬E₂ω E_ω dA|² / (∬E₂ω² dA · ∬E_ω² dA), in [0, 1].
    pub normalized: f64,
}

impl Overlap {
    pub fn percent(&self) -> f64 {
        100.0 * self.normalized
    }

    pub fn effective_area_um2(&self) -> f64 {
        1e12 / (self.factor_per_m * self.factor_per_m)
    }
}

/// Overlap of the harmonic (2ω) mode with the fundamental (ω) mode.
///
/// Both modes must be on the same grid. The result does not depend on how
/// either field is scaled or signed.
pub fn mode_overlap(harmonic: &ModeSolution, fundamental: &ModeSolution) -> Result<Overlap> {
    if !harmonic.same_grid(fundamental) {
        return Err(Error::Shape {
            expected: (harmonic.nx, harmonic.nz),
            found: (fundamental.nx, fundamental.nz),
        });
    }
    let area = harmonic.cell_area_um2();
    let (mut three, mut cross, mut h2, mut f2) = (0.0, 0.0, 0.0, 0.0);
    for (&eh, &ef) in harmonic.field.iter().zip(&fundamental.field) {
        three += eh * ef * ef;
        cross += eh * ef;
        h2 += eh * eh;
        f2 += ef * ef;
    }
    if h2 == 0.0 || f2 == 0.0 {
        return Err(Error::contract("overlap of an all-zero field"));
    }
    // lengths in µm: the ratio comes out in 1/µm
    let factor_per_um = (three * area).abs() / ((h2 * area).sqrt() * f2 * area);
    Ok(Overlap {
        factor_per_m: factor_per_um * 1e6,
        normalized: (cross * cross) / (h2 * f2),
    })
}

#[cfg(test)]
mod tests {
    use super::super::Polarization;
    use super::*;

    fn mode(f: impl Fn(f64, f64) -> f64) -> ModeSolution {
        let (nx, nz, h) = (41, 31, 0.05);
        let x0 = -0.5 * (nx - 1) as f64 * h;
        let z0 = -0.5 * (nz - 1) as f64 * h;
        let mut field = Vec::new();
        for i in 0..nx {
            for j in 0..nz {
                field.push(f(x0 + i as f64 * h, z0 + j as f64 * h));
            }
        }
        ModeSolution {
            wavelength_um: 1.55,
            temperature_c: 25.0,
            polarization: Polarization::Te,
            n_eff: 1.9,
            mode_order: 0,
            guided: true,
            residual: 0.0,
            nx,
            nz,
            dx_um: h,
            dz_um: h,
            x0_um: x0,
            z0_um: z0,
            field,
        }
    }

    fn gauss(x: f64, z: f64) -> f64 {
        (-(x * x) / 0.2 - (z * z) / 0.1).exp()
    }

    #[test]
    fn self_overlap_is_complete() {
        let m = mode(gauss);
        let o = mode_overlap(&m, &m).unwrap();
        assert!((o.normalized - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_mismatch_vanishes() {
        let odd = mode(|x, z| x * gauss(x, z));
        let even = mode(gauss);
        let o = mode_overlap(&odd, &even).unwrap();
        assert!(o.factor_per_m < 1e-6 * mode_overlap(&even, &even).unwrap().factor_per_m);
        assert!(o.normalized < 1e-20);
    }

    #[test]
    fn gaussian_effective_area() {
        // E = exp(-x²/a - z²/b): ∬E³/(√∬E² ∬E²) = (2/3)·√(2/(π√(ab)))
        let m = mode(gauss);
        let o = mode_overlap(&m, &m).unwrap();
        let expected = (2.0 / 3.0) * (2.0 / (std::f64::consts::PI * (0.2f64 * 0.1).sqrt())).sqrt();
        let rel = (o.factor_per_m * 1e-6 - expected).abs() / expected;
        // truncated Gaussian tails on the finite grid
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn grid_mismatch_is_shape_error() {
        let a = mode(gauss);
        let mut b = a.clone();
        b.nz -= 1;
        b.field.truncate(b.nx * b.nz);
        assert!(matches!(mode_overlap(&a, &b), Err(Error::Shape { .. })));
    }
}
