//! Effective-index dispersion n_eff(λ) at a fixed temperature.
//!
//! Phase-matching sweeps need n_eff at hundreds of wavelengths, so the solver
//! is sampled at Chebyshev nodes across each band of interest and the samples
//! are interpolated by a polynomial, which also gives dn_eff/dλ analytically.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::materials::DispersionModel;
use crate::mode_solver::{CrossSection, Grid, ModeRequest, ModeSolver, Polarization};

/// Effective index of the mode family used for phase matching.
pub trait ModeDispersion: Sync {
    fn n_eff(&self, wavelength_um: f64) -> Result<f64>;

    /// dn_eff/dλ in 1/µm.
    fn slope(&self, wavelength_um: f64) -> Result<f64> {
        let h = 1e-4;
        Ok((self.n_eff(wavelength_um + h)? - self.n_eff(wavelength_um - h)?) / (2.0 * h))
    }

    fn group_index(&self, wavelength_um: f64) -> Result<f64> {
        Ok(self.n_eff(wavelength_um)? - wavelength_um * self.slope(wavelength_um)?)
    }
}

/// The same index at every wavelength.
#[derive(Debug, Clone, Copy)]
pub struct Dispersionless(pub f64);

impl ModeDispersion for Dispersionless {
    fn n_eff(&self, _: f64) -> Result<f64> {
        Ok(self.0)
    }
    fn slope(&self, _: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// Bulk material index at a fixed temperature (plane-wave phase matching).
#[derive(Debug, Clone)]
pub struct Bulk {
    pub model: DispersionModel,
    pub temperature_c: f64,
}

impl ModeDispersion for Bulk {
    fn n_eff(&self, wavelength_um: f64) -> Result<f64> {
        self.model.refractive_index(wavelength_um, self.temperature_c)
    }
}

/// Polynomial interpolant through samples at Chebyshev nodes of one band.
#[derive(Debug, Clone, Serialize)]
pub struct BandInterpolant {
    pub lo_um: f64,
    pub hi_um: f64,
    pub nodes_um: Vec<f64>,
    pub samples: Vec<f64>,
    /// Monomial coefficients in t = (2λ − lo − hi)/(hi − lo).
    coefficients: Vec<f64>,
}

impl BandInterpolant {
    pub fn chebyshev_nodes(lo_um: f64, hi_um: f64, count: usize) -> Vec<f64> {
        (0..count)
            .map(|k| {
                let t = -((2 * k + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos();
                0.5 * (lo_um + hi_um) + 0.5 * (hi_um - lo_um) * t
            })
            .collect()
    }

    pub fn new(lo_um: f64, hi_um: f64, nodes_um: Vec<f64>, samples: Vec<f64>) -> Result<Self> {
        let n = nodes_um.len();
        if n == 0 || n != samples.len() || !(hi_um > lo_um) {
            return Err(Error::contract("band interpolant needs matching, non-empty samples"));
        }
        let t: Vec<f64> = nodes_um.iter().map(|&l| (2.0 * l - lo_um - hi_um) / (hi_um - lo_um)).collect();
        let vander = DMatrix::from_fn(n, n, |r, c| t[r].powi(c as i32));
        let coefficients = vander
            .lu()
            .solve(&DVector::from_column_slice(&samples))
            .ok_or_else(|| Error::contract("repeated interpolation nodes"))?;
        Ok(BandInterpolant {
            lo_um,
            hi_um,
            nodes_um,
            samples,
            coefficients: coefficients.iter().copied().collect(),
        })
    }

    pub fn contains(&self, wavelength_um: f64) -> bool {
        wavelength_um >= self.lo_um && wavelength_um <= self.hi_um
    }

    fn t(&self, wavelength_um: f64) -> f64 {
        (2.0 * wavelength_um - self.lo_um - self.hi_um) / (self.hi_um - self.lo_um)
    }

    pub fn value(&self, wavelength_um: f64) -> f64 {
        let t = self.t(wavelength_um);
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self, wavelength_um: f64) -> f64 {
        let t = self.t(wavelength_um);
        let dt = 2.0 / (self.hi_um - self.lo_um);
        let n = self.coefficients.len();
        let mut acc = 0.0;
        for k in (1..n).rev() {
            acc = acc * t + k as f64 * self.coefficients[k];
        }
        acc * dt
    }
}

/// Solver-sampled n_eff over one or more wavelength bands at one temperature.
#[derive(Debug, Clone, Serialize)]
pub struct DispersionChain {
    pub temperature_c: f64,
    pub polarization: Polarization,
    pub bands: Vec<BandInterpolant>,
}

impl DispersionChain {
    pub fn from_bands(temperature_c: f64, polarization: Polarization, bands: Vec<BandInterpolant>) -> Self {
        DispersionChain {
            temperature_c,
            polarization,
            bands,
        }
    }

    /// Sample the fundamental mode at `nodes` Chebyshev points in each band.
    /// Solves run on the current rayon pool.
    #[allow(clippy::too_many_arguments)]
    pub fn from_solver(
        solver: &ModeSolver,
        cross_section: &CrossSection,
        grid: &Grid,
        temperature_c: f64,
        polarization: Polarization,
        bands_um: &[(f64, f64)],
        nodes: usize,
    ) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::config("dispersion sampling needs at least 2 nodes per band"));
        }
        let jobs: Vec<(usize, f64)> = bands_um
            .iter()
            .enumerate()
            .flat_map(|(b, &(lo, hi))| {
                BandInterpolant::chebyshev_nodes(lo, hi, nodes)
                    .into_iter()
                    .map(move |l| (b, l))
            })
            .collect();
        let samples: Vec<f64> = jobs
            .par_iter()
            .map(|&(_, wavelength_um)| {
                let req = ModeRequest {
                    cross_section,
                    grid,
                    wavelength_um,
                    temperature_c,
                    polarization,
                    n_modes: 1,
                };
                Ok(solver.solve(&req)?.fundamental()?.n_eff)
            })
            .collect::<Result<_>>()?;
        let bands = bands_um
            .iter()
            .enumerate()
            .map(|(b, &(lo, hi))| {
                let (ls, ns): (Vec<f64>, Vec<f64>) = jobs
                    .iter()
                    .zip(&samples)
                    .filter(|((jb, _), _)| *jb == b)
                    .map(|((_, l), n)| (*l, *n))
                    .unzip();
                BandInterpolant::new(lo, hi, ls, ns)
            })
            .collect::<Result<_>>()?;
        Ok(DispersionChain::from_bands(temperature_c, polarization, bands))
    }

    fn band(&self, wavelength_um: f64) -> Result<&BandInterpolant> {
        self.bands
            .iter()
            .find(|b| b.contains(wavelength_um))
            .ok_or_else(|| {
                let (min, max) = self.bands.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, b| {
                    (acc.0.min(b.lo_um), acc.1.max(b.hi_um))
                });
                Error::Range {
                    model: "sampled mode dispersion".into(),
                    axis: "wavelength (um)",
                    value: wavelength_um,
                    min,
                    max,
                }
            })
    }
}

impl ModeDispersion for DispersionChain {
    fn n_eff(&self, wavelength_um: f64) -> Result<f64> {
        Ok(self.band(wavelength_um)?.value(wavelength_um))
    }

    fn slope(&self, wavelength_um: f64) -> Result<f64> {
        Ok(self.band(wavelength_um)?.derivative(wavelength_um))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::MaterialLibrary;

    #[test]
    fn interpolant_reproduces_smooth_function() {
        let lib = MaterialLibrary::builtin();
        let m = lib.get("ln_congruent_e").unwrap();
        let f = |l: f64| m.refractive_index(l, 25.0).unwrap();
        let nodes = BandInterpolant::chebyshev_nodes(1.45, 1.65, 6);
        let samples = nodes.iter().map(|&l| f(l)).collect();
        let band = BandInterpolant::new(1.45, 1.65, nodes, samples).unwrap();
        for k in 0..=20 {
            let l = 1.45 + 0.01 * k as f64;
            assert!((band.value(l) - f(l)).abs() < 1e-9);
            let slope = m.index_slope(l.clamp(1.46, 1.64), 25.0, 1e-4).unwrap();
            if (1.46..=1.64).contains(&l) {
                assert!((band.derivative(l) - slope).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn chain_reports_range_errors() {
        let band = BandInterpolant::new(1.5, 1.6, vec![1.5, 1.6], vec![1.9, 1.89]).unwrap();
        let chain = DispersionChain::from_bands(25.0, Polarization::Te, vec![band]);
        assert!(chain.n_eff(1.55).is_ok());
        assert!(matches!(chain.n_eff(1.7), Err(Error::Range { .. })));
    }
}
