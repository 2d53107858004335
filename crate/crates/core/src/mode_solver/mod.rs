//! Guided modes of the ridge cross-section and their nonlinear overlap.
//!
//! The scalar Helmholtz equation for the dominant field component is
//! discretised with a five-point stencil on a uniform grid with zero field at
//! the domain edge. Quasi-TE modes see the core's TE material (the
//! extraordinary index of an X-cut film), quasi-TM modes the TM material.

mod cache;
mod eigen;
mod geometry;
mod multigrid;
mod operator;
mod overlap;
pub mod slab;

use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::MaterialLibrary;

pub use cache::{cache_key, ModeCache, CACHE_FORMAT};
pub use eigen::{EigenStats, SolverSettings};
pub use geometry::{rasterize, CrossSection, Grid, IndexMap};
pub use multigrid::{Multigrid, ShiftedSolver};
pub use operator::{helmholtz, Stencil};
pub use overlap::{mode_overlap, Overlap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// Quasi-TE: dominant field in the film plane.
    Te,
    /// Quasi-TM: dominant field normal to the film.
    Tm,
}

impl std::str::FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "te" => Ok(Polarization::Te),
            "tm" => Ok(Polarization::Tm),
            other => Err(Error::config(format!("polarization `{other}` is not te or tm"))),
        }
    }
}

/// One eigenmode on the grid of the index map it was solved on.
///
/// `field` holds the dominant transverse electric-field component at the grid
/// nodes (layout `i * nz + j`), scaled so that `Σ E² · dx · dz = 1` with
/// lengths in µm, and signed so its largest-magnitude sample is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub wavelength_um: f64,
    pub temperature_c: f64,
    pub polarization: Polarization,
    pub n_eff: f64,
    pub mode_order: usize,
    pub guided: bool,
    pub residual: f64,
    pub nx: usize,
    pub nz: usize,
    pub dx_um: f64,
    pub dz_um: f64,
    pub x0_um: f64,
    pub z0_um: f64,
    pub field: Vec<f64>,
}

impl ModeSolution {
    pub fn same_grid(&self, other: &ModeSolution) -> bool {
        self.nx == other.nx
            && self.nz == other.nz
            && self.dx_um == other.dx_um
            && self.dz_um == other.dz_um
            && self.x0_um == other.x0_um
            && self.z0_um == other.z0_um
    }

    pub fn cell_area_um2(&self) -> f64 {
        self.dx_um * self.dz_um
    }

    /// ∬|E|² dx dz in µm² units; 1 after construction.
    pub fn power_norm(&self) -> f64 {
        self.field.iter().map(|e| e * e).sum::<f64>() * self.cell_area_um2()
    }

    /// Node `(i, j)` of the largest |E|.
    pub fn peak(&self) -> (usize, usize) {
        let k = self
            .field
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        (k / self.nz, k % self.nz)
    }

    pub fn x_um(&self, i: usize) -> f64 {
        self.x0_um + i as f64 * self.dx_um
    }

    pub fn z_um(&self, j: usize) -> f64 {
        self.z0_um + j as f64 * self.dz_um
    }

    /// Write the field as `x_um,z_um,field` rows for plotting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_um", "z_um", "field"])?;
        for i in 0..self.nx {
            for j in 0..self.nz {
                w.write_record(&[
                    format!("{:.6}", self.x_um(i)),
                    format!("{:.6}", self.z_um(j)),
                    format!("{:.9e}", self.field[i * self.nz + j]),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<field csv>", e))?;
        Ok(())
    }
}

/// Outcome of a mode search.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeSearch {
    /// Guided modes, sorted by descending n_eff.
    Guided(Vec<ModeSolution>),
    /// Nothing above the background index; the leading unguided solutions are kept.
    Cutoff {
        background_index: f64,
        unguided: Vec<ModeSolution>,
    },
}

impl ModeSearch {
    pub fn guided(&self) -> Option<&[ModeSolution]> {
        match self {
            ModeSearch::Guided(m) => Some(m),
            ModeSearch::Cutoff { .. } => None,
        }
    }

    /// All solutions, guided or not.
    pub fn all(&self) -> &[ModeSolution] {
        match self {
            ModeSearch::Guided(m) => m,
            ModeSearch::Cutoff { unguided, .. } => unguided,
        }
    }

    pub fn fundamental(&self) -> Result<&ModeSolution> {
        match self {
            ModeSearch::Guided(m) => Ok(&m[0]),
            ModeSearch::Cutoff {
                background_index, ..
            } => Err(Error::ModelValidity(format!(
                "no guided mode: every solution lies below the background index {background_index:.5}"
            ))),
        }
    }
}

fn start_vector(map: &IndexMap) -> Vec<f64> {
    let bg2 = map.background_index.powi(2);
    let top2 = map.max_index().powi(2);
    let scale = if top2 > bg2 { 0.05 * (top2 - bg2) } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f_6465);
    map.index
        .iter()
        .map(|n| (n * n - bg2).max(0.0) + scale * (0.5 + rng.random_range(-0.5..0.5)))
        .collect()
}

/// Solve for the `n_modes` highest-index modes of `map`.
pub fn solve_modes(
    map: &IndexMap,
    n_modes: usize,
    settings: &SolverSettings,
) -> Result<(ModeSearch, EigenStats)> {
    if n_modes == 0 {
        return Err(Error::contract("n_modes must be at least 1"));
    }
    if map.index.iter().any(|n| !n.is_finite() || *n <= 0.0) {
        return Err(Error::contract("index map contains non-finite or non-positive entries"));
    }
    let a = helmholtz(map);
    let top2 = map.max_index().powi(2);
    let shift = top2 * (1.0 + settings.shift_margin);
    let (pairs, stats) =
        eigen::largest_eigenpairs(&a, shift, n_modes, settings, &start_vector(map))?;
    let area = map.dx_um * map.dz_um;
    let modes: Vec<ModeSolution> = pairs
        .into_iter()
        .enumerate()
        .map(|(order, p)| {
            let n_eff = p.value.max(0.0).sqrt();
            let peak = p.vector.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
            let scale = peak.signum() / area.sqrt();
            ModeSolution {
                wavelength_um: map.wavelength_um,
                temperature_c: map.temperature_c,
                polarization: map.polarization,
                n_eff,
                mode_order: order,
                guided: n_eff > map.background_index,
                residual: p.residual,
                nx: map.nx,
                nz: map.nz,
                dx_um: map.dx_um,
                dz_um: map.dz_um,
                x0_um: map.x0_um,
                z0_um: map.z0_um,
                field: p.vector.iter().map(|v| v * scale).collect(),
            }
        })
        .collect();
    let guided: Vec<ModeSolution> = modes.iter().filter(|m| m.guided).cloned().collect();
    let search = if guided.is_empty() {
        ModeSearch::Cutoff {
            background_index: map.background_index,
            unguided: modes,
        }
    } else {
        ModeSearch::Guided(guided)
    };
    Ok((search, stats))
}

/// Mode solving for cross-sections, backed by an optional on-disk cache.
pub struct ModeSolver {
    pub materials: MaterialLibrary,
    pub settings: SolverSettings,
    pub cache: Option<ModeCache>,
    solves: AtomicUsize,
    hits: AtomicUsize,
}

/// One request to [`ModeSolver::solve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRequest<'a> {
    pub cross_section: &'a CrossSection,
    pub grid: &'a Grid,
    pub wavelength_um: f64,
    pub temperature_c: f64,
    pub polarization: Polarization,
    pub n_modes: usize,
}

impl ModeSolver {
    pub fn new(materials: MaterialLibrary, settings: SolverSettings) -> Self {
        ModeSolver {
            materials,
            settings,
            cache: None,
            solves: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache = Some(ModeCache::new(dir.into()));
        self
    }

    /// Number of eigen-solves actually performed.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn rasterize(&self, req: &ModeRequest<'_>) -> Result<IndexMap> {
        rasterize(
            req.cross_section,
            req.grid,
            &self.materials,
            req.wavelength_um,
            req.temperature_c,
            req.polarization,
        )
    }

    pub fn solve(&self, req: &ModeRequest<'_>) -> Result<ModeSearch> {
        let key = cache_key(req, &self.settings, &self.materials)?;
        if let Some(cache) = &self.cache {
            // an unreadable entry is a miss; the fresh solve overwrites it
            match cache.load(&key) {
                Ok(Some(hit)) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(hit);
                }
                Ok(None) | Err(Error::Cache { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let map = self.rasterize(req)?;
        let (search, _) = solve_modes(&map, req.n_modes, &self.settings)?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            cache.store(&key, req, &self.settings, &search)?;
        }
        Ok(search)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_domain_approaches_plane_wave() {
        // 10 µm square of n = 2 with zero walls: n_eff² = 4 − 2(λ/2L)²
        let h = 0.1;
        let nodes = 99;
        let map = IndexMap::from_fn(nodes, nodes, h, h, 1.55, Polarization::Te, 2.0, |_, _| 2.0);
        let (search, _) = solve_modes(&map, 1, &SolverSettings::default()).unwrap();
        let ModeSearch::Cutoff { unguided, .. } = &search else {
            panic!("homogeneous map cannot guide");
        };
        let n = unguided[0].n_eff;
        assert!(n < 2.0 && n > 2.0 * 0.99, "{n}");
        let span = (nodes + 1) as f64 * h;
        let k0 = 2.0 * std::f64::consts::PI / 1.55;
        let discrete = 4.0 - 2.0 * (2.0 - 2.0 * (std::f64::consts::PI * h / span).cos()) / (k0 * h).powi(2);
        assert!((n * n - discrete).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_requests() {
        let map = IndexMap::from_fn(3, 3, 0.1, 0.1, 1.55, Polarization::Te, 1.0, |_, _| 1.5);
        assert!(solve_modes(&map, 0, &SolverSettings::default()).is_err());
        let mut bad = map.clone();
        bad.index[4] = f64::NAN;
        assert!(solve_modes(&bad, 1, &SolverSettings::default()).is_err());
    }
}
