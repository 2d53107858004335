//! Cross-section geometry and its rasterization onto the finite-difference grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::MaterialLibrary;

use super::Polarization;

/// Trapezoidal ridge etched into a thin film, on a substrate, under a cladding.
///
/// Lengths are in nanometres and the sidewall angle in degrees from the
/// horizontal. `slab_thickness` is the film left standing beside the ridge
/// (0 for a fully etched film).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub film_thickness_nm: f64,
    pub top_width_nm: f64,
    pub sidewall_angle_deg: f64,
    pub slab_thickness_nm: f64,
    /// Core material seen by quasi-TE modes.
    pub core_material: String,
    /// Core material seen by quasi-TM modes; the TE material when absent.
    pub core_material_tm: Option<String>,
    pub substrate_material: String,
    pub cladding_material: String,
}

impl CrossSection {
    /// 500 nm x-cut film fully etched to an 1850 nm-wide ridge with 67°
    /// sidewalls, oxide below and above.
    pub fn reference() -> CrossSection {
        CrossSection {
            film_thickness_nm: 500.0,
            top_width_nm: 1850.0,
            sidewall_angle_deg: 67.0,
            slab_thickness_nm: 0.0,
            core_material: "ln_congruent_e".into(),
            core_material_tm: Some("ln_congruent_o".into()),
            substrate_material: "fused_silica".into(),
            cladding_material: "fused_silica".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.sidewall_angle_deg;
        if !(a > 0.0 && a <= 90.0) {
            return Err(Error::config(format!("sidewall angle {a} deg not in (0, 90]")));
        }
        if !(self.film_thickness_nm > 0.0 && self.top_width_nm > 0.0) {
            return Err(Error::config("film thickness and top width must be positive"));
        }
        if !(self.slab_thickness_nm >= 0.0 && self.slab_thickness_nm < self.film_thickness_nm) {
            return Err(Error::config("slab thickness must satisfy 0 <= slab < film thickness"));
        }
        let bottom = self.bottom_width_nm();
        if !(bottom.is_finite() && bottom > 0.0) {
            return Err(Error::config("bottom width is not finite and positive"));
        }
        Ok(())
    }

    pub fn etch_depth_nm(&self) -> f64 {
        self.film_thickness_nm - self.slab_thickness_nm
    }

    /// Width at the etch floor.
    pub fn bottom_width_nm(&self) -> f64 {
        let a = self.sidewall_angle_deg;
        let run = if a == 90.0 {
            0.0
        } else {
            self.etch_depth_nm() / a.to_radians().tan()
        };
        self.top_width_nm + 2.0 * run
    }

    pub fn core_for(&self, polarization: Polarization) -> &str {
        match polarization {
            Polarization::Te => &self.core_material,
            Polarization::Tm => self.core_material_tm.as_deref().unwrap_or(&self.core_material),
        }
    }

    /// Half-width of the ridge at height `z_nm` above the substrate.
    fn ridge_half_width(&self, z_nm: f64) -> f64 {
        let bottom = 0.5 * self.bottom_width_nm();
        let above_floor = (z_nm - self.slab_thickness_nm).max(0.0);
        if self.sidewall_angle_deg == 90.0 {
            bottom
        } else {
            bottom - above_floor / self.sidewall_angle_deg.to_radians().tan()
        }
    }

    /// Fraction of the axis-aligned box `[x0,x1]×[z0,z1]` (nm) filled by core material.
    fn core_fraction(&self, x0: f64, x1: f64, z0: f64, z1: f64) -> f64 {
        const SLICES: usize = 64;
        let lo = z0.max(0.0);
        let hi = z1.min(self.film_thickness_nm);
        if hi <= lo {
            return 0.0;
        }
        let dz = (hi - lo) / SLICES as f64;
        let mut covered = 0.0;
        for s in 0..SLICES {
            let z = lo + (s as f64 + 0.5) * dz;
            let len = if z < self.slab_thickness_nm {
                x1 - x0
            } else {
                let w = self.ridge_half_width(z);
                (x1.min(w) - x0.max(-w)).max(0.0)
            };
            covered += len * dz;
        }
        covered / ((x1 - x0) * (z1 - z0))
    }
}

/// Finite-difference grid settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dx_nm: f64,
    pub dz_nm: f64,
    /// Minimum distance from the ridge to the zero-field boundary on every side.
    pub margin_nm: f64,
    /// Explicit domain width; derived from the ridge and margin when absent.
    #[serde(default)]
    pub x_span_nm: Option<f64>,
    #[serde(default)]
    pub z_span_nm: Option<f64>,
}

impl Grid {
    pub fn uniform(step_nm: f64, margin_nm: f64) -> Self {
        Grid {
            dx_nm: step_nm,
            dz_nm: step_nm,
            margin_nm,
            x_span_nm: None,
            z_span_nm: None,
        }
    }

    pub fn validate(&self, cs: &CrossSection) -> Result<()> {
        if !(self.dx_nm > 0.0 && self.dz_nm > 0.0 && self.margin_nm >= 0.0) {
            return Err(Error::config("grid steps must be positive and margin non-negative"));
        }
        let need_x = cs.bottom_width_nm() + 2.0 * self.margin_nm;
        let need_z = cs.film_thickness_nm + 2.0 * self.margin_nm;
        if let Some(x) = self.x_span_nm {
            if x < need_x {
                return Err(Error::config(format!(
                    "x span {x} nm does not cover ridge plus margin ({need_x} nm)"
                )));
            }
        }
        if let Some(z) = self.z_span_nm {
            if z < need_z {
                return Err(Error::config(format!(
                    "z span {z} nm does not cover film plus margin ({need_z} nm)"
                )));
            }
        }
        Ok(())
    }
}

/// Refractive-index samples on the interior nodes of a zero-boundary grid.
///
/// Node `(i, j)` sits at `x = x0 + i·dx`, `z = z0 + j·dz` and is stored at
/// `i * nz + j`. An axis of length 1 is treated as translation invariant, which
/// turns the map into a 1-D slab problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    pub nx: usize,
    pub nz: usize,
    pub dx_um: f64,
    pub dz_um: f64,
    pub x0_um: f64,
    pub z0_um: f64,
    pub wavelength_um: f64,
    pub temperature_c: f64,
    pub polarization: Polarization,
    pub index: Vec<f64>,
    /// Highest index of the unbounded surroundings; modes below it are not guided.
    pub background_index: f64,
}

impl IndexMap {
    /// Build a map by sampling `index_at(x_um, z_um)` at every node.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        nx: usize,
        nz: usize,
        dx_um: f64,
        dz_um: f64,
        wavelength_um: f64,
        polarization: Polarization,
        background_index: f64,
        index_at: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let x0_um = -0.5 * (nx as f64 - 1.0) * dx_um;
        let z0_um = -0.5 * (nz as f64 - 1.0) * dz_um;
        let mut index = Vec::with_capacity(nx * nz);
        for i in 0..nx {
            for j in 0..nz {
                index.push(index_at(x0_um + i as f64 * dx_um, z0_um + j as f64 * dz_um));
            }
        }
        IndexMap {
            nx,
            nz,
            dx_um,
            dz_um,
            x0_um,
            z0_um,
            wavelength_um,
            temperature_c: 25.0,
            polarization,
            index,
            background_index,
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.index[i * self.nz + j]
    }

    pub fn x_um(&self, i: usize) -> f64 {
        self.x0_um + i as f64 * self.dx_um
    }

    pub fn z_um(&self, j: usize) -> f64 {
        self.z0_um + j as f64 * self.dz_um
    }

    pub fn max_index(&self) -> f64 {
        self.index.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Multigrid levels the node counts are padded for.
fn coarsening_levels(cells_x: usize, cells_z: usize) -> u32 {
    let smallest = cells_x.min(cells_z).max(1);
    let mut levels = 0;
    while (smallest >> (levels + 1)) >= 6 {
        levels += 1;
    }
    levels
}

fn round_up(cells: usize, levels: u32) -> usize {
    let m = 1usize << levels;
    cells.div_ceil(m) * m
}

/// Cell counts (not node counts) the domain is padded to along x and z.
pub(crate) fn domain_cells(cs: &CrossSection, grid: &Grid) -> (usize, usize) {
    let span_x = grid
        .x_span_nm
        .unwrap_or(cs.bottom_width_nm() + 2.0 * grid.margin_nm);
    let span_z = grid
        .z_span_nm
        .unwrap_or(cs.film_thickness_nm + 2.0 * grid.margin_nm);
    let cx = (span_x / grid.dx_nm - 1e-9).ceil().max(2.0) as usize;
    let cz = (span_z / grid.dz_nm - 1e-9).ceil().max(2.0) as usize;
    let levels = coarsening_levels(cx, cz);
    (round_up(cx, levels), round_up(cz, levels))
}

/// Sample the cross-section's index distribution on `grid`.
///
/// Each node carries the area-weighted average permittivity of the
/// `dx × dz` box around it, reported as an index, so sloped sidewalls do not
/// staircase. The domain is padded so node counts suit the multigrid
/// preconditioner; margins only grow.
pub fn rasterize(
    cs: &CrossSection,
    grid: &Grid,
    materials: &MaterialLibrary,
    wavelength_um: f64,
    temperature_c: f64,
    polarization: Polarization,
) -> Result<IndexMap> {
    cs.validate()?;
    grid.validate(cs)?;
    let n_core = materials
        .get(cs.core_for(polarization))?
        .refractive_index(wavelength_um, temperature_c)?;
    let n_sub = materials
        .get(&cs.substrate_material)?
        .refractive_index(wavelength_um, temperature_c)?;
    let n_clad = materials
        .get(&cs.cladding_material)?
        .refractive_index(wavelength_um, temperature_c)?;
    let (eps_core, eps_sub, eps_clad) = (n_core * n_core, n_sub * n_sub, n_clad * n_clad);

    let (cells_x, cells_z) = domain_cells(cs, grid);
    let (nx, nz) = (cells_x - 1, cells_z - 1);
    let (dx, dz) = (grid.dx_nm, grid.dz_nm);
    // x centred on the ridge; z split evenly above and below the film
    let x_first = -0.5 * (cells_x as f64) * dx + dx;
    let z_first = 0.5 * (cs.film_thickness_nm - cells_z as f64 * dz) + dz;

    let mut index = Vec::with_capacity(nx * nz);
    for i in 0..nx {
        let xc = x_first + i as f64 * dx;
        let (x0, x1) = (xc - 0.5 * dx, xc + 0.5 * dx);
        for j in 0..nz {
            let zc = z_first + j as f64 * dz;
            let (z0, z1) = (zc - 0.5 * dz, zc + 0.5 * dz);
            let f_sub = ((0.0f64.min(z1) - z0) / dz).clamp(0.0, 1.0);
            let f_core = cs.core_fraction(x0, x1, z0, z1);
            let f_clad = (1.0 - f_sub - f_core).max(0.0);
            let n = if f_sub == 1.0 {
                n_sub
            } else if f_core == 1.0 {
                n_core
            } else if f_clad == 1.0 {
                n_clad
            } else {
                (f_sub * eps_sub + f_core * eps_core + f_clad * eps_clad).sqrt()
            };
            index.push(n);
        }
    }

    Ok(IndexMap {
        nx,
        nz,
        dx_um: dx * 1e-3,
        dz_um: dz * 1e-3,
        x0_um: x_first * 1e-3,
        z0_um: z_first * 1e-3,
        wavelength_um,
        temperature_c,
        polarization,
        index,
        background_index: n_sub.max(n_clad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bottom_width_trigonometry() {
        let cs = CrossSection::reference();
        // 1850 + 2·500/tan 67°
        assert!((cs.bottom_width_nm() - 2274.4748).abs() < 1e-3, "{}", cs.bottom_width_nm());
        let rect = CrossSection {
            sidewall_angle_deg: 90.0,
            ..cs
        };
        assert_eq!(rect.bottom_width_nm(), rect.top_width_nm);
    }

    #[test]
    fn invalid_sections_rejected() {
        let mut cs = CrossSection::reference();
        cs.sidewall_angle_deg = 0.0;
        assert!(cs.validate().is_err());
        let mut cs = CrossSection::reference();
        cs.slab_thickness_nm = 500.0;
        assert!(cs.validate().is_err());
        let mut cs = CrossSection::reference();
        cs.sidewall_angle_deg = 10.0;
        cs.top_width_nm = 100.0;
        assert!(cs.validate().is_ok());
    }

    #[test]
    fn pure_cells_hold_exact_material_indices() {
        let lib = MaterialLibrary::builtin();
        let cs = CrossSection::reference();
        let grid = Grid::uniform(20.0, 1000.0);
        let map = rasterize(&cs, &grid, &lib, 1.55, 34.5, Polarization::Te).unwrap();
        let n_sub = lib.get("fused_silica").unwrap().refractive_index(1.55, 34.5).unwrap();
        let n_core = lib.get("ln_congruent_e").unwrap().refractive_index(1.55, 34.5).unwrap();
        // bottom row is deep in the substrate
        assert_eq!(map.at(0, 0), n_sub);
        let centre = map.nx / 2;
        let mid_film = (0..map.nz)
            .min_by(|&a, &b| {
                (map.z_um(a) - 0.25).abs().partial_cmp(&(map.z_um(b) - 0.25).abs()).unwrap()
            })
            .unwrap();
        assert_eq!(map.at(centre, mid_film), n_core);
        assert!(map.max_index() <= n_core);
        assert_eq!(map.background_index, n_sub);
        // margins only grow
        assert!(map.x_um(0) <= -(cs.bottom_width_nm() / 2.0 + 1000.0) * 1e-3 + 0.02 + 1e-9);
        assert!((map.nx + 1).is_multiple_of(8) && (map.nz + 1).is_multiple_of(8));
    }

    #[test]
    fn sidewall_cells_are_mixed() {
        let lib = MaterialLibrary::builtin();
        let cs = CrossSection::reference();
        let map = rasterize(&cs, &Grid::uniform(20.0, 600.0), &lib, 1.55, 25.0, Polarization::Te).unwrap();
        let mixed = map
            .index
            .iter()
            .filter(|&&n| n > 1.4441 && n < 2.13)
            .count();
        assert!(mixed > 0);
    }

    #[test]
    fn tm_uses_ordinary_core() {
        let lib = MaterialLibrary::builtin();
        let cs = CrossSection::reference();
        let te = rasterize(&cs, &Grid::uniform(40.0, 600.0), &lib, 1.55, 25.0, Polarization::Te).unwrap();
        let tm = rasterize(&cs, &Grid::uniform(40.0, 600.0), &lib, 1.55, 25.0, Polarization::Tm).unwrap();
        assert!(tm.max_index() > te.max_index());
    }
}
