//! On-disk cache of mode solutions.
//!
//! One file per solve, named `<key>.mode` where the key is the SHA-256 of the
//! canonical JSON of every input that affects the result (cross-section, grid,
//! wavelength, temperature, polarization, mode count, solver settings and the
//! material records involved). Layout:
//!
//! ```text
//! line 1   JSON header + '\n'   {"format": "qpmkit-mode/1", "key": ..., "inputs": {...},
//!                                "settings": {...}, "status": "guided" | "cutoff",
//!                                "background_index": ..., "nx", "nz", "dx_um", "dz_um",
//!                                "x0_um", "z0_um", "modes": [{n_eff, mode_order, guided, residual}, ...]}
//! rest     nx·nz little-endian f64 field samples per mode, in header order
//! ```
//!
//! Entries are written to a temporary file in the cache directory and renamed
//! into place, so concurrent writers never expose a partial entry.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::materials::{DispersionModel, MaterialLibrary};

use super::{ModeRequest, ModeSearch, ModeSolution, Polarization, SolverSettings};

pub const CACHE_FORMAT: &str = "qpmkit-mode/1";

#[derive(Serialize)]
struct KeyMaterial<'a> {
    format: &'static str,
    request: &'a ModeRequest<'a>,
    settings: &'a SolverSettings,
    materials: Vec<&'a DispersionModel>,
}

/// Content hash identifying a solve.
pub fn cache_key(
    req: &ModeRequest<'_>,
    settings: &SolverSettings,
    materials: &MaterialLibrary,
) -> Result<String> {
    let cs = req.cross_section;
    let names = [
        cs.core_for(req.polarization),
        cs.substrate_material.as_str(),
        cs.cladding_material.as_str(),
    ];
    let materials = names
        .iter()
        .map(|n| materials.get(n))
        .collect::<Result<Vec<_>>>()?;
    let key = KeyMaterial {
        format: CACHE_FORMAT,
        request: req,
        settings,
        materials,
    };
    let bytes = serde_json::to_vec(&key)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize, Deserialize)]
struct ModeHeader {
    n_eff: f64,
    mode_order: usize,
    guided: bool,
    residual: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    key: String,
    inputs: serde_json::Value,
    settings: SolverSettings,
    status: String,
    background_index: f64,
    wavelength_um: f64,
    temperature_c: f64,
    polarization: Polarization,
    nx: usize,
    nz: usize,
    dx_um: f64,
    dz_um: f64,
    x0_um: f64,
    z0_um: f64,
    modes: Vec<ModeHeader>,
}

#[derive(Debug, Clone)]
pub struct ModeCache {
    dir: PathBuf,
}

impl ModeCache {
    pub fn new(dir: PathBuf) -> Self {
        ModeCache { dir }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.mode"))
    }

    pub fn load(&self, key: &str) -> Result<Option<ModeSearch>> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let bad = |reason: &str| Error::Cache {
            path: path.clone(),
            reason: reason.to_owned(),
        };
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("missing header line"))?;
        let header: Header =
            serde_json::from_slice(&bytes[..split]).map_err(|e| bad(&e.to_string()))?;
        if header.format != CACHE_FORMAT || header.key != key {
            return Err(bad("format or key mismatch"));
        }
        let body = &bytes[split + 1..];
        let per_mode = header.nx * header.nz;
        if body.len() != header.modes.len() * per_mode * 8 {
            return Err(bad("field payload has the wrong length"));
        }
        let modes = header
            .modes
            .iter()
            .enumerate()
            .map(|(m, mh)| {
                let chunk = &body[m * per_mode * 8..(m + 1) * per_mode * 8];
                ModeSolution {
                    wavelength_um: header.wavelength_um,
                    temperature_c: header.temperature_c,
                    polarization: header.polarization,
                    n_eff: mh.n_eff,
                    mode_order: mh.mode_order,
                    guided: mh.guided,
                    residual: mh.residual,
                    nx: header.nx,
                    nz: header.nz,
                    dx_um: header.dx_um,
                    dz_um: header.dz_um,
                    x0_um: header.x0_um,
                    z0_um: header.z0_um,
                    field: chunk
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                        .collect(),
                }
            })
            .collect();
        Ok(Some(match header.status.as_str() {
            "guided" => ModeSearch::Guided(modes),
            "cutoff" => ModeSearch::Cutoff {
                background_index: header.background_index,
                unguided: modes,
            },
            _ => return Err(bad("unknown status")),
        }))
    }

    pub fn store(
        &self,
        key: &str,
        req: &ModeRequest<'_>,
        settings: &SolverSettings,
        search: &ModeSearch,
    ) -> Result<()> {
        let modes = search.all();
        let Some(first) = modes.first() else {
            return Ok(());
        };
        let (status, background_index) = match search {
            ModeSearch::Guided(_) => ("guided", f64::NAN),
            ModeSearch::Cutoff {
                background_index, ..
            } => ("cutoff", *background_index),
        };
        let header = Header {
            format: CACHE_FORMAT.to_owned(),
            key: key.to_owned(),
            inputs: serde_json::to_value(req)?,
            settings: settings.clone(),
            status: status.to_owned(),
            background_index: if background_index.is_nan() { 0.0 } else { background_index },
            wavelength_um: first.wavelength_um,
            temperature_c: first.temperature_c,
            polarization: first.polarization,
            nx: first.nx,
            nz: first.nz,
            dx_um: first.dx_um,
            dz_um: first.dz_um,
            x0_um: first.x0_um,
            z0_um: first.z0_um,
            modes: modes
                .iter()
                .map(|m| ModeHeader {
                    n_eff: m.n_eff,
                    mode_order: m.mode_order,
                    guided: m.guided,
                    residual: m.residual,
                })
                .collect(),
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut buf = serde_json::to_vec(&header)?;
        buf.push(b'\n');
        for m in modes {
            for v in &m.field {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        tmp.write_all(&buf).map_err(|e| Error::io(tmp.path(), e))?;
        let dest = self.path_for(key);
        tmp.persist(&dest).map_err(|e| Error::io(&dest, e.error))?;
        Ok(())
    }
}
