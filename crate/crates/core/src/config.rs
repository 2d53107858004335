//! Project configuration: one TOML file with explicit units on every
//! physical quantity.
//!
//! The file is parsed into [`ProjectConfig`]; unit errors surface at load
//! time. The shipped reference configuration lives in
//! `data/reference-device.toml` and is embedded in the binary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::materials::MaterialLibrary;
use crate::metrics::{Direction, FacetBand, FacetLossTable};
use crate::mode_solver::{CrossSection, Grid, Polarization, SolverSettings};
use crate::pairs::{Arm, Channel, PairExperiment};
use crate::qpm::QpmDevice;
use crate::units::{
    Angle, Brightness, Decibel, Frequency, Length, NonlinearCoefficient, Power, Quantity, Temperature, Time,
};

/// Text of the reference device configuration.
pub const REFERENCE_CONFIG: &str = include_str!("../data/reference-device.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub materials: MaterialsSection,
    pub cross_section: CrossSectionSection,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub dispersion: DispersionSection,
    pub device: DeviceSection,
    pub design: DesignSection,
    pub sweeps: SweepsSection,
    #[serde(default)]
    pub dfg: DfgSection,
    pub pairs: PairsSection,
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub cache: CacheSection,

    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// SHA-256 of the file text.
    #[serde(skip)]
    pub hash: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsSection {
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSectionSection {
    pub film_thickness: Quantity<Length>,
    pub top_width: Quantity<Length>,
    pub sidewall_angle: Quantity<Angle>,
    pub slab_thickness: Quantity<Length>,
    pub core: String,
    pub core_tm: Option<String>,
    pub substrate: String,
    #[serde(default = "oxide")]
    pub cladding: String,
}

fn oxide() -> String {
    "fused_silica".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dx: Quantity<Length>,
    pub dz: Quantity<Length>,
    pub margin: Quantity<Length>,
    pub x_span: Option<Quantity<Length>>,
    pub z_span: Option<Quantity<Length>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub polarization: Polarization,
    pub tolerance: f64,
    pub max_lanczos_steps: usize,
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverSection {
            polarization: Polarization::Te,
            tolerance: s.tolerance,
            max_lanczos_steps: s.max_lanczos_steps,
            inner_tolerance: s.inner_tolerance,
            inner_max_iterations: s.inner_max_iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    pub fundamental_band: [Quantity<Length>; 2],
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    6
}

/// Facet reflectivity: a fixed value or the Fresnel value of the guided mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reflectivity {
    Value(f64),
    Rule(ReflectivityRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectivityRule {
    Fresnel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacetLossEntry {
    pub band: String,
    pub center: Quantity<Length>,
    pub loss: Quantity<Decibel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub poling_period: Quantity<Length>,
    pub length: Quantity<Length>,
    pub temperature: Quantity<Temperature>,
    #[serde(default = "half")]
    pub duty_cycle: f64,
    pub facet_reflectivity: Reflectivity,
    #[serde(default)]
    pub facet_loss: Vec<FacetLossEntry>,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub pump: Quantity<Length>,
    pub d33: Option<Quantity<NonlinearCoefficient>>,
}

/// Evenly spaced wavelengths, endpoints included.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: Quantity<Length>,
    pub stop: Quantity<Length>,
    pub points: usize,
}

impl Sweep {
    pub fn micrometres(&self) -> Vec<f64> {
        let (a, b) = (self.start.micrometres(), self.stop.micrometres());
        let n = self.points;
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.points < 2 {
            return Err(Error::config(format!("sweep `{name}` needs at least 2 points")));
        }
        if !(self.stop.si() > self.start.si() && self.start.si() > 0.0) {
            return Err(Error::config(format!("sweep `{name}` must have stop > start > 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepsSection {
    pub pump_wavelength: Sweep,
    pub signal_wavelength: Sweep,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfgSection {
    pub pump: Option<Quantity<Length>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub center: Quantity<Length>,
    pub width: Quantity<Frequency>,
}

impl ChannelEntry {
    fn channel(&self) -> Channel {
        Channel {
            center_nm: self.center.nanometres(),
            width_ghz: self.width.si() * 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSweep {
    pub start: Quantity<Power>,
    pub stop: Quantity<Power>,
    pub points: usize,
    #[serde(default)]
    pub monte_carlo_gates: u64,
}

impl PowerSweep {
    /// Logarithmically spaced pump powers in W.
    pub fn watts(&self) -> Vec<f64> {
        let (a, b) = (self.start.si().ln(), self.stop.si().ln());
        let n = self.points;
        (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSection {
    pub pump: Quantity<Length>,
    pub width: Quantity<Frequency>,
    pub signal: Vec<Quantity<Length>>,
    pub idler: Vec<Quantity<Length>>,
}

impl MatrixSection {
    fn channels(&self, centers: &[Quantity<Length>]) -> Vec<Channel> {
        centers
            .iter()
            .map(|c| Channel {
                center_nm: c.nanometres(),
                width_ghz: self.width.si() * 1e-9,
            })
            .collect()
    }

    pub fn signal_channels(&self) -> Vec<Channel> {
        self.channels(&self.signal)
    }

    pub fn idler_channels(&self) -> Vec<Channel> {
        self.channels(&self.idler)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsSection {
    pub brightness: Quantity<Brightness>,
    pub pump_power: Quantity<Power>,
    pub gate_rate: Quantity<Frequency>,
    pub gate_width: Quantity<Time>,
    pub signal_channel: ChannelEntry,
    pub idler_channel: ChannelEntry,
    pub signal_arm: Arm,
    pub idler_arm: Arm,
    pub power_sweep: PowerSweep,
    pub matrix: MatrixSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeembedEntry {
    pub label: String,
    pub measured: Quantity<Power>,
    pub band: String,
    pub facets: u32,
    pub direction: Direction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub intrinsic_q: f64,
    pub wavelength: Quantity<Length>,
    pub group_index: Option<f64>,
    pub ring_top_width: Option<Quantity<Length>>,
    #[serde(default = "default_bracket")]
    pub group_index_bracket: [f64; 2],
    #[serde(default)]
    pub deembed: Vec<DeembedEntry>,
}

fn default_bracket() -> [f64; 2] {
    [1.6, 2.4]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("qpmkit-out"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    pub dir: Option<PathBuf>,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The embedded reference configuration, with paths relative to `base_dir`.
    pub fn reference(base_dir: &Path) -> Result<Self> {
        Self::parse(REFERENCE_CONFIG, base_dir)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ProjectConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.hash = hex::encode(Sha256::digest(text.as_bytes()));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn short_hash(&self) -> &str {
        &self.hash[..16.min(self.hash.len())]
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn materials_path(&self) -> Option<PathBuf> {
        self.materials.file.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.cache.dir.as_deref().map(|p| self.resolve(p))
    }

    fn validate(&self) -> Result<()> {
        if let Some(path) = self.materials_path() {
            if !path.is_file() {
                return Err(Error::config(format!("materials file {} does not exist", path.display())));
            }
        }
        let cs = self.cross_section();
        cs.validate()?;
        self.grid().validate(&cs)?;
        self.device_with_reflectivity(0.0)?.validate()?;
        if let Reflectivity::Value(r) = self.device.facet_reflectivity {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::config("facet reflectivity must lie in [0, 1)"));
            }
        }
        self.sweeps.pump_wavelength.validate("pump_wavelength")?;
        self.sweeps.signal_wavelength.validate("signal_wavelength")?;
        let [lo, hi] = self.dispersion.fundamental_band;
        if !(hi.si() > lo.si() && lo.si() > 0.0) {
            return Err(Error::config("dispersion band must be increasing and positive"));
        }
        if self.dispersion.nodes < 2 {
            return Err(Error::config("dispersion needs at least 2 nodes"));
        }
        let ps = &self.pairs.power_sweep;
        if ps.points < 2 || !(ps.stop.si() > ps.start.si() && ps.start.si() > 0.0) {
            return Err(Error::config("pair power sweep needs >= 2 increasing positive powers"));
        }
        if ps.monte_carlo_gates != 0 && ps.monte_carlo_gates < 10_000 {
            return Err(Error::config("monte_carlo_gates must be 0 (off) or at least 1e4"));
        }
        self.experiment().validate()?;
        if !(self.metrics.intrinsic_q > 0.0) {
            return Err(Error::config("intrinsic Q must be positive"));
        }
        if self.metrics.group_index.is_none() && self.metrics.ring_top_width.is_none() {
            return Err(Error::config("metrics needs either group_index or ring_top_width"));
        }
        Ok(())
    }

    pub fn materials(&self) -> Result<MaterialLibrary> {
        match self.materials_path() {
            Some(p) => MaterialLibrary::load(&p).map_err(|e| match e {
                Error::Io { path, source } => Error::config(format!("{}: {source}", path.display())),
                other => other,
            }),
            None => Ok(MaterialLibrary::builtin()),
        }
    }

    pub fn cross_section(&self) -> CrossSection {
        let c = &self.cross_section;
        CrossSection {
            film_thickness_nm: c.film_thickness.nanometres(),
            top_width_nm: c.top_width.nanometres(),
            sidewall_angle_deg: c.sidewall_angle.degrees(),
            slab_thickness_nm: c.slab_thickness.nanometres(),
            core_material: c.core.clone(),
            core_material_tm: c.core_tm.clone(),
            substrate_material: c.substrate.clone(),
            cladding_material: c.cladding.clone(),
        }
    }

    pub fn grid(&self) -> Grid {
        let g = &self.grid;
        Grid {
            dx_nm: g.dx.nanometres(),
            dz_nm: g.dz.nanometres(),
            margin_nm: g.margin.nanometres(),
            x_span_nm: g.x_span.map(|q| q.nanometres()),
            z_span_nm: g.z_span.map(|q| q.nanometres()),
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings {
            tolerance: s.tolerance,
            max_lanczos_steps: s.max_lanczos_steps,
            inner_tolerance: s.inner_tolerance,
            inner_max_iterations: s.inner_max_iterations,
            ..SolverSettings::default()
        }
    }

    pub fn facet_loss(&self) -> Result<FacetLossTable> {
        FacetLossTable::new(
            self.device
                .facet_loss
                .iter()
                .map(|f| FacetBand {
                    name: f.band.clone(),
                    center_nm: f.center.nanometres(),
                    loss_db: f.loss.si(),
                })
                .collect(),
        )
    }

    /// The poled device with the given facet reflectivity (see
    /// [`DeviceSection::facet_reflectivity`] for how it is chosen).
    pub fn device_with_reflectivity(&self, facet_reflectivity: f64) -> Result<QpmDevice> {
        let d = &self.device;
        Ok(QpmDevice {
            cross_section: self.cross_section(),
            poling_period_um: d.poling_period.micrometres(),
            length_mm: d.length.si() * 1e3,
            temperature_c: d.temperature.si(),
            duty_cycle: d.duty_cycle,
            facet_reflectivity,
            facet_loss: self.facet_loss()?,
        })
    }

    /// Fundamental and harmonic dispersion bands in µm.
    pub fn dispersion_bands_um(&self) -> [(f64, f64); 2] {
        let [lo, hi] = self.dispersion.fundamental_band;
        let (lo, hi) = (lo.micrometres(), hi.micrometres());
        [(lo, hi), (0.5 * lo, 0.5 * hi)]
    }

    pub fn experiment(&self) -> PairExperiment {
        let p = &self.pairs;
        PairExperiment {
            brightness_hz_per_w_per_m: p.brightness.si(),
            pump_power_w: p.pump_power.si(),
            signal: p.signal_channel.channel(),
            idler: p.idler_channel.channel(),
            gate_rate_hz: p.gate_rate.si(),
            gate_width_s: p.gate_width.si(),
            signal_arm: p.signal_arm,
            idler_arm: p.idler_arm,
        }
    }
}
