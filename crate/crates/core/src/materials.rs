//! Temperature-dependent refractive indices of the waveguide materials.
//!
//! Coefficients are data: the shipped set lives in `data/materials.toml` and is
//! compiled in as the default library, and any other file with the same layout
//! can be loaded instead (for example an MgO-doped LN fit).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../data/materials.toml");

/// Default central-difference step for wavelength derivatives, µm (1 nm).
pub const DEFAULT_DERIVATIVE_STEP_UM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SellmeierForm {
    Constant,
    Sellmeier,
    LnGeneralized,
}

/// A named bulk dispersion model with its validity window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub name: String,
    pub form: SellmeierForm,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub temperature_terms: Vec<f64>,
    pub wavelength_range_um: (f64, f64),
    pub temperature_range_c: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d33_pm_per_v: Option<f64>,
}

impl DispersionModel {
    /// A wavelength- and temperature-independent index.
    pub fn constant(name: &str, index: f64) -> Self {
        DispersionModel {
            name: name.to_owned(),
            form: SellmeierForm::Constant,
            coefficients: vec![index],
            temperature_terms: Vec::new(),
            wavelength_range_um: (0.1, 20.0),
            temperature_range_c: (-273.15, 1000.0),
            d33_pm_per_v: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let want = match self.form {
            SellmeierForm::Constant => self.coefficients.len() == 1,
            SellmeierForm::Sellmeier => {
                !self.coefficients.is_empty() && self.coefficients.len().is_multiple_of(2)
            }
            SellmeierForm::LnGeneralized => {
                self.coefficients.len() == 6
                    && (self.temperature_terms.is_empty() || self.temperature_terms.len() == 6)
            }
        };
        if !want {
            return Err(Error::config(format!(
                "material `{}`: wrong number of coefficients for form {:?}",
                self.name, self.form
            )));
        }
        let (l0, l1) = self.wavelength_range_um;
        let (t0, t1) = self.temperature_range_c;
        if !(l0 > 0.0 && l1 > l0 && t1 > t0) {
            return Err(Error::config(format!(
                "material `{}`: empty or non-physical validity window",
                self.name
            )));
        }
        if self.coefficients.iter().chain(&self.temperature_terms).any(|c| !c.is_finite()) {
            return Err(Error::config(format!("material `{}`: non-finite coefficient", self.name)));
        }
        Ok(())
    }

    fn check_window(&self, wavelength_um: f64, temperature_c: f64) -> Result<()> {
        let (l0, l1) = self.wavelength_range_um;
        if !(wavelength_um >= l0 && wavelength_um <= l1) {
            return Err(Error::Range {
                model: self.name.clone(),
                axis: "wavelength (um)",
                value: wavelength_um,
                min: l0,
                max: l1,
            });
        }
        let (t0, t1) = self.temperature_range_c;
        if !(temperature_c >= t0 && temperature_c <= t1) {
            return Err(Error::Range {
                model: self.name.clone(),
                axis: "temperature (degC)",
                value: temperature_c,
                min: t0,
                max: t1,
            });
        }
        Ok(())
    }

    fn index_squared(&self, wavelength_um: f64, temperature_c: f64) -> f64 {
        let l2 = wavelength_um * wavelength_um;
        let c = &self.coefficients;
        match self.form {
            SellmeierForm::Constant => c[0] * c[0],
            SellmeierForm::Sellmeier => {
                1.0 + c
                    .chunks_exact(2)
                    .map(|bc| bc[0] * l2 / (l2 - bc[1] * bc[1]))
                    .sum::<f64>()
            }
            SellmeierForm::LnGeneralized => {
                let (b, f) = match self.temperature_terms.as_slice() {
                    [b1, b2, b3, b4, t0, t1] => {
                        ([*b1, *b2, *b3, *b4], (temperature_c - t0) * (temperature_c + t1))
                    }
                    _ => ([0.0; 4], 0.0),
                };
                let pole = c[2] + b[2] * f;
                c[0] + b[0] * f + (c[1] + b[1] * f) / (l2 - pole * pole)
                    + (c[3] + b[3] * f) / (l2 - c[4] * c[4])
                    - c[5] * l2
            }
        }
    }

    /// Refractive index at `wavelength_um` (µm) and `temperature_c` (°C).
    pub fn refractive_index(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        self.check_window(wavelength_um, temperature_c)?;
        Ok(self.index_squared(wavelength_um, temperature_c).sqrt())
    }

    /// dn/dλ in 1/µm by central difference with step `step_um`.
    pub fn index_slope(&self, wavelength_um: f64, temperature_c: f64, step_um: f64) -> Result<f64> {
        if !(step_um > 0.0) {
            return Err(Error::contract("derivative step must be positive"));
        }
        self.check_window(wavelength_um - 2.0 * step_um, temperature_c)?;
        self.check_window(wavelength_um + 2.0 * step_um, temperature_c)?;
        let up = self.index_squared(wavelength_um + step_um, temperature_c).sqrt();
        let down = self.index_squared(wavelength_um - step_um, temperature_c).sqrt();
        Ok((up - down) / (2.0 * step_um))
    }

    /// Group index n − λ·dn/dλ.
    pub fn group_index(&self, wavelength_um: f64, temperature_c: f64, step_um: f64) -> Result<f64> {
        let slope = self.index_slope(wavelength_um, temperature_c, step_um)?;
        let n = self.refractive_index(wavelength_um, temperature_c)?;
        Ok(n - wavelength_um * slope)
    }
}

#[derive(Deserialize)]
struct MaterialFile {
    material: Vec<DispersionModel>,
}

/// The set of materials available to cross-sections, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct MaterialLibrary {
    models: BTreeMap<String, DispersionModel>,
}

impl MaterialLibrary {
    /// The compiled-in data file.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN).expect("shipped material data is valid")
    }

    /// Text of the compiled-in data file, for writing a copy next to a config.
    pub fn builtin_source() -> &'static str {
        BUILTIN
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: MaterialFile =
            toml::from_str(text).map_err(|e| Error::config(format!("material data: {e}")))?;
        let mut lib = MaterialLibrary::default();
        for model in file.material {
            lib.insert(model)?;
        }
        Ok(lib)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn insert(&mut self, model: DispersionModel) -> Result<()> {
        model.validate()?;
        if self.models.contains_key(&model.name) {
            return Err(Error::config(format!("duplicate material `{}`", model.name)));
        }
        self.models.insert(model.name.clone(), model);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&DispersionModel> {
        self.models
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}
