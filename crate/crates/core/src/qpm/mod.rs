//! Quasi-phase-matching design: wavevector mismatch, poling periods, SHG
//! efficiency and the SHG/DFG phase-matching spectra.
//!
//! Wavelengths are in µm and wavevectors in rad/µm unless a name says
//! otherwise. Efficiencies are computed in SI and reported in %·W⁻¹·cm⁻².

mod dispersion;
mod spectra;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FacetLossTable;
use crate::mode_solver::{mode_overlap, CrossSection, Grid, ModeRequest, ModeSolution, ModeSolver, Overlap, Polarization};
use crate::{EPSILON_0, SPEED_OF_LIGHT};

pub use dispersion::{BandInterpolant, Bulk, DispersionChain, Dispersionless, ModeDispersion};
pub use spectra::{
    delta_k_shg, delta_k_slope, dfg_response, dfg_spectrum, fringe_spacing_um, fresnel_reflectivity, phase_matched_pumps, spdc_pump_wavelength, tuning_curve,
    Bandwidth, DfgSpectrum, TuningCurve, SINC2_HALF_WIDTH,
};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// A periodically poled waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpmDevice {
    pub cross_section: CrossSection,
    pub poling_period_um: f64,
    pub length_mm: f64,
    pub temperature_c: f64,
    pub duty_cycle: f64,
    /// Power reflectivity of each end facet.
    pub facet_reflectivity: f64,
    pub facet_loss: FacetLossTable,
}

impl QpmDevice {
    pub fn validate(&self) -> Result<()> {
        self.cross_section.validate()?;
        if !(self.poling_period_um > 0.0) {
            return Err(Error::config("poling period must be positive"));
        }
        if !(self.length_mm > 0.0) {
            return Err(Error::config("device length must be positive"));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(Error::config("duty cycle must lie strictly between 0 and 1"));
        }
        if !(self.facet_reflectivity >= 0.0 && self.facet_reflectivity < 1.0) {
            return Err(Error::config("facet reflectivity must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn length_um(&self) -> f64 {
        self.length_mm * 1e3
    }

    /// First-order QPM reduction of d_eff relative to a 50 % duty cycle.
    pub fn duty_factor(&self) -> f64 {
        duty_factor(self.duty_cycle)
    }
}

/// sin(π·duty) / sin(π/2).
pub fn duty_factor(duty: f64) -> f64 {
    (std::f64::consts::PI * duty).sin()
}

/// sin(x)/x with the removable singularity filled.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

fn check_indices(indices: &[f64]) -> Result<()> {
    if indices.iter().all(|n| *n > 0.0 && n.is_finite()) {
        Ok(())
    } else {
        Err(Error::contract("effective indices must be positive and finite"))
    }
}

/// SHG mismatch `k_sh − 2·k_pump − 2π/Λ` in rad/µm for a pump at `pump_um`.
///
/// Pass `f64::INFINITY` as the period for an unpoled guide.
pub fn wavevector_mismatch_shg(n_harmonic: f64, n_pump: f64, pump_um: f64, period_um: f64) -> Result<f64> {
    check_indices(&[n_harmonic, n_pump])?;
    if !(pump_um > 0.0 && period_um > 0.0) {
        return Err(Error::contract("wavelength and period must be positive"));
    }
    let k_sh = TWO_PI * n_harmonic / (0.5 * pump_um);
    let k_p = TWO_PI * n_pump / pump_um;
    Ok(k_sh - 2.0 * k_p - TWO_PI / period_um)
}

/// Idler wavelength from energy conservation 1/λp = 1/λs + 1/λi.
pub fn idler_wavelength(pump_um: f64, signal_um: f64) -> Result<f64> {
    if !(pump_um > 0.0 && signal_um > pump_um) {
        return Err(Error::contract("signal must be longer than the pump"));
    }
    Ok(1.0 / (1.0 / pump_um - 1.0 / signal_um))
}

/// SPDC/DFG mismatch `k_p − k_s − k_i − 2π/Λ` in rad/µm.
///
/// The wavelength triple must conserve energy to 1e-9 relative.
#[allow(clippy::too_many_arguments)]
pub fn wavevector_mismatch_spdc(
    n_pump: f64,
    n_signal: f64,
    n_idler: f64,
    pump_um: f64,
    signal_um: f64,
    idler_um: f64,
    period_um: f64,
) -> Result<f64> {
    check_indices(&[n_pump, n_signal, n_idler])?;
    let defect = 1.0 / pump_um - 1.0 / signal_um - 1.0 / idler_um;
    if !(defect.abs() <= 1e-9 / pump_um) {
        return Err(Error::contract(format!(
            "wavelengths {pump_um}, {signal_um}, {idler_um} um do not conserve energy"
        )));
    }
    // a two-term sum is commutative, so swapping signal and idler is bit-identical
    let daughters = n_signal / signal_um + n_idler / idler_um;
    Ok(TWO_PI * (n_pump / pump_um - daughters) - TWO_PI / period_um)
}

/// Result of inverting the SHG phase-matching condition for Λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolingPeriod {
    Period { period_um: f64 },
    /// The harmonic index does not exceed the pump index; no first-order grating helps.
    Anomalous { index_difference: f64 },
}

impl PolingPeriod {
    pub fn period_um(&self) -> Option<f64> {
        match self {
            PolingPeriod::Period { period_um } => Some(*period_um),
            PolingPeriod::Anomalous { .. } => None,
        }
    }
}

/// Λ = λ_pump / (2 (n_2ω − n_ω)).
pub fn poling_period(n_harmonic: f64, n_pump: f64, pump_um: f64) -> Result<PolingPeriod> {
    check_indices(&[n_harmonic, n_pump])?;
    let diff = n_harmonic - n_pump;
    if diff <= 0.0 {
        return Ok(PolingPeriod::Anomalous {
            index_difference: diff,
        });
    }
    Ok(PolingPeriod::Period {
        period_um: pump_um / (2.0 * diff),
    })
}

/// Normalized SHG efficiency in both SI and display units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShgEfficiency {
    /// W⁻¹·m⁻².
    pub si: f64,
    pub percent_per_w_cm2: f64,
    pub d_eff_pm_per_v: f64,
    pub overlap: Overlap,
}

/// Phase-matched (ΔK = 0) normalized SHG efficiency of a mode pair:
///
/// η = 8π² d_eff² / (ε0 c λ_ω² n_2ω n_ω²) · Γ²,
///
/// with λ_ω the fundamental wavelength, Γ the three-wave overlap factor of
/// [`mode_overlap`] and d_eff = (2/π)·d33·sin(π·duty).
pub fn normalized_shg_efficiency(
    fundamental: &ModeSolution,
    harmonic: &ModeSolution,
    d33_pm_per_v: f64,
    duty_cycle: f64,
) -> Result<ShgEfficiency> {
    let overlap = mode_overlap(harmonic, fundamental)?;
    let ratio = fundamental.wavelength_um / harmonic.wavelength_um;
    if (ratio - 2.0).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "harmonic wavelength {} um is not half the fundamental {} um",
            harmonic.wavelength_um, fundamental.wavelength_um
        )));
    }
    let d_eff = 2.0 / std::f64::consts::PI * d33_pm_per_v * 1e-12 * duty_factor(duty_cycle);
    let lambda = fundamental.wavelength_um * 1e-6;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let si = 8.0 * pi2 * d_eff * d_eff
        / (EPSILON_0 * SPEED_OF_LIGHT * lambda * lambda * harmonic.n_eff * fundamental.n_eff.powi(2))
        * overlap.factor_per_m.powi(2);
    Ok(ShgEfficiency {
        si,
        percent_per_w_cm2: si * 1e-2,
        d_eff_pm_per_v: d_eff * 1e12,
        overlap,
    })
}

/// Undepleted-pump SH power: P_SH = η·P²·L²·sinc²(ΔK·L/2).
///
/// `delta_k` is in rad/µm and `length_cm` in cm.
pub fn shg_power(eta_percent_per_w_cm2: f64, pump_w: f64, length_cm: f64, delta_k: f64) -> Result<f64> {
    if !(eta_percent_per_w_cm2 >= 0.0 && pump_w >= 0.0 && length_cm >= 0.0) {
        return Err(Error::contract("efficiency, power and length must be non-negative"));
    }
    let eta = eta_percent_per_w_cm2 / 100.0;
    let phase = 0.5 * delta_k * length_cm * 1e4;
    Ok(eta * pump_w * pump_w * length_cm * length_cm * sinc(phase).powi(2))
}

/// Inverse of [`shg_power`] at ΔK = 0: η in %·W⁻¹·cm⁻² from measured powers.
pub fn efficiency_from_powers(sh_w: f64, pump_w: f64, length_cm: f64) -> Result<f64> {
    if !(pump_w > 0.0 && length_cm > 0.0 && sh_w >= 0.0) {
        return Err(Error::contract("pump power and length must be positive"));
    }
    Ok(100.0 * sh_w / (pump_w * pump_w * length_cm * length_cm))
}

/// Mode pair, period and efficiency of a cross-section at one design point.
#[derive(Debug, Clone, Serialize)]
pub struct PolingDesign {
    pub pump_um: f64,
    pub temperature_c: f64,
    pub n_eff_pump: f64,
    pub n_eff_harmonic: f64,
    pub period: PolingPeriod,
    pub efficiency: ShgEfficiency,
    #[serde(skip)]
    pub fundamental: ModeSolution,
    #[serde(skip)]
    pub harmonic: ModeSolution,
}

/// Solve the fundamental modes at `pump_um` and `pump_um/2` and derive Λ and η.
#[allow(clippy::too_many_arguments)]
pub fn poling_period_for(
    solver: &ModeSolver,
    cross_section: &CrossSection,
    grid: &Grid,
    pump_um: f64,
    temperature_c: f64,
    polarization: Polarization,
    d33_pm_per_v: f64,
    duty_cycle: f64,
) -> Result<PolingDesign> {
    let solve = |wavelength_um: f64| -> Result<ModeSolution> {
        let req = ModeRequest {
            cross_section,
            grid,
            wavelength_um,
            temperature_c,
            polarization,
            n_modes: 1,
        };
        Ok(solver.solve(&req)?.fundamental()?.clone())
    };
    let (fundamental, harmonic) = rayon::join(|| solve(pump_um), || solve(0.5 * pump_um));
    let (fundamental, harmonic) = (fundamental?, harmonic?);
    let period = poling_period(harmonic.n_eff, fundamental.n_eff, pump_um)?;
    let efficiency = normalized_shg_efficiency(&fundamental, &harmonic, d33_pm_per_v, duty_cycle)?;
    Ok(PolingDesign {
        pump_um,
        temperature_c,
        n_eff_pump: fundamental.n_eff,
        n_eff_harmonic: harmonic.n_eff,
        period,
        efficiency,
        fundamental,
        harmonic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unpoled_dispersionless_is_matched() {
        assert_eq!(wavevector_mismatch_shg(2.1, 2.1, 1.55, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn hand_arithmetic_mismatch() {
        let dk = wavevector_mismatch_shg(2.0, 1.9, 1.55, f64::INFINITY).unwrap();
        // 4π·0.1/1.55 = 2π·0.129032...
        assert!((dk - TWO_PI * 0.2 / 1.55).abs() < 1e-12);
        assert!((dk / TWO_PI - 0.129_032_258).abs() < 1e-9);
        let nulled = wavevector_mismatch_shg(2.0, 1.9, 1.55, 7.75).unwrap();
        assert!(nulled.abs() < 1e-12);
    }

    #[test]
    fn closed_form_periods() {
        let p = poling_period(2.0 + 0.19375, 2.0, 1.55).unwrap().period_um().unwrap();
        assert!((p - 4.0).abs() < 1e-9);
        let p = poling_period(2.0, 1.9, 1.55).unwrap().period_um().unwrap();
        assert!((p - 7.75).abs() < 1e-9);
        assert!(matches!(poling_period(1.9, 2.0, 1.55).unwrap(), PolingPeriod::Anomalous { .. }));
    }

    #[test]
    fn idler_from_energy_conservation() {
        let li = idler_wavelength(0.7675, 1.530).unwrap();
        assert!((li * 1e3 - 1540.03).abs() < 0.005, "{li}");
        assert!(idler_wavelength(1.0, 0.9).is_err());
    }

    #[test]
    fn spdc_rejects_inconsistent_triple() {
        assert!(matches!(
            wavevector_mismatch_spdc(2.1, 1.9, 1.9, 0.775, 1.55, 1.56, 4.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn degenerate_spdc_equals_shg() {
        let shg = wavevector_mismatch_shg(2.09, 1.9, 1.55, 4.0).unwrap();
        let spdc = wavevector_mismatch_spdc(2.09, 1.9, 1.9, 0.775, 1.55, 1.55, 4.0).unwrap();
        assert!((shg - spdc).abs() < 1e-12);
    }

    #[test]
    fn shg_power_bookkeeping() {
        assert_eq!(shg_power(2266.0, 0.0, 0.4, 0.0).unwrap(), 0.0);
        let p = shg_power(2266.0, 2.95e-3, 0.4, 0.0).unwrap();
        assert!((p - 31.56e-6).abs() / 31.56e-6 < 5e-3, "{p}");
        let eta = efficiency_from_powers(31.56e-6, 2.95e-3, 0.4).unwrap();
        assert!((eta - 2266.0).abs() < 5.0, "{eta}");
        // first null of the sinc
        let null = shg_power(2266.0, 1e-3, 0.4, TWO_PI / 4000.0).unwrap();
        assert!(null < 1e-20);
    }

    #[test]
    fn duty_cycle_factor() {
        assert_eq!(duty_factor(0.5), 1.0);
        assert!((duty_factor(0.25) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn spdc_symmetric_in_signal_and_idler(ls in 1.4f64..1.7, ns in 1.8f64..2.0, ni in 1.8f64..2.0) {
            let lp = 0.766;
            let li = idler_wavelength(lp, ls).unwrap();
            let a = wavevector_mismatch_spdc(2.09, ns, ni, lp, ls, li, 4.0).unwrap();
            let b = wavevector_mismatch_spdc(2.09, ni, ns, lp, li, ls, 4.0).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
