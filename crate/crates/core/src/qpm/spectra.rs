//! SHG tuning curves, Fabry-Perot fringing and DFG/SPDC spectra.

use rayon::prelude::*;
use serde::Serialize;

use super::{idler_wavelength, sinc, wavevector_mismatch_shg, wavevector_mismatch_spdc, ModeDispersion, QpmDevice};
use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// x at which sinc²(x) = 1/2.
pub const SINC2_HALF_WIDTH: f64 = 1.391_557_378_251_51;

const ROOT_TOLERANCE_UM: f64 = 1e-13;

/// SHG mismatch of `dispersion` at pump wavelength `pump_um`, rad/µm.
pub fn delta_k_shg(dispersion: &dyn ModeDispersion, pump_um: f64, period_um: f64) -> Result<f64> {
    let n_sh = dispersion.n_eff(0.5 * pump_um)?;
    let n_f = dispersion.n_eff(pump_um)?;
    wavevector_mismatch_shg(n_sh, n_f, pump_um, period_um)
}

/// dΔK/dλ_pump in rad/µm², using the dispersion's analytic slope.
pub fn delta_k_slope(dispersion: &dyn ModeDispersion, pump_um: f64) -> Result<f64> {
    let sh = 0.5 * pump_um;
    let dn = dispersion.n_eff(sh)? - dispersion.n_eff(pump_um)?;
    let ddn = 0.5 * dispersion.slope(sh)? - dispersion.slope(pump_um)?;
    let four_pi = 4.0 * std::f64::consts::PI;
    Ok(four_pi * (ddn / pump_um - dn / (pump_um * pump_um)))
}

/// Normal-incidence power reflectivity of an index-n facet into air.
pub fn fresnel_reflectivity(n: f64) -> f64 {
    ((n - 1.0) / (n + 1.0)).powi(2)
}

/// Transmission of a lossless two-mirror cavity, normalized to 1 on resonance.
fn airy(reflectivity: f64, round_trip_phase: f64) -> f64 {
    let a = (1.0 - reflectivity).powi(2);
    a / (a + 4.0 * reflectivity * (0.5 * round_trip_phase).sin().powi(2))
}

/// Bisection for a sign change of `f` on [lo, hi].
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut flo = f(lo)?;
    for _ in 0..200 {
        if hi - lo <= ROOT_TOLERANCE_UM {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_sweep(axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::config("a sweep needs at least 2 points"));
    }
    if !axis.windows(2).all(|w| w[1] > w[0]) || !(axis[0] > 0.0) {
        return Err(Error::config("sweep wavelengths must be positive and increasing"));
    }
    Ok(())
}

/// SHG phase-matching response against pump wavelength.
#[derive(Debug, Clone, Serialize)]
pub struct TuningCurve {
    /// Pump wavelengths, µm; includes any phase-matched root found in range.
    pub axis_um: Vec<f64>,
    /// Normalized efficiency, envelope times fringes when enabled.
    pub values: Vec<f64>,
    /// sinc²(ΔK·L/2) alone.
    pub envelope: Vec<f64>,
    pub fringes: bool,
    pub peak_um: f64,
    pub peak_value: f64,
    /// Pump wavelength with ΔK = 0, if the sweep brackets one.
    pub phase_matched_um: Option<f64>,
    /// Full width at half maximum of the envelope, µm.
    pub fwhm_um: Option<f64>,
}

impl TuningCurve {
    pub fn harmonic_axis_um(&self) -> impl Iterator<Item = f64> + '_ {
        self.axis_um.iter().map(|l| 0.5 * l)
    }
}

/// Phase-matched pump wavelengths bracketed by consecutive points of `axis`.
pub fn phase_matched_pumps(device: &QpmDevice, dispersion: &dyn ModeDispersion, axis: &[f64]) -> Result<Vec<f64>> {
    check_sweep(axis)?;
    let period = device.poling_period_um;
    let dk: Vec<f64> = axis
        .par_iter()
        .map(|&l| delta_k_shg(dispersion, l, period))
        .collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for k in 0..axis.len() {
        if dk[k] == 0.0 {
            roots.push(axis[k]);
        } else if k + 1 < axis.len() && dk[k + 1] != 0.0 && (dk[k] < 0.0) != (dk[k + 1] < 0.0) {
            roots.push(bisect(axis[k], axis[k + 1], |l| delta_k_shg(dispersion, l, period))?);
        }
    }
    Ok(roots)
}

/// sinc²(ΔK·L/2) over the pump sweep, optionally multiplied by the facet
/// cavity's Airy transmission at the harmonic wavelength.
pub fn tuning_curve(
    device: &QpmDevice,
    dispersion: &dyn ModeDispersion,
    sweep_um: &[f64],
    with_fringes: bool,
) -> Result<TuningCurve> {
    device.validate()?;
    let roots = phase_matched_pumps(device, dispersion, sweep_um)?;
    let mut axis: Vec<f64> = sweep_um.iter().chain(&roots).copied().collect();
    axis.sort_by(f64::total_cmp);
    axis.dedup();

    let length = device.length_um();
    let period = device.poling_period_um;
    let envelope_at = |l: f64| -> Result<f64> {
        let dk = delta_k_shg(dispersion, l, period)?;
        Ok(sinc(0.5 * dk * length).powi(2))
    };
    let points: Vec<(f64, f64)> = axis
        .par_iter()
        .map(|&l| {
            let env = envelope_at(l)?;
            let fringe = if with_fringes {
                let sh = 0.5 * l;
                let phase = 4.0 * std::f64::consts::PI * dispersion.n_eff(sh)? * length / sh;
                airy(device.facet_reflectivity, phase)
            } else {
                1.0
            };
            Ok((env, env * fringe))
        })
        .collect::<Result<_>>()?;
    let (envelope, values): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();

    let (imax, &peak_value) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("sweep is non-empty");
    let phase_matched_um = roots.first().copied();
    let fwhm_um = match phase_matched_um {
        Some(root) => half_max_width(&axis, &envelope, root, |l| Ok(envelope_at(l)? - 0.5))?,
        None => None,
    };
    Ok(TuningCurve {
        peak_um: axis[imax],
        peak_value,
        axis_um: axis,
        values,
        envelope,
        fringes: with_fringes,
        phase_matched_um,
        fwhm_um,
    })
}

/// Crossings of `excess(λ) = 0` on either side of `center`, located by
/// walking the sampled curve outward and bisecting the bracketing interval.
fn half_max_edges(
    axis: &[f64],
    samples: &[f64],
    center: f64,
    excess: impl Fn(f64) -> Result<f64> + Copy,
) -> Result<(Option<f64>, Option<f64>)> {
    let c = axis.partition_point(|&l| l < center).min(axis.len() - 1);
    let right = (c..axis.len())
        .find(|&k| samples[k] < 0.5)
        .map(|k| if k == 0 { Ok(axis[0]) } else { bisect(axis[k - 1], axis[k], excess) })
        .transpose()?;
    let left = (0..=c)
        .rev()
        .find(|&k| samples[k] < 0.5)
        .map(|k| {
            if k + 1 >= axis.len() {
                Ok(axis[k])
            } else {
                bisect(axis[k], axis[k + 1], excess)
            }
        })
        .transpose()?;
    Ok((left, right))
}

fn half_max_width(
    axis: &[f64],
    samples: &[f64],
    center: f64,
    excess: impl Fn(f64) -> Result<f64> + Copy,
) -> Result<Option<f64>> {
    Ok(match half_max_edges(axis, samples, center, excess)? {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    })
}

/// 3-dB bandwidth of a DFG spectrum, in signal frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bandwidth {
    /// Both half-maximum crossings lie inside the sweep.
    Measured { thz: f64 },
    /// The response stays above half maximum to at least one sweep end;
    /// the value is the span that was covered.
    AtLeast { thz: f64 },
}

impl Bandwidth {
    pub fn thz(&self) -> f64 {
        match *self {
            Bandwidth::Measured { thz } | Bandwidth::AtLeast { thz } => thz,
        }
    }
}

/// Idler-generation response against signal wavelength at a fixed pump.
#[derive(Debug, Clone, Serialize)]
pub struct DfgSpectrum {
    pub pump_um: f64,
    pub signal_um: Vec<f64>,
    pub idler_um: Vec<f64>,
    pub values: Vec<f64>,
    pub peak_signal_um: f64,
    pub bandwidth: Bandwidth,
}

fn thz_between(lo_um: f64, hi_um: f64) -> f64 {
    SPEED_OF_LIGHT * (1.0 / lo_um - 1.0 / hi_um) * 1e-6
}

/// The pair is parametrized by its frequency detuning from degeneracy so that
/// a signal and its idler evaluate the same arithmetic; otherwise the
/// cancellation in k_p − k_s − k_i, amplified by L/2, breaks the exchange
/// symmetry at the 1e-12 level.
pub fn dfg_response(device: &QpmDevice, dispersion: &dyn ModeDispersion, pump_um: f64, signal_um: f64) -> Result<f64> {
    idler_wavelength(pump_um, signal_um)?;
    let half = 0.5 / pump_um;
    let detuning = (1.0 / signal_um - half).abs();
    let (short_um, long_um) = (1.0 / (half + detuning), 1.0 / (half - detuning));
    let dk = wavevector_mismatch_spdc(
        dispersion.n_eff(pump_um)?,
        dispersion.n_eff(short_um)?,
        dispersion.n_eff(long_um)?,
        pump_um,
        short_um,
        long_um,
        device.poling_period_um,
    )?;
    Ok(sinc(0.5 * dk * device.length_um()).powi(2))
}

/// sinc²(ΔK_spdc·L/2) over a signal sweep; the idler follows from energy
/// conservation.
pub fn dfg_spectrum(
    device: &QpmDevice,
    dispersion: &dyn ModeDispersion,
    pump_um: f64,
    signal_sweep_um: &[f64],
) -> Result<DfgSpectrum> {
    device.validate()?;
    check_sweep(signal_sweep_um)?;
    let rows: Vec<(f64, f64)> = signal_sweep_um
        .par_iter()
        .map(|&s| Ok((idler_wavelength(pump_um, s)?, dfg_response(device, dispersion, pump_um, s)?)))
        .collect::<Result<_>>()?;
    let (idler_um, values): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let (imax, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("sweep is non-empty");
    let axis = signal_sweep_um;
    let (first, last) = (axis[0], axis[axis.len() - 1]);
    let bandwidth = if peak <= 0.0 {
        Bandwidth::Measured { thz: 0.0 }
    } else {
        let norm: Vec<f64> = values.iter().map(|v| v / peak).collect();
        let excess = |s: f64| -> Result<f64> { Ok(dfg_response(device, dispersion, pump_um, s)? / peak - 0.5) };
        let (left, right) = half_max_edges(axis, &norm, axis[imax], excess)?;
        match (left, right) {
            (Some(l), Some(r)) => Bandwidth::Measured { thz: thz_between(l, r) },
            (l, r) => Bandwidth::AtLeast {
                thz: thz_between(l.unwrap_or(first), r.unwrap_or(last)),
            },
        }
    };
    Ok(DfgSpectrum {
        pump_um,
        signal_um: signal_sweep_um.to_vec(),
        idler_um,
        values,
        peak_signal_um: axis[imax],
        bandwidth,
    })
}

/// Mean spacing of the fringe maxima on the harmonic axis, µm, over the part
/// of the curve where the envelope exceeds half maximum. `None` without
/// fringes or with fewer than two maxima.
pub fn fringe_spacing_um(curve: &TuningCurve) -> Option<f64> {
    if !curve.fringes {
        return None;
    }
    let v = &curve.values;
    let maxima: Vec<f64> = (1..v.len().saturating_sub(1))
        .filter(|&k| curve.envelope[k] > 0.5 && v[k] > v[k - 1] && v[k] >= v[k + 1])
        .map(|k| 0.5 * curve.axis_um[k])
        .collect();
    if maxima.len() < 2 {
        return None;
    }
    Some((maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64)
}

/// Optimum SPDC pump: the harmonic wavelength of the SHG phase-matching
/// peak, in nm. `None` when the pump sweep brackets no phase-matched point.
pub fn spdc_pump_wavelength(
    device: &QpmDevice,
    dispersion: &dyn ModeDispersion,
    pump_sweep_um: &[f64],
) -> Result<Option<f64>> {
    Ok(phase_matched_pumps(device, dispersion, pump_sweep_um)?
        .first()
        .map(|root| 0.5 * root * 1e3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FacetLossTable;
    use crate::mode_solver::CrossSection;
    use crate::qpm::Dispersionless;

    /// n(λ) = a + b/λ², enough dispersion for a finite period and width.
    struct Cauchy(f64, f64);
    impl ModeDispersion for Cauchy {
        fn n_eff(&self, l: f64) -> Result<f64> {
            Ok(self.0 + self.1 / (l * l))
        }
        fn slope(&self, l: f64) -> Result<f64> {
            Ok(-2.0 * self.1 / (l * l * l))
        }
    }

    fn device(period_um: f64) -> QpmDevice {
        QpmDevice {
            cross_section: CrossSection::reference(),
            poling_period_um: period_um,
            length_mm: 4.0,
            temperature_c: 25.0,
            duty_cycle: 0.5,
            facet_reflectivity: 0.13,
            facet_loss: FacetLossTable::default(),
        }
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    fn toy() -> (QpmDevice, Cauchy) {
        let disp = Cauchy(2.0, 0.03);
        let n_sh = disp.n_eff(0.775).unwrap();
        let n_f = disp.n_eff(1.55).unwrap();
        (device(1.55 / (2.0 * (n_sh - n_f))), disp)
    }

    #[test]
    fn peak_is_exactly_one_at_phase_matching() {
        let (dev, disp) = toy();
        let curve = tuning_curve(&dev, &disp, &linspace(1.54, 1.56, 101), false).unwrap();
        let root = curve.phase_matched_um.unwrap();
        assert!((root - 1.55).abs() < 1e-9);
        assert_eq!(curve.peak_value, 1.0);
        assert!(curve.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn fwhm_matches_chain_rule_width() {
        let (dev, disp) = toy();
        let curve = tuning_curve(&dev, &disp, &linspace(1.545, 1.555, 41), false).unwrap();
        let slope = delta_k_slope(&disp, 1.55).unwrap();
        let analytic = 4.0 * SINC2_HALF_WIDTH / (dev.length_um() * slope.abs());
        let fwhm = curve.fwhm_um.unwrap();
        assert!((fwhm - analytic).abs() / analytic < 0.01, "{fwhm} vs {analytic}");
    }

    #[test]
    fn dispersionless_unpoled_toy_pumps_at_half_wavelength() {
        // With no dispersion the unpoled guide is matched everywhere; a
        // dispersive toy poled for 1.55 um gives 775 nm.
        let (dev, disp) = toy();
        let nm = spdc_pump_wavelength(&dev, &disp, &linspace(1.5, 1.6, 11)).unwrap().unwrap();
        assert!((nm - 775.0).abs() < 1e-6);
        assert_eq!(spdc_pump_wavelength(&dev, &disp, &linspace(1.6, 1.7, 11)).unwrap(), None);
        let flat = Dispersionless(2.0);
        assert_eq!(delta_k_shg(&flat, 1.55, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn fringes_bounded_by_envelope() {
        let (dev, disp) = toy();
        let curve = tuning_curve(&dev, &disp, &linspace(1.549, 1.551, 401), true).unwrap();
        for (v, e) in curve.values.iter().zip(&curve.envelope) {
            assert!(*v <= *e + 1e-15 && *v >= 0.0);
        }
        let r = fresnel_reflectivity(2.14);
        assert!((r - 0.1318).abs() < 1e-3);
        let contrast = airy(r, 0.0) / airy(r, std::f64::consts::PI);
        assert!((contrast - ((1.0 + r) / (1.0 - r)).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn dfg_symmetric_under_exchange() {
        let (dev, disp) = toy();
        let pump = 0.775;
        let sweep = linspace(1.5, 1.6, 21);
        let spec = dfg_spectrum(&dev, &disp, pump, &sweep).unwrap();
        for (s, v) in sweep.iter().zip(&spec.values) {
            let i = idler_wavelength(pump, *s).unwrap();
            let swapped = dfg_response(&dev, &disp, pump, i).unwrap();
            assert!((swapped - v).abs() < 1e-12, "{s} {i} {swapped} {v}");
        }
        let degenerate = dfg_response(&dev, &disp, pump, 1.55).unwrap();
        assert!((degenerate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sweep() {
        let (dev, disp) = toy();
        assert!(matches!(tuning_curve(&dev, &disp, &[1.55], false), Err(Error::Config(_))));
        assert!(tuning_curve(&dev, &disp, &[1.56, 1.55], false).is_err());
    }
}
