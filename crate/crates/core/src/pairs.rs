//! SPDC pair generation and gated two-detector coincidence counting.
//!
//! Rates are per second and probabilities per detector gate. The mean pair
//! number per gate is µ = pair_rate / gate_rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qpm::{idler_wavelength, sinc, wavevector_mismatch_spdc, ModeDispersion, QpmDevice};
use crate::SPEED_OF_LIGHT;

/// Gates simulated per random stream. Fixed so results do not depend on the
/// number of worker threads.
const CHUNK_GATES: u64 = 1 << 16;

/// Largest µ for which the single-pair counting model is trusted.
pub const MAX_MEAN_PAIRS: f64 = 0.5;

/// A rectangular bandpass filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub center_nm: f64,
    pub width_ghz: f64,
}

impl Channel {
    pub fn center_thz(&self) -> f64 {
        SPEED_OF_LIGHT / (self.center_nm * 1e-9) * 1e-12
    }

    /// Passband width in wavelength at the channel centre, Δλ = Δν·λ²/c.
    pub fn width_nm(&self) -> f64 {
        let lambda = self.center_nm * 1e-9;
        self.width_ghz * 1e9 * lambda * lambda / SPEED_OF_LIGHT * 1e9
    }

    /// Optical frequency range in THz.
    pub fn band_thz(&self) -> (f64, f64) {
        let c = self.center_thz();
        let half = 0.5 * self.width_ghz * 1e-3;
        (c - half, c + half)
    }
}

/// Loss and noise of one detection arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    /// Fibre collection / coupling efficiency.
    pub collection_efficiency: f64,
    pub detector_efficiency: f64,
    /// Dark-count probability per gate.
    pub dark_probability: f64,
}

impl Arm {
    /// Probability that one photon entering the arm produces a click.
    pub fn efficiency(&self) -> f64 {
        self.collection_efficiency * self.detector_efficiency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExperiment {
    /// Pairs·s⁻¹ per watt of on-chip pump per metre of filter bandwidth.
    pub brightness_hz_per_w_per_m: f64,
    pub pump_power_w: f64,
    pub signal: Channel,
    pub idler: Channel,
    pub gate_rate_hz: f64,
    pub gate_width_s: f64,
    pub signal_arm: Arm,
    pub idler_arm: Arm,
}

impl PairExperiment {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("brightness", self.brightness_hz_per_w_per_m),
            ("pump power", self.pump_power_w),
            ("gate width", self.gate_width_s),
            ("signal channel width", self.signal.width_ghz),
            ("idler channel width", self.idler.width_ghz),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be non-negative")));
            }
        }
        if !(self.gate_rate_hz > 0.0) {
            return Err(Error::config("gate rate must be positive"));
        }
        for arm in [&self.signal_arm, &self.idler_arm] {
            for p in [arm.collection_efficiency, arm.detector_efficiency, arm.dark_probability] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config("efficiencies and dark probabilities must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn with_pump_power(&self, pump_power_w: f64) -> Self {
        PairExperiment {
            pump_power_w,
            ..self.clone()
        }
    }

    pub fn mean_pairs_per_gate(&self) -> Result<f64> {
        Ok(pair_rate(self)? / self.gate_rate_hz)
    }
}

/// Pairs per second through matched signal/idler filters:
/// brightness × pump power × filter width.
pub fn pair_rate(exp: &PairExperiment) -> Result<f64> {
    exp.validate()?;
    if exp.signal.width_ghz != exp.idler.width_ghz {
        return Err(Error::contract(format!(
            "signal and idler filters differ ({} vs {} GHz)",
            exp.signal.width_ghz, exp.idler.width_ghz
        )));
    }
    Ok(exp.brightness_hz_per_w_per_m * exp.pump_power_w * exp.signal.width_nm() * 1e-9)
}

/// One-sigma statistical errors of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountErrors {
    pub coincidences: f64,
    pub accidentals: f64,
    pub car: f64,
}

/// Count rates per second and the coincidence-to-accidental ratio.
///
/// `coincidences` are the correlated (true) coincidences. For Monte-Carlo
/// results they are estimated as same-gate minus adjacent-gate coincidences;
/// `raw_coincidences` keeps the same-gate figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceResult {
    pub singles_s: f64,
    pub singles_i: f64,
    pub coincidences: f64,
    pub raw_coincidences: f64,
    pub accidentals: f64,
    pub car: f64,
    pub mean_pairs_per_gate: f64,
    pub errors: Option<CountErrors>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// First-order gated counting model. Per gate: true coincidences µ·η_s·η_i,
/// singles µ·η + dark, accidentals the product of the two singles.
pub fn expected_counts(exp: &PairExperiment) -> Result<CoincidenceResult> {
    let mu = exp.mean_pairs_per_gate()?;
    if mu >= MAX_MEAN_PAIRS {
        return Err(Error::ModelValidity(format!(
            "mean pair number per gate {mu:.3} >= {MAX_MEAN_PAIRS}; multi-pair terms are not modelled"
        )));
    }
    let (es, ei) = (exp.signal_arm.efficiency(), exp.idler_arm.efficiency());
    let true_c = mu * es * ei;
    let ps = mu * es + exp.signal_arm.dark_probability;
    let pi = mu * ei + exp.idler_arm.dark_probability;
    let acc = ps * pi;
    let f = exp.gate_rate_hz;
    Ok(CoincidenceResult {
        singles_s: ps * f,
        singles_i: pi * f,
        coincidences: true_c * f,
        raw_coincidences: (true_c + acc) * f,
        accidentals: acc * f,
        car: ratio(true_c, acc),
        mean_pairs_per_gate: mu,
        errors: None,
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    gates: u64,
    singles_s: u64,
    singles_i: u64,
    same_gate: u64,
    /// Signal click in gate k and idler click in gate k+1.
    delayed: u64,
    delayed_slots: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            gates: self.gates + o.gates,
            singles_s: self.singles_s + o.singles_s,
            singles_i: self.singles_i + o.singles_i,
            same_gate: self.same_gate + o.same_gate,
            delayed: self.delayed + o.delayed,
            delayed_slots: self.delayed_slots + o.delayed_slots,
        }
    }
}

fn simulate_chunk(
    seed: u64,
    chunk: u64,
    gates: u64,
    poisson: Option<&Poisson<f64>>,
    exp: &PairExperiment,
) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let (es, ei) = (exp.signal_arm.efficiency(), exp.idler_arm.efficiency());
    let (ds, di) = (exp.signal_arm.dark_probability, exp.idler_arm.dark_probability);
    let mut t = Tally {
        gates,
        delayed_slots: gates.saturating_sub(1),
        ..Tally::default()
    };
    let mut previous_s = false;
    for k in 0..gates {
        let pairs = poisson.map_or(0, |p| p.sample(&mut rng) as u64);
        let mut click_s = false;
        let mut click_i = false;
        for _ in 0..pairs {
            click_s |= rng.random::<f64>() < es;
            click_i |= rng.random::<f64>() < ei;
        }
        click_s |= rng.random::<f64>() < ds;
        click_i |= rng.random::<f64>() < di;
        t.singles_s += click_s as u64;
        t.singles_i += click_i as u64;
        t.same_gate += (click_s && click_i) as u64;
        if k > 0 && previous_s && click_i {
            t.delayed += 1;
        }
        previous_s = click_s;
    }
    t
}

/// Gate-by-gate simulation: Poisson(µ) pairs per gate, each photon detected
/// independently per arm, plus dark clicks. Accidentals are measured from
/// adjacent-gate coincidences. Bit-identical for a given seed.
pub fn monte_carlo_counts(exp: &PairExperiment, n_gates: u64, seed: u64) -> Result<CoincidenceResult> {
    if n_gates < 10_000 {
        return Err(Error::config("Monte-Carlo needs at least 1e4 gates"));
    }
    let mu = exp.mean_pairs_per_gate()?;
    let poisson = if mu > 0.0 {
        Some(Poisson::new(mu).map_err(|e| Error::contract(format!("pair distribution: {e}")))?)
    } else {
        None
    };
    let chunks = n_gates.div_ceil(CHUNK_GATES);
    let t = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let gates = CHUNK_GATES.min(n_gates - c * CHUNK_GATES);
            simulate_chunk(seed, c, gates, poisson.as_ref(), exp)
        })
        .reduce(Tally::default, Tally::merge);

    let n = t.gates as f64;
    let slots = t.delayed_slots as f64;
    let acc = t.delayed as f64 / slots;
    let acc_err = (t.delayed as f64).sqrt() / slots;
    let raw = t.same_gate as f64 / n;
    let raw_err = (t.same_gate as f64).sqrt() / n;
    let net = raw - acc;
    let net_err = (raw_err * raw_err + acc_err * acc_err).sqrt();
    let car = ratio(net, acc);
    let car_err = if net != 0.0 && acc > 0.0 {
        car.abs() * ((net_err / net).powi(2) + (acc_err / acc).powi(2)).sqrt()
    } else {
        f64::INFINITY
    };
    let f = exp.gate_rate_hz;
    Ok(CoincidenceResult {
        singles_s: t.singles_s as f64 / n * f,
        singles_i: t.singles_i as f64 / n * f,
        coincidences: net * f,
        raw_coincidences: raw * f,
        accidentals: acc * f,
        car,
        mean_pairs_per_gate: mu,
        errors: Some(CountErrors {
            coincidences: net_err * f,
            accidentals: acc_err * f,
            car: car_err,
        }),
    })
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::contract("slope fit needs two or more matched points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::contract("log-log fit needs positive data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Expected coincidence rates between every signal and idler channel.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelMatrix {
    pub pump_um: f64,
    pub signal: Vec<Channel>,
    pub idler: Vec<Channel>,
    /// Idler wavelength conjugate to each signal channel centre, nm.
    pub conjugate_idler_nm: Vec<f64>,
    /// `rates[s][i]`, coincidences per second.
    pub rates: Vec<Vec<f64>>,
}

/// Samples across a signal channel when integrating the pair spectrum.
const CHANNEL_SAMPLES: usize = 2001;

/// Spectral overlap of the energy-conservation line with each channel pair,
/// weighted by sinc²(ΔK·L/2), scaled so the largest entry equals the
/// experiment's expected coincidence rate.
pub fn joint_channel_matrix(
    device: &QpmDevice,
    dispersion: &dyn ModeDispersion,
    pump_um: f64,
    signal: &[Channel],
    idler: &[Channel],
    exp: &PairExperiment,
) -> Result<ChannelMatrix> {
    if signal.is_empty() || idler.is_empty() {
        return Err(Error::contract("channel lists must not be empty"));
    }
    let scale = expected_counts(exp)?.coincidences;
    let pump_thz = SPEED_OF_LIGHT / (pump_um * 1e-6) * 1e-12;
    let length = device.length_um();
    let n_pump = dispersion.n_eff(pump_um)?;

    let weight = |signal_thz: f64| -> Result<f64> {
        let s_um = SPEED_OF_LIGHT / (signal_thz * 1e12) * 1e6;
        let i_um = idler_wavelength(pump_um, s_um)?;
        let dk = wavevector_mismatch_spdc(
            n_pump,
            dispersion.n_eff(s_um)?,
            dispersion.n_eff(i_um)?,
            pump_um,
            s_um,
            i_um,
            device.poling_period_um,
        )?;
        Ok(sinc(0.5 * dk * length).powi(2))
    };

    let raw: Vec<Vec<f64>> = signal
        .par_iter()
        .map(|sc| {
            let (lo, hi) = sc.band_thz();
            let step = (hi - lo) / CHANNEL_SAMPLES as f64;
            let mut row = vec![0.0; idler.len()];
            for k in 0..CHANNEL_SAMPLES {
                let nu_s = lo + (k as f64 + 0.5) * step;
                let nu_i = pump_thz - nu_s;
                let hits: Vec<usize> = idler
                    .iter()
                    .enumerate()
                    .filter(|(_, ic)| {
                        let (a, b) = ic.band_thz();
                        nu_i >= a && nu_i < b
                    })
                    .map(|(j, _)| j)
                    .collect();
                if hits.is_empty() {
                    continue;
                }
                let w = weight(nu_s)? * step;
                for j in hits {
                    row[j] += w;
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let peak = raw.iter().flatten().cloned().fold(0.0, f64::max);
    let rates = raw
        .into_iter()
        .map(|row| row.into_iter().map(|v| if peak > 0.0 { v / peak * scale } else { 0.0 }).collect())
        .collect();
    let conjugate_idler_nm = signal
        .iter()
        .map(|sc| Ok(idler_wavelength(pump_um, sc.center_nm * 1e-3)? * 1e3))
        .collect::<Result<_>>()?;
    Ok(ChannelMatrix {
        pump_um,
        signal: signal.to_vec(),
        idler: idler.to_vec(),
        conjugate_idler_nm,
        rates,
    })
}
