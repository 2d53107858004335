//! The commands behind the `qpmkit` binary.
//!
//! A [`Session`] owns the loaded configuration, the (optionally cached) mode
//! solver and the output directory. Each `cmd_*` function computes its report,
//! writes CSV/JSON/gnuplot files and returns the report for printing.

use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::config::{ProjectConfig, Reflectivity};
use crate::error::{Error, Result};
use crate::metrics::{deembed_power, q_to_loss};
use crate::mode_solver::slab::{slab_index_map, symmetric_slab_te};
use crate::mode_solver::{solve_modes, ModeSolution, ModeSolver, SolverSettings};
use crate::output::{OutputDir, Plot};
use crate::pairs::{
    expected_counts, joint_channel_matrix, log_log_slope, monte_carlo_counts, pair_rate, ChannelMatrix,
    CoincidenceResult,
};
use crate::qpm::{
    delta_k_slope, dfg_response, dfg_spectrum, fresnel_reflectivity, fringe_spacing_um, idler_wavelength,
    phase_matched_pumps, poling_period_for, shg_power, spdc_pump_wavelength, tuning_curve, Bandwidth,
    DispersionChain, ModeDispersion, PolingPeriod, QpmDevice, SINC2_HALF_WIDTH,
};

/// Environment variable naming the mode-cache root.
pub const CACHE_ENV: &str = "QPMKIT_CACHE_DIR";

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::UnknownMaterial(_) | Error::Range { .. } => 3,
        Error::Solver { .. } | Error::InnerSolve { .. } => 4,
        Error::ModelValidity(_) => 5,
        _ => 1,
    }
}

/// Command-line overrides of the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fringes: bool,
    pub no_cache: bool,
    /// Cache root; takes precedence over the config file.
    pub cache_dir: Option<PathBuf>,
}

pub struct Session {
    pub config: ProjectConfig,
    pub options: RunOptions,
    pub solver: ModeSolver,
    pub out: OutputDir,
    chain: OnceLock<DispersionChain>,
    solve_time: Mutex<Duration>,
}

impl Session {
    pub fn new(config: ProjectConfig, options: RunOptions) -> Result<Self> {
        let materials = config.materials()?;
        let mut solver = ModeSolver::new(materials, config.solver_settings());
        let out_dir = options.out_dir.clone().unwrap_or_else(|| config.output_dir());
        if !options.no_cache {
            let dir = options
                .cache_dir
                .clone()
                .or_else(|| config.cache_dir())
                .unwrap_or_else(|| out_dir.join("mode-cache"));
            solver = solver.with_cache(dir);
        }
        let out = OutputDir::create(out_dir, &config.hash)?;
        Ok(Session {
            config,
            options,
            solver,
            out,
            chain: OnceLock::new(),
            solve_time: Mutex::new(Duration::ZERO),
        })
    }

    pub fn seed(&self) -> u64 {
        self.options.seed.unwrap_or(self.config.seed)
    }

    /// Wall time spent in mode solving (including cache loads) so far.
    pub fn mode_solve_time(&self) -> Duration {
        *self.solve_time.lock().expect("timer lock")
    }

    fn timed<T>(&self, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let r = f();
        *self.solve_time.lock().expect("timer lock") += start.elapsed();
        r
    }

    /// Sampled n_eff(λ) of the configured cross-section at the device temperature.
    pub fn dispersion(&self) -> Result<&DispersionChain> {
        if let Some(chain) = self.chain.get() {
            return Ok(chain);
        }
        let cfg = &self.config;
        let chain = self.timed(|| {
            DispersionChain::from_solver(
                &self.solver,
                &cfg.cross_section(),
                &cfg.grid(),
                cfg.device.temperature.si(),
                cfg.solver.polarization,
                &cfg.dispersion_bands_um(),
                cfg.dispersion.nodes,
            )
        })?;
        Ok(self.chain.get_or_init(|| chain))
    }

    /// The poled device, with a Fresnel facet reflectivity evaluated at the
    /// harmonic of `pump_um` when the config asks for it.
    pub fn device(&self, pump_um: f64) -> Result<QpmDevice> {
        let r = match self.config.device.facet_reflectivity {
            Reflectivity::Value(r) => r,
            Reflectivity::Rule(_) => fresnel_reflectivity(self.dispersion()?.n_eff(0.5 * pump_um)?),
        };
        self.config.device_with_reflectivity(r)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub pump_nm: f64,
    pub harmonic_nm: f64,
    pub temperature_c: f64,
    pub n_eff_pump: f64,
    pub n_eff_harmonic: f64,
    pub overlap_percent: f64,
    pub overlap_factor_per_um: f64,
    pub effective_area_um2: f64,
    pub poling: PolingPeriod,
    pub d_eff_pm_per_v: f64,
    pub eta_percent_per_w_cm2: f64,
    pub grid_nodes: (usize, usize),
    pub worst_residual: f64,
}

impl DesignReport {
    pub fn summary(&self) -> String {
        let period = match self.poling {
            PolingPeriod::Period { period_um } => format!("{period_um:.4} um"),
            PolingPeriod::Anomalous { index_difference } => {
                format!("none (n_2w - n_w = {index_difference:.5}; no first-order QPM)")
            }
        };
        format!(
            "n_eff({:.1} nm) = {:.6}\nn_eff({:.1} nm) = {:.6}\nmode overlap = {:.2} %\n\
             effective area = {:.3} um^2\npoling period = {period}\n\
             normalized SHG efficiency = {:.0} %/W/cm^2 (d_eff = {:.2} pm/V)",
            self.pump_nm,
            self.n_eff_pump,
            self.harmonic_nm,
            self.n_eff_harmonic,
            self.overlap_percent,
            self.effective_area_um2,
            self.eta_percent_per_w_cm2,
            self.d_eff_pm_per_v,
        )
    }
}

fn field_rows(mode: &ModeSolution) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(mode.field.len());
    for i in 0..mode.nx {
        for j in 0..mode.nz {
            rows.push(vec![mode.x_um(i), mode.z_um(j), mode.field[i * mode.nz + j]]);
        }
    }
    rows
}

/// Solve the pump and harmonic modes, derive Λ, overlap and η.
pub fn cmd_design(s: &Session) -> Result<DesignReport> {
    let cfg = &s.config;
    let pump_um = cfg.design.pump.micrometres();
    let cs = cfg.cross_section();
    let d33 = match cfg.design.d33 {
        Some(q) => q.si() * 1e12,
        None => s.solver.materials.get(&cs.core_material)?.d33_pm_per_v.ok_or_else(|| {
            Error::config(format!("material `{}` has no d33; set design.d33", cs.core_material))
        })?,
    };
    let design = s.timed(|| {
        poling_period_for(
            &s.solver,
            &cs,
            &cfg.grid(),
            pump_um,
            cfg.device.temperature.si(),
            cfg.solver.polarization,
            d33,
            cfg.device.duty_cycle,
        )
    })?;
    let report = DesignReport {
        pump_nm: pump_um * 1e3,
        harmonic_nm: pump_um * 0.5e3,
        temperature_c: design.temperature_c,
        n_eff_pump: design.n_eff_pump,
        n_eff_harmonic: design.n_eff_harmonic,
        overlap_percent: design.efficiency.overlap.percent(),
        overlap_factor_per_um: design.efficiency.overlap.factor_per_m * 1e-6,
        effective_area_um2: design.efficiency.overlap.effective_area_um2(),
        poling: design.period,
        d_eff_pm_per_v: design.efficiency.d_eff_pm_per_v,
        eta_percent_per_w_cm2: design.efficiency.percent_per_w_cm2,
        grid_nodes: (design.fundamental.nx, design.fundamental.nz),
        worst_residual: design.fundamental.residual.max(design.harmonic.residual),
    };
    let cols = [("x_um", "um"), ("z_um", "um"), ("field", "1/um")];
    s.out.csv("mode_pump.csv", &cols, field_rows(&design.fundamental))?;
    s.out.csv("mode_harmonic.csv", &cols, field_rows(&design.harmonic))?;
    s.out.json("design.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub temperature_c: f64,
    pub poling_period_um: f64,
    pub length_mm: f64,
    pub fringes: bool,
    pub facet_reflectivity: f64,
    pub peak_pump_nm: f64,
    pub peak_value: f64,
    pub phase_matched_pump_nm: Option<f64>,
    pub phase_matched_harmonic_nm: Option<f64>,
    pub fwhm_nm: Option<f64>,
    /// 4·x½/(L·|dΔK/dλ|) at the phase-matched point.
    pub analytic_fwhm_nm: Option<f64>,
    /// λ²/(2 n_g L) on the harmonic axis.
    pub expected_fsr_harmonic_nm: Option<f64>,
    pub measured_fsr_harmonic_nm: Option<f64>,
    pub points: usize,
}

impl TuneReport {
    pub fn summary(&self) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map_or("n/a".into(), |v| format!("{v:.prec$} nm"));
        let mut s = format!(
            "phase-matched pump = {} (harmonic {})\npeak value = {:.6} at {:.4} nm\nFWHM = {} (analytic {})",
            opt(self.phase_matched_pump_nm, 4),
            opt(self.phase_matched_harmonic_nm, 4),
            self.peak_value,
            self.peak_pump_nm,
            opt(self.fwhm_nm, 4),
            opt(self.analytic_fwhm_nm, 4),
        );
        if self.fringes {
            s.push_str(&format!(
                "\nfacet reflectivity = {:.4}; fringe spacing = {} (expected {})",
                self.facet_reflectivity,
                opt(self.measured_fsr_harmonic_nm, 5),
                opt(self.expected_fsr_harmonic_nm, 5)
            ));
        }
        s
    }
}

/// SHG tuning curve over the configured pump sweep.
pub fn cmd_tune(s: &Session) -> Result<TuneReport> {
    tune_into(s, s.options.fringes, "tuning")
}

fn tune_into(s: &Session, fringes: bool, stem: &str) -> Result<TuneReport> {
    let cfg = &s.config;
    let sweep = cfg.sweeps.pump_wavelength.micrometres();
    let chain = s.dispersion()?;
    let probe = s.config.device_with_reflectivity(0.0)?;
    let center = phase_matched_pumps(&probe, chain, &sweep)?
        .first()
        .copied()
        .unwrap_or(0.5 * (sweep[0] + sweep[sweep.len() - 1]));
    let device = s.device(center)?;
    let curve = tuning_curve(&device, chain, &sweep, fringes)?;

    let length_um = device.length_um();
    let (analytic, expected_fsr) = match curve.phase_matched_um {
        Some(root) => {
            let slope = delta_k_slope(chain, root)?;
            let sh = 0.5 * root;
            let n_g = chain.group_index(sh)?;
            (
                Some(4.0 * SINC2_HALF_WIDTH / (length_um * slope.abs()) * 1e3),
                Some(sh * sh / (2.0 * n_g * length_um) * 1e3),
            )
        }
        None => (None, None),
    };
    let report = TuneReport {
        temperature_c: device.temperature_c,
        poling_period_um: device.poling_period_um,
        length_mm: device.length_mm,
        fringes: curve.fringes,
        facet_reflectivity: device.facet_reflectivity,
        peak_pump_nm: curve.peak_um * 1e3,
        peak_value: curve.peak_value,
        phase_matched_pump_nm: curve.phase_matched_um.map(|l| l * 1e3),
        phase_matched_harmonic_nm: curve.phase_matched_um.map(|l| l * 0.5e3),
        fwhm_nm: curve.fwhm_um.map(|w| w * 1e3),
        analytic_fwhm_nm: analytic,
        expected_fsr_harmonic_nm: expected_fsr.filter(|_| curve.fringes),
        measured_fsr_harmonic_nm: fringe_spacing_um(&curve).map(|w| w * 1e3),
        points: curve.axis_um.len(),
    };
    let rows = curve
        .axis_um
        .iter()
        .zip(&curve.values)
        .zip(&curve.envelope)
        .map(|((l, v), e)| vec![l * 1e3, l * 0.5e3, *v, *e]);
    let data = format!("{stem}.csv");
    s.out.csv(
        &data,
        &[
            ("pump_nm", "nm"),
            ("harmonic_nm", "nm"),
            ("normalized_efficiency", "1"),
            ("envelope", "1"),
        ],
        rows,
    )?;
    s.out.gnuplot(
        &format!("{stem}.gp"),
        &Plot {
            title: "SHG phase-matching curve",
            data: &data,
            xlabel: "pump wavelength (nm)",
            ylabel: "normalized efficiency",
            series: vec![(1, 3, "model"), (1, 4, "sinc^2 envelope")],
            logscale: false,
        },
    )?;
    s.out.json(&format!("{stem}.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct DfgReport {
    pub pump_nm: f64,
    /// "config" or "shg-peak".
    pub pump_source: &'static str,
    pub degenerate_signal_nm: f64,
    pub peak_signal_nm: f64,
    pub min_value: f64,
    pub bandwidth: Bandwidth,
    /// Largest |D(λs) − D(λi(λs))| over sweep points whose idler lies in range.
    pub exchange_asymmetry: f64,
}

impl DfgReport {
    pub fn summary(&self) -> String {
        let bw = match self.bandwidth {
            Bandwidth::Measured { thz } => format!("{thz:.2} THz"),
            Bandwidth::AtLeast { thz } => format!(">= {thz:.2} THz (response stays above half maximum at a sweep end)"),
        };
        format!(
            "pump = {:.4} nm ({})\ndegenerate signal = {:.4} nm\n3-dB bandwidth = {bw}\n\
             minimum normalized response in sweep = {:.4}\nsignal/idler asymmetry = {:.1e}",
            self.pump_nm, self.pump_source, self.degenerate_signal_nm, self.min_value, self.exchange_asymmetry
        )
    }
}

/// SPDC pump used for DFG and pair generation: the config value, or the
/// harmonic of the SHG phase-matching peak.
fn spdc_pump_um(s: &Session) -> Result<(f64, &'static str)> {
    if let Some(p) = s.config.dfg.pump {
        return Ok((p.micrometres(), "config"));
    }
    let chain = s.dispersion()?;
    let device = s.config.device_with_reflectivity(0.0)?;
    let sweep = s.config.sweeps.pump_wavelength.micrometres();
    match spdc_pump_wavelength(&device, chain, &sweep)? {
        Some(nm) => Ok((nm * 1e-3, "shg-peak")),
        None => Err(Error::ModelValidity(
            "no SHG phase-matching point inside the pump sweep; set dfg.pump or widen the sweep".into(),
        )),
    }
}

/// DFG (idler generation) spectrum over the configured signal sweep.
pub fn cmd_dfg(s: &Session) -> Result<DfgReport> {
    let chain = s.dispersion()?;
    let (pump_um, pump_source) = spdc_pump_um(s)?;
    let device = s.device(2.0 * pump_um)?;
    let sweep = s.config.sweeps.signal_wavelength.micrometres();
    let spec = dfg_spectrum(&device, chain, pump_um, &sweep)?;

    let mut asymmetry: f64 = 0.0;
    for (sig, v) in spec.signal_um.iter().zip(&spec.values) {
        let idler = idler_wavelength(pump_um, *sig)?;
        if let Ok(mirror) = dfg_response(&device, chain, pump_um, idler) {
            asymmetry = asymmetry.max((mirror - v).abs());
        }
    }
    let report = DfgReport {
        pump_nm: pump_um * 1e3,
        pump_source,
        degenerate_signal_nm: 2e3 * pump_um,
        peak_signal_nm: spec.peak_signal_um * 1e3,
        min_value: spec.values.iter().copied().fold(f64::INFINITY, f64::min),
        bandwidth: spec.bandwidth,
        exchange_asymmetry: asymmetry,
    };
    let rows = spec
        .signal_um
        .iter()
        .zip(&spec.idler_um)
        .zip(&spec.values)
        .map(|((sg, id), v)| vec![sg * 1e3, id * 1e3, *v]);
    s.out.csv(
        "dfg.csv",
        &[("signal_nm", "nm"), ("idler_nm", "nm"), ("normalized_efficiency", "1")],
        rows,
    )?;
    s.out.gnuplot(
        "dfg.gp",
        &Plot {
            title: "DFG response",
            data: "dfg.csv",
            xlabel: "signal wavelength (nm)",
            ylabel: "normalized idler generation",
            series: vec![(1, 3, "model")],
            logscale: false,
        },
    )?;
    s.out.json("dfg.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CarRow {
    pub pump_power_w: f64,
    pub pair_rate: f64,
    pub analytic: CoincidenceResult,
    pub monte_carlo: Option<CoincidenceResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairsReport {
    pub seed: u64,
    pub pair_rate: f64,
    pub operating_point: CoincidenceResult,
    pub coincidence_slope: f64,
    pub accidental_slope: f64,
    /// max |CAR·µ − 1| over the sweep with dark counts removed.
    pub darkless_car_deviation: f64,
    /// Monte-Carlo check at the configured pump power.
    pub monte_carlo: Option<MonteCarloCheck>,
    /// Largest sweep-row deviation of the Monte-Carlo columns from the model,
    /// in model-predicted standard errors.
    pub sweep_max_sigma: Option<f64>,
    pub rows: Vec<CarRow>,
    pub matrix: ChannelMatrix,
    /// Largest off-diagonal entry over the smallest diagonal entry.
    pub off_diagonal_ratio: f64,
}

impl PairsReport {
    pub fn summary(&self) -> String {
        let op = &self.operating_point;
        let mut s = format!(
            "pair rate = {:.4e} /s (mu = {:.5} per gate)\ncoincidences = {:.1} /s, accidentals = {:.3} /s, CAR = {:.1}\n\
             log-log slopes: coincidences {:.4}, accidentals {:.4}\ndark-free |CAR*mu - 1| <= {:.1e}",
            self.pair_rate,
            op.mean_pairs_per_gate,
            op.coincidences,
            op.accidentals,
            op.car,
            self.coincidence_slope,
            self.accidental_slope,
            self.darkless_car_deviation
        );
        if let Some(mc) = &self.monte_carlo {
            s.push_str(&format!(
                "\nMonte-Carlo ({} gates): CAR = {:.1} +- {:.1}; worst deviation from model {:.2} sigma",
                mc.gates,
                mc.result.car,
                mc.result.errors.map_or(f64::NAN, |e| e.car),
                mc.worst_sigma()
            ));
        }
        if let Some(z) = self.sweep_max_sigma {
            s.push_str(&format!("\nMonte-Carlo sweep columns: worst deviation {z:.2} sigma"));
        }
        s.push_str(&format!("\nchannel matrix off-diagonal/diagonal = {:.2e}", self.off_diagonal_ratio));
        s
    }
}

/// Monte-Carlo run at one operating point, scored against the model.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloCheck {
    pub gates: u64,
    pub result: CoincidenceResult,
    /// |MC − model| / σ_MC for coincidences, accidentals and CAR.
    pub sigma: [f64; 3],
}

impl MonteCarloCheck {
    pub fn worst_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }
}

fn score(mc: &CoincidenceResult, model: &CoincidenceResult) -> [f64; 3] {
    let e = mc.errors.expect("Monte-Carlo result carries errors");
    let z = |a: f64, b: f64, sigma: f64| if sigma > 0.0 && sigma.is_finite() { (a - b).abs() / sigma } else { f64::INFINITY };
    [
        z(mc.coincidences, model.coincidences, e.coincidences),
        z(mc.accidentals, model.accidentals, e.accidentals),
        z(mc.car, model.car, e.car),
    ]
}

/// Deviation of a sweep row in units of the model-predicted counting error,
/// which stays meaningful when only a handful of accidentals are counted.
fn model_sigma(mc: &CoincidenceResult, model: &CoincidenceResult, gate_rate: f64, gates: u64) -> f64 {
    let n = gates as f64;
    let per_gate = |rate: f64| rate / gate_rate;
    let acc_var = per_gate(model.accidentals) / n;
    let net_var = per_gate(model.raw_coincidences) / n + acc_var;
    let z = |a: f64, b: f64, var: f64| (per_gate(a) - per_gate(b)).abs() / var.sqrt();
    z(mc.coincidences, model.coincidences, net_var).max(z(mc.accidentals, model.accidentals, acc_var))
}

/// CAR-versus-rate table, Monte-Carlo cross-check and channel matrix.
pub fn cmd_pairs(s: &Session) -> Result<PairsReport> {
    let cfg = &s.config;
    let exp = cfg.experiment();
    let seed = s.seed();
    let powers = cfg.pairs.power_sweep.watts();
    let gates = cfg.pairs.power_sweep.monte_carlo_gates;

    let mut rows = Vec::with_capacity(powers.len());
    let mut darkless_dev: f64 = 0.0;
    for (k, &p) in powers.iter().enumerate() {
        let e = exp.with_pump_power(p);
        let analytic = expected_counts(&e)?;
        let monte_carlo = if gates > 0 {
            Some(monte_carlo_counts(&e, gates, seed.wrapping_add(k as u64))?)
        } else {
            None
        };
        let mut dark_free = e.clone();
        dark_free.signal_arm.dark_probability = 0.0;
        dark_free.idler_arm.dark_probability = 0.0;
        let d = expected_counts(&dark_free)?;
        darkless_dev = darkless_dev.max((d.car * d.mean_pairs_per_gate - 1.0).abs());
        rows.push(CarRow {
            pump_power_w: p,
            pair_rate: pair_rate(&e)?,
            analytic,
            monte_carlo,
        });
    }
    let rates: Vec<f64> = rows.iter().map(|r| r.pair_rate).collect();
    let coinc: Vec<f64> = rows.iter().map(|r| r.analytic.coincidences).collect();
    let acc: Vec<f64> = rows.iter().map(|r| r.analytic.accidentals).collect();
    let sweep_max_sigma = rows
        .iter()
        .filter_map(|r| {
            r.monte_carlo
                .as_ref()
                .map(|mc| model_sigma(mc, &r.analytic, exp.gate_rate_hz, gates))
        })
        .reduce(f64::max);
    let operating_point = expected_counts(&exp)?;
    let monte_carlo = if gates > 0 {
        let result = monte_carlo_counts(&exp, gates, seed)?;
        Some(MonteCarloCheck {
            gates,
            sigma: score(&result, &operating_point),
            result,
        })
    } else {
        None
    };

    let matrix_pump = cfg.pairs.matrix.pump.micrometres();
    let chain = s.dispersion()?;
    let device = cfg.device_with_reflectivity(0.0)?;
    let matrix = joint_channel_matrix(
        &device,
        chain,
        matrix_pump,
        &cfg.pairs.matrix.signal_channels(),
        &cfg.pairs.matrix.idler_channels(),
        &exp,
    )?;
    let n = matrix.rates.len().min(matrix.rates[0].len());
    let min_diag = (0..n).map(|k| matrix.rates[k][k]).fold(f64::INFINITY, f64::min);
    let max_off = matrix
        .rates
        .iter()
        .enumerate()
        .flat_map(|(a, row)| row.iter().enumerate().filter(move |(b, _)| *b != a).map(|(_, v)| *v))
        .fold(0.0, f64::max);

    let report = PairsReport {
        seed,
        pair_rate: pair_rate(&exp)?,
        operating_point,
        coincidence_slope: log_log_slope(&rates, &coinc)?,
        accidental_slope: log_log_slope(&rates, &acc)?,
        darkless_car_deviation: darkless_dev,
        monte_carlo,
        sweep_max_sigma,
        off_diagonal_ratio: if min_diag > 0.0 { max_off / min_diag } else { f64::INFINITY },
        rows,
        matrix,
    };

    let nan = f64::NAN;
    let car_rows = report.rows.iter().map(|r| {
        let a = &r.analytic;
        let (mc, err) = match &r.monte_carlo {
            Some(mc) => (*mc, mc.errors.expect("Monte-Carlo errors")),
            None => (*a, crate::pairs::CountErrors { coincidences: nan, accidentals: nan, car: nan }),
        };
        let mc_ok = r.monte_carlo.is_some();
        let pick = |v: f64| if mc_ok { v } else { nan };
        vec![
            r.pump_power_w * 1e6,
            r.pair_rate,
            a.mean_pairs_per_gate,
            a.coincidences,
            a.accidentals,
            a.car,
            pick(mc.coincidences),
            pick(err.coincidences),
            pick(mc.accidentals),
            pick(err.accidentals),
            pick(mc.car),
            pick(err.car),
        ]
    });
    s.out.csv(
        "car.csv",
        &[
            ("pump_power_uW", "uW"),
            ("rate_pairs_per_s", "1/s"),
            ("mean_pairs_per_gate", "1"),
            ("coincidences_per_s", "1/s"),
            ("accidentals_per_s", "1/s"),
            ("car", "1"),
            ("mc_coincidences_per_s", "1/s"),
            ("mc_coincidences_err", "1/s"),
            ("mc_accidentals_per_s", "1/s"),
            ("mc_accidentals_err", "1/s"),
            ("mc_car", "1"),
            ("mc_car_err", "1"),
        ],
        car_rows,
    )?;
    s.out.gnuplot(
        "car.gp",
        &Plot {
            title: "Coincidences and accidentals",
            data: "car.csv",
            xlabel: "pair rate (1/s)",
            ylabel: "counts per second",
            series: vec![(2, 4, "coincidences"), (2, 5, "accidentals")],
            logscale: true,
        },
    )?;
    let m = &report.matrix;
    let matrix_rows = m.signal.iter().enumerate().flat_map(|(a, sc)| {
        m.idler
            .iter()
            .enumerate()
            .map(move |(b, ic)| vec![sc.center_nm, ic.center_nm, m.rates[a][b]])
    });
    s.out.csv(
        "channel_matrix.csv",
        &[("signal_nm", "nm"), ("idler_nm", "nm"), ("rate", "1/s")],
        matrix_rows,
    )?;
    s.out.text(
        "channel_matrix.gp",
        "set datafile separator ','\nset datafile commentschars '#'\nset terminal pngcairo size 700,600\n\
         set output 'channel_matrix.png'\nset title 'Signal-idler channel correlations'\n\
         set xlabel 'signal (nm)'\nset ylabel 'idler (nm)'\nset view map\n\
         splot 'channel_matrix.csv' every ::1 using 1:2:3 with points pointtype 5 pointsize 4 palette notitle\n",
    )?;
    s.out.json("pairs.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeembedRow {
    pub label: String,
    pub measured_w: f64,
    pub on_chip_w: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub intrinsic_q: f64,
    pub wavelength_um: f64,
    pub group_index: f64,
    /// "config" or "solved".
    pub group_index_source: &'static str,
    pub loss_db_per_cm: f64,
    /// Loss at each end of the group-index bracket.
    pub bracket: Vec<(f64, f64)>,
    pub deembedded: Vec<DeembedRow>,
}

impl MetricsReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "Q = {:.3e} at {} um, n_g = {:.4} ({}) -> {:.3} dB/cm",
            self.intrinsic_q, self.wavelength_um, self.group_index, self.group_index_source, self.loss_db_per_cm
        );
        for (ng, loss) in &self.bracket {
            s.push_str(&format!("\n  n_g = {ng:.2}: {loss:.3} dB/cm"));
        }
        for d in &self.deembedded {
            s.push_str(&format!(
                "\n{}: {:.4e} W measured -> {:.4e} W on chip",
                d.label, d.measured_w, d.on_chip_w
            ));
        }
        s
    }
}

/// Q → propagation loss and facet de-embedding.
pub fn cmd_metrics(s: &Session) -> Result<MetricsReport> {
    let m = &s.config.metrics;
    let wavelength_um = m.wavelength.micrometres();
    let (group_index, source) = match (m.group_index, m.ring_top_width) {
        (Some(ng), _) => (ng, "config"),
        (None, Some(width)) => {
            let mut cs = s.config.cross_section();
            cs.top_width_nm = width.nanometres();
            let band = [(wavelength_um - 0.02, wavelength_um + 0.02)];
            let chain = s.timed(|| {
                DispersionChain::from_solver(
                    &s.solver,
                    &cs,
                    &s.config.grid(),
                    s.config.device.temperature.si(),
                    s.config.solver.polarization,
                    &band,
                    4,
                )
            })?;
            (chain.group_index(wavelength_um)?, "solved")
        }
        (None, None) => return Err(Error::config("metrics needs group_index or ring_top_width")),
    };
    let table = s.config.facet_loss()?;
    let deembedded = m
        .deembed
        .iter()
        .map(|d| {
            Ok(DeembedRow {
                label: d.label.clone(),
                measured_w: d.measured.si(),
                on_chip_w: deembed_power(&table, d.measured.si(), d.facets, &d.band, d.direction)?,
            })
        })
        .collect::<Result<_>>()?;
    let report = MetricsReport {
        intrinsic_q: m.intrinsic_q,
        wavelength_um,
        group_index,
        group_index_source: source,
        loss_db_per_cm: q_to_loss(m.intrinsic_q, wavelength_um, group_index)?,
        bracket: m
            .group_index_bracket
            .iter()
            .map(|&ng| Ok((ng, q_to_loss(m.intrinsic_q, wavelength_um, ng)?)))
            .collect::<Result<_>>()?,
        deembedded,
    };
    s.out.json("metrics.json", &report)?;
    Ok(report)
}

/// One line of the acceptance summary.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageStatus {
    pub stage: &'static str,
    pub ok: bool,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PaperReport {
    pub config_sha256: String,
    pub stages: Vec<StageStatus>,
    pub checks: Vec<Check>,
    pub mode_solve_seconds: f64,
    pub mode_solves: usize,
    pub cache_hits: usize,
    pub passed: bool,
}

impl PaperReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for st in &self.stages {
            s.push_str(&format!(
                "stage {:<8} {} ({:.2} s){}\n",
                st.stage,
                if st.ok { "ok" } else { "FAILED" },
                st.seconds,
                st.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
            ));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "[{}] {:>2}. {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name,
                c.detail
            ));
        }
        s.push_str(&format!(
            "mode solving: {:.2} s, {} solves, {} cache hits\n",
            self.mode_solve_seconds, self.mode_solves, self.cache_hits
        ));
        s.push_str(if self.passed { "bundle: PASS" } else { "bundle: FAIL" });
        s
    }
}

fn check(id: u32, name: &str, passed: bool, detail: String) -> Check {
    Check {
        id,
        name: name.into(),
        passed,
        detail,
    }
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.decimals$}"))
}

/// 1-D slab (500 nm, 2.14/1.44, 1.55 µm, 5 nm grid) against the transcendental
/// dispersion relation.
fn slab_check(settings: &SolverSettings) -> Result<(f64, f64)> {
    let (n_core, n_clad, d, l) = (2.14, 1.44, 0.5, 1.55);
    let map = slab_index_map(n_core, n_clad, d, l, 0.005, 2.0);
    let (search, _) = solve_modes(&map, 1, settings)?;
    let fd = search.fundamental()?.n_eff;
    let exact = symmetric_slab_te(n_core, n_clad, d, l, 0).ok_or_else(|| Error::contract("slab has no TE0 mode"))?;
    Ok((fd, exact))
}

/// Run every stage into one directory and score the results against the
/// acceptance thresholds. Stage failures are recorded; the error of the first
/// failing stage is returned after the summary is written.
pub fn cmd_paper(s: &Session) -> Result<PaperReport> {
    let mut stages = Vec::new();
    let mut first_error: Option<Error> = None;
    macro_rules! stage {
        ($name:literal, $f:expr) => {{
            let start = Instant::now();
            let r = $f(s);
            let seconds = start.elapsed().as_secs_f64();
            let (ok, error) = match &r {
                Ok(_) => (true, None),
                Err(e) => (false, Some(e.to_string())),
            };
            stages.push(StageStatus {
                stage: $name,
                ok,
                seconds,
                error,
            });
            match r {
                Ok(v) => Some(v),
                Err(e) => {
                    first_error.get_or_insert(e);
                    None
                }
            }
        }};
    }
    let design = stage!("design", cmd_design);
    let tune = stage!("tune", |s: &Session| {
        Ok::<_, Error>((tune_into(s, false, "tuning")?, tune_into(s, true, "tuning_fringes")?))
    });
    let dfg = stage!("dfg", cmd_dfg);
    let pairs = stage!("pairs", cmd_pairs);
    let metrics = stage!("metrics", cmd_metrics);

    let mut checks = Vec::new();
    let p = shg_power(2266.0, 2.95e-3, 0.4, 0.0)?;
    let rel = (p - 31.56e-6).abs() / 31.56e-6;
    checks.push(check(1, "SHG power bookkeeping", rel < 5e-3, format!("{:.3} uW ({:.3} % off)", p * 1e6, rel * 100.0)));

    match slab_check(&s.solver.settings) {
        Ok((fd, exact)) => checks.push(check(
            2,
            "slab mode oracle",
            (fd - exact).abs() < 1e-3,
            format!("FD {fd:.6} vs analytic {exact:.6}"),
        )),
        Err(e) => checks.push(check(2, "slab mode oracle", false, e.to_string())),
    }

    match &design {
        Some(d) => {
            let period = d.poling.period_um();
            checks.push(check(
                3,
                "poling period",
                period.is_some_and(|p| (3.5..=4.5).contains(&p)),
                period.map_or("no period".into(), |p| format!("{p:.4} um")),
            ));
            checks.push(check(
                4,
                "mode overlap",
                d.overlap_percent >= 85.0,
                format!("{:.2} %", d.overlap_percent),
            ));
            checks.push(check(
                5,
                "normalized SHG efficiency",
                (2500.0..=10000.0).contains(&d.eta_percent_per_w_cm2),
                format!("{:.0} %/W/cm^2", d.eta_percent_per_w_cm2),
            ));
        }
        None => {
            for (id, name) in [(3, "poling period"), (4, "mode overlap"), (5, "normalized SHG efficiency")] {
                checks.push(check(id, name, false, "design stage failed".into()));
            }
        }
    }

    match &tune {
        Some((plain, fringed)) => {
            let width_ok = match (plain.fwhm_nm, plain.analytic_fwhm_nm) {
                (Some(w), Some(a)) => (w - a).abs() / a < 0.05,
                _ => false,
            };
            let fsr_ok = match (fringed.measured_fsr_harmonic_nm, fringed.expected_fsr_harmonic_nm) {
                (Some(m), Some(e)) => (m - e).abs() / e < 0.05,
                _ => false,
            };
            checks.push(check(
                6,
                "tuning-curve shape",
                plain.peak_value == 1.0 && width_ok && fsr_ok,
                format!(
                    "peak {}, FWHM {} vs {} nm, FSR {} vs {} nm",
                    plain.peak_value,
                    fmt_opt(plain.fwhm_nm, 4),
                    fmt_opt(plain.analytic_fwhm_nm, 4),
                    fmt_opt(fringed.measured_fsr_harmonic_nm, 5),
                    fmt_opt(fringed.expected_fsr_harmonic_nm, 5)
                ),
            ));
        }
        None => checks.push(check(6, "tuning-curve shape", false, "tune stage failed".into())),
    }

    match &dfg {
        Some(d) => checks.push(check(
            7,
            "DFG bandwidth and symmetry",
            d.exchange_asymmetry <= 1e-12,
            format!(
                "bandwidth {:.2} THz ({}), reference > 4.5 THz; asymmetry {:.1e}",
                d.bandwidth.thz(),
                match d.bandwidth {
                    Bandwidth::Measured { .. } => "measured",
                    Bandwidth::AtLeast { .. } => "lower bound",
                },
                d.exchange_asymmetry
            ),
        )),
        None => checks.push(check(7, "DFG bandwidth and symmetry", false, "dfg stage failed".into())),
    }

    match &pairs {
        Some(r) => {
            let mc_ok = r.monte_carlo.as_ref().is_some_and(|m| m.worst_sigma() < 3.0);
            checks.push(check(
                8,
                "pair-statistics scaling",
                (r.coincidence_slope - 1.0).abs() <= 0.02
                    && (r.accidental_slope - 2.0).abs() <= 0.05
                    && r.darkless_car_deviation <= 1e-9
                    && mc_ok,
                format!(
                    "slopes {:.4}/{:.4}, |CAR*mu-1| {:.1e}, Monte-Carlo within {:.2} sigma",
                    r.coincidence_slope,
                    r.accidental_slope,
                    r.darkless_car_deviation,
                    r.monte_carlo.as_ref().map_or(f64::NAN, MonteCarloCheck::worst_sigma)
                ),
            ));
            let m = &r.matrix;
            let pairing = m
                .signal
                .iter()
                .position(|c| (c.center_nm - 1530.0).abs() < 1e-9)
                .map(|k| m.conjugate_idler_nm[k]);
            let pairing_ok = pairing.is_some_and(|nm| (nm - 1540.03).abs() < 0.01);
            checks.push(check(
                9,
                "channel-correlation matrix",
                r.off_diagonal_ratio < 0.01 && pairing_ok,
                format!("off/diag {:.2e}, 1530 nm -> {} nm", r.off_diagonal_ratio, fmt_opt(pairing, 3)),
            ));
        }
        None => {
            checks.push(check(8, "pair-statistics scaling", false, "pairs stage failed".into()));
            checks.push(check(9, "channel-correlation matrix", false, "pairs stage failed".into()));
        }
    }

    match &metrics {
        Some(m) => checks.push(check(
            10,
            "Q to propagation loss",
            m.bracket.iter().all(|(_, l)| (0.10..=0.25).contains(l)),
            format!(
                "{}; at n_g {:.3}: {:.3} dB/cm",
                m.bracket.iter().map(|(ng, l)| format!("n_g {ng}: {l:.3}")).collect::<Vec<_>>().join(", "),
                m.group_index,
                m.loss_db_per_cm
            ),
        )),
        None => checks.push(check(10, "Q to propagation loss", false, "metrics stage failed".into())),
    }

    let report = PaperReport {
        config_sha256: s.config.hash.clone(),
        passed: first_error.is_none() && checks.iter().all(|c| c.passed),
        stages,
        checks,
        mode_solve_seconds: s.mode_solve_time().as_secs_f64(),
        mode_solves: s.solver.solve_count(),
        cache_hits: s.solver.cache_hits(),
    };
    s.out.json("acceptance.json", &report)?;
    s.out.text("acceptance.txt", &(report.summary() + "\n"))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
