//! Counting statistics and channel correlations.

use qpmkit::config::ProjectConfig;
use qpmkit::materials::MaterialLibrary;
use qpmkit::pairs::{expected_counts, joint_channel_matrix, monte_carlo_counts, Arm, Channel, PairExperiment};
use qpmkit::qpm::{Bulk, ModeDispersion};

const C_NM_THZ: f64 = 299_792.458;

fn reference() -> PairExperiment {
    ProjectConfig::reference(std::path::Path::new(".")).unwrap().experiment()
}

/// Same experiment with the pump scaled to give `mu` pairs per gate.
fn at_mu(exp: &PairExperiment, mu: f64) -> PairExperiment {
    let per_watt = exp.with_pump_power(1.0).mean_pairs_per_gate().unwrap();
    exp.with_pump_power(mu / per_watt)
}

fn arms(exp: &mut PairExperiment, efficiency: f64, dark: f64) {
    for arm in [&mut exp.signal_arm, &mut exp.idler_arm] {
        *arm = Arm {
            collection_efficiency: 1.0,
            detector_efficiency: efficiency,
            dark_probability: dark,
        };
    }
}

#[test]
fn closed_form_counts() {
    let mut exp = at_mu(&reference(), 0.01);
    arms(&mut exp, 1.0, 0.0);
    let r = expected_counts(&exp).unwrap();
    let f = exp.gate_rate_hz;
    assert!((r.coincidences / f - 0.01).abs() < 1e-12);
    assert!((r.accidentals / f - 1e-4).abs() < 1e-14);
    assert!((r.car - 100.0).abs() < 1e-9);
}

#[test]
fn monte_carlo_matches_model_at_low_efficiency() {
    let mut exp = at_mu(&reference(), 0.0069);
    arms(&mut exp, 0.1, 0.0);
    let model = expected_counts(&exp).unwrap();
    let mc = monte_carlo_counts(&exp, 10_000_000, 7).unwrap();
    let e = mc.errors.unwrap();
    assert!((mc.car - model.car).abs() < 3.0 * e.car, "{} +- {} vs {}", mc.car, e.car, model.car);
    assert!((mc.coincidences - model.coincidences).abs() < 3.0 * e.coincidences);
    assert!((mc.accidentals - model.accidentals).abs() < 3.0 * e.accidentals);
}

#[test]
fn darks_only_is_uncorrelated() {
    let mut exp = reference().with_pump_power(0.0);
    arms(&mut exp, 0.1, 1e-2);
    let mc = monte_carlo_counts(&exp, 1_000_000, 3).unwrap();
    let e = mc.errors.unwrap();
    assert!((mc.raw_coincidences - mc.accidentals).abs() < 3.0 * e.accidentals * 2f64.sqrt());
    assert!(mc.coincidences.abs() < 3.0 * e.coincidences);
}

#[test]
fn fixed_seed_is_bit_identical() {
    let exp = reference();
    let a = monte_carlo_counts(&exp, 200_000, 11).unwrap();
    let b = monte_carlo_counts(&exp, 200_000, 11).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, monte_carlo_counts(&exp, 200_000, 12).unwrap());
}

#[test]
fn shared_grid_about_degeneracy_is_exchange_symmetric() {
    let config = ProjectConfig::reference(std::path::Path::new(".")).unwrap();
    let pump_um = 0.7675;
    let bulk = Bulk {
        model: MaterialLibrary::builtin().get("ln_congruent_e").unwrap().clone(),
        temperature_c: 34.5,
    };
    let mut device = config.device_with_reflectivity(0.0).unwrap();
    // first-order poling for degenerate down-conversion in bulk
    let (np, nd) = (bulk.n_eff(pump_um).unwrap(), bulk.n_eff(2.0 * pump_um).unwrap());
    device.poling_period_um = pump_um / (np - nd);

    let degenerate_thz = 0.5 * C_NM_THZ / (pump_um * 1e3);
    let grid: Vec<Channel> = [-0.4, 0.0, 0.4]
        .into_iter()
        .map(|d| Channel {
            center_nm: C_NM_THZ / (degenerate_thz + d),
            width_ghz: 100.0,
        })
        .collect();
    let m = joint_channel_matrix(&device, &bulk, pump_um, &grid, &grid, &reference()).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let (x, y) = (m.rates[a][b], m.rates[b][a]);
            assert!((x - y).abs() <= 1e-3 * x.max(y), "{:?}", m.rates);
            if a + b != 2 {
                assert_eq!(x, 0.0, "{:?}", m.rates);
            }
        }
        assert!(m.rates[a][2 - a] > 0.0);
    }
}

#[test]
fn dark_free_identities() {
    let mut base = reference();
    arms(&mut base, 0.3, 0.0);
    for mu in [1e-4, 3e-3, 0.02, 0.2] {
        let exp = at_mu(&base, mu);
        let r = expected_counts(&exp).unwrap();
        let mu = r.mean_pairs_per_gate;
        assert!((r.car * mu - 1.0).abs() < 1e-12);
        assert!((r.raw_coincidences / r.accidentals - (1.0 / mu + 1.0)).abs() < 1e-9 / mu);
        let doubled = expected_counts(&exp.with_pump_power(2.0 * exp.pump_power_w)).unwrap();
        assert!((doubled.car / r.car - 0.5).abs() < 1e-12);
    }
}

#[test]
fn monte_carlo_error_shrinks_as_inverse_root_gates() {
    let exp = at_mu(&reference(), 0.02);
    let model = expected_counts(&exp).unwrap();
    let small = monte_carlo_counts(&exp, 100_000, 1).unwrap().errors.unwrap();
    let large = monte_carlo_counts(&exp, 1_000_000, 1).unwrap().errors.unwrap();
    let ratio = small.coincidences / large.coincidences;
    assert!((ratio - 10f64.sqrt()).abs() < 0.15 * 10f64.sqrt(), "{ratio}");

    let seeds = 8;
    let mean = (0..seeds)
        .map(|s| monte_carlo_counts(&exp, 1_000_000, 100 + s).unwrap().coincidences)
        .sum::<f64>()
        / seeds as f64;
    assert!((mean - model.coincidences).abs() < 3.0 * large.coincidences / (seeds as f64).sqrt());
}
