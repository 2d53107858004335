//! Phase matching on solver-backed dispersion.

use qpmkit::config::ProjectConfig;
use qpmkit::mode_solver::{Grid, ModeSolver};
use qpmkit::materials::MaterialLibrary;
use qpmkit::qpm::{
    dfg_response, phase_matched_pumps, poling_period_for, spdc_pump_wavelength, Bulk, DispersionChain, ModeDispersion,
};

fn setup() -> (ProjectConfig, ModeSolver, Grid) {
    let config = ProjectConfig::reference(std::path::Path::new(".")).unwrap();
    let solver = ModeSolver::new(config.materials().unwrap(), config.solver_settings());
    let mut grid = config.grid();
    grid.dx_nm = 40.0;
    grid.dz_nm = 40.0;
    (config, solver, grid)
}

#[test]
fn phase_matched_pump_moves_red_with_temperature() {
    let (config, solver, grid) = setup();
    let sweep = config.sweeps.pump_wavelength.micrometres();
    let mut last = 0.0;
    for t in [20.0, 60.0, 100.0] {
        let chain = DispersionChain::from_solver(
            &solver,
            &config.cross_section(),
            &grid,
            t,
            config.solver.polarization,
            &config.dispersion_bands_um(),
            6,
        )
        .unwrap();
        let mut device = config.device_with_reflectivity(0.0).unwrap();
        device.temperature_c = t;
        let roots = phase_matched_pumps(&device, &chain, &sweep).unwrap();
        assert_eq!(roots.len(), 1, "T = {t}: {roots:?}");
        assert!(roots[0] > last, "T = {t}: {} after {last}", roots[0]);
        last = roots[0];
    }
}

#[test]
fn efficiency_scales_with_d33_squared() {
    let (config, solver, grid) = setup();
    let design = |d33: f64| {
        poling_period_for(
            &solver,
            &config.cross_section(),
            &grid,
            1.55,
            34.5,
            config.solver.polarization,
            d33,
            0.5,
        )
        .unwrap()
    };
    let (a, b) = (design(20.0), design(40.0));
    let ratio = b.efficiency.percent_per_w_cm2 / a.efficiency.percent_per_w_cm2;
    assert!((ratio - 4.0).abs() < 1e-9, "{ratio}");
    assert_eq!(a.period, b.period);
}

#[test]
fn chain_interpolates_solver_between_nodes() {
    let (config, solver, grid) = setup();
    let chain = DispersionChain::from_solver(
        &solver,
        &config.cross_section(),
        &grid,
        34.5,
        config.solver.polarization,
        &config.dispersion_bands_um(),
        8,
    )
    .unwrap();
    let direct = poling_period_for(
        &solver,
        &config.cross_section(),
        &grid,
        1.531,
        34.5,
        config.solver.polarization,
        27.0,
        0.5,
    )
    .unwrap();
    assert!((chain.n_eff(1.531).unwrap() - direct.n_eff_pump).abs() < 1e-6);
    assert!((chain.n_eff(0.7655).unwrap() - direct.n_eff_harmonic).abs() < 1e-6);
    assert!(chain.n_eff(1.9).is_err());
}

#[test]
fn degenerate_down_conversion_phase_matches_at_half_the_shg_pump() {
    let (config, _, _) = setup();
    let bulk = Bulk {
        model: MaterialLibrary::builtin().get("ln_congruent_e").unwrap().clone(),
        temperature_c: 34.5,
    };
    let mut device = config.device_with_reflectivity(0.0).unwrap();
    let (nh, nf) = (bulk.n_eff(0.775).unwrap(), bulk.n_eff(1.55).unwrap());
    device.poling_period_um = 1.55 / (2.0 * (nh - nf));
    let sweep = config.sweeps.pump_wavelength.micrometres();
    let pump_nm = spdc_pump_wavelength(&device, &bulk, &sweep).unwrap().unwrap();
    assert!((pump_nm - 775.0).abs() < 1e-3, "{pump_nm}");
    let at_degeneracy = dfg_response(&device, &bulk, pump_nm * 1e-3, 2.0 * pump_nm * 1e-3).unwrap();
    assert!((at_degeneracy - 1.0).abs() < 1e-9);
}
