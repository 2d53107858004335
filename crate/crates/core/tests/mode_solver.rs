//! Mode-solver invariants on the slab oracle and the reference ridge.

use qpmkit::materials::MaterialLibrary;
use qpmkit::mode_solver::slab::{slab_index_map, symmetric_slab_te};
use qpmkit::mode_solver::{
    mode_overlap, solve_modes, CrossSection, Grid, ModeRequest, ModeSearch, ModeSolution, ModeSolver, Polarization,
    SolverSettings,
};

fn slab_n_eff(dz_um: f64) -> f64 {
    let map = slab_index_map(2.14, 1.44, 0.5, 1.55, dz_um, 2.0);
    let (search, _) = solve_modes(&map, 1, &SolverSettings::default()).unwrap();
    search.fundamental().unwrap().n_eff
}

/// |n(h) − n(h/2)| for successive halvings must shrink by at least 3×.
fn assert_second_order(n: &[f64]) {
    let changes: Vec<f64> = n.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for c in changes.windows(2) {
        assert!(c[0] >= 3.0 * c[1], "n_eff {n:?}, changes {changes:?}");
    }
}

#[test]
fn slab_converges_at_second_order() {
    // steps divide the half-thickness, so every refinement puts the
    // interfaces at the same place relative to the nodes
    let n: Vec<f64> = [0.05, 0.025, 0.0125, 0.00625].into_iter().map(slab_n_eff).collect();
    assert_second_order(&n);
    let exact = symmetric_slab_te(2.14, 1.44, 0.5, 1.55, 0).unwrap();
    assert!((n[3] - exact).abs() < 5e-5);
}

#[test]
fn ridge_converges_under_refinement() {
    let n: Vec<f64> = [20.0, 10.0, 5.0]
        .into_iter()
        .map(|h| reference_solve(1.55, h, 1).fundamental().unwrap().n_eff)
        .collect();
    assert_second_order(&n);
}

fn reference_solve(wavelength_um: f64, step_nm: f64, n_modes: usize) -> ModeSearch {
    let solver = ModeSolver::new(MaterialLibrary::builtin(), SolverSettings::default());
    let cs = CrossSection::reference();
    let grid = Grid::uniform(step_nm, 1500.0);
    solver
        .solve(&ModeRequest {
            cross_section: &cs,
            grid: &grid,
            wavelength_um,
            temperature_c: 34.5,
            polarization: Polarization::Te,
            n_modes,
        })
        .unwrap()
}

#[test]
fn reference_fundamental_is_guided_and_confined() {
    let search = reference_solve(1.55, 40.0, 2);
    let modes = search.guided().expect("guided");
    let fund = &modes[0];
    assert!(fund.n_eff > 1.44 && fund.n_eff < 2.14, "{}", fund.n_eff);
    assert!(fund.residual < 1e-8);
    for m in modes {
        assert!(m.residual < 1e-8, "mode {} residual {}", m.mode_order, m.residual);
    }
    let (i, j) = fund.peak();
    let cs = CrossSection::reference();
    let (x, z) = (fund.x_um(i) * 1e3, fund.z_um(j) * 1e3);
    assert!(z >= 0.0 && z <= cs.film_thickness_nm, "peak at z = {z} nm");
    assert!(x.abs() <= 0.5 * cs.top_width_nm, "peak at x = {x} nm");
    // normalisation Σ E² dA = 1
    let norm: f64 = fund.field.iter().map(|e| e * e).sum::<f64>() * fund.cell_area_um2();
    assert!((norm - 1.0).abs() < 1e-9);
}

#[test]
fn effective_index_falls_with_wavelength() {
    let n: Vec<f64> = [1.50, 1.55, 1.60]
        .into_iter()
        .map(|l| reference_solve(l, 40.0, 1).fundamental().unwrap().n_eff)
        .collect();
    assert!(n[0] > n[1] && n[1] > n[2], "{n:?}");
}

fn shifted(m: &ModeSolution, di: usize) -> ModeSolution {
    let mut out = m.clone();
    out.field.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m.nx - di {
        for j in 0..m.nz {
            out.field[(i + di) * m.nz + j] = m.field[i * m.nz + j];
        }
    }
    out
}

#[test]
fn overlap_ignores_sign_scale_and_translation() {
    let fund = reference_solve(1.55, 40.0, 1).fundamental().unwrap().clone();
    let harm = reference_solve(0.775, 40.0, 1).fundamental().unwrap().clone();
    let base = mode_overlap(&harm, &fund).unwrap();
    assert!(base.normalized > 0.0 && base.normalized <= 1.0);

    let mut flipped = fund.clone();
    flipped.field.iter_mut().for_each(|v| *v *= -3.0);
    let o = mode_overlap(&harm, &flipped).unwrap();
    assert!((o.normalized - base.normalized).abs() < 1e-12);
    assert!((o.factor_per_m - base.factor_per_m).abs() < 1e-9 * base.factor_per_m);

    // both fields moved by the same number of cells; the tails are ~0 at the wall
    let o = mode_overlap(&shifted(&harm, 3), &shifted(&fund, 3)).unwrap();
    assert!((o.normalized - base.normalized).abs() < 1e-6);

    let self_overlap = mode_overlap(&fund, &fund).unwrap();
    assert!((self_overlap.normalized - 1.0).abs() < 1e-12);
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = reference_solve(1.55, 40.0, 1).fundamental().unwrap().clone();
    let mut b = a.clone();
    b.nx -= 1;
    b.field.truncate(b.nx * b.nz);
    assert!(mode_overlap(&a, &b).is_err());
}
